#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "safescore/errors.hpp"
#include "safescore/ingest.hpp"
#include "safescore/io.hpp"
#include "safescore/rng.hpp"
#include "safescore/types.hpp"
#include "safescore/version.hpp"

namespace safescore {

struct ForestParams {
    int n_estimators = 100;
    int max_depth = -1;  // -1: grow until the other stopping rules hit
    int min_samples_leaf = 5;
    int features_per_split = 0;  // 0: max(1, floor(sqrt(n_features)))
    std::uint64_t seed = 0;

    void validate() const {
        if (n_estimators < 1) throw ConfigError("n_estimators must be >= 1");
        if (max_depth < -1 || max_depth == 0) throw ConfigError("max_depth must be -1 or >= 1");
        if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
        if (features_per_split < 0) throw ConfigError("features_per_split must be >= 0");
    }

    int resolve_features_per_split(int n_features) const {
        int k = features_per_split > 0
                    ? features_per_split
                    : std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(n_features)))));
        return std::min(k, n_features);
    }

    json to_json() const {
        return json{{"n_estimators", n_estimators},
                    {"max_depth", max_depth},
                    {"min_samples_leaf", min_samples_leaf},
                    {"features_per_split", features_per_split},
                    {"seed", seed}};
    }

    static ForestParams from_json(const json& j) {
        ForestParams p;
        if (j.contains("n_estimators")) p.n_estimators = j.at("n_estimators").get<int>();
        if (j.contains("max_depth")) p.max_depth = j.at("max_depth").get<int>();
        if (j.contains("min_samples_leaf")) p.min_samples_leaf = j.at("min_samples_leaf").get<int>();
        if (j.contains("features_per_split"))
            p.features_per_split = j.at("features_per_split").get<int>();
        if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
        p.validate();
        return p;
    }
};

// Nodes live in a flat array; node 0 is the root.  Internal nodes route
// x[feature] < threshold to `left`, otherwise to `right`.  Both internal and
// leaf nodes keep their training class counts, which downstream importance
// and explanation passes rely on.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::array<std::int64_t, 2> class_counts{0, 0};
    double p_crash = 0.0;

    bool is_leaf() const { return left < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict_p_crash(std::span<const double> x) const {
        int i = 0;
        while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
            const TreeNode& n = nodes[static_cast<std::size_t>(i)];
            i = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)].p_crash;
    }

    int max_depth() const { return depth_below(0); }

  private:
    int depth_below(int i) const {
        const TreeNode& n = nodes[static_cast<std::size_t>(i)];
        if (n.is_leaf()) return 0;
        return 1 + std::max(depth_below(n.left), depth_below(n.right));
    }
};

namespace detail {

struct SplitResult {
    int feature = -1;
    double threshold = 0.0;
    double weighted_gini = 0.0;
};

inline double gini(std::int64_t n0, std::int64_t n1) {
    const double n = static_cast<double>(n0 + n1);
    if (n == 0.0) return 0.0;
    const double p0 = static_cast<double>(n0) / n;
    const double p1 = static_cast<double>(n1) / n;
    return 1.0 - p0 * p0 - p1 * p1;
}

// Exhaustive scan over candidate features and midpoint thresholds between
// adjacent distinct values.  Minimizes child-size-weighted Gini; ties keep
// the first candidate in (feature ascending, threshold ascending) order.
// Splits that would leave a child below min_samples_leaf are skipped.
inline std::optional<SplitResult> best_split(const std::vector<std::vector<double>>& columns,
                                             const std::vector<std::int8_t>& labels,
                                             std::span<const std::int64_t> rows,
                                             std::span<const int> candidate_features,
                                             int min_samples_leaf) {
    const std::int64_t n = static_cast<std::int64_t>(rows.size());
    std::optional<SplitResult> best;
    std::vector<std::pair<double, std::int8_t>> vals;
    vals.reserve(rows.size());
    for (int f : candidate_features) {
        const auto& col = columns[static_cast<std::size_t>(f)];
        vals.clear();
        for (std::int64_t r : rows)
            vals.emplace_back(col[static_cast<std::size_t>(r)], labels[static_cast<std::size_t>(r)]);
        std::sort(vals.begin(), vals.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        std::int64_t total1 = 0;
        for (const auto& [_, y] : vals) total1 += y;
        std::int64_t l0 = 0, l1 = 0;
        for (std::int64_t i = 0; i + 1 < n; ++i) {
            if (vals[static_cast<std::size_t>(i)].second)
                ++l1;
            else
                ++l0;
            const double a = vals[static_cast<std::size_t>(i)].first;
            const double b = vals[static_cast<std::size_t>(i + 1)].first;
            if (!(b > a)) continue;
            const std::int64_t nl = i + 1;
            const std::int64_t nr = n - nl;
            if (nl < min_samples_leaf || nr < min_samples_leaf) continue;
            const double g = (static_cast<double>(nl) * gini(l0, l1) +
                              static_cast<double>(nr) * gini(n - nl - (total1 - l1), total1 - l1)) /
                             static_cast<double>(n);
            if (!best || g < best->weighted_gini)
                best = SplitResult{f, a + (b - a) / 2.0, g};
        }
    }
    return best;
}

class TreeBuilder {
  public:
    TreeBuilder(const std::vector<std::vector<double>>& columns,
                const std::vector<std::int8_t>& labels, const ForestParams& params,
                std::span<const int> allowed_features, Rng& feature_rng)
        : columns_(columns),
          labels_(labels),
          params_(params),
          allowed_(allowed_features),
          rng_(feature_rng),
          k_(params.resolve_features_per_split(static_cast<int>(allowed_features.size()))) {}

    Tree build(std::vector<std::int64_t> rows) {
        Tree t;
        grow(t, std::move(rows), 0);
        return t;
    }

  private:
    const std::vector<std::vector<double>>& columns_;
    const std::vector<std::int8_t>& labels_;
    const ForestParams& params_;
    std::span<const int> allowed_;
    Rng& rng_;
    int k_;

    int grow(Tree& t, std::vector<std::int64_t> rows, int depth) {
        const int node_id = static_cast<int>(t.nodes.size());
        t.nodes.emplace_back();
        std::int64_t n1 = 0;
        for (std::int64_t r : rows) n1 += labels_[static_cast<std::size_t>(r)];
        const std::int64_t n = static_cast<std::int64_t>(rows.size());
        t.nodes[static_cast<std::size_t>(node_id)].class_counts = {n - n1, n1};
        t.nodes[static_cast<std::size_t>(node_id)].p_crash =
            n > 0 ? static_cast<double>(n1) / static_cast<double>(n) : 0.0;

        const bool pure = n1 == 0 || n1 == n;
        const bool depth_capped = params_.max_depth >= 0 && depth >= params_.max_depth;
        const bool too_small = n < 2 * params_.min_samples_leaf;
        if (pure || depth_capped || too_small) return node_id;

        const auto candidates = pick_candidates();
        const auto split = best_split(columns_, labels_, rows, candidates, params_.min_samples_leaf);
        if (!split) return node_id;

        std::vector<std::int64_t> left_rows, right_rows;
        left_rows.reserve(rows.size());
        right_rows.reserve(rows.size());
        const auto& col = columns_[static_cast<std::size_t>(split->feature)];
        for (std::int64_t r : rows)
            (col[static_cast<std::size_t>(r)] < split->threshold ? left_rows : right_rows).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        t.nodes[static_cast<std::size_t>(node_id)].feature = split->feature;
        t.nodes[static_cast<std::size_t>(node_id)].threshold = split->threshold;
        const int left_id = grow(t, std::move(left_rows), depth + 1);
        t.nodes[static_cast<std::size_t>(node_id)].left = left_id;
        const int right_id = grow(t, std::move(right_rows), depth + 1);
        t.nodes[static_cast<std::size_t>(node_id)].right = right_id;
        return node_id;
    }

    std::vector<int> pick_candidates() {
        const int m = static_cast<int>(allowed_.size());
        if (k_ >= m) return std::vector<int>(allowed_.begin(), allowed_.end());
        std::vector<int> picks = rng_.sample_without_replacement(m, k_);
        for (int& p : picks) p = allowed_[static_cast<std::size_t>(p)];
        return picks;
    }
};

}  // namespace detail

struct TrainingMeta {
    std::uint64_t seed = 0;
    std::size_t n_train_rows = 0;
    double oob_accuracy = -1.0;  // -1 when no row was ever out of bag
};

class Forest {
  public:
    Forest() = default;

    Forest(std::string schema_id, std::size_t n_features, ForestParams params,
           std::vector<Tree> trees, TrainingMeta meta)
        : schema_id_(std::move(schema_id)),
          n_features_(n_features),
          params_(std::move(params)),
          trees_(std::move(trees)),
          meta_(meta) {}

    const std::string& schema_id() const { return schema_id_; }
    std::size_t n_features() const { return n_features_; }
    const ForestParams& params() const { return params_; }
    const std::vector<Tree>& trees() const { return trees_; }
    const TrainingMeta& meta() const { return meta_; }

    ClassProbabilities predict_proba_raw(std::span<const double> x) const {
        if (x.size() != n_features_)
            throw DataError("feature vector length " + std::to_string(x.size()) +
                            " does not match model width " + std::to_string(n_features_));
        double sum = 0.0;
        for (const Tree& t : trees_) sum += t.predict_p_crash(x);
        const double p = sum / static_cast<double>(trees_.size());
        return {1.0 - p, p};
    }

    ClassProbabilities predict_proba(const DrivingContext& ctx) const {
        if (ctx.schema_id != schema_id_)
            throw DataError("context schema '" + ctx.schema_id + "' does not match model schema '" +
                            schema_id_ + "'");
        return predict_proba_raw(ctx.values);
    }

    Label predict(const DrivingContext& ctx) const {
        return predict_proba(ctx).p_crash >= 0.5 ? Label::Crash : Label::Safe;
    }

    json to_json() const {
        json jtrees = json::array();
        for (const Tree& t : trees_) jtrees.push_back(tree_to_json(t, 0));
        return json{{"format_version", kModelFormatVersion},
                    {"schema_id", schema_id_},
                    {"n_features", n_features_},
                    {"params", params_.to_json()},
                    {"training", json{{"seed", meta_.seed},
                                      {"n_train_rows", meta_.n_train_rows},
                                      {"oob_accuracy", meta_.oob_accuracy}}},
                    {"trees", jtrees}};
    }

    static Forest from_json(const json& j) {
        if (!j.contains("format_version") || j.at("format_version").get<std::string>() != kModelFormatVersion)
            throw ConfigError("unsupported model format version");
        Forest f;
        f.schema_id_ = j.at("schema_id").get<std::string>();
        f.n_features_ = j.at("n_features").get<std::size_t>();
        f.params_ = ForestParams::from_json(j.at("params"));
        const auto& jt = j.at("training");
        f.meta_.seed = jt.at("seed").get<std::uint64_t>();
        f.meta_.n_train_rows = jt.at("n_train_rows").get<std::size_t>();
        f.meta_.oob_accuracy = jt.at("oob_accuracy").get<double>();
        for (const auto& t : j.at("trees")) {
            Tree tree;
            tree_from_json(t, tree, f.n_features_);
            f.trees_.push_back(std::move(tree));
        }
        if (f.trees_.empty()) throw ConfigError("model has no trees");
        return f;
    }

    void save(const std::filesystem::path& path) const { save_json_file(path, to_json()); }

    static Forest load(const std::filesystem::path& path) {
        try {
            return from_json(load_json_file(path));
        } catch (const json::exception& e) {
            throw ConfigError("bad model file " + path.string() + ": " + e.what());
        }
    }

  private:
    std::string schema_id_;
    std::size_t n_features_ = 0;
    ForestParams params_;
    std::vector<Tree> trees_;
    TrainingMeta meta_;

    json tree_to_json(const Tree& t, int i) const {
        const TreeNode& n = t.nodes[static_cast<std::size_t>(i)];
        json counts = json::array({n.class_counts[0], n.class_counts[1]});
        if (n.is_leaf()) return json{{"n", counts}, {"p", n.p_crash}};
        return json{{"f", n.feature},
                    {"t", n.threshold},
                    {"n", counts},
                    {"l", tree_to_json(t, n.left)},
                    {"r", tree_to_json(t, n.right)}};
    }

    static int tree_from_json(const json& j, Tree& t, std::size_t n_features) {
        const int id = static_cast<int>(t.nodes.size());
        t.nodes.emplace_back();
        TreeNode node;
        const auto& counts = j.at("n");
        node.class_counts = {counts.at(0).get<std::int64_t>(), counts.at(1).get<std::int64_t>()};
        const std::int64_t total = node.class_counts[0] + node.class_counts[1];
        if (j.contains("f")) {
            node.feature = j.at("f").get<int>();
            if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= n_features)
                throw ConfigError("model references feature index out of range");
            node.threshold = j.at("t").get<double>();
            node.p_crash = total > 0 ? static_cast<double>(node.class_counts[1]) /
                                           static_cast<double>(total)
                                     : 0.0;
            t.nodes[static_cast<std::size_t>(id)] = node;
            const int left = tree_from_json(j.at("l"), t, n_features);
            const int right = tree_from_json(j.at("r"), t, n_features);
            t.nodes[static_cast<std::size_t>(id)].left = left;
            t.nodes[static_cast<std::size_t>(id)].right = right;
        } else {
            node.p_crash = j.at("p").get<double>();
            t.nodes[static_cast<std::size_t>(id)] = node;
        }
        return id;
    }
};

// Bagged ensemble: each tree sees a bootstrap resample of the same size as
// the training set and a fresh feature-subsample stream.  Out-of-bag votes
// give a free accuracy estimate when any row stays out of bag.
inline Forest train_forest(const LabeledDataset& data, const ForestParams& params,
                           const std::vector<int>* allowed_features = nullptr) {
    params.validate();
    const std::size_t n = data.size();
    if (n == 0) throw DataError("cannot train on an empty dataset");
    const std::size_t m = data.contexts.front().values.size();

    std::vector<int> allowed;
    if (allowed_features) {
        allowed = *allowed_features;
        std::sort(allowed.begin(), allowed.end());
        for (int f : allowed)
            if (f < 0 || static_cast<std::size_t>(f) >= m)
                throw ConfigError("allowed feature index out of range");
        if (allowed.empty()) throw ConfigError("allowed feature set is empty");
    } else {
        allowed.resize(m);
        for (std::size_t i = 0; i < m; ++i) allowed[i] = static_cast<int>(i);
    }

    std::vector<std::vector<double>> columns(m, std::vector<double>(n));
    std::vector<std::int8_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (data.contexts[i].values.size() != m) throw DataError("ragged feature matrix");
        for (std::size_t f = 0; f < m; ++f) columns[f][i] = data.contexts[i].values[f];
        labels[i] = static_cast<std::int8_t>(label_value(data.labels[i]));
    }

    std::vector<Tree> trees;
    trees.reserve(static_cast<std::size_t>(params.n_estimators));
    std::vector<double> oob_sum(n, 0.0);
    std::vector<int> oob_votes(n, 0);
    std::vector<char> in_bag(n);
    for (int t = 0; t < params.n_estimators; ++t) {
        Rng boot_rng(mix_seed(params.seed, 0xB007u, static_cast<std::uint64_t>(t)));
        Rng feat_rng(mix_seed(params.seed, 0xFEA7u, static_cast<std::uint64_t>(t)));
        std::vector<std::int64_t> rows(n);
        std::fill(in_bag.begin(), in_bag.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            rows[i] = static_cast<std::int64_t>(boot_rng.below(n));
            in_bag[static_cast<std::size_t>(rows[i])] = 1;
        }
        detail::TreeBuilder builder(columns, labels, params, allowed, feat_rng);
        trees.push_back(builder.build(std::move(rows)));
        const Tree& tree = trees.back();
        for (std::size_t i = 0; i < n; ++i) {
            if (in_bag[i]) continue;
            oob_sum[i] += tree.predict_p_crash(data.contexts[i].values);
            ++oob_votes[i];
        }
    }

    std::size_t oob_n = 0, oob_correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (oob_votes[i] == 0) continue;
        ++oob_n;
        const int pred = oob_sum[i] / oob_votes[i] >= 0.5 ? 1 : 0;
        if (pred == label_value(data.labels[i])) ++oob_correct;
    }

    TrainingMeta meta;
    meta.seed = params.seed;
    meta.n_train_rows = n;
    meta.oob_accuracy =
        oob_n > 0 ? static_cast<double>(oob_correct) / static_cast<double>(oob_n) : -1.0;
    return Forest(data.schema_id, m, params, std::move(trees), meta);
}

}  // namespace safescore
