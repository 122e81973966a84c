#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "safescore/errors.hpp"
#include "safescore/forest.hpp"
#include "safescore/types.hpp"

namespace safescore {

// Additive attribution of one prediction: base_value is the expected crash
// probability over the background set, contributions sum (with the base) to
// the model output at the explained point.
struct ShapExplanation {
    double base_value = 0.0;
    std::vector<double> contributions;
    double model_output = 0.0;

    double reconstruction() const {
        double s = base_value;
        for (double c : contributions) s += c;
        return s;
    }
};

namespace detail {

struct PathElement {
    int feature = -1;
    double zero_fraction = 0.0;
    double one_fraction = 0.0;
    double pweight = 0.0;
};

inline void extend_path(PathElement* path, int depth, double zero_fraction, double one_fraction,
                        int feature) {
    path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
    for (int i = depth - 1; i >= 0; --i) {
        path[i + 1].pweight +=
            one_fraction * path[i].pweight * static_cast<double>(i + 1) / static_cast<double>(depth + 1);
        path[i].pweight = zero_fraction * path[i].pweight * static_cast<double>(depth - i) /
                          static_cast<double>(depth + 1);
    }
}

inline void unwind_path(PathElement* path, int depth, int index) {
    const double one_fraction = path[index].one_fraction;
    const double zero_fraction = path[index].zero_fraction;
    double next_one_portion = path[depth].pweight;
    if (one_fraction != 0.0) {
        for (int i = depth - 1; i >= 0; --i) {
            const double tmp = path[i].pweight;
            path[i].pweight = next_one_portion * static_cast<double>(depth + 1) /
                              (static_cast<double>(i + 1) * one_fraction);
            next_one_portion = tmp - path[i].pweight * zero_fraction *
                                         static_cast<double>(depth - i) / static_cast<double>(depth + 1);
        }
    } else {
        for (int i = depth - 1; i >= 0; --i)
            path[i].pweight = path[i].pweight * static_cast<double>(depth + 1) /
                              (zero_fraction * static_cast<double>(depth - i));
    }
    for (int i = index; i < depth; ++i) {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

inline double unwound_path_sum(const PathElement* path, int depth, int index) {
    const double one_fraction = path[index].one_fraction;
    const double zero_fraction = path[index].zero_fraction;
    double next_one_portion = path[depth].pweight;
    double total = 0.0;
    if (one_fraction != 0.0) {
        for (int i = depth - 1; i >= 0; --i) {
            const double tmp = next_one_portion / (static_cast<double>(i + 1) * one_fraction);
            total += tmp;
            next_one_portion = path[i].pweight - tmp * zero_fraction * static_cast<double>(depth - i);
        }
    } else {
        for (int i = depth - 1; i >= 0; --i)
            total += path[i].pweight / (zero_fraction * static_cast<double>(depth - i));
    }
    return total * static_cast<double>(depth + 1);
}

// Polynomial-time exact attribution for one tree.  `covers` carries how many
// background rows reach each node; branches no background row reaches carry
// zero measure and are skipped.
class TreeShapPass {
  public:
    TreeShapPass(const Tree& tree, std::span<const double> covers, std::span<const double> x,
                 std::vector<double>& phi)
        : tree_(tree), covers_(covers), x_(x), phi_(phi) {
        const int d = tree.max_depth();
        buf_.resize(static_cast<std::size_t>((d + 2) * (d + 3) / 2));
    }

    void run() { recurse(0, 0, buf_.data(), 1.0, 1.0, -1); }

  private:
    const Tree& tree_;
    std::span<const double> covers_;
    std::span<const double> x_;
    std::vector<double>& phi_;
    std::vector<PathElement> buf_;

    void recurse(int node_index, int depth, PathElement* parent_path, double parent_zero_fraction,
                 double parent_one_fraction, int parent_feature) {
        PathElement* path = parent_path + depth + 1;
        std::copy(parent_path, parent_path + depth + 1, path);
        extend_path(path, depth, parent_zero_fraction, parent_one_fraction, parent_feature);

        const TreeNode& node = tree_.nodes[static_cast<std::size_t>(node_index)];
        if (node.is_leaf()) {
            for (int i = 1; i <= depth; ++i) {
                const double w = unwound_path_sum(path, depth, i);
                phi_[static_cast<std::size_t>(path[i].feature)] +=
                    w * (path[i].one_fraction - path[i].zero_fraction) * node.p_crash;
            }
            return;
        }

        const bool go_left = x_[static_cast<std::size_t>(node.feature)] < node.threshold;
        const int hot = go_left ? node.left : node.right;
        const int cold = go_left ? node.right : node.left;
        const double w = covers_[static_cast<std::size_t>(node_index)];
        const double hot_zero_fraction = w > 0.0 ? covers_[static_cast<std::size_t>(hot)] / w : 0.0;
        const double cold_zero_fraction = w > 0.0 ? covers_[static_cast<std::size_t>(cold)] / w : 0.0;

        double incoming_zero_fraction = 1.0;
        double incoming_one_fraction = 1.0;
        int path_index = 0;
        while (path_index <= depth && path[path_index].feature != node.feature) ++path_index;
        if (path_index != depth + 1) {
            incoming_zero_fraction = path[path_index].zero_fraction;
            incoming_one_fraction = path[path_index].one_fraction;
            unwind_path(path, depth, path_index);
            depth -= 1;
        }

        // A branch whose element would carry zero weight both included and
        // excluded contributes nothing to any phi; descending into one would
        // also divide by zero inside the unwind.
        const double hot_zero = hot_zero_fraction * incoming_zero_fraction;
        if (hot_zero > 0.0 || incoming_one_fraction > 0.0)
            recurse(hot, depth + 1, path, hot_zero, incoming_one_fraction, node.feature);
        const double cold_zero = cold_zero_fraction * incoming_zero_fraction;
        if (cold_zero > 0.0)
            recurse(cold, depth + 1, path, cold_zero, 0.0, node.feature);
    }
};

}  // namespace detail

// Explains forest crash probabilities.  Covers are computed once by routing
// the supplied background rows through every tree; per-tree attributions are
// averaged, matching the forest's averaged prediction.
class TreeShapExplainer {
  public:
    TreeShapExplainer(const Forest& forest, const std::vector<DrivingContext>& background)
        : forest_(&forest) {
        if (background.empty()) throw ConfigError("SHAP background set must not be empty");
        covers_.resize(forest.trees().size());
        for (std::size_t t = 0; t < forest.trees().size(); ++t) {
            const Tree& tree = forest.trees()[t];
            covers_[t].assign(tree.nodes.size(), 0.0);
            for (const auto& bg : background) {
                if (bg.values.size() != forest.n_features())
                    throw DataError("background row does not match model width");
                int i = 0;
                for (;;) {
                    covers_[t][static_cast<std::size_t>(i)] += 1.0;
                    const TreeNode& n = tree.nodes[static_cast<std::size_t>(i)];
                    if (n.is_leaf()) break;
                    i = bg.values[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
                }
            }
        }
        // Expected value per tree: cover-weighted mean over leaves.
        base_values_.resize(forest.trees().size(), 0.0);
        for (std::size_t t = 0; t < forest.trees().size(); ++t) {
            const Tree& tree = forest.trees()[t];
            const double root = covers_[t][0];
            double acc = 0.0;
            for (std::size_t i = 0; i < tree.nodes.size(); ++i)
                if (tree.nodes[i].is_leaf()) acc += covers_[t][i] * tree.nodes[i].p_crash;
            base_values_[t] = root > 0.0 ? acc / root : 0.0;
        }
    }

    const std::vector<double>& tree_covers(std::size_t t) const { return covers_.at(t); }

    ShapExplanation explain(const DrivingContext& ctx) const {
        if (ctx.schema_id != forest_->schema_id())
            throw DataError("context schema does not match model schema");
        if (ctx.values.size() != forest_->n_features())
            throw DataError("context does not match model width");
        const std::size_t m = forest_->n_features();
        const std::size_t n_trees = forest_->trees().size();
        ShapExplanation out;
        out.contributions.assign(m, 0.0);
        std::vector<double> phi(m);
        double base = 0.0;
        for (std::size_t t = 0; t < n_trees; ++t) {
            std::fill(phi.begin(), phi.end(), 0.0);
            detail::TreeShapPass pass(forest_->trees()[t], covers_[t], ctx.values, phi);
            pass.run();
            for (std::size_t f = 0; f < m; ++f) out.contributions[f] += phi[f];
            base += base_values_[t];
        }
        const double inv = 1.0 / static_cast<double>(n_trees);
        for (double& c : out.contributions) c *= inv;
        out.base_value = base * inv;
        out.model_output = forest_->predict_proba_raw(ctx.values).p_crash;
        return out;
    }

  private:
    const Forest* forest_;
    std::vector<std::vector<double>> covers_;
    std::vector<double> base_values_;
};

inline ShapExplanation tree_shap(const Forest& forest, const DrivingContext& ctx,
                                 const std::vector<DrivingContext>& background) {
    return TreeShapExplainer(forest, background).explain(ctx);
}

}  // namespace safescore
