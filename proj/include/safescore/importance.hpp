#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "safescore/errors.hpp"
#include "safescore/forest.hpp"
#include "safescore/ingest.hpp"
#include "safescore/metrics.hpp"
#include "safescore/rng.hpp"
#include "safescore/scoring.hpp"
#include "safescore/shap.hpp"

namespace safescore {

struct ImportanceRanking {
    std::string method;
    std::vector<double> scores;  // one per feature
    std::vector<int> order;      // feature indices, highest score first

    static std::vector<int> order_of(const std::vector<double>& scores) {
        std::vector<int> order(scores.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
        });
        return order;
    }

    // 1-based position of each feature in `order`.
    std::vector<int> positions() const {
        std::vector<int> pos(scores.size(), 0);
        for (std::size_t p = 0; p < order.size(); ++p)
            pos[static_cast<std::size_t>(order[p])] = static_cast<int>(p) + 1;
        return pos;
    }
};

// Total Gini decrease contributed by each feature's splits, summed over all
// trees and normalized to sum to 1.  A forest with no splits (constant
// model) reports all zeros.
inline ImportanceRanking impurity_importance(const Forest& forest) {
    ImportanceRanking r;
    r.method = "impurity";
    r.scores.assign(forest.n_features(), 0.0);
    for (const Tree& tree : forest.trees()) {
        for (const TreeNode& node : tree.nodes) {
            if (node.is_leaf()) continue;
            const TreeNode& l = tree.nodes[static_cast<std::size_t>(node.left)];
            const TreeNode& rt = tree.nodes[static_cast<std::size_t>(node.right)];
            const auto count = [](const TreeNode& n) {
                return static_cast<double>(n.class_counts[0] + n.class_counts[1]);
            };
            const auto g = [](const TreeNode& n) {
                return detail::gini(n.class_counts[0], n.class_counts[1]);
            };
            const double decrease = count(node) * g(node) - count(l) * g(l) - count(rt) * g(rt);
            r.scores[static_cast<std::size_t>(node.feature)] += decrease;
        }
    }
    const double total = std::accumulate(r.scores.begin(), r.scores.end(), 0.0);
    if (total > 0.0)
        for (double& s : r.scores) s /= total;
    r.order = ImportanceRanking::order_of(r.scores);
    return r;
}

enum class PermutationMetric { Accuracy, Auc };

// Mean drop in the held-out metric when one feature's column is shuffled,
// averaged over `repeats` shuffles.  Each (feature, repeat) pair draws from
// its own seed stream, so evaluation order does not matter.
inline ImportanceRanking permutation_importance(const Forest& forest, const LabeledDataset& data,
                                                PermutationMetric metric, int repeats,
                                                std::uint64_t seed) {
    if (repeats < 1) throw ConfigError("permutation repeats must be >= 1");
    if (data.size() == 0) throw DataError("permutation importance needs data");
    const std::size_t n = data.size();
    const std::size_t m = forest.n_features();

    auto evaluate = [&](const std::vector<std::vector<double>>& rows) {
        std::vector<double> scores(n);
        for (std::size_t i = 0; i < n; ++i) scores[i] = forest.predict_proba_raw(rows[i]).p_crash;
        if (metric == PermutationMetric::Auc) return roc_auc(scores, data.labels);
        return confusion_at_threshold(scores, data.labels, 0.5).accuracy();
    };

    std::vector<std::vector<double>> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (data.contexts[i].values.size() != m) throw DataError("row does not match model width");
        rows[i] = data.contexts[i].values;
    }
    const double base = evaluate(rows);

    ImportanceRanking r;
    r.method = metric == PermutationMetric::Auc ? "permutation_auc" : "permutation_accuracy";
    r.scores.assign(m, 0.0);
    std::vector<std::size_t> perm(n);
    for (std::size_t f = 0; f < m; ++f) {
        double drop_sum = 0.0;
        for (int rep = 0; rep < repeats; ++rep) {
            Rng rng(mix_seed(seed, static_cast<std::uint64_t>(f), static_cast<std::uint64_t>(rep)));
            std::iota(perm.begin(), perm.end(), 0);
            rng.shuffle(perm);
            for (std::size_t i = 0; i < n; ++i) rows[i][f] = data.contexts[perm[i]].values[f];
            drop_sum += base - evaluate(rows);
            for (std::size_t i = 0; i < n; ++i) rows[i][f] = data.contexts[i].values[f];
        }
        r.scores[f] = drop_sum / repeats;
    }
    r.order = ImportanceRanking::order_of(r.scores);
    return r;
}

struct ConsensusEntry {
    int feature = 0;
    double mean_rank = 0.0;
    std::vector<int> per_method_rank;  // 1-based, aligned with `methods`
};

struct ConsensusRanking {
    std::vector<std::string> methods;
    std::vector<ConsensusEntry> entries;  // best (lowest mean rank) first
};

// Combines rankings by averaging each feature's 1-based rank position across
// methods; ties break toward the lower feature index.
inline ConsensusRanking consensus_rank(const std::vector<ImportanceRanking>& rankings) {
    if (rankings.empty()) throw ConfigError("consensus needs at least one ranking");
    const std::size_t m = rankings.front().scores.size();
    for (const auto& r : rankings)
        if (r.scores.size() != m) throw ConfigError("rankings cover different feature counts");

    ConsensusRanking out;
    std::vector<std::vector<int>> positions;
    for (const auto& r : rankings) {
        out.methods.push_back(r.method);
        positions.push_back(r.positions());
    }
    for (std::size_t f = 0; f < m; ++f) {
        ConsensusEntry e;
        e.feature = static_cast<int>(f);
        for (const auto& pos : positions) e.per_method_rank.push_back(pos[f]);
        e.mean_rank = std::accumulate(e.per_method_rank.begin(), e.per_method_rank.end(), 0.0) /
                      static_cast<double>(e.per_method_rank.size());
        out.entries.push_back(std::move(e));
    }
    std::stable_sort(out.entries.begin(), out.entries.end(),
                     [](const ConsensusEntry& a, const ConsensusEntry& b) {
                         if (a.mean_rank != b.mean_rank) return a.mean_rank < b.mean_rank;
                         return a.feature < b.feature;
                     });
    return out;
}

struct Recommendation {
    std::string factor;
    std::string change;
    double estimated_gain = 0.0;       // calibrated-score points recovered
    double shap_contribution = 0.0;    // current attribution of the driving feature

    json to_json() const {
        return json{{"factor", factor},
                    {"change", change},
                    {"estimated_gain", estimated_gain},
                    {"shap_contribution", shap_contribution}};
    }
};

// Counterfactual suggestions: each candidate edits the underlying raw fields,
// re-derives the feature vector and re-scores it, and is kept only when the
// calibrated score actually improves.  Sorted by gain, largest first.
inline std::vector<Recommendation> recommend(const Forest& model, const FeatureEngineer& engineer,
                                             const CalibrationTable& table, const RiskBands& bands,
                                             const DrivingContext& ctx,
                                             const ShapExplanation& explanation) {
    const FeatureSchema& schema = engineer.schema();
    const SafetyAssessment current = assess(model, ctx, schema, table, bands);
    const CrashRecord base = engineer.record_from_context(ctx);
    const CodeMap& codes = engineer.codes();

    struct Candidate {
        std::string factor;
        std::string change;
        CrashRecord record;
        std::string shap_feature;
    };
    std::vector<Candidate> candidates;

    const double over = ctx.values[schema.index_of("SPEED_OVER")];
    if (over >= codes.speed_moderate) {
        Candidate c{"speeding", "reduce travel speed to the posted limit", base, "SPEED_OVER"};
        c.record.set("TRAV_SP", base.get("VSPD_LIM"));
        candidates.push_back(std::move(c));
    }
    const int lgt = static_cast<int>(std::llround(ctx.values[schema.index_of("LGT_COND")]));
    if (lgt == codes.code_of(codes.lighting_names, "dark_unlit", "lighting")) {
        Candidate c{"lighting", "choose a lit route", base, "LGT_COND"};
        c.record.set("LGT_COND", codes.code_of(codes.lighting_names, "dark_lit", "lighting"));
        candidates.push_back(std::move(c));
    }

    std::vector<Recommendation> out;
    for (const auto& c : candidates) {
        const DrivingContext what_if = engineer.engineer(c.record);
        const SafetyAssessment next = assess(model, what_if, schema, table, bands);
        const double gain = next.calibrated_score - current.calibrated_score;
        if (gain <= 0.0) continue;
        Recommendation rec;
        rec.factor = c.factor;
        rec.change = c.change;
        rec.estimated_gain = gain;
        rec.shap_contribution = explanation.contributions[schema.index_of(c.shap_feature)];
        out.push_back(std::move(rec));
    }
    std::sort(out.begin(), out.end(), [](const Recommendation& a, const Recommendation& b) {
        if (a.estimated_gain != b.estimated_gain) return a.estimated_gain > b.estimated_gain;
        return a.factor < b.factor;
    });
    return out;
}

}  // namespace safescore
