#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <optional>
#include <set>
#include <vector>

#include "safescore/safescore.hpp"

using namespace safescore;
namespace fs = std::filesystem;

namespace {

// Reference split finder: explicit partition per candidate threshold instead
// of the incremental sweep.  Same impurity function, same tie rule.
struct OracleSplit {
    int feature = -1;
    double threshold = 0.0;
    double weighted_gini = 0.0;
};

std::optional<OracleSplit> oracle_best_split(const std::vector<std::vector<double>>& columns,
                                             const std::vector<std::int8_t>& labels,
                                             const std::vector<std::int64_t>& rows,
                                             const std::vector<int>& features,
                                             int min_samples_leaf) {
    std::optional<OracleSplit> best;
    const double n = static_cast<double>(rows.size());
    for (const int f : features) {
        std::vector<double> vals;
        for (const auto r : rows) vals.push_back(columns[(std::size_t)f][(std::size_t)r]);
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
            const double thr = vals[i] + (vals[i + 1] - vals[i]) / 2.0;
            std::int64_t l0 = 0, l1 = 0, r0 = 0, r1 = 0;
            for (const auto r : rows) {
                const bool left = columns[(std::size_t)f][(std::size_t)r] < thr;
                const bool crash = labels[(std::size_t)r] != 0;
                (left ? (crash ? l1 : l0) : (crash ? r1 : r0)) += 1;
            }
            const std::int64_t nl = l0 + l1, nr = r0 + r1;
            if (nl < min_samples_leaf || nr < min_samples_leaf) continue;
            const double g = (static_cast<double>(nl) * detail::gini(l0, l1) +
                              static_cast<double>(nr) * detail::gini(r0, r1)) /
                             n;
            if (!best || g < best->weighted_gini) best = OracleSplit{f, thr, g};
        }
    }
    return best;
}

LabeledDataset tiny_dataset(const std::vector<std::vector<double>>& rows,
                            const std::vector<int>& labels) {
    LabeledDataset d;
    d.schema_id = "tiny";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        DrivingContext ctx;
        ctx.schema_id = "tiny";
        ctx.values = rows[i];
        d.append("r" + std::to_string(i), std::move(ctx), label_from(labels[i]),
                 Provenance::RealCrash);
    }
    return d;
}

void walk_counts(const Tree& t, int i, std::int64_t& bad) {
    const TreeNode& n = t.nodes[(std::size_t)i];
    const std::int64_t total = n.class_counts[0] + n.class_counts[1];
    const double want = total > 0 ? (double)n.class_counts[1] / (double)total : 0.0;
    if (n.p_crash != want) ++bad;
    if (n.is_leaf()) return;
    const TreeNode& l = t.nodes[(std::size_t)n.left];
    const TreeNode& r = t.nodes[(std::size_t)n.right];
    if (n.class_counts[0] != l.class_counts[0] + r.class_counts[0]) ++bad;
    if (n.class_counts[1] != l.class_counts[1] + r.class_counts[1]) ++bad;
    walk_counts(t, n.left, bad);
    walk_counts(t, n.right, bad);
}

}  // namespace

TEST(Gini, HandValues) {
    EXPECT_EQ(detail::gini(5, 5), 0.5);
    EXPECT_EQ(detail::gini(10, 0), 0.0);
    EXPECT_EQ(detail::gini(0, 3), 0.0);
    EXPECT_EQ(detail::gini(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(detail::gini(2, 6), 0.375);
}

TEST(BestSplit, MatchesBruteForceOracle) {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 5 + rng.below(60);
        const std::size_t m = 1 + rng.below(5);
        std::vector<std::vector<double>> columns(m, std::vector<double>(n));
        std::vector<std::int8_t> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = static_cast<std::int8_t>(rng.below(2));
            // small discrete domains force duplicate values and gini ties
            for (std::size_t f = 0; f < m; ++f)
                columns[f][i] = static_cast<double>(rng.below(4));
        }
        std::vector<std::int64_t> rows(n);
        for (std::size_t i = 0; i < n; ++i) rows[i] = static_cast<std::int64_t>(i);
        std::vector<int> feats(m);
        for (std::size_t f = 0; f < m; ++f) feats[f] = static_cast<int>(f);
        const int min_leaf = 1 + static_cast<int>(rng.below(5));

        const auto got = detail::best_split(columns, labels, rows, feats, min_leaf);
        const auto want = oracle_best_split(columns, labels, rows, feats, min_leaf);
        ASSERT_EQ(got.has_value(), want.has_value()) << "trial " << trial;
        if (!got) continue;
        EXPECT_EQ(got->feature, want->feature) << "trial " << trial;
        EXPECT_EQ(got->threshold, want->threshold) << "trial " << trial;
        EXPECT_EQ(got->weighted_gini, want->weighted_gini) << "trial " << trial;
    }
}

TEST(BestSplit, TieBreaksToLowestThreshold) {
    // thresholds 0.5 and 2.5 both give weighted gini 1/3; 1.5 gives 1/2
    const std::vector<std::vector<double>> columns{{0, 1, 2, 3}};
    const std::vector<std::int8_t> labels{0, 1, 1, 0};
    const std::vector<std::int64_t> rows{0, 1, 2, 3};
    const auto s = detail::best_split(columns, labels, rows, std::vector<int>{0}, 1);
    ASSERT_TRUE(s.has_value());
    EXPECT_EQ(s->threshold, 0.5);
    EXPECT_DOUBLE_EQ(s->weighted_gini, 1.0 / 3.0);
}

TEST(BestSplit, TieBreaksToLowestFeature) {
    // feature 1 duplicates feature 0, so every split ties across features
    const std::vector<std::vector<double>> columns{{0, 1, 2, 3}, {0, 1, 2, 3}};
    const std::vector<std::int8_t> labels{0, 0, 1, 1};
    const std::vector<std::int64_t> rows{0, 1, 2, 3};
    const auto s =
        detail::best_split(columns, labels, rows, std::vector<int>{0, 1}, 1);
    ASSERT_TRUE(s.has_value());
    EXPECT_EQ(s->feature, 0);
    EXPECT_EQ(s->threshold, 1.5);
    EXPECT_EQ(s->weighted_gini, 0.0);
}

TEST(BestSplit, RespectsMinLeafAndConstantColumns) {
    const std::vector<std::vector<double>> columns{{0, 1, 2, 3}};
    const std::vector<std::int8_t> labels{0, 0, 1, 1};
    const std::vector<std::int64_t> rows{0, 1, 2, 3};
    const auto s = detail::best_split(columns, labels, rows, std::vector<int>{0}, 2);
    ASSERT_TRUE(s.has_value());
    EXPECT_EQ(s->threshold, 1.5);  // 0.5 and 2.5 would starve a child
    EXPECT_FALSE(detail::best_split(columns, labels, rows, std::vector<int>{0}, 3).has_value());
    const std::vector<std::vector<double>> constant{{7, 7, 7, 7}};
    EXPECT_FALSE(detail::best_split(constant, labels, rows, std::vector<int>{0}, 1).has_value());
}

TEST(Forest, LearnsXorViaZeroGainRoot) {
    // no single split improves impurity at the root, so a greedy learner that
    // refuses zero-gain splits would stay a stump
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 100; ++i)
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                rows.push_back({static_cast<double>(a), static_cast<double>(b)});
                labels.push_back(a ^ b);
            }
    const LabeledDataset d = tiny_dataset(rows, labels);
    ForestParams p;
    p.n_estimators = 5;
    p.min_samples_leaf = 1;
    p.features_per_split = 2;
    p.seed = 3;
    const Forest f = train_forest(d, p);
    for (std::size_t i = 0; i < d.size(); ++i)
        EXPECT_EQ(label_value(f.predict(d.contexts[i])), labels[i]) << i;
}

TEST(Forest, PureDataGivesSingleLeaf) {
    std::vector<std::vector<double>> rows(20, {1.0, 2.0});
    std::vector<int> labels(20, 1);
    ForestParams p;
    p.n_estimators = 3;
    p.seed = 1;
    const Forest f = train_forest(tiny_dataset(rows, labels), p);
    for (const Tree& t : f.trees()) {
        EXPECT_EQ(t.nodes.size(), 1u);
        EXPECT_EQ(t.nodes[0].p_crash, 1.0);
    }
}

TEST(Forest, DepthCapAndLeafSizesHold) {
    Rng rng(17);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 300; ++i) {
        rows.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
        labels.push_back(static_cast<int>(rng.below(2)));
    }
    ForestParams p;
    p.n_estimators = 10;
    p.max_depth = 4;
    p.min_samples_leaf = 7;
    p.seed = 5;
    const Forest f = train_forest(tiny_dataset(rows, labels), p);
    for (const Tree& t : f.trees()) {
        EXPECT_LE(t.max_depth(), 4);
        for (const TreeNode& n : t.nodes) {
            if (n.is_leaf()) {
                EXPECT_GE(n.class_counts[0] + n.class_counts[1], 7);
            }
        }
    }
}

TEST(Forest, EveryNodeKeepsConsistentCounts) {
    Rng rng(19);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 200; ++i) {
        rows.push_back({rng.uniform(), rng.uniform()});
        labels.push_back(rows.back()[0] > 0.5 ? 1 : static_cast<int>(rng.below(2)));
    }
    ForestParams p;
    p.n_estimators = 5;
    p.seed = 7;
    const Forest f = train_forest(tiny_dataset(rows, labels), p);
    for (const Tree& t : f.trees()) {
        EXPECT_EQ(t.nodes[0].class_counts[0] + t.nodes[0].class_counts[1], 200);
        std::int64_t bad = 0;
        walk_counts(t, 0, bad);
        EXPECT_EQ(bad, 0);
    }
}

TEST(Forest, DeterministicPerSeed) {
    Rng rng(23);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 80; ++i) {
        rows.push_back({rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()});
        labels.push_back(static_cast<int>(rng.below(2)));
    }
    const LabeledDataset d = tiny_dataset(rows, labels);
    ForestParams p;
    p.n_estimators = 3;
    p.seed = 11;
    const Forest a = train_forest(d, p);
    const Forest b = train_forest(d, p);
    EXPECT_EQ(a.to_json(), b.to_json());
    p.seed = 12;
    const Forest c = train_forest(d, p);
    EXPECT_NE(a.to_json(), c.to_json());
}

TEST(Forest, OobAccuracyTracksSeparability) {
    Rng rng(29);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 400; ++i) {
        const int y = static_cast<int>(rng.below(2));
        rows.push_back({y + rng.normal(0.0, 0.1), rng.uniform()});
        labels.push_back(y);
    }
    ForestParams p;
    p.n_estimators = 20;
    p.features_per_split = 2;
    p.seed = 13;
    const Forest f = train_forest(tiny_dataset(rows, labels), p);
    EXPECT_GT(f.meta().oob_accuracy, 0.9);
    EXPECT_LE(f.meta().oob_accuracy, 1.0);

    // a single row is always in its own bootstrap, so no vote is out of bag
    const Forest one = train_forest(tiny_dataset({{1.0}}, {1}), p);
    EXPECT_EQ(one.meta().oob_accuracy, -1.0);
}

TEST(Forest, SaveLoadRoundTrip) {
    const fs::path dir = fs::temp_directory_path() / "safescore_forest_rt";
    fs::create_directories(dir);
    Rng rng(37);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 60; ++i) {
        rows.push_back({rng.uniform(), rng.uniform()});
        labels.push_back(rows.back()[1] > 0.4 ? 1 : 0);
    }
    const LabeledDataset d = tiny_dataset(rows, labels);
    ForestParams p;
    p.n_estimators = 4;
    p.seed = 3;
    const Forest f = train_forest(d, p);
    f.save(dir / "model.json");
    const Forest back = Forest::load(dir / "model.json");
    EXPECT_EQ(back.to_json(), f.to_json());
    for (std::size_t i = 0; i < d.size(); ++i)
        EXPECT_EQ(back.predict_proba(d.contexts[i]).p_crash, f.predict_proba(d.contexts[i]).p_crash);

    json j = f.to_json();
    j["format_version"] = "999";
    EXPECT_THROW(Forest::from_json(j), ConfigError);
    fs::remove_all(dir);
}

TEST(Forest, RejectsMismatchedInputs) {
    const Forest f = train_forest(tiny_dataset({{0, 0}, {1, 1}, {0, 1}, {1, 0}}, {0, 1, 0, 1}),
                                  ForestParams{.n_estimators = 1, .min_samples_leaf = 1, .seed = 1});
    DrivingContext wrong_schema;
    wrong_schema.schema_id = "other";
    wrong_schema.values = {0.0, 0.0};
    EXPECT_THROW(f.predict_proba(wrong_schema), DataError);
    EXPECT_THROW(f.predict_proba_raw(std::vector<double>{1.0, 2.0, 3.0}), DataError);
}

TEST(Forest, AllowedFeaturesRestrictSplits) {
    Rng rng(41);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 120; ++i) {
        const int y = static_cast<int>(rng.below(2));
        // feature 2 is the only informative one
        rows.push_back({rng.uniform(), rng.uniform(), y + rng.normal(0.0, 0.05)});
        labels.push_back(y);
    }
    const LabeledDataset d = tiny_dataset(rows, labels);
    ForestParams p;
    p.n_estimators = 5;
    p.features_per_split = 2;
    p.seed = 2;
    const std::vector<int> allowed{0, 1};
    const Forest f = train_forest(d, p, &allowed);
    for (const Tree& t : f.trees())
        for (const TreeNode& n : t.nodes) {
            if (!n.is_leaf()) {
                EXPECT_TRUE(n.feature == 0 || n.feature == 1);
            }
        }

    const std::vector<int> empty;
    EXPECT_THROW(train_forest(d, p, &empty), ConfigError);
    const std::vector<int> out_of_range{0, 9};
    EXPECT_THROW(train_forest(d, p, &out_of_range), ConfigError);
}

TEST(ForestParams, ValidationAndDefaults) {
    ForestParams p;
    EXPECT_EQ(p.n_estimators, 100);
    EXPECT_EQ(p.min_samples_leaf, 5);
    EXPECT_EQ(p.resolve_features_per_split(64), 8);
    EXPECT_EQ(p.resolve_features_per_split(10), 3);
    EXPECT_EQ(p.resolve_features_per_split(1), 1);
    p.features_per_split = 100;
    EXPECT_EQ(p.resolve_features_per_split(10), 10);

    ForestParams bad;
    bad.n_estimators = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = ForestParams{};
    bad.max_depth = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = ForestParams{};
    bad.min_samples_leaf = 0;
    EXPECT_THROW(bad.validate(), ConfigError);

    const ForestParams rt = ForestParams::from_json(ForestParams{.seed = 77}.to_json());
    EXPECT_EQ(rt.seed, 77u);
}
