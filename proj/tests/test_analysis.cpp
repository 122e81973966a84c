#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "safescore/safescore.hpp"

using namespace safescore;

namespace {

Forest leaf_forest(double p_crash, const std::string& schema_id, int n_features) {
    json tree{{"n", json::array({100, 0})}, {"p", p_crash}};
    json j{{"format_version", "1"},
           {"schema_id", schema_id},
           {"n_features", n_features},
           {"params", ForestParams{}.to_json()},
           {"training", {{"seed", 0}, {"n_train_rows", 100}, {"oob_accuracy", -1.0}}},
           {"trees", json::array({tree})}};
    return Forest::from_json(j);
}

FeatureEngineer default_engineer() {
    return FeatureEngineer(default_schema(), CodeMap::defaults());
}

double ctx_value(const DrivingContext& ctx, const FeatureSchema& s, const std::string& name) {
    return ctx.values[s.index_of(name)];
}

void set_value(DrivingContext& ctx, const FeatureSchema& s, const std::string& name, double v) {
    ctx.values[s.index_of(name)] = v;
}

// A benign engineered context with every tracked flag off.
DrivingContext benign_context(const FeatureEngineer& eng) {
    return eng.engineer(baseline_record());
}

}  // namespace

TEST(GridSpec, DefaultsEnumerate864Cells) {
    const ScenarioGridSpec spec = ScenarioGridSpec::defaults();
    EXPECT_EQ(spec.size(), 864u);
    ASSERT_EQ(spec.factors.size(), 6u);
    EXPECT_EQ(spec.factor("speed").levels.size(), 4u);
    EXPECT_THROW(spec.factor("altitude"), ConfigError);

    // independent row-major enumeration, last factor fastest
    std::size_t cell = 0;
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b)
            for (std::size_t c = 0; c < 4; ++c)
                for (std::size_t d = 0; d < 4; ++d)
                    for (std::size_t e = 0; e < 3; ++e)
                        for (std::size_t f = 0; f < 2; ++f) {
                            const std::vector<std::size_t> want{a, b, c, d, e, f};
                            EXPECT_EQ(spec.levels_of(cell), want) << cell;
                            ++cell;
                        }
    EXPECT_EQ(cell, spec.size());

    const ScenarioGridSpec rt = ScenarioGridSpec::from_json(spec.to_json());
    EXPECT_EQ(rt.to_json(), spec.to_json());
    EXPECT_THROW(ScenarioGridSpec::from_json(json{{"factors", json::array()}}), ConfigError);
}

TEST(Grid, BaselineCellIsBenign) {
    const FeatureEngineer eng = default_engineer();
    const ScenarioGrid grid = build_scenario_grid(ScenarioGridSpec::defaults(), eng);
    ASSERT_EQ(grid.cells.size(), 864u);
    const FeatureSchema& s = eng.schema();
    const DrivingContext& c0 = grid.cells[0];  // day/clear/daylight/low/dry/absent
    EXPECT_EQ(ctx_value(c0, s, "IS_NIGHT"), 0.0);
    EXPECT_EQ(ctx_value(c0, s, "ADVERSE_WEATHER"), 0.0);
    EXPECT_EQ(ctx_value(c0, s, "POOR_LIGHTING"), 0.0);
    EXPECT_EQ(ctx_value(c0, s, "SPEED_OVER"), -2.0);
    EXPECT_EQ(ctx_value(c0, s, "IS_SPEEDING"), 0.0);
    EXPECT_EQ(ctx_value(c0, s, "ROAD_RISK"), 0.0);
    EXPECT_EQ(ctx_value(c0, s, "total_vru"), 0.0);
    EXPECT_EQ(ctx_value(c0, s, "ADVERSE_CONDITIONS"), 0.0);
}

TEST(Grid, WorstCellCarriesEveryHazard) {
    const FeatureEngineer eng = default_engineer();
    const ScenarioGridSpec spec = ScenarioGridSpec::defaults();
    const ScenarioGrid grid = build_scenario_grid(spec, eng);
    // levels (night, snow, dark_unlit, very_high, ice, present)
    const std::size_t cell = ((((2 * 3 + 2) * 4 + 2) * 4 + 3) * 3 + 2) * 2 + 1;
    const std::vector<std::size_t> want{2, 2, 2, 3, 2, 1};
    EXPECT_EQ(spec.levels_of(cell), want);
    const FeatureSchema& s = eng.schema();
    const DrivingContext& c = grid.cells[cell];
    EXPECT_EQ(ctx_value(c, s, "IS_NIGHT"), 1.0);
    EXPECT_EQ(ctx_value(c, s, "WEATHER_SEVERITY"), 2.0);
    EXPECT_EQ(ctx_value(c, s, "LIGHT_RISK"), 3.0);
    EXPECT_EQ(ctx_value(c, s, "SPEED_OVER"), 25.0);
    EXPECT_EQ(ctx_value(c, s, "SPEED_RISK"), 3.0);
    EXPECT_EQ(ctx_value(c, s, "ROAD_RISK"), 3.0);
    EXPECT_EQ(ctx_value(c, s, "total_vru"), 1.0);
    EXPECT_EQ(ctx_value(c, s, "NIGHT_AND_DARK"), 1.0);
    EXPECT_EQ(ctx_value(c, s, "ADVERSE_CONDITIONS"), 1.0);
}

TEST(ExpectedLevels, PointTotalsMapToBands) {
    const ScenarioGridSpec spec = ScenarioGridSpec::defaults();
    const ExpectedLevelRule rule = ExpectedLevelRule::defaults();

    auto expect_for = [&](std::vector<std::size_t> levels) {
        return rule.expected(spec, levels);
    };
    // day/clear/daylight/low/dry/absent: 0 points
    EXPECT_EQ(expect_for({0, 0, 0, 0, 0, 0}), RiskLevel::Excellent);
    // moderate_high speed alone: 2 points, still below the low cutoff
    EXPECT_EQ(expect_for({0, 0, 0, 1, 0, 0}), RiskLevel::Excellent);
    // high speed alone: 3 points
    EXPECT_EQ(expect_for({0, 0, 0, 2, 0, 0}), RiskLevel::Low);
    // rain alone: 6 points
    EXPECT_EQ(expect_for({0, 1, 0, 0, 0, 0}), RiskLevel::Medium);
    // night + moderate_high: 4+2 = 6
    EXPECT_EQ(expect_for({2, 0, 0, 1, 0, 0}), RiskLevel::Medium);
    // dusk + wet + vru: 1+5+1 = 7, still medium; dusk + dark_lit: 6
    EXPECT_EQ(expect_for({1, 0, 0, 0, 1, 1}), RiskLevel::Medium);
    EXPECT_EQ(expect_for({1, 0, 1, 0, 0, 0}), RiskLevel::Medium);
    // night + high + vru: 4+3+1 = 8 sits exactly on the high cutoff
    EXPECT_EQ(expect_for({2, 0, 0, 2, 0, 1}), RiskLevel::High);
    // night/snow/dark_unlit/very_high/ice/present: 4+6+6+6+6+1 = 29
    EXPECT_EQ(expect_for({2, 2, 2, 3, 2, 1}), RiskLevel::Critical);
    EXPECT_EQ(rule.total(spec, {2, 2, 2, 3, 2, 1}), 29);

    const ExpectedLevelRule rt = ExpectedLevelRule::from_json(rule.to_json());
    EXPECT_EQ(rt.to_json(), rule.to_json());
    json bad = rule.to_json();
    bad["cutoffs"] = {9, 6, 3};
    EXPECT_THROW(ExpectedLevelRule::from_json(bad), ConfigError);
}

TEST(DistributionStats, HandComputedMoments) {
    const auto s = DistributionStats::from({4, 1, 3, 2});
    EXPECT_EQ(s.n, 4u);
    EXPECT_DOUBLE_EQ(s.mean, 2.5);
    EXPECT_DOUBLE_EQ(s.minimum, 1.0);
    EXPECT_DOUBLE_EQ(s.maximum, 4.0);
    EXPECT_DOUBLE_EQ(s.median, 2.5);
    EXPECT_DOUBLE_EQ(s.iqr, 1.5);  // q75 3.25 - q25 1.75
    EXPECT_NEAR(s.stddev, std::sqrt(1.25), 1e-12);
    EXPECT_NEAR(s.skewness, 0.0, 1e-12);
    EXPECT_NEAR(s.kurtosis_excess, 2.5625 / 1.5625 - 3.0, 1e-12);

    const auto empty = DistributionStats::from({});
    EXPECT_EQ(empty.n, 0u);
    EXPECT_DOUBLE_EQ(empty.mean, 0.0);

    const auto one = DistributionStats::from({7.0});
    EXPECT_DOUBLE_EQ(one.median, 7.0);
    EXPECT_DOUBLE_EQ(one.stddev, 0.0);
    EXPECT_DOUBLE_EQ(one.skewness, 0.0);
}

TEST(DistributionStats, MatchesDirectComputation) {
    Rng rng(61);
    std::vector<double> v;
    for (int i = 0; i < 500; ++i) v.push_back(rng.normal(50.0, 12.0));
    const auto s = DistributionStats::from(v);

    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : v) {
        const double d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    EXPECT_NEAR(s.mean, mean, 1e-9);
    EXPECT_NEAR(s.stddev, std::sqrt(m2), 1e-9);
    EXPECT_NEAR(s.skewness, m3 / std::pow(m2, 1.5), 1e-9);
    EXPECT_NEAR(s.kurtosis_excess, m4 / (m2 * m2) - 3.0, 1e-9);

    std::sort(v.begin(), v.end());
    EXPECT_DOUBLE_EQ(s.minimum, v.front());
    EXPECT_DOUBLE_EQ(s.maximum, v.back());
    // linear-interpolation quantile at p*(n-1)
    const double pos = 0.5 * (n - 1.0);
    const std::size_t lo = static_cast<std::size_t>(pos);
    EXPECT_NEAR(s.median, v[lo] + (pos - static_cast<double>(lo)) * (v[lo + 1] - v[lo]), 1e-9);
}

TEST(ScoredGrid, HandCheckedTwoFactorGrid) {
    const FeatureEngineer eng = default_engineer();
    const ScenarioGridSpec spec{{{"speed", {"low", "high"}}, {"road_condition", {"dry", "ice"}}}};
    const ScenarioGrid grid = build_scenario_grid(spec, eng);
    ASSERT_EQ(grid.cells.size(), 4u);

    const Forest model = leaf_forest(0.2, eng.schema().id(), static_cast<int>(eng.schema().size()));
    const GridScoreReport r = score_grid(grid, model, eng.schema(), CalibrationTable::defaults(),
                                         RiskBands{}, ExpectedLevelRule::defaults());

    // cells: (low,dry) (low,ice) (high,dry) (high,ice); raw is always 80
    ASSERT_EQ(r.assessments.size(), 4u);
    for (double p : r.p_crash) EXPECT_NEAR(p, 0.2, 1e-12);
    EXPECT_NEAR(r.raw_stats.mean, 80.0, 1e-9);
    EXPECT_NEAR(r.assessments[0].calibrated_score, 80.0, 1e-9);
    EXPECT_NEAR(r.assessments[1].calibrated_score, 48.0, 1e-9);         // x0.60 ice
    EXPECT_NEAR(r.assessments[2].calibrated_score, 60.0, 1e-9);         // x0.75 speed
    EXPECT_NEAR(r.assessments[3].calibrated_score, 34.2, 1e-9);         // x0.60x0.75x0.95

    // expected points: 0 -> excellent, 6 -> medium, 3 -> low, 9 -> critical
    using L = RiskLevel;
    const std::vector<L> want{L::Excellent, L::Medium, L::Low, L::Critical};
    EXPECT_EQ(r.expected_levels, want);
    EXPECT_EQ(r.ordinal.total, 4);
    EXPECT_EQ(r.ordinal.counts[4][4], 1);  // (low,dry) lands excellent
    EXPECT_EQ(r.ordinal.counts[2][2], 1);  // (low,ice) lands medium
    EXPECT_EQ(r.ordinal.counts[3][2], 1);  // (high,dry) predicted medium, expected low
    EXPECT_EQ(r.ordinal.counts[0][1], 1);  // (high,ice) predicted high, expected critical
    EXPECT_NEAR(r.ordinal.accuracy(), 0.5, 1e-12);

    ASSERT_EQ(r.level_means.size(), 4u);
    EXPECT_EQ(r.level_means[0].factor, "speed");
    EXPECT_EQ(r.level_means[0].n, 2u);
    EXPECT_NEAR(r.level_means[0].mean_calibrated, 64.0, 1e-9);   // low: (80+48)/2
    EXPECT_NEAR(r.level_means[1].mean_calibrated, 47.1, 1e-9);   // high: (60+34.2)/2
    EXPECT_NEAR(r.level_means[2].mean_calibrated, 70.0, 1e-9);   // dry: (80+60)/2
    EXPECT_NEAR(r.level_means[3].mean_calibrated, 41.1, 1e-9);   // ice: (48+34.2)/2
}

TEST(Sensitivity, DeltasFollowPenaltyArithmetic) {
    const FeatureEngineer eng = default_engineer();
    const Forest model = leaf_forest(0.2, eng.schema().id(), static_cast<int>(eng.schema().size()));
    const auto rows = sensitivity(model, eng, CalibrationTable::defaults(), RiskBands{},
                                  default_transitions(), 10.0);
    ASSERT_EQ(rows.size(), 7u);
    auto find = [&](const std::string& factor) {
        for (const auto& r : rows)
            if (r.transition.factor == factor) return r;
        throw std::runtime_error("missing " + factor);
    };
    for (const auto& r : rows) EXPECT_NEAR(r.from_score, 80.0, 1e-9);

    EXPECT_NEAR(find("lighting").to_score, 60.0, 1e-9);        // x0.75 dark unlit
    EXPECT_NEAR(find("speed").to_score, 60.0, 1e-9);           // x0.75 at +15
    EXPECT_NEAR(find("time_of_day").to_score, 72.0, 1e-9);     // x0.90 night
    EXPECT_NEAR(find("weather").to_score, 64.0, 1e-9);         // x0.80 snow
    EXPECT_NEAR(find("road_condition").to_score, 48.0, 1e-9);  // x0.60 ice
    EXPECT_NEAR(find("vru_presence").to_score, 70.4, 1e-9);    // x0.88
    EXPECT_NEAR(find("day_of_week").to_score, 72.0, 1e-9);     // night rule only

    const auto& road = find("road_condition");
    EXPECT_NEAR(road.delta, -32.0, 1e-9);
    EXPECT_NEAR(road.effect_size, 3.2, 1e-9);
}

TEST(Ablation, UninformativeGroupCostsNothing) {
    using G = FeatureGroup;
    using K = FeatureKind;
    const FeatureSchema schema("ab", {
                                         {"sig_a", G::Temporal, K::Numeric, ""},
                                         {"sig_b", G::Temporal, K::Numeric, ""},
                                         {"noise_a", G::Environmental, K::Numeric, ""},
                                         {"noise_b", G::Environmental, K::Numeric, ""},
                                     });
    Rng rng(91);
    LabeledDataset d;
    d.schema_id = "ab";
    for (int i = 0; i < 400; ++i) {
        const int y = static_cast<int>(rng.below(2));
        DrivingContext ctx;
        ctx.schema_id = "ab";
        ctx.values = {y + rng.normal(0.0, 0.2), y + rng.normal(0.0, 0.4), rng.uniform(),
                      rng.uniform()};
        d.append("r" + std::to_string(i), std::move(ctx), label_from(y), Provenance::RealCrash);
    }
    ForestParams p;
    p.n_estimators = 15;
    p.seed = 5;
    const AblationReport rep = ablate(d, schema, {{G::Temporal}, {G::Environmental}}, p, 0.25, 9);
    EXPECT_EQ(rep.baseline_features, 4u);
    EXPECT_GT(rep.baseline_auc, 0.9);
    ASSERT_EQ(rep.rows.size(), 2u);
    EXPECT_EQ(rep.rows[0].name, "drop_Temporal");
    EXPECT_EQ(rep.rows[0].n_features, 2u);
    EXPECT_LT(rep.rows[0].auc, 0.7);
    EXPECT_LT(rep.rows[0].delta_pct, -20.0);
    EXPECT_EQ(rep.rows[1].name, "drop_Environmental");
    EXPECT_GT(rep.rows[1].auc, 0.9);
    EXPECT_NEAR(rep.rows[1].delta_pct,
                100.0 * (rep.rows[1].auc - rep.baseline_auc) / rep.baseline_auc, 1e-12);

    EXPECT_THROW(ablate(d, schema, {{G::Temporal, G::Environmental}}, p, 0.25, 9), ConfigError);
}

TEST(RiskMultipliers, HandCraftedExposure) {
    const FeatureEngineer eng = default_engineer();
    const FeatureSchema& s = eng.schema();
    LabeledDataset d;
    d.schema_id = s.id();
    auto add = [&](int night, int adverse, int vru, int crash) {
        DrivingContext ctx = benign_context(eng);
        set_value(ctx, s, "IS_NIGHT", night);
        set_value(ctx, s, "ADVERSE_WEATHER", adverse);
        set_value(ctx, s, "total_vru", vru);
        d.append("e" + std::to_string(d.size()), std::move(ctx), label_from(crash),
                 crash ? Provenance::RealCrash : Provenance::SyntheticSafe);
    };
    add(1, 1, 0, 1);  // night+adverse crash (two basics)
    add(1, 0, 0, 1);  // night crash
    add(0, 0, 0, 1);  // clean crash
    add(1, 1, 1, 0);  // night+adverse+vru safe
    add(0, 0, 0, 0);
    add(0, 0, 0, 0);

    auto eqc = [](std::string f, double v) { return Condition{Condition::Op::Eq, std::move(f), v, {}}; };
    auto gec = [](std::string f, double v) { return Condition{Condition::Op::Ge, std::move(f), v, {}}; };
    const std::vector<FactorCombo> combos{
        {"night", {eqc("IS_NIGHT", 1)}},
        {"night_adverse", {eqc("IS_NIGHT", 1), eqc("ADVERSE_WEATHER", 1)}},
        {"vru", {gec("total_vru", 1)}},
        {"unmatched", {gec("total_vru", 5)}},
    };
    const MultiplierReport r = risk_multipliers(d, s, combos);
    EXPECT_NEAR(r.baseline_rate, 0.5, 1e-12);
    EXPECT_NEAR(r.multi_factor_share, 1.0 / 3.0, 1e-12);  // one of three crashes has >= 2 basics
    ASSERT_EQ(r.rows.size(), 4u);
    EXPECT_EQ(r.rows[0].support, 3u);
    EXPECT_EQ(r.rows[0].crashes, 2u);
    EXPECT_NEAR(*r.rows[0].multiplier, (2.0 / 3.0) / 0.5, 1e-12);
    EXPECT_EQ(r.rows[1].support, 2u);
    EXPECT_NEAR(*r.rows[1].multiplier, 1.0, 1e-12);
    EXPECT_EQ(r.rows[2].support, 1u);
    EXPECT_EQ(r.rows[2].crashes, 0u);
    EXPECT_NEAR(*r.rows[2].multiplier, 0.0, 1e-12);
    EXPECT_FALSE(r.rows[3].multiplier.has_value());

    EXPECT_THROW(risk_multipliers(LabeledDataset{}, s, combos), DataError);
}

TEST(Prevalence, SharesAndMultiFactor) {
    const FeatureEngineer eng = default_engineer();
    const FeatureSchema& s = eng.schema();
    std::vector<DrivingContext> contexts;
    for (int i = 0; i < 4; ++i) contexts.push_back(benign_context(eng));
    set_value(contexts[0], s, "IS_NIGHT", 1);
    set_value(contexts[0], s, "POOR_LIGHTING", 1);
    set_value(contexts[1], s, "IS_NIGHT", 1);
    set_value(contexts[2], s, "total_vru", 2);

    const PrevalenceReport r = factor_prevalence(contexts, s);
    EXPECT_EQ(r.n, 4u);
    EXPECT_NEAR(r.shares.at("night"), 0.5, 1e-12);
    EXPECT_NEAR(r.shares.at("poor_lighting"), 0.25, 1e-12);
    EXPECT_NEAR(r.shares.at("vru_present"), 0.25, 1e-12);
    EXPECT_NEAR(r.shares.at("adverse_weather"), 0.0, 1e-12);
    EXPECT_NEAR(r.multi_factor_share, 0.25, 1e-12);

    EXPECT_EQ(factor_prevalence({}, s).n, 0u);
}

TEST(Clustering, CompositesAndArchetypeRecovery) {
    const FeatureEngineer eng = default_engineer();
    const FeatureSchema& s = eng.schema();

    DrivingContext aggressive = benign_context(eng);
    set_value(aggressive, s, "IS_SPEEDING", 1);
    set_value(aggressive, s, "ALCOHOL_INVOLVED", 1);
    set_value(aggressive, s, "HIT_RUN", 1);
    DrivingContext environmental = benign_context(eng);
    set_value(environmental, s, "IS_NIGHT", 1);
    set_value(environmental, s, "ADVERSE_WEATHER", 1);
    set_value(environmental, s, "POOR_LIGHTING", 1);

    const auto c_agg = behavior_composites(aggressive, s, CompositeWeights{});
    EXPECT_NEAR(c_agg[0], 1.0, 1e-12);
    EXPECT_NEAR(c_agg[1], 0.0, 1e-12);
    const auto c_env = behavior_composites(environmental, s, CompositeWeights{});
    EXPECT_NEAR(c_env[0], 0.0, 1e-12);
    EXPECT_NEAR(c_env[1], 2.7, 1e-12);  // 1.0 + 0.9 + 0.8

    std::vector<DrivingContext> contexts;
    std::vector<std::string> ids;
    for (int i = 0; i < 6; ++i) {
        contexts.push_back(benign_context(eng));
        contexts.push_back(aggressive);
        contexts.push_back(environmental);
        ids.push_back("c" + std::to_string(i));
        ids.push_back("a" + std::to_string(i));
        ids.push_back("e" + std::to_string(i));
    }
    const ClusterReport r = cluster_drivers(contexts, ids, s, 3, 17);
    ASSERT_EQ(r.profiles.size(), 18u);
    ASSERT_EQ(r.cluster_labels.size(), 3u);
    // identical points always share a cluster, and the three blobs separate
    std::set<int> seen;
    for (std::size_t i = 0; i < r.profiles.size(); i += 3) {
        EXPECT_EQ(r.profiles[i].cluster, r.profiles[0].cluster);
        EXPECT_EQ(r.profiles[i + 1].cluster, r.profiles[1].cluster);
        EXPECT_EQ(r.profiles[i + 2].cluster, r.profiles[2].cluster);
    }
    seen = {r.profiles[0].cluster, r.profiles[1].cluster, r.profiles[2].cluster};
    EXPECT_EQ(seen.size(), 3u);
    EXPECT_EQ(r.cluster_labels[static_cast<std::size_t>(r.profiles[0].cluster)], "cautious");
    EXPECT_EQ(r.cluster_labels[static_cast<std::size_t>(r.profiles[1].cluster)], "aggressive");
    EXPECT_EQ(r.cluster_labels[static_cast<std::size_t>(r.profiles[2].cluster)],
              "environmental_high");

    EXPECT_THROW(cluster_drivers(contexts, {"one"}, s, 3, 17), DataError);
}

TEST(Impact, FlaggedShareArithmetic) {
    std::vector<SafetyAssessment> assessments(3);
    assessments[0].calibrated_score = 20.0;
    assessments[1].calibrated_score = 30.0;
    assessments[2].calibrated_score = 80.0;
    const std::vector<double> probs{0.5, 0.3, 0.2};

    const ImpactReport r = simulate_impact(assessments, probs, {20.0, 40.0}, 0.5);
    ASSERT_EQ(r.rows.size(), 2u);
    EXPECT_EQ(r.rows[0].flagged, 1u);  // boundary score counts as flagged
    EXPECT_NEAR(r.rows[0].flagged_share, 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(r.rows[0].expected_reduction_share, 0.5 * 0.5, 1e-12);
    EXPECT_EQ(r.rows[1].flagged, 2u);
    EXPECT_NEAR(r.rows[1].expected_reduction_share, 0.5 * 0.8, 1e-12);

    EXPECT_THROW(simulate_impact(assessments, {0.1}, {20.0}, 0.5), DataError);
    EXPECT_THROW(simulate_impact({}, {}, {20.0}, 0.5), DataError);
    EXPECT_THROW(simulate_impact(assessments, probs, {20.0}, 1.5), ConfigError);
}

TEST(Kinematics, SpeedMapsToMilesPerHour) {
    KinematicFeatures kf;
    kf.max_speed = 13.4112;  // 30 mph in m/s
    kf.n_pedestrians = 1;
    kf.n_cyclists = 1;
    const CrashRecord r = kinematics_to_record(kf, "sc1");
    EXPECT_EQ(r.casenum, "sc1");
    EXPECT_DOUBLE_EQ(r.get("TRAV_SP"), 30.0);
    EXPECT_DOUBLE_EQ(r.get("VSPD_LIM"), 30.0);
    EXPECT_DOUBLE_EQ(r.get("pedestrian_count"), 1.0);
    EXPECT_DOUBLE_EQ(r.get("cyclist_count"), 1.0);
    EXPECT_DOUBLE_EQ(r.get("PEDS"), 2.0);
}
