#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "safescore/errors.hpp"
#include "safescore/forest.hpp"
#include "safescore/ingest.hpp"
#include "safescore/io.hpp"
#include "safescore/kinematics.hpp"
#include "safescore/kmeans.hpp"
#include "safescore/metrics.hpp"
#include "safescore/scoring.hpp"

namespace safescore {

// ---------------------------------------------------------------------------
// Scenario grid: a full factorial over named factor levels, rendered onto a
// benign baseline record and re-engineered per cell.
// ---------------------------------------------------------------------------

struct GridFactor {
    std::string name;
    std::vector<std::string> levels;
};

struct ScenarioGridSpec {
    std::vector<GridFactor> factors;

    std::size_t size() const {
        std::size_t n = 1;
        for (const auto& f : factors) n *= f.levels.size();
        return n;
    }

    const GridFactor& factor(const std::string& name) const {
        for (const auto& f : factors)
            if (f.name == name) return f;
        throw ConfigError("grid has no factor named " + name);
    }

    // Row-major decode: the last factor varies fastest.
    std::vector<std::size_t> levels_of(std::size_t cell) const {
        std::vector<std::size_t> out(factors.size());
        for (std::size_t f = factors.size(); f-- > 0;) {
            const std::size_t n = factors[f].levels.size();
            out[f] = cell % n;
            cell /= n;
        }
        return out;
    }

    static ScenarioGridSpec defaults() {
        return {{
            {"time_of_day", {"day", "dusk", "night"}},
            {"weather", {"clear", "rain", "snow"}},
            {"lighting", {"daylight", "dark_lit", "dark_unlit", "dawn_dusk"}},
            {"speed", {"low", "moderate_high", "high", "very_high"}},
            {"road_condition", {"dry", "wet", "ice"}},
            {"vru_presence", {"absent", "present"}},
        }};
    }

    json to_json() const {
        json jf = json::array();
        for (const auto& f : factors) jf.push_back(json{{"name", f.name}, {"levels", f.levels}});
        return json{{"factors", jf}};
    }

    static ScenarioGridSpec from_json(const json& j) {
        ScenarioGridSpec s;
        for (const auto& jf : j.at("factors"))
            s.factors.push_back({jf.at("name").get<std::string>(),
                                 jf.at("levels").get<std::vector<std::string>>()});
        if (s.factors.empty()) throw ConfigError("grid spec needs at least one factor");
        return s;
    }
};

// Benign mid-day reference: clear, dry, daylight, at the limit, no VRU.
inline CrashRecord baseline_record() {
    CrashRecord r;
    r.casenum = "baseline";
    r.set("HOUR", 12);
    r.set("MINUTE", 0);
    r.set("MONTH", 6);
    r.set("DAY", 15);
    r.set("DAY_WEEK", 4);
    r.set("WEATHER", 1);
    r.set("LGT_COND", 1);
    r.set("TYP_INT", 1);
    r.set("REL_ROAD", 1);
    r.set("WRK_ZONE", 0);
    r.set("INT_HWY", 0);
    r.set("REL_JUNC", 1);
    r.set("TRAF_WAY", 1);
    r.set("NUM_LANES", 2);
    r.set("pedestrian_count", 0);
    r.set("cyclist_count", 0);
    r.set("max_vru_injury", 0);
    r.set("HARM_EV", 1);
    r.set("MAN_COLL", 0);
    r.set("ALCOHOL", 2);
    r.set("MAX_SEV", 0);
    r.set("NUM_INJ", 0);
    r.set("VE_TOTAL", 1);
    r.set("PEDS", 0);
    r.set("PERSONS", 1);
    r.set("TRAV_SP", 28);
    r.set("VSPD_LIM", 30);
    r.set("ROAD_COND", 1);
    r.set("HIT_RUN", 0);
    r.set("FIRE_EXP", 0);
    r.set("TOW_VEH", 0);
    r.set("DRUGS", 0);
    r.set("SCH_BUS", 0);
    r.set("BODY_TYP", 1);
    r.set("MOD_YEAR", 2018);
    r.set("DEFORMED", 0);
    r.set("STRATUM", 1);
    r.set("REGION", 2);
    r.set("URBANICITY", 1);
    r.set("PJ", 1);
    r.set("PSU_VAR", 1);
    r.set("PSU", 10);
    r.set("PSUSTRAT", 1);
    r.set("WEIGHT", 1);
    return r;
}

// Writes one factor level into the raw fields it governs.
inline void apply_level(CrashRecord& r, const std::string& factor, const std::string& level,
                        const CodeMap& codes) {
    auto code = [&](const std::map<std::string, int>& names, const std::string& name,
                    const char* what) { return codes.code_of(names, name, what); };
    if (factor == "time_of_day") {
        if (level == "day")
            r.set("HOUR", 12);
        else if (level == "dusk")
            r.set("HOUR", 19);
        else if (level == "night")
            r.set("HOUR", 2);
        else
            throw ConfigError("unknown time_of_day level: " + level);
    } else if (factor == "weather") {
        r.set("WEATHER", code(codes.weather_names, level, "weather"));
    } else if (factor == "lighting") {
        if (level == "dawn_dusk")
            r.set("LGT_COND", code(codes.lighting_names, "dawn", "lighting"));
        else
            r.set("LGT_COND", code(codes.lighting_names, level, "lighting"));
    } else if (factor == "speed") {
        const double lim = r.get("VSPD_LIM");
        if (level == "low")
            r.set("TRAV_SP", lim - 2);
        else if (level == "moderate_high")
            r.set("TRAV_SP", lim + 7);
        else if (level == "high")
            r.set("TRAV_SP", lim + 15);
        else if (level == "very_high")
            r.set("TRAV_SP", lim + 25);
        else
            throw ConfigError("unknown speed level: " + level);
    } else if (factor == "road_condition") {
        r.set("ROAD_COND", code(codes.road_names, level, "road"));
    } else if (factor == "vru_presence") {
        const double present = level == "present" ? 1.0 : 0.0;
        if (level != "present" && level != "absent")
            throw ConfigError("unknown vru_presence level: " + level);
        r.set("pedestrian_count", present);
        r.set("cyclist_count", 0);
        r.set("PEDS", present);
    } else if (factor == "day_of_week") {
        if (level == "weekday") {
            r.set("DAY_WEEK", 4);
        } else if (level == "weekend_night") {
            r.set("DAY_WEEK", 7);
            r.set("HOUR", 23);
        } else {
            throw ConfigError("unknown day_of_week level: " + level);
        }
    } else {
        throw ConfigError("unknown grid factor: " + factor);
    }
}

struct ScenarioGrid {
    ScenarioGridSpec spec;
    std::vector<DrivingContext> cells;  // row-major over spec levels
};

inline ScenarioGrid build_scenario_grid(const ScenarioGridSpec& spec,
                                        const FeatureEngineer& engineer) {
    ScenarioGrid grid;
    grid.spec = spec;
    const std::size_t total = spec.size();
    grid.cells.reserve(total);
    for (std::size_t cell = 0; cell < total; ++cell) {
        CrashRecord r = baseline_record();
        const auto levels = spec.levels_of(cell);
        for (std::size_t f = 0; f < spec.factors.size(); ++f)
            apply_level(r, spec.factors[f].name, spec.factors[f].levels[levels[f]], engineer.codes());
        r.casenum = "cell" + std::to_string(cell);
        grid.cells.push_back(engineer.engineer(r));
    }
    return grid;
}

// ---------------------------------------------------------------------------
// Distribution summary of a score sample.
// ---------------------------------------------------------------------------

struct DistributionStats {
    std::size_t n = 0;
    double mean = 0.0;
    double stddev = 0.0;
    double minimum = 0.0;
    double maximum = 0.0;
    double median = 0.0;
    double iqr = 0.0;
    double skewness = 0.0;
    double kurtosis_excess = 0.0;

    static double quantile(const std::vector<double>& sorted, double p) {
        if (sorted.empty()) return 0.0;
        const double pos = p * static_cast<double>(sorted.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
        const double frac = pos - static_cast<double>(lo);
        return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
    }

    static DistributionStats from(std::vector<double> values) {
        DistributionStats s;
        s.n = values.size();
        if (s.n == 0) return s;
        std::sort(values.begin(), values.end());
        s.minimum = values.front();
        s.maximum = values.back();
        s.median = quantile(values, 0.5);
        s.iqr = quantile(values, 0.75) - quantile(values, 0.25);
        s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
        double m2 = 0.0, m3 = 0.0, m4 = 0.0;
        for (double v : values) {
            const double d = v - s.mean;
            m2 += d * d;
            m3 += d * d * d;
            m4 += d * d * d * d;
        }
        m2 /= static_cast<double>(s.n);
        m3 /= static_cast<double>(s.n);
        m4 /= static_cast<double>(s.n);
        s.stddev = std::sqrt(m2);
        if (m2 > 0.0) {
            s.skewness = m3 / std::pow(m2, 1.5);
            s.kurtosis_excess = m4 / (m2 * m2) - 3.0;
        }
        return s;
    }

    json to_json() const {
        return json{{"n", n},
                    {"mean", mean},
                    {"stddev", stddev},
                    {"min", minimum},
                    {"max", maximum},
                    {"median", median},
                    {"iqr", iqr},
                    {"skewness", skewness},
                    {"kurtosis_excess", kurtosis_excess}};
    }
};

// ---------------------------------------------------------------------------
// Expected band per grid cell, from a documented additive points rule: each
// factor level carries a severity weight; the total maps to a band through
// fixed cut points.
// ---------------------------------------------------------------------------

struct ExpectedLevelRule {
    std::map<std::string, std::map<std::string, int>> points;
    // Minimum totals for critical, high, medium, low; below the last is excellent.
    std::array<int, 4> cutoffs{9, 6, 3, 1};

    int total(const ScenarioGridSpec& spec, const std::vector<std::size_t>& levels) const {
        int sum = 0;
        for (std::size_t f = 0; f < spec.factors.size(); ++f) {
            const auto& factor = spec.factors[f];
            const auto fit = points.find(factor.name);
            if (fit == points.end()) continue;
            const auto lit = fit->second.find(factor.levels[levels[f]]);
            if (lit != fit->second.end()) sum += lit->second;
        }
        return sum;
    }

    RiskLevel expected(const ScenarioGridSpec& spec, const std::vector<std::size_t>& levels) const {
        const int t = total(spec, levels);
        if (t >= cutoffs[0]) return RiskLevel::Critical;
        if (t >= cutoffs[1]) return RiskLevel::High;
        if (t >= cutoffs[2]) return RiskLevel::Medium;
        if (t >= cutoffs[3]) return RiskLevel::Low;
        return RiskLevel::Excellent;
    }

    // Point weights approximate how strongly each level depresses the
    // calibrated score, model effect and penalty multiplier combined, on a
    // shared integer scale; cutoffs mirror the band edges on that scale.
    static ExpectedLevelRule defaults() {
        ExpectedLevelRule r;
        r.points = {
            {"time_of_day", {{"day", 0}, {"dusk", 1}, {"night", 4}}},
            {"weather", {{"clear", 0}, {"rain", 6}, {"snow", 6}}},
            {"lighting", {{"daylight", 0}, {"dawn_dusk", 5}, {"dark_lit", 5}, {"dark_unlit", 6}}},
            {"speed", {{"low", 0}, {"moderate_high", 2}, {"high", 3}, {"very_high", 6}}},
            {"road_condition", {{"dry", 0}, {"wet", 5}, {"ice", 6}}},
            {"vru_presence", {{"absent", 0}, {"present", 1}}},
        };
        r.cutoffs = {9, 8, 6, 3};
        return r;
    }

    json to_json() const {
        return json{{"points", points}, {"cutoffs", cutoffs}};
    }

    static ExpectedLevelRule from_json(const json& j) {
        ExpectedLevelRule r;
        r.points = j.at("points").get<std::map<std::string, std::map<std::string, int>>>();
        const auto c = j.at("cutoffs").get<std::vector<int>>();
        if (c.size() != 4) throw ConfigError("expected-level rule needs four cutoffs");
        std::copy(c.begin(), c.end(), r.cutoffs.begin());
        return r;
    }
};

struct LevelMean {
    std::string factor;
    std::string level;
    std::size_t n = 0;
    double mean_calibrated = 0.0;
    double mean_p_crash = 0.0;
};

struct GridScoreReport {
    DistributionStats calibrated_stats;
    DistributionStats raw_stats;
    std::vector<SafetyAssessment> assessments;  // one per cell
    std::vector<double> p_crash;                // one per cell
    std::vector<LevelMean> level_means;
    OrdinalConfusion ordinal;
    std::vector<RiskLevel> expected_levels;
};

inline GridScoreReport score_grid(const ScenarioGrid& grid, const Forest& model,
                                  const FeatureSchema& schema, const CalibrationTable& table,
                                  const RiskBands& bands,
                                  const ExpectedLevelRule& rule = ExpectedLevelRule::defaults()) {
    GridScoreReport out;
    std::vector<double> calibrated, raw;
    std::vector<RiskLevel> predicted;
    for (const auto& ctx : grid.cells) {
        SafetyAssessment a = assess(model, ctx, schema, table, bands);
        calibrated.push_back(a.calibrated_score);
        raw.push_back(a.raw_score);
        out.p_crash.push_back(1.0 - a.raw_score / 100.0);
        predicted.push_back(a.risk_level);
        out.assessments.push_back(std::move(a));
    }
    for (std::size_t cell = 0; cell < grid.cells.size(); ++cell) {
        const auto levels = grid.spec.levels_of(cell);
        out.expected_levels.push_back(rule.expected(grid.spec, levels));
    }
    out.ordinal = ordinal_confusion(predicted, out.expected_levels);
    out.calibrated_stats = DistributionStats::from(calibrated);
    out.raw_stats = DistributionStats::from(raw);

    for (std::size_t f = 0; f < grid.spec.factors.size(); ++f) {
        const auto& factor = grid.spec.factors[f];
        for (std::size_t l = 0; l < factor.levels.size(); ++l) {
            LevelMean lm;
            lm.factor = factor.name;
            lm.level = factor.levels[l];
            double sum_cal = 0.0, sum_p = 0.0;
            for (std::size_t cell = 0; cell < grid.cells.size(); ++cell) {
                if (grid.spec.levels_of(cell)[f] != l) continue;
                ++lm.n;
                sum_cal += out.assessments[cell].calibrated_score;
                sum_p += out.p_crash[cell];
            }
            if (lm.n > 0) {
                lm.mean_calibrated = sum_cal / static_cast<double>(lm.n);
                lm.mean_p_crash = sum_p / static_cast<double>(lm.n);
            }
            out.level_means.push_back(std::move(lm));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// One-factor sensitivity around the benign baseline.
// ---------------------------------------------------------------------------

struct Transition {
    std::string factor;
    std::string from_level;
    std::string to_level;
};

inline std::vector<Transition> default_transitions() {
    return {
        {"lighting", "daylight", "dark_unlit"},
        {"speed", "low", "high"},
        {"time_of_day", "day", "night"},
        {"weather", "clear", "snow"},
        {"road_condition", "dry", "ice"},
        {"vru_presence", "absent", "present"},
        {"day_of_week", "weekday", "weekend_night"},
    };
}

struct SensitivityRow {
    Transition transition;
    double from_score = 0.0;
    double to_score = 0.0;
    double delta = 0.0;        // to - from, in calibrated points
    double effect_size = 0.0;  // |delta| / reference sigma
};

inline std::vector<SensitivityRow> sensitivity(const Forest& model, const FeatureEngineer& engineer,
                                               const CalibrationTable& table, const RiskBands& bands,
                                               const std::vector<Transition>& transitions,
                                               double reference_sigma) {
    std::vector<SensitivityRow> out;
    for (const auto& tr : transitions) {
        CrashRecord from_rec = baseline_record();
        apply_level(from_rec, tr.factor, tr.from_level, engineer.codes());
        CrashRecord to_rec = baseline_record();
        apply_level(to_rec, tr.factor, tr.to_level, engineer.codes());
        const SafetyAssessment a_from =
            assess(model, engineer.engineer(from_rec), engineer.schema(), table, bands);
        const SafetyAssessment a_to =
            assess(model, engineer.engineer(to_rec), engineer.schema(), table, bands);
        SensitivityRow row;
        row.transition = tr;
        row.from_score = a_from.calibrated_score;
        row.to_score = a_to.calibrated_score;
        row.delta = a_to.calibrated_score - a_from.calibrated_score;
        row.effect_size = reference_sigma > 0.0 ? std::abs(row.delta) / reference_sigma : 0.0;
        out.push_back(std::move(row));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Feature-group ablation: retrain without each group set and compare held-out
// ranking quality.
// ---------------------------------------------------------------------------

struct AblationRow {
    std::string name;
    std::vector<FeatureGroup> removed;
    std::size_t n_features = 0;
    double auc = 0.0;
    double delta_pct = 0.0;  // percent change vs the all-features baseline
};

struct AblationReport {
    double baseline_auc = 0.0;
    std::size_t baseline_features = 0;
    std::vector<AblationRow> rows;
};

inline AblationReport ablate(const LabeledDataset& data, const FeatureSchema& schema,
                             const std::vector<std::vector<FeatureGroup>>& configs,
                             const ForestParams& params, double test_fraction,
                             std::uint64_t split_seed) {
    const auto [train, test] = stratified_split(data, test_fraction, split_seed);
    const auto eval = [&](const Forest& model) {
        std::vector<double> scores(test.size());
        for (std::size_t i = 0; i < test.size(); ++i)
            scores[i] = model.predict_proba(test.contexts[i]).p_crash;
        return roc_auc(scores, test.labels);
    };

    AblationReport report;
    report.baseline_features = schema.size();
    report.baseline_auc = eval(train_forest(train, params));

    for (const auto& groups : configs) {
        AblationRow row;
        row.removed = groups;
        std::string name;
        std::vector<int> allowed;
        for (std::size_t i = 0; i < schema.size(); ++i) {
            const FeatureGroup g = schema.at(i).group;
            if (std::find(groups.begin(), groups.end(), g) == groups.end())
                allowed.push_back(static_cast<int>(i));
        }
        for (const auto& g : groups) {
            if (!name.empty()) name += "+";
            name += std::string(group_name(g));
        }
        row.name = "drop_" + name;
        if (allowed.empty()) throw ConfigError("ablation " + row.name + " removes every feature");
        row.n_features = allowed.size();
        row.auc = eval(train_forest(train, params, &allowed));
        row.delta_pct = report.baseline_auc != 0.0
                            ? 100.0 * (row.auc - report.baseline_auc) / report.baseline_auc
                            : 0.0;
        report.rows.push_back(std::move(row));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Risk multipliers over an exposure set containing both classes: the crash
// rate of rows matching a factor combination relative to the overall rate.
// ---------------------------------------------------------------------------

struct FactorCombo {
    std::string name;
    std::vector<Condition> conditions;  // all-of
};

inline std::vector<FactorCombo> default_factor_combos() {
    auto eq = [](std::string f, double v) { return Condition{Condition::Op::Eq, std::move(f), v, {}}; };
    auto ge = [](std::string f, double v) { return Condition{Condition::Op::Ge, std::move(f), v, {}}; };
    return {
        {"rush_hour", {eq("IS_RUSH_HOUR", 1)}},
        {"poor_lighting", {eq("POOR_LIGHTING", 1)}},
        {"weekend", {eq("IS_WEEKEND", 1)}},
        {"adverse_weather", {eq("ADVERSE_WEATHER", 1)}},
        {"night", {eq("IS_NIGHT", 1)}},
        {"vru_present", {ge("total_vru", 1)}},
        {"night_adverse_weather", {eq("IS_NIGHT", 1), eq("ADVERSE_WEATHER", 1)}},
        {"urban_rush_hour", {eq("URBANICITY", 1), eq("IS_RUSH_HOUR", 1)}},
        {"vru_urban_night", {ge("total_vru", 1), eq("URBANICITY", 1), eq("IS_NIGHT", 1)}},
        {"speed_poor_conditions", {ge("SPEED_RISK", 2), eq("ADVERSE_CONDITIONS", 1)}},
    };
}

struct MultiplierRow {
    std::string name;
    std::size_t support = 0;  // matching rows
    std::size_t crashes = 0;  // matching crash rows
    std::optional<double> multiplier;
};

struct MultiplierReport {
    double baseline_rate = 0.0;
    std::vector<MultiplierRow> rows;
    double multi_factor_share = 0.0;  // crash rows with >= 2 tracked basics
};

namespace detail {

inline int count_basic_factors(const DrivingContext& ctx, const FeatureSchema& schema) {
    int n = 0;
    n += ctx.values[schema.index_of("IS_RUSH_HOUR")] == 1.0 ? 1 : 0;
    n += ctx.values[schema.index_of("POOR_LIGHTING")] == 1.0 ? 1 : 0;
    n += ctx.values[schema.index_of("IS_WEEKEND")] == 1.0 ? 1 : 0;
    n += ctx.values[schema.index_of("ADVERSE_WEATHER")] == 1.0 ? 1 : 0;
    n += ctx.values[schema.index_of("IS_NIGHT")] == 1.0 ? 1 : 0;
    n += ctx.values[schema.index_of("total_vru")] >= 1.0 ? 1 : 0;
    return n;
}

}  // namespace detail

inline MultiplierReport risk_multipliers(const LabeledDataset& exposure,
                                         const FeatureSchema& schema,
                                         const std::vector<FactorCombo>& combos) {
    if (exposure.size() == 0) throw DataError("risk multipliers need a non-empty exposure set");
    MultiplierReport report;
    std::size_t total_crashes = 0;
    std::size_t crash_multi = 0;
    for (std::size_t i = 0; i < exposure.size(); ++i) {
        if (exposure.labels[i] != Label::Crash) continue;
        ++total_crashes;
        if (detail::count_basic_factors(exposure.contexts[i], schema) >= 2) ++crash_multi;
    }
    report.baseline_rate = static_cast<double>(total_crashes) / static_cast<double>(exposure.size());
    report.multi_factor_share =
        total_crashes > 0 ? static_cast<double>(crash_multi) / static_cast<double>(total_crashes) : 0.0;

    for (const auto& combo : combos) {
        MultiplierRow row;
        row.name = combo.name;
        for (std::size_t i = 0; i < exposure.size(); ++i) {
            bool all = true;
            for (const auto& c : combo.conditions)
                if (!c.matches(exposure.contexts[i], schema)) {
                    all = false;
                    break;
                }
            if (!all) continue;
            ++row.support;
            if (exposure.labels[i] == Label::Crash) ++row.crashes;
        }
        if (row.support > 0 && report.baseline_rate > 0.0) {
            const double rate = static_cast<double>(row.crashes) / static_cast<double>(row.support);
            row.multiplier = rate / report.baseline_rate;
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

// Share of rows showing each tracked basic factor, plus the share showing at
// least two at once.
struct PrevalenceReport {
    std::size_t n = 0;
    std::map<std::string, double> shares;
    double multi_factor_share = 0.0;
};

inline PrevalenceReport factor_prevalence(const std::vector<DrivingContext>& contexts,
                                          const FeatureSchema& schema) {
    PrevalenceReport report;
    report.n = contexts.size();
    if (contexts.empty()) return report;
    std::map<std::string, std::size_t> counts{{"rush_hour", 0},      {"poor_lighting", 0},
                                              {"weekend", 0},        {"adverse_weather", 0},
                                              {"night", 0},          {"vru_present", 0}};
    std::size_t multi = 0;
    for (const auto& ctx : contexts) {
        if (ctx.values[schema.index_of("IS_RUSH_HOUR")] == 1.0) ++counts["rush_hour"];
        if (ctx.values[schema.index_of("POOR_LIGHTING")] == 1.0) ++counts["poor_lighting"];
        if (ctx.values[schema.index_of("IS_WEEKEND")] == 1.0) ++counts["weekend"];
        if (ctx.values[schema.index_of("ADVERSE_WEATHER")] == 1.0) ++counts["adverse_weather"];
        if (ctx.values[schema.index_of("IS_NIGHT")] == 1.0) ++counts["night"];
        if (ctx.values[schema.index_of("total_vru")] >= 1.0) ++counts["vru_present"];
        if (detail::count_basic_factors(ctx, schema) >= 2) ++multi;
    }
    for (const auto& [k, v] : counts)
        report.shares[k] = static_cast<double>(v) / static_cast<double>(report.n);
    report.multi_factor_share = static_cast<double>(multi) / static_cast<double>(report.n);
    return report;
}

// ---------------------------------------------------------------------------
// Behavioral clustering on two composite axes.
// ---------------------------------------------------------------------------

struct CompositeWeights {
    double night = 1.0;
    double adverse_weather = 0.9;
    double poor_lighting = 0.8;

    json to_json() const {
        return json{{"night", night},
                    {"adverse_weather", adverse_weather},
                    {"poor_lighting", poor_lighting}};
    }

    static CompositeWeights from_json(const json& j) {
        CompositeWeights w;
        if (j.contains("night")) w.night = j.at("night").get<double>();
        if (j.contains("adverse_weather")) w.adverse_weather = j.at("adverse_weather").get<double>();
        if (j.contains("poor_lighting")) w.poor_lighting = j.at("poor_lighting").get<double>();
        return w;
    }
};

struct Archetype {
    double aggression = 0.0;
    double risk_taking = 0.0;
    std::string label;
};

inline std::vector<Archetype> default_archetypes() {
    return {
        {0.00, 0.00, "cautious"},
        {0.07, 2.19, "environmental_high"},
        {0.43, 1.00, "environmental_moderate"},
        {1.00, 0.00, "aggressive"},
    };
}

struct DriverProfile {
    std::string id;
    double aggression = 0.0;
    double risk_taking = 0.0;
    int cluster = 0;
};

struct ClusterReport {
    std::vector<DriverProfile> profiles;
    KMeansResult clustering;
    std::vector<std::string> cluster_labels;  // archetype per cluster index
};

inline std::array<double, 2> behavior_composites(const DrivingContext& ctx,
                                                 const FeatureSchema& schema,
                                                 const CompositeWeights& w) {
    const double speeding = ctx.values[schema.index_of("IS_SPEEDING")];
    const double alcohol = ctx.values[schema.index_of("ALCOHOL_INVOLVED")];
    const double hit_run = ctx.values[schema.index_of("HIT_RUN")];
    const double aggression = (speeding + alcohol + hit_run) / 3.0;
    const double risk = w.night * ctx.values[schema.index_of("IS_NIGHT")] +
                        w.adverse_weather * ctx.values[schema.index_of("ADVERSE_WEATHER")] +
                        w.poor_lighting * ctx.values[schema.index_of("POOR_LIGHTING")];
    return {aggression, risk};
}

inline ClusterReport cluster_drivers(const std::vector<DrivingContext>& contexts,
                                     const std::vector<std::string>& ids,
                                     const FeatureSchema& schema, int k, std::uint64_t seed,
                                     const CompositeWeights& weights = {},
                                     const std::vector<Archetype>& archetypes = default_archetypes()) {
    if (contexts.size() != ids.size()) throw DataError("contexts/ids length mismatch");
    std::vector<std::vector<double>> points;
    points.reserve(contexts.size());
    for (const auto& ctx : contexts) {
        const auto c = behavior_composites(ctx, schema, weights);
        points.push_back({c[0], c[1]});
    }
    ClusterReport report;
    report.clustering = kmeans(points, k, seed);
    for (std::size_t i = 0; i < contexts.size(); ++i) {
        DriverProfile p;
        p.id = ids[i];
        p.aggression = points[i][0];
        p.risk_taking = points[i][1];
        p.cluster = report.clustering.assignment[i];
        report.profiles.push_back(std::move(p));
    }
    for (const auto& center : report.clustering.centers) {
        double best = std::numeric_limits<double>::infinity();
        std::string label;
        for (const auto& a : archetypes) {
            const double da = center[0] - a.aggression;
            const double dr = center[1] - a.risk_taking;
            const double d = da * da + dr * dr;
            if (d < best) {
                best = d;
                label = a.label;
            }
        }
        report.cluster_labels.push_back(label);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Intervention impact: flag every context scoring at or below a threshold
// and credit the flagged share of total crash probability, discounted by the
// compliance rate.
// ---------------------------------------------------------------------------

struct ImpactRow {
    double threshold = 0.0;
    std::size_t flagged = 0;
    double flagged_share = 0.0;
    double expected_reduction_share = 0.0;
};

struct ImpactReport {
    double compliance = 0.5;
    std::vector<ImpactRow> rows;
};

inline ImpactReport simulate_impact(const std::vector<SafetyAssessment>& assessments,
                                    const std::vector<double>& crash_probs,
                                    const std::vector<double>& thresholds, double compliance) {
    if (assessments.size() != crash_probs.size())
        throw DataError("assessments/probabilities length mismatch");
    if (assessments.empty()) throw DataError("impact simulation needs assessments");
    if (!(compliance >= 0.0 && compliance <= 1.0))
        throw ConfigError("compliance must be in [0,1]");
    const double total_prob = std::accumulate(crash_probs.begin(), crash_probs.end(), 0.0);
    ImpactReport report;
    report.compliance = compliance;
    for (const double t : thresholds) {
        ImpactRow row;
        row.threshold = t;
        double flagged_prob = 0.0;
        for (std::size_t i = 0; i < assessments.size(); ++i) {
            if (assessments[i].calibrated_score > t) continue;
            ++row.flagged;
            flagged_prob += crash_probs[i];
        }
        row.flagged_share = static_cast<double>(row.flagged) / static_cast<double>(assessments.size());
        row.expected_reduction_share = total_prob > 0.0 ? compliance * flagged_prob / total_prob : 0.0;
        report.rows.push_back(row);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Trajectory-based validation: map measured kinematics onto the crash schema
// and check that predicted crash probability rises from safe scenarios
// through near misses to collisions.
// ---------------------------------------------------------------------------

inline constexpr double kMpsToMph = 2.236936;

inline CrashRecord kinematics_to_record(const KinematicFeatures& kf, std::string casenum = "scenario") {
    CrashRecord r = baseline_record();
    r.casenum = std::move(casenum);
    r.set("TRAV_SP", std::round(kf.max_speed * kMpsToMph));
    r.set("VSPD_LIM", 30);
    r.set("pedestrian_count", static_cast<double>(kf.n_pedestrians));
    r.set("cyclist_count", static_cast<double>(kf.n_cyclists));
    r.set("PEDS", static_cast<double>(kf.n_pedestrians + kf.n_cyclists));
    return r;
}

struct ScenarioResult {
    std::string scenario_id;
    ScenarioType type = ScenarioType::Safe;
    KinematicFeatures kinematics;
    double p_crash = 0.0;
    SafetyAssessment assessment;
};

struct ScenarioTypeStats {
    ScenarioType type = ScenarioType::Safe;
    std::size_t n = 0;
    double mean_p_crash = 0.0;
    double mean_calibrated = 0.0;
};

struct TrajectoryValidationReport {
    std::vector<ScenarioResult> scenarios;
    std::vector<ScenarioTypeStats> per_type;  // safe, near miss, collision order
    bool ordered = false;  // mean p_crash strictly increases across present types
};

inline TrajectoryValidationReport validate_trajectories(
    const std::vector<TrajectoryScenario>& scenarios, const Forest& model,
    const FeatureEngineer& engineer, const CalibrationTable& table, const RiskBands& bands,
    const KinematicThresholds& thresholds = {}) {
    TrajectoryValidationReport report;
    for (const auto& scen : scenarios) {
        ScenarioResult res;
        res.scenario_id = scen.scenario_id;
        res.kinematics = extract_kinematics(scen, thresholds);
        res.type = scenario_type(res.kinematics);
        const DrivingContext ctx =
            engineer.engineer(kinematics_to_record(res.kinematics, scen.scenario_id));
        res.assessment = assess(model, ctx, engineer.schema(), table, bands);
        res.p_crash = 1.0 - res.assessment.raw_score / 100.0;
        report.scenarios.push_back(std::move(res));
    }
    for (const ScenarioType type :
         {ScenarioType::Safe, ScenarioType::NearMiss, ScenarioType::Collision}) {
        ScenarioTypeStats st;
        st.type = type;
        double sum_p = 0.0, sum_c = 0.0;
        for (const auto& res : report.scenarios) {
            if (res.type != type) continue;
            ++st.n;
            sum_p += res.p_crash;
            sum_c += res.assessment.calibrated_score;
        }
        if (st.n > 0) {
            st.mean_p_crash = sum_p / static_cast<double>(st.n);
            st.mean_calibrated = sum_c / static_cast<double>(st.n);
        }
        report.per_type.push_back(st);
    }
    report.ordered = true;
    double prev = -1.0;
    for (const auto& st : report.per_type) {
        if (st.n == 0) continue;
        if (st.mean_p_crash <= prev) report.ordered = false;
        prev = st.mean_p_crash;
    }
    return report;
}

}  // namespace safescore
