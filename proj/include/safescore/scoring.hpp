#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "safescore/errors.hpp"
#include "safescore/forest.hpp"
#include "safescore/io.hpp"
#include "safescore/schema.hpp"
#include "safescore/types.hpp"

namespace safescore {

// Safety score on [0, 100]: the model's no-crash probability scaled to
// points, before any calibration.
inline double raw_score(const Forest& model, const DrivingContext& ctx) {
    return model.predict_proba(ctx).p_safe * 100.0;
}

// Predicate over one context, resolved by feature name at evaluation time.
struct Condition {
    enum class Op { Eq, Ne, Ge, Gt, Le, Lt, In };

    Op op = Op::Eq;
    std::string feature;
    double value = 0.0;
    std::vector<double> values;  // for In

    bool matches(const DrivingContext& ctx, const FeatureSchema& schema) const {
        const double v = ctx.values.at(schema.index_of(feature));
        switch (op) {
            case Op::Eq: return v == value;
            case Op::Ne: return v != value;
            case Op::Ge: return v >= value;
            case Op::Gt: return v > value;
            case Op::Le: return v <= value;
            case Op::Lt: return v < value;
            case Op::In: return std::find(values.begin(), values.end(), v) != values.end();
        }
        return false;
    }

    static std::string_view op_name(Op op) {
        switch (op) {
            case Op::Eq: return "eq";
            case Op::Ne: return "ne";
            case Op::Ge: return "ge";
            case Op::Gt: return "gt";
            case Op::Le: return "le";
            case Op::Lt: return "lt";
            case Op::In: return "in";
        }
        return "?";
    }

    static Op parse_op(std::string_view s) {
        if (s == "eq") return Op::Eq;
        if (s == "ne") return Op::Ne;
        if (s == "ge") return Op::Ge;
        if (s == "gt") return Op::Gt;
        if (s == "le") return Op::Le;
        if (s == "lt") return Op::Lt;
        if (s == "in") return Op::In;
        throw ConfigError("unknown condition op: " + std::string(s));
    }

    json to_json() const {
        json j{{"feature", feature}, {"op", std::string(op_name(op))}};
        if (op == Op::In)
            j["values"] = values;
        else
            j["value"] = value;
        return j;
    }

    static Condition from_json(const json& j) {
        Condition c;
        c.feature = j.at("feature").get<std::string>();
        c.op = parse_op(j.at("op").get<std::string>());
        if (c.op == Op::In)
            c.values = j.at("values").get<std::vector<double>>();
        else
            c.value = j.at("value").get<double>();
        return c;
    }
};

// One calibration rule: a named risk factor with a penalty multiplier in
// (0, 1].  Rules sharing a `factor` are alternatives; the most severe
// matching alternative wins so a factor is never penalized twice.  A rule
// with `compound` set fires when at least `compound_min_factors` distinct
// other factors fired.
struct CalibrationRule {
    std::string rule_id;
    std::string factor;
    double alpha = 1.0;
    bool compound = false;
    std::vector<Condition> conditions;  // all must match

    json to_json() const {
        json jc = json::array();
        for (const auto& c : conditions) jc.push_back(c.to_json());
        json j{{"rule_id", rule_id}, {"factor", factor}, {"alpha", alpha}};
        if (compound)
            j["compound"] = true;
        else
            j["conditions"] = jc;
        return j;
    }

    static CalibrationRule from_json(const json& j) {
        CalibrationRule r;
        r.rule_id = j.at("rule_id").get<std::string>();
        r.factor = j.at("factor").get<std::string>();
        r.alpha = j.at("alpha").get<double>();
        r.compound = j.value("compound", false);
        if (j.contains("conditions"))
            for (const auto& jc : j.at("conditions")) r.conditions.push_back(Condition::from_json(jc));
        if (!r.compound && r.conditions.empty())
            throw ConfigError("rule " + r.rule_id + " has no conditions");
        return r;
    }
};

class CalibrationTable {
  public:
    CalibrationTable() = default;

    CalibrationTable(std::vector<CalibrationRule> rules, int compound_min_factors = 2)
        : rules_(std::move(rules)), compound_min_factors_(compound_min_factors) {
        validate();
    }

    const std::vector<CalibrationRule>& rules() const { return rules_; }
    int compound_min_factors() const { return compound_min_factors_; }

    void validate() const {
        if (compound_min_factors_ < 1) throw ConfigError("compound_min_factors must be >= 1");
        std::map<std::string, int> ids;
        for (const auto& r : rules_) {
            if (!(r.alpha > 0.0 && r.alpha <= 1.0))
                throw ConfigError("rule " + r.rule_id + ": alpha must be in (0,1]");
            if (r.rule_id.empty() || r.factor.empty())
                throw ConfigError("rules need non-empty rule_id and factor");
            if (++ids[r.rule_id] > 1) throw ConfigError("duplicate rule_id: " + r.rule_id);
        }
    }

    json to_json() const {
        json jr = json::array();
        for (const auto& r : rules_) jr.push_back(r.to_json());
        return json{{"compound_min_factors", compound_min_factors_}, {"rules", jr}};
    }

    static CalibrationTable from_json(const json& j) {
        std::vector<CalibrationRule> rules;
        for (const auto& jr : j.at("rules")) rules.push_back(CalibrationRule::from_json(jr));
        return CalibrationTable(std::move(rules), j.value("compound_min_factors", 2));
    }

    static CalibrationTable load(const std::filesystem::path& path) {
        try {
            return from_json(load_json_file(path));
        } catch (const json::exception& e) {
            throw ConfigError("bad calibration table " + path.string() + ": " + e.what());
        } catch (const DataError& e) {
            throw ConfigError(e.what());
        }
    }

    void save(const std::filesystem::path& path) const { save_json_file(path, to_json()); }

    // The shipped domain-knowledge penalties.
    static CalibrationTable defaults() {
        auto eq = [](std::string f, double v) {
            return Condition{Condition::Op::Eq, std::move(f), v, {}};
        };
        auto ge = [](std::string f, double v) {
            return Condition{Condition::Op::Ge, std::move(f), v, {}};
        };
        auto in = [](std::string f, std::vector<double> vs) {
            return Condition{Condition::Op::In, std::move(f), 0.0, std::move(vs)};
        };
        std::vector<CalibrationRule> r;
        // Road surface
        r.push_back({"road_ice", "road_surface", 0.60, false, {eq("ROAD_RISK", 3)}});
        r.push_back({"road_snow", "road_surface", 0.70, false, {eq("ROAD_RISK", 2)}});
        r.push_back({"road_wet", "road_surface", 0.85, false, {eq("ROAD_RISK", 1)}});
        // Weather
        r.push_back({"weather_snow", "weather", 0.80, false, {eq("WEATHER_SEVERITY", 2)}});
        r.push_back({"weather_rain", "weather", 0.90, false, {in("WEATHER", {2})}});
        r.push_back({"weather_fog_other", "weather", 0.85, false, {in("WEATHER", {5, 8})}});
        // Lighting
        r.push_back({"lighting_dark_unlit", "lighting", 0.75, false, {eq("LIGHT_RISK", 3)}});
        r.push_back({"lighting_dark_lit", "lighting", 0.85, false, {eq("LIGHT_RISK", 2)}});
        r.push_back({"lighting_dawn_dusk", "lighting", 0.92, false, {in("LGT_COND", {4, 5})}});
        // Speeding
        r.push_back({"speed_very_high", "speeding", 0.65, false, {ge("SPEED_RISK", 3)}});
        r.push_back({"speed_high", "speeding", 0.75, false, {ge("SPEED_RISK", 2)}});
        r.push_back({"speed_moderate_high", "speeding", 0.88, false, {ge("SPEED_RISK", 1)}});
        // VRU presence
        r.push_back({"vru_present", "vru", 0.88, false, {ge("total_vru", 1)}});
        // Night driving
        r.push_back({"night", "night", 0.90, false, {eq("IS_NIGHT", 1)}});
        // Multiple simultaneous adverse factors
        r.push_back({"compound_risk", "compound", 0.95, true, {}});
        return CalibrationTable(std::move(r), 2);
    }

  private:
    std::vector<CalibrationRule> rules_;
    int compound_min_factors_ = 2;
};

// Applies the penalty product to a raw score.  Per factor, the most severe
// (lowest alpha) matching rule fires; the compound rule fires on top when
// enough distinct factors fired.  The result is clamped to [0, 100] and the
// fired rules are reported sorted by rule_id, so rule order in the table
// never affects the outcome.
inline SafetyAssessment calibrate(double raw, const DrivingContext& ctx,
                                  const FeatureSchema& schema, const CalibrationTable& table) {
    std::map<std::string, const CalibrationRule*> fired_by_factor;
    const CalibrationRule* compound_rule = nullptr;
    for (const auto& rule : table.rules()) {
        if (rule.compound) {
            if (!compound_rule || rule.alpha < compound_rule->alpha) compound_rule = &rule;
            continue;
        }
        bool all = true;
        for (const auto& c : rule.conditions)
            if (!c.matches(ctx, schema)) {
                all = false;
                break;
            }
        if (!all) continue;
        auto& slot = fired_by_factor[rule.factor];
        if (!slot || rule.alpha < slot->alpha ||
            (rule.alpha == slot->alpha && rule.rule_id < slot->rule_id))
            slot = &rule;
    }

    std::vector<AppliedPenalty> penalties;
    double product = 1.0;
    for (const auto& [_, rule] : fired_by_factor) {
        penalties.push_back({rule->rule_id, rule->alpha});
        product *= rule->alpha;
    }
    if (compound_rule && static_cast<int>(fired_by_factor.size()) >= table.compound_min_factors()) {
        penalties.push_back({compound_rule->rule_id, compound_rule->alpha});
        product *= compound_rule->alpha;
    }
    std::sort(penalties.begin(), penalties.end(),
              [](const AppliedPenalty& a, const AppliedPenalty& b) { return a.rule_id < b.rule_id; });

    SafetyAssessment a;
    a.raw_score = raw;
    a.calibrated_score = std::clamp(raw * product, 0.0, 100.0);
    a.applied_penalties = std::move(penalties);
    return a;
}

// Score bands, worst to best.  `uppers[i]` is the inclusive upper edge of
// band i; a boundary score belongs to the lower (worse) band.
struct RiskBands {
    std::array<double, 5> uppers{20.0, 40.0, 60.0, 75.0, 100.0};

    void validate() const {
        if (uppers[4] != 100.0) throw ConfigError("top band must end at 100");
        for (int i = 0; i < 4; ++i)
            if (!(uppers[i] < uppers[i + 1]))
                throw ConfigError("band edges must be strictly increasing");
        if (!(uppers[0] > 0.0)) throw ConfigError("first band edge must be positive");
    }

    RiskLevel classify(double score) const {
        for (int i = 0; i < 4; ++i)
            if (score <= uppers[i]) return static_cast<RiskLevel>(i);
        return RiskLevel::Excellent;
    }

    json to_json() const {
        json j = json::object();
        for (std::size_t i = 0; i < kAllRiskLevels.size(); ++i)
            j[std::string(risk_level_name(kAllRiskLevels[i]))] = uppers[i];
        return j;
    }

    static RiskBands from_json(const json& j) {
        RiskBands b;
        for (std::size_t i = 0; i < kAllRiskLevels.size(); ++i)
            b.uppers[i] = j.at(std::string(risk_level_name(kAllRiskLevels[i]))).get<double>();
        b.validate();
        return b;
    }
};

inline RiskLevel classify_risk(double score, const RiskBands& bands = RiskBands{}) {
    return bands.classify(score);
}

// Full pipeline for one context: model probability, penalty product, band.
inline SafetyAssessment assess(const Forest& model, const DrivingContext& ctx,
                               const FeatureSchema& schema, const CalibrationTable& table,
                               const RiskBands& bands = RiskBands{}) {
    SafetyAssessment a = calibrate(raw_score(model, ctx), ctx, schema, table);
    a.risk_level = bands.classify(a.calibrated_score);
    return a;
}

}  // namespace safescore
