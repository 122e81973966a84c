#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "safescore/errors.hpp"
#include "safescore/io.hpp"
#include "safescore/schema.hpp"

namespace safescore {

// Class 0 is the synthetic no-crash class; class 1 is an observed crash.
enum class Label : std::uint8_t { Safe = 0, Crash = 1 };

inline int label_value(Label l) { return l == Label::Crash ? 1 : 0; }

inline Label label_from(int v) {
    if (v == 0) return Label::Safe;
    if (v == 1) return Label::Crash;
    throw DataError("label must be 0 or 1, got " + std::to_string(v));
}

struct ClassProbabilities {
    double p_safe = 0.0;
    double p_crash = 0.0;
};

// Ordered worst to best; rank() gives the ordinal position used by the
// ordinal-distance metrics.
enum class RiskLevel { Critical = 0, High, Medium, Low, Excellent };

inline constexpr std::array<RiskLevel, 5> kAllRiskLevels = {
    RiskLevel::Critical, RiskLevel::High, RiskLevel::Medium, RiskLevel::Low, RiskLevel::Excellent,
};

inline int rank(RiskLevel l) { return static_cast<int>(l); }

inline std::string_view risk_level_name(RiskLevel l) {
    switch (l) {
        case RiskLevel::Critical: return "critical";
        case RiskLevel::High: return "high";
        case RiskLevel::Medium: return "medium";
        case RiskLevel::Low: return "low";
        case RiskLevel::Excellent: return "excellent";
    }
    return "?";
}

inline RiskLevel parse_risk_level(std::string_view s) {
    for (RiskLevel l : kAllRiskLevels)
        if (risk_level_name(l) == s) return l;
    throw ConfigError("unknown risk level: " + std::string(s));
}

// A feature vector laid out per a FeatureSchema.  Carries the schema id so
// mixing vectors across schemas is detectable.
struct DrivingContext {
    std::string schema_id;
    std::vector<double> values;

    double at(std::size_t i) const { return values.at(i); }

    json to_json() const { return json{{"schema_id", schema_id}, {"values", values}}; }

    static DrivingContext from_json(const json& j) {
        DrivingContext c;
        c.schema_id = j.at("schema_id").get<std::string>();
        c.values = j.at("values").get<std::vector<double>>();
        return c;
    }
};

struct AppliedPenalty {
    std::string rule_id;
    double alpha = 1.0;
};

struct SafetyAssessment {
    double raw_score = 0.0;
    double calibrated_score = 0.0;
    std::vector<AppliedPenalty> applied_penalties;
    RiskLevel risk_level = RiskLevel::Excellent;

    json to_json() const {
        json pens = json::array();
        for (const auto& p : applied_penalties)
            pens.push_back(json{{"rule_id", p.rule_id}, {"alpha", p.alpha}});
        return json{{"raw_score", raw_score},
                    {"calibrated_score", calibrated_score},
                    {"applied_penalties", pens},
                    {"risk_level", std::string(risk_level_name(risk_level))}};
    }

    static SafetyAssessment from_json(const json& j) {
        SafetyAssessment a;
        a.raw_score = j.at("raw_score").get<double>();
        a.calibrated_score = j.at("calibrated_score").get<double>();
        for (const auto& jp : j.at("applied_penalties"))
            a.applied_penalties.push_back(
                {jp.at("rule_id").get<std::string>(), jp.at("alpha").get<double>()});
        a.risk_level = parse_risk_level(j.at("risk_level").get<std::string>());
        return a;
    }
};

struct Violation {
    std::string feature;
    std::string message;
};

struct ValidationResult {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

// Structural checks: vector length matches the schema, every value is finite,
// binary slots hold exactly 0 or 1.
inline ValidationResult validate_context(const DrivingContext& ctx, const FeatureSchema& schema) {
    ValidationResult r;
    if (ctx.schema_id != schema.id()) {
        r.violations.push_back({"", "context schema '" + ctx.schema_id +
                                        "' does not match schema '" + schema.id() + "'"});
        return r;
    }
    if (ctx.values.size() != schema.size()) {
        r.violations.push_back({"", "expected " + std::to_string(schema.size()) +
                                        " values, got " + std::to_string(ctx.values.size())});
        return r;
    }
    for (std::size_t i = 0; i < schema.size(); ++i) {
        const auto& spec = schema.at(i);
        const double v = ctx.values[i];
        if (!std::isfinite(v)) {
            r.violations.push_back({spec.name, "value is not finite"});
            continue;
        }
        if (spec.kind == FeatureKind::Binary && v != 0.0 && v != 1.0)
            r.violations.push_back({spec.name, "binary feature must be 0 or 1, got " + fmt_double(v)});
    }
    return r;
}

}  // namespace safescore
