#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "safescore/errors.hpp"
#include "safescore/io.hpp"

namespace safescore {

enum class FeatureGroup {
    Temporal = 0,
    Environmental,
    Location,
    Vru,
    Interaction,
    CrashVehicle,
    Metadata,
};

inline constexpr std::array<FeatureGroup, 7> kAllGroups = {
    FeatureGroup::Temporal,    FeatureGroup::Environmental, FeatureGroup::Location,
    FeatureGroup::Vru,         FeatureGroup::Interaction,   FeatureGroup::CrashVehicle,
    FeatureGroup::Metadata,
};

inline std::string_view group_name(FeatureGroup g) {
    switch (g) {
        case FeatureGroup::Temporal: return "Temporal";
        case FeatureGroup::Environmental: return "Environmental";
        case FeatureGroup::Location: return "Location";
        case FeatureGroup::Vru: return "VRU";
        case FeatureGroup::Interaction: return "Interaction";
        case FeatureGroup::CrashVehicle: return "CrashVehicle";
        case FeatureGroup::Metadata: return "Metadata";
    }
    return "?";
}

inline FeatureGroup parse_group(std::string_view s) {
    for (FeatureGroup g : kAllGroups)
        if (group_name(g) == s) return g;
    throw ConfigError("unknown feature group: " + std::string(s));
}

enum class FeatureKind { Numeric = 0, Binary, Categorical };

inline std::string_view kind_name(FeatureKind k) {
    switch (k) {
        case FeatureKind::Numeric: return "numeric";
        case FeatureKind::Binary: return "binary";
        case FeatureKind::Categorical: return "categorical";
    }
    return "?";
}

inline FeatureKind parse_kind(std::string_view s) {
    if (s == "numeric") return FeatureKind::Numeric;
    if (s == "binary") return FeatureKind::Binary;
    if (s == "categorical") return FeatureKind::Categorical;
    throw ConfigError("unknown feature kind: " + std::string(s));
}

// One model input.  `rule` is empty for raw source columns; otherwise it names
// the derivation applied by the feature engineer.
struct FeatureSpec {
    std::string name;
    FeatureGroup group = FeatureGroup::Temporal;
    FeatureKind kind = FeatureKind::Numeric;
    std::string rule;

    bool raw() const { return rule.empty(); }
};

class FeatureSchema {
  public:
    FeatureSchema() = default;

    FeatureSchema(std::string id, std::vector<FeatureSpec> features)
        : id_(std::move(id)), features_(std::move(features)) {
        if (id_.empty()) throw ConfigError("schema id must not be empty");
        if (features_.empty()) throw ConfigError("schema must define at least one feature");
        for (std::size_t i = 0; i < features_.size(); ++i) {
            const auto& f = features_[i];
            if (f.name.empty()) throw ConfigError("feature name must not be empty");
            if (!index_.emplace(f.name, i).second)
                throw ConfigError("duplicate feature name: " + f.name);
        }
    }

    const std::string& id() const { return id_; }
    std::size_t size() const { return features_.size(); }
    const FeatureSpec& at(std::size_t i) const { return features_.at(i); }
    const std::vector<FeatureSpec>& features() const { return features_; }

    bool has(std::string_view name) const { return index_.count(std::string(name)) > 0; }

    std::size_t index_of(std::string_view name) const {
        const auto it = index_.find(std::string(name));
        if (it == index_.end())
            throw ConfigError("schema '" + id_ + "' has no feature named '" + std::string(name) + "'");
        return it->second;
    }

    std::vector<std::size_t> group_indices(FeatureGroup g) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < features_.size(); ++i)
            if (features_[i].group == g) out.push_back(i);
        return out;
    }

    std::unordered_map<FeatureGroup, std::size_t> group_counts() const {
        std::unordered_map<FeatureGroup, std::size_t> out;
        for (const auto& f : features_) ++out[f.group];
        return out;
    }

    // Source columns the raw data file must provide, in schema order.
    std::vector<std::string> raw_columns() const {
        std::vector<std::string> out;
        for (const auto& f : features_)
            if (f.raw()) out.push_back(f.name);
        return out;
    }

    json to_json() const {
        json feats = json::array();
        for (const auto& f : features_) {
            json jf;
            jf["name"] = f.name;
            jf["group"] = std::string(group_name(f.group));
            jf["kind"] = std::string(kind_name(f.kind));
            if (!f.rule.empty()) jf["rule"] = f.rule;
            feats.push_back(jf);
        }
        return json{{"id", id_}, {"features", feats}};
    }

    static FeatureSchema from_json(const json& j) {
        if (!j.is_object() || !j.contains("id") || !j.contains("features"))
            throw ConfigError("schema JSON must contain 'id' and 'features'");
        std::vector<FeatureSpec> feats;
        for (const auto& jf : j.at("features")) {
            FeatureSpec f;
            f.name = jf.at("name").get<std::string>();
            f.group = parse_group(jf.at("group").get<std::string>());
            f.kind = parse_kind(jf.at("kind").get<std::string>());
            if (jf.contains("rule")) f.rule = jf.at("rule").get<std::string>();
            feats.push_back(std::move(f));
        }
        return FeatureSchema(j.at("id").get<std::string>(), std::move(feats));
    }

    static FeatureSchema load(const std::filesystem::path& path) {
        try {
            return from_json(load_json_file(path));
        } catch (const DataError& e) {
            throw ConfigError(e.what());
        }
    }

    void save(const std::filesystem::path& path) const { save_json_file(path, to_json()); }

  private:
    std::string id_;
    std::vector<FeatureSpec> features_;
    std::unordered_map<std::string, std::size_t> index_;
};

// The shipped 64-feature crash-context schema: 10 temporal, 6 environmental,
// 8 location, 5 VRU, 3 interaction, 24 crash/vehicle, 8 sampling metadata.
inline FeatureSchema default_schema() {
    using G = FeatureGroup;
    using K = FeatureKind;
    std::vector<FeatureSpec> f = {
        // Temporal
        {"HOUR", G::Temporal, K::Numeric, ""},
        {"MINUTE", G::Temporal, K::Numeric, ""},
        {"MONTH", G::Temporal, K::Numeric, ""},
        {"DAY", G::Temporal, K::Numeric, ""},
        {"DAY_WEEK", G::Temporal, K::Categorical, ""},
        {"IS_RUSH_HOUR", G::Temporal, K::Binary, "rush_hour"},
        {"IS_WEEKEND", G::Temporal, K::Binary, "weekend"},
        {"IS_NIGHT", G::Temporal, K::Binary, "night"},
        {"HOUR_SIN", G::Temporal, K::Numeric, "hour_sin"},
        {"HOUR_COS", G::Temporal, K::Numeric, "hour_cos"},
        // Environmental
        {"WEATHER", G::Environmental, K::Categorical, ""},
        {"ADVERSE_WEATHER", G::Environmental, K::Binary, "adverse_weather"},
        {"WEATHER_SEVERITY", G::Environmental, K::Numeric, "weather_severity"},
        {"LGT_COND", G::Environmental, K::Categorical, ""},
        {"POOR_LIGHTING", G::Environmental, K::Binary, "poor_lighting"},
        {"LIGHT_RISK", G::Environmental, K::Numeric, "light_risk"},
        // Location
        {"TYP_INT", G::Location, K::Categorical, ""},
        {"REL_ROAD", G::Location, K::Categorical, ""},
        {"WRK_ZONE", G::Location, K::Binary, ""},
        {"INT_HWY", G::Location, K::Binary, ""},
        {"REL_JUNC", G::Location, K::Categorical, ""},
        {"TRAF_WAY", G::Location, K::Categorical, ""},
        {"NUM_LANES", G::Location, K::Numeric, ""},
        {"IS_INTERSECTION", G::Location, K::Binary, "intersection"},
        // VRU
        {"pedestrian_count", G::Vru, K::Numeric, ""},
        {"cyclist_count", G::Vru, K::Numeric, ""},
        {"total_vru", G::Vru, K::Numeric, "total_vru"},
        {"max_vru_injury", G::Vru, K::Numeric, ""},
        {"fatal_vru", G::Vru, K::Binary, "fatal_vru"},
        // Interaction
        {"NIGHT_AND_DARK", G::Interaction, K::Binary, "night_and_dark"},
        {"WEEKEND_NIGHT", G::Interaction, K::Binary, "weekend_night"},
        {"ADVERSE_CONDITIONS", G::Interaction, K::Binary, "adverse_conditions"},
        // Crash and vehicle
        {"HARM_EV", G::CrashVehicle, K::Categorical, ""},
        {"MAN_COLL", G::CrashVehicle, K::Categorical, ""},
        {"ALCOHOL", G::CrashVehicle, K::Categorical, ""},
        {"ALCOHOL_INVOLVED", G::CrashVehicle, K::Binary, "alcohol_involved"},
        {"MAX_SEV", G::CrashVehicle, K::Numeric, ""},
        {"NUM_INJ", G::CrashVehicle, K::Numeric, ""},
        {"VE_TOTAL", G::CrashVehicle, K::Numeric, ""},
        {"PEDS", G::CrashVehicle, K::Numeric, ""},
        {"PERSONS", G::CrashVehicle, K::Numeric, ""},
        {"TRAV_SP", G::CrashVehicle, K::Numeric, ""},
        {"VSPD_LIM", G::CrashVehicle, K::Numeric, ""},
        {"SPEED_OVER", G::CrashVehicle, K::Numeric, "speed_over"},
        {"IS_SPEEDING", G::CrashVehicle, K::Binary, "speeding"},
        {"SPEED_RISK", G::CrashVehicle, K::Numeric, "speed_risk"},
        {"ROAD_COND", G::CrashVehicle, K::Categorical, ""},
        {"ROAD_RISK", G::CrashVehicle, K::Numeric, "road_risk"},
        {"HIT_RUN", G::CrashVehicle, K::Binary, ""},
        {"FIRE_EXP", G::CrashVehicle, K::Binary, ""},
        {"TOW_VEH", G::CrashVehicle, K::Numeric, ""},
        {"DRUGS", G::CrashVehicle, K::Binary, ""},
        {"SCH_BUS", G::CrashVehicle, K::Binary, ""},
        {"BODY_TYP", G::CrashVehicle, K::Categorical, ""},
        {"MOD_YEAR", G::CrashVehicle, K::Numeric, ""},
        {"DEFORMED", G::CrashVehicle, K::Categorical, ""},
        // Sampling metadata
        {"STRATUM", G::Metadata, K::Categorical, ""},
        {"REGION", G::Metadata, K::Categorical, ""},
        {"URBANICITY", G::Metadata, K::Categorical, ""},
        {"PJ", G::Metadata, K::Numeric, ""},
        {"PSU_VAR", G::Metadata, K::Numeric, ""},
        {"PSU", G::Metadata, K::Numeric, ""},
        {"PSUSTRAT", G::Metadata, K::Numeric, ""},
        {"WEIGHT", G::Metadata, K::Numeric, ""},
    };
    return FeatureSchema("crss_vru_64", std::move(f));
}

}  // namespace safescore
