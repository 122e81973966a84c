#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "safescore/csv.hpp"
#include "safescore/errors.hpp"
#include "safescore/io.hpp"
#include "safescore/rng.hpp"
#include "safescore/schema.hpp"
#include "safescore/types.hpp"

namespace safescore {

// Integer code semantics for the categorical source columns, mirrored by the
// shipped schemas/crss_codes.json.  Engineering rules and the scenario-grid
// renderer both resolve codes through this table, so alternate encodings can
// be swapped in without touching code.
struct CodeMap {
    std::map<std::string, int> weather_names;
    std::set<int> weather_adverse;
    std::map<int, int> weather_severity;
    int weather_unknown = 99;

    std::map<std::string, int> lighting_names;
    std::set<int> lighting_poor;
    std::map<int, int> light_risk;
    int lighting_unknown = 9;

    std::map<std::string, int> road_names;
    std::set<int> road_adverse;
    std::map<int, int> road_risk;
    int road_unknown = 99;

    std::set<int> weekend_days;
    std::set<int> night_hours;
    std::set<int> rush_hours;
    std::vector<int> daytime_hours;  // flip targets when the night dimension is reset

    int alcohol_involved = 1;
    int alcohol_none = 2;

    // Thresholds on speed over the posted limit (mph) for bands 1..3.
    double speed_moderate = 5.0;
    double speed_high = 10.0;
    double speed_very_high = 20.0;

    // Fatal VRU injury threshold on the KABCO-style severity scale.
    double vru_fatal_severity = 4.0;

    // Minimum count of simultaneous adverse basics for the compound flag.
    int adverse_conditions_min = 2;

    static CodeMap defaults() {
        CodeMap m;
        m.weather_names = {{"clear", 1},        {"rain", 2}, {"sleet", 3}, {"snow", 4},
                           {"fog", 5},          {"other", 8}, {"cloudy", 10}, {"unknown", 99}};
        m.weather_adverse = {2, 3, 4, 5, 8};
        m.weather_severity = {{1, 0}, {10, 0}, {99, 0}, {2, 1}, {5, 1}, {8, 1}, {3, 2}, {4, 2}};
        m.lighting_names = {{"daylight", 1}, {"dark_unlit", 2}, {"dark_lit", 3},
                            {"dawn", 4},     {"dusk", 5},       {"unknown", 9}};
        m.lighting_poor = {2, 3, 4, 5};
        m.light_risk = {{1, 0}, {4, 1}, {5, 1}, {9, 1}, {3, 2}, {2, 3}};
        m.road_names = {{"dry", 1}, {"wet", 2}, {"snow", 3}, {"ice", 4}, {"other", 8}, {"unknown", 99}};
        m.road_adverse = {2, 3, 4};
        m.road_risk = {{1, 0}, {8, 0}, {99, 0}, {2, 1}, {3, 2}, {4, 3}};
        m.weekend_days = {1, 7};
        m.night_hours = {0, 1, 2, 3, 4, 22, 23};
        m.rush_hours = {7, 8, 16, 17, 18};
        m.daytime_hours = {9, 10, 11, 12, 13, 14, 15};
        return m;
    }

    int code_of(const std::map<std::string, int>& names, const std::string& level,
                const std::string& what) const {
        const auto it = names.find(level);
        if (it == names.end()) throw ConfigError("unknown " + what + " level: " + level);
        return it->second;
    }

    json to_json() const {
        auto int_map = [](const std::map<int, int>& m) {
            json j = json::object();
            for (const auto& [k, v] : m) j[std::to_string(k)] = v;
            return j;
        };
        json j;
        j["weather"] = {{"codes", weather_names},
                        {"adverse", weather_adverse},
                        {"severity", int_map(weather_severity)},
                        {"unknown", weather_unknown}};
        j["lighting"] = {{"codes", lighting_names},
                         {"poor", lighting_poor},
                         {"risk", int_map(light_risk)},
                         {"unknown", lighting_unknown}};
        j["road_condition"] = {{"codes", road_names},
                               {"adverse", road_adverse},
                               {"risk", int_map(road_risk)},
                               {"unknown", road_unknown}};
        j["temporal"] = {{"weekend_days", weekend_days},
                         {"night_hours", night_hours},
                         {"rush_hours", rush_hours},
                         {"daytime_hours", daytime_hours}};
        j["alcohol"] = {{"involved", alcohol_involved}, {"none", alcohol_none}};
        j["speed_bands"] = {{"moderate", speed_moderate},
                            {"high", speed_high},
                            {"very_high", speed_very_high}};
        j["vru"] = {{"fatal_severity", vru_fatal_severity}};
        j["interaction"] = {{"adverse_conditions_min", adverse_conditions_min}};
        return j;
    }

    static CodeMap from_json(const json& j) {
        CodeMap m;
        auto int_map = [](const json& jm) {
            std::map<int, int> out;
            for (const auto& [k, v] : jm.items()) out[std::stoi(k)] = v.get<int>();
            return out;
        };
        auto int_set = [](const json& ja) {
            std::set<int> out;
            for (const auto& v : ja) out.insert(v.get<int>());
            return out;
        };
        const auto& w = j.at("weather");
        m.weather_names = w.at("codes").get<std::map<std::string, int>>();
        m.weather_adverse = int_set(w.at("adverse"));
        m.weather_severity = int_map(w.at("severity"));
        m.weather_unknown = w.at("unknown").get<int>();
        const auto& l = j.at("lighting");
        m.lighting_names = l.at("codes").get<std::map<std::string, int>>();
        m.lighting_poor = int_set(l.at("poor"));
        m.light_risk = int_map(l.at("risk"));
        m.lighting_unknown = l.at("unknown").get<int>();
        const auto& r = j.at("road_condition");
        m.road_names = r.at("codes").get<std::map<std::string, int>>();
        m.road_adverse = int_set(r.at("adverse"));
        m.road_risk = int_map(r.at("risk"));
        m.road_unknown = r.at("unknown").get<int>();
        const auto& t = j.at("temporal");
        m.weekend_days = int_set(t.at("weekend_days"));
        m.night_hours = int_set(t.at("night_hours"));
        m.rush_hours = int_set(t.at("rush_hours"));
        m.daytime_hours = t.at("daytime_hours").get<std::vector<int>>();
        m.alcohol_involved = j.at("alcohol").at("involved").get<int>();
        m.alcohol_none = j.at("alcohol").at("none").get<int>();
        const auto& s = j.at("speed_bands");
        m.speed_moderate = s.at("moderate").get<double>();
        m.speed_high = s.at("high").get<double>();
        m.speed_very_high = s.at("very_high").get<double>();
        m.vru_fatal_severity = j.at("vru").at("fatal_severity").get<double>();
        m.adverse_conditions_min = j.at("interaction").at("adverse_conditions_min").get<int>();
        return m;
    }

    static CodeMap load(const std::filesystem::path& path) {
        try {
            return from_json(load_json_file(path));
        } catch (const json::exception& e) {
            throw ConfigError("bad code map " + path.string() + ": " + e.what());
        }
    }

    void save(const std::filesystem::path& path) const { save_json_file(path, to_json()); }
};

// One raw source row: the case id plus every required source column, already
// parsed to numbers.
struct CrashRecord {
    std::string casenum;
    std::map<std::string, double> fields;

    double get(const std::string& name) const {
        const auto it = fields.find(name);
        if (it == fields.end()) throw DataError("record " + casenum + " missing field " + name);
        return it->second;
    }

    void set(const std::string& name, double v) { fields[name] = v; }
};

struct RowIssue {
    std::size_t row = 0;  // 1-based data row number
    std::string message;
};

struct IngestReport {
    std::size_t rows_read = 0;
    std::size_t rows_kept = 0;
    std::size_t rows_dropped = 0;
    std::size_t duplicates_removed = 0;
    std::map<std::string, std::size_t> imputed;
    std::map<std::string, std::size_t> unknown_codes;
    std::vector<RowIssue> issues;

    static constexpr std::size_t kMaxIssues = 100;

    void add_issue(std::size_t row, std::string message) {
        if (issues.size() < kMaxIssues) issues.push_back({row, std::move(message)});
    }

    json to_json() const {
        json jissues = json::array();
        for (const auto& i : issues) jissues.push_back(json{{"row", i.row}, {"message", i.message}});
        return json{{"rows_read", rows_read},
                    {"rows_kept", rows_kept},
                    {"rows_dropped", rows_dropped},
                    {"duplicates_removed", duplicates_removed},
                    {"imputed", imputed},
                    {"unknown_codes", unknown_codes},
                    {"issues", jissues}};
    }
};

namespace detail {

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n == 0) return 0.0;
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

// Loads raw crash rows.  Rows with unparseable cells are dropped and logged;
// blank cells are imputed with the column median; duplicate case ids keep the
// first occurrence.
inline std::vector<CrashRecord> load_crash_records(const std::filesystem::path& path,
                                                   const std::vector<std::string>& required_columns,
                                                   IngestReport& report) {
    const CsvTable table = load_csv(path);
    const int id_col = table.require_column("CASENUM");
    std::vector<int> cols;
    for (const auto& name : required_columns) cols.push_back(table.require_column(name));

    const double kMissing = std::numeric_limits<double>::quiet_NaN();
    std::vector<CrashRecord> records;
    std::set<std::string> seen_ids;
    report.rows_read = table.rows.size();
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        CrashRecord rec;
        rec.casenum = row[static_cast<std::size_t>(id_col)];
        if (rec.casenum.empty()) {
            ++report.rows_dropped;
            report.add_issue(r + 1, "empty CASENUM");
            continue;
        }
        if (!seen_ids.insert(rec.casenum).second) {
            ++report.duplicates_removed;
            continue;
        }
        bool bad = false;
        for (std::size_t c = 0; c < cols.size(); ++c) {
            const std::string& cell = row[static_cast<std::size_t>(cols[c])];
            if (cell.empty()) {
                rec.fields[required_columns[c]] = kMissing;
                continue;
            }
            try {
                rec.fields[required_columns[c]] = parse_double(cell);
            } catch (const DataError&) {
                report.add_issue(r + 1, "column " + required_columns[c] + ": bad value '" + cell + "'");
                bad = true;
                break;
            }
        }
        if (bad) {
            ++report.rows_dropped;
            seen_ids.erase(rec.casenum);
            continue;
        }
        records.push_back(std::move(rec));
    }

    // Median imputation over the surviving rows, column by column.
    for (const auto& name : required_columns) {
        std::vector<double> present;
        for (const auto& rec : records) {
            const double v = rec.fields.at(name);
            if (!std::isnan(v)) present.push_back(v);
        }
        std::size_t missing = records.size() - present.size();
        if (missing == 0) continue;
        if (present.empty())
            throw DataError("column " + name + " has no usable values in " + path.string());
        const double med = detail::median_of(std::move(present));
        for (auto& rec : records)
            if (std::isnan(rec.fields.at(name))) rec.fields[name] = med;
        report.imputed[name] = missing;
    }
    report.rows_kept = records.size();
    return records;
}

// Derives the full feature vector for one record.  Every rule reads the raw
// source fields directly, so rule evaluation order never matters.
class FeatureEngineer {
  public:
    FeatureEngineer(FeatureSchema schema, CodeMap codes)
        : schema_(std::move(schema)), codes_(std::move(codes)) {}

    const FeatureSchema& schema() const { return schema_; }
    const CodeMap& codes() const { return codes_; }

    DrivingContext engineer(const CrashRecord& rec, IngestReport* report = nullptr) const {
        DrivingContext ctx;
        ctx.schema_id = schema_.id();
        ctx.values.resize(schema_.size());
        for (std::size_t i = 0; i < schema_.size(); ++i) {
            const auto& spec = schema_.at(i);
            ctx.values[i] = spec.raw() ? raw_value(rec, spec, report) : derived_value(rec, spec.rule);
        }
        return ctx;
    }

    std::vector<DrivingContext> engineer_all(const std::vector<CrashRecord>& recs,
                                             IngestReport* report = nullptr) const {
        std::vector<DrivingContext> out;
        out.reserve(recs.size());
        for (const auto& r : recs) out.push_back(engineer(r, report));
        return out;
    }

    // Inverse direction for what-if evaluation: copy the raw features of a
    // context back into a record, so edits can be re-engineered.
    CrashRecord record_from_context(const DrivingContext& ctx, std::string casenum = "ctx") const {
        if (ctx.values.size() != schema_.size())
            throw DataError("context does not match schema " + schema_.id());
        CrashRecord rec;
        rec.casenum = std::move(casenum);
        for (std::size_t i = 0; i < schema_.size(); ++i)
            if (schema_.at(i).raw()) rec.fields[schema_.at(i).name] = ctx.values[i];
        return rec;
    }

  private:
    FeatureSchema schema_;
    CodeMap codes_;

    static int as_code(double v) { return static_cast<int>(std::llround(v)); }

    double raw_value(const CrashRecord& rec, const FeatureSpec& spec, IngestReport* report) const {
        double v = rec.get(spec.name);
        if (spec.kind == FeatureKind::Categorical) {
            // Unrecognized codes in columns with known vocabularies collapse
            // to the reserved unknown code.
            const std::map<std::string, int>* names = nullptr;
            int unknown = 0;
            if (spec.name == "WEATHER") {
                names = &codes_.weather_names;
                unknown = codes_.weather_unknown;
            } else if (spec.name == "LGT_COND") {
                names = &codes_.lighting_names;
                unknown = codes_.lighting_unknown;
            } else if (spec.name == "ROAD_COND") {
                names = &codes_.road_names;
                unknown = codes_.road_unknown;
            }
            if (names) {
                const int code = as_code(v);
                bool known = false;
                for (const auto& [_, c] : *names)
                    if (c == code) known = true;
                if (!known) {
                    if (report) ++report->unknown_codes[spec.name];
                    v = unknown;
                }
            }
        }
        if (spec.kind == FeatureKind::Binary && v != 0.0 && v != 1.0) v = v != 0.0 ? 1.0 : 0.0;
        return v;
    }

    template <typename Map>
    static double lookup(const Map& m, int code, double fallback = 0.0) {
        const auto it = m.find(code);
        return it == m.end() ? fallback : static_cast<double>(it->second);
    }

    bool is_night(const CrashRecord& r) const {
        return codes_.night_hours.count(as_code(r.get("HOUR"))) > 0;
    }
    bool is_poor_lighting(const CrashRecord& r) const {
        return codes_.lighting_poor.count(as_code(r.get("LGT_COND"))) > 0;
    }
    bool is_adverse_weather(const CrashRecord& r) const {
        return codes_.weather_adverse.count(as_code(r.get("WEATHER"))) > 0;
    }
    double speed_over(const CrashRecord& r) const {
        const double sp = r.get("TRAV_SP");
        const double lim = r.get("VSPD_LIM");
        // Out-of-range sentinel codes mean the speed was not reported.
        if (sp < 0 || sp > 150 || lim <= 0 || lim > 90) return 0.0;
        return sp - lim;
    }
    double speed_band(const CrashRecord& r) const {
        const double over = speed_over(r);
        if (over >= codes_.speed_very_high) return 3.0;
        if (over >= codes_.speed_high) return 2.0;
        if (over >= codes_.speed_moderate) return 1.0;
        return 0.0;
    }
    double road_risk(const CrashRecord& r) const {
        return lookup(codes_.road_risk, as_code(r.get("ROAD_COND")));
    }

    double derived_value(const CrashRecord& r, const std::string& rule) const {
        if (rule == "rush_hour") return codes_.rush_hours.count(as_code(r.get("HOUR"))) ? 1.0 : 0.0;
        if (rule == "weekend") return codes_.weekend_days.count(as_code(r.get("DAY_WEEK"))) ? 1.0 : 0.0;
        if (rule == "night") return is_night(r) ? 1.0 : 0.0;
        if (rule == "hour_sin") return std::sin(2.0 * M_PI * r.get("HOUR") / 24.0);
        if (rule == "hour_cos") return std::cos(2.0 * M_PI * r.get("HOUR") / 24.0);
        if (rule == "adverse_weather") return is_adverse_weather(r) ? 1.0 : 0.0;
        if (rule == "weather_severity")
            return lookup(codes_.weather_severity, as_code(r.get("WEATHER")));
        if (rule == "poor_lighting") return is_poor_lighting(r) ? 1.0 : 0.0;
        if (rule == "light_risk") return lookup(codes_.light_risk, as_code(r.get("LGT_COND")), 1.0);
        if (rule == "intersection") return as_code(r.get("TYP_INT")) > 1 ? 1.0 : 0.0;
        if (rule == "total_vru") return r.get("pedestrian_count") + r.get("cyclist_count");
        if (rule == "fatal_vru") return r.get("max_vru_injury") >= codes_.vru_fatal_severity ? 1.0 : 0.0;
        if (rule == "night_and_dark") return is_night(r) && is_poor_lighting(r) ? 1.0 : 0.0;
        if (rule == "weekend_night")
            return codes_.weekend_days.count(as_code(r.get("DAY_WEEK"))) && is_night(r) ? 1.0 : 0.0;
        if (rule == "alcohol_involved")
            return as_code(r.get("ALCOHOL")) == codes_.alcohol_involved ? 1.0 : 0.0;
        if (rule == "speed_over") return speed_over(r);
        if (rule == "speeding") return speed_over(r) >= codes_.speed_moderate ? 1.0 : 0.0;
        if (rule == "speed_risk") return speed_band(r);
        if (rule == "road_risk") return road_risk(r);
        if (rule == "adverse_conditions") {
            int n = 0;
            n += is_poor_lighting(r) ? 1 : 0;
            n += is_adverse_weather(r) ? 1 : 0;
            n += is_night(r) ? 1 : 0;
            n += road_risk(r) >= 1.0 ? 1 : 0;
            n += speed_over(r) >= codes_.speed_moderate ? 1 : 0;
            return n >= codes_.adverse_conditions_min ? 1.0 : 0.0;
        }
        throw ConfigError("unknown derivation rule: " + rule);
    }
};

enum class Provenance : std::uint8_t { RealCrash = 0, SyntheticSafe = 1 };

inline std::string_view provenance_name(Provenance p) {
    return p == Provenance::RealCrash ? "real_crash" : "synthetic_safe";
}

inline Provenance parse_provenance(std::string_view s) {
    if (s == "real_crash") return Provenance::RealCrash;
    if (s == "synthetic_safe") return Provenance::SyntheticSafe;
    throw DataError("unknown provenance: " + std::string(s));
}

// Engineered rows plus labels and provenance, the unit the trainer consumes.
struct LabeledDataset {
    std::string schema_id;
    std::vector<std::string> ids;
    std::vector<DrivingContext> contexts;
    std::vector<Label> labels;
    std::vector<Provenance> provenance;

    std::size_t size() const { return contexts.size(); }

    void append(std::string id, DrivingContext ctx, Label label, Provenance prov) {
        if (schema_id.empty()) schema_id = ctx.schema_id;
        if (ctx.schema_id != schema_id)
            throw DataError("mixed schemas in dataset: " + schema_id + " vs " + ctx.schema_id);
        ids.push_back(std::move(id));
        contexts.push_back(std::move(ctx));
        labels.push_back(label);
        provenance.push_back(prov);
    }

    std::array<std::size_t, 2> class_counts() const {
        std::array<std::size_t, 2> n{0, 0};
        for (Label l : labels) ++n[static_cast<std::size_t>(label_value(l))];
        return n;
    }

    CsvWriter csv_writer(const FeatureSchema& schema) const {
        if (!schema_id.empty() && schema.id() != schema_id)
            throw DataError("dataset schema " + schema_id + " does not match " + schema.id());
        std::vector<std::string> header{"id"};
        for (const auto& f : schema.features()) header.push_back(f.name);
        header.push_back("label");
        header.push_back("provenance");
        CsvWriter w(header);
        for (std::size_t i = 0; i < size(); ++i) {
            std::vector<std::string> row;
            row.reserve(header.size());
            row.push_back(ids[i]);
            for (double v : contexts[i].values) row.push_back(fmt_double(v));
            row.push_back(std::to_string(label_value(labels[i])));
            row.push_back(std::string(provenance_name(provenance[i])));
            w.append_row(row);
        }
        return w;
    }

    void save_csv(const std::filesystem::path& path, const FeatureSchema& schema) const {
        csv_writer(schema).save(path);
    }

    static LabeledDataset load_csv(const std::filesystem::path& path, const FeatureSchema& schema) {
        const CsvTable t = load_csv_table(path, schema);
        LabeledDataset d;
        d.schema_id = schema.id();
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const auto& row = t.rows[r];
            DrivingContext ctx;
            ctx.schema_id = schema.id();
            ctx.values.reserve(schema.size());
            for (std::size_t i = 0; i < schema.size(); ++i) ctx.values.push_back(parse_double(row[i + 1]));
            d.ids.push_back(row[0]);
            d.contexts.push_back(std::move(ctx));
            d.labels.push_back(label_from(static_cast<int>(parse_double(row[schema.size() + 1]))));
            d.provenance.push_back(parse_provenance(row[schema.size() + 2]));
        }
        return d;
    }

  private:
    static CsvTable load_csv_table(const std::filesystem::path& path, const FeatureSchema& schema) {
        CsvTable t = safescore::load_csv(path);
        std::vector<std::string> want{"id"};
        for (const auto& f : schema.features()) want.push_back(f.name);
        want.push_back("label");
        want.push_back("provenance");
        if (t.header != want)
            throw DataError(path.string() + ": header does not match schema " + schema.id());
        return t;
    }
};

// Probability that each risky dimension is reset to its safe level when a
// synthetic no-crash twin is generated.  Speed resets default to off; the
// base four dimensions match the standard perturbation setup.
struct SynthesisRates {
    double lighting = 0.80;
    double night = 0.70;
    double weather = 0.90;
    double road = 0.85;
    double speed_moderate = 0.0;
    double speed_high = 0.0;
    double speed_very_high = 0.0;

    void validate() const {
        for (double r : {lighting, night, weather, road, speed_moderate, speed_high, speed_very_high})
            if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("synthesis rate out of [0,1]");
    }

    json to_json() const {
        return json{{"lighting", lighting},
                    {"night", night},
                    {"weather", weather},
                    {"road", road},
                    {"speed_moderate", speed_moderate},
                    {"speed_high", speed_high},
                    {"speed_very_high", speed_very_high}};
    }

    static SynthesisRates from_json(const json& j) {
        SynthesisRates r;
        if (j.contains("lighting")) r.lighting = j.at("lighting").get<double>();
        if (j.contains("night")) r.night = j.at("night").get<double>();
        if (j.contains("weather")) r.weather = j.at("weather").get<double>();
        if (j.contains("road")) r.road = j.at("road").get<double>();
        if (j.contains("speed_moderate")) r.speed_moderate = j.at("speed_moderate").get<double>();
        if (j.contains("speed_high")) r.speed_high = j.at("speed_high").get<double>();
        if (j.contains("speed_very_high")) r.speed_very_high = j.at("speed_very_high").get<double>();
        r.validate();
        return r;
    }
};

struct SynthesisReport {
    std::size_t generated = 0;
    std::map<std::string, std::size_t> flips;

    json to_json() const { return json{{"generated", generated}, {"flips", flips}}; }
};

// One synthetic no-crash twin per crash record: each risky dimension present
// in the source is reset to its safe level with the configured probability,
// all other fields are kept, so the classes differ only in the flipped
// dimensions.  Randomness is keyed per source row, not per call order.
inline std::vector<CrashRecord> synthesize_safe_samples(const std::vector<CrashRecord>& records,
                                                        const SynthesisRates& rates,
                                                        std::uint64_t seed, const CodeMap& codes,
                                                        SynthesisReport* report = nullptr) {
    rates.validate();
    auto as_code = [](double v) { return static_cast<int>(std::llround(v)); };
    std::vector<CrashRecord> out;
    out.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const CrashRecord& src = records[i];
        Rng rng(mix_seed(seed, 0x5AFEu, i));
        CrashRecord rec = src;
        rec.casenum = src.casenum + "-s";

        const bool flip_light = rng.bernoulli(rates.lighting);
        const bool flip_night = rng.bernoulli(rates.night);
        const bool flip_weather = rng.bernoulli(rates.weather);
        const bool flip_road = rng.bernoulli(rates.road);
        const std::size_t day_pick = rng.below(codes.daytime_hours.size());
        const double u_speed = rng.uniform();

        if (flip_light && codes.lighting_poor.count(as_code(rec.get("LGT_COND")))) {
            rec.set("LGT_COND", codes.code_of(codes.lighting_names, "daylight", "lighting"));
            if (report) ++report->flips["lighting"];
        }
        if (flip_night && codes.night_hours.count(as_code(rec.get("HOUR")))) {
            rec.set("HOUR", codes.daytime_hours.at(day_pick));
            if (report) ++report->flips["night"];
        }
        if (flip_weather && codes.weather_adverse.count(as_code(rec.get("WEATHER")))) {
            rec.set("WEATHER", codes.code_of(codes.weather_names, "clear", "weather"));
            if (report) ++report->flips["weather"];
        }
        if (flip_road && codes.road_adverse.count(as_code(rec.get("ROAD_COND")))) {
            rec.set("ROAD_COND", codes.code_of(codes.road_names, "dry", "road"));
            if (report) ++report->flips["road"];
        }

        const double sp = rec.get("TRAV_SP");
        const double lim = rec.get("VSPD_LIM");
        if (lim > 0 && lim <= 90 && sp >= 0 && sp <= 150) {
            const double over = sp - lim;
            double rate = 0.0;
            const char* dim = nullptr;
            if (over >= codes.speed_very_high) {
                rate = rates.speed_very_high;
                dim = "speed_very_high";
            } else if (over >= codes.speed_high) {
                rate = rates.speed_high;
                dim = "speed_high";
            } else if (over >= codes.speed_moderate) {
                rate = rates.speed_moderate;
                dim = "speed_moderate";
            }
            if (dim && u_speed < rate) {
                rec.set("TRAV_SP", std::max(0.0, lim - 5.0));
                if (report) ++report->flips[dim];
            }
        }
        out.push_back(std::move(rec));
    }
    if (report) report->generated = out.size();
    return out;
}

inline LabeledDataset build_dataset(const std::vector<CrashRecord>& crashes,
                                    const std::vector<CrashRecord>& safes,
                                    const FeatureEngineer& engineer,
                                    IngestReport* report = nullptr) {
    LabeledDataset d;
    d.schema_id = engineer.schema().id();
    for (const auto& r : crashes)
        d.append(r.casenum, engineer.engineer(r, report), Label::Crash, Provenance::RealCrash);
    for (const auto& r : safes)
        d.append(r.casenum, engineer.engineer(r, report), Label::Safe, Provenance::SyntheticSafe);
    return d;
}

// Class-stratified split: per class, round(n_class * test_fraction) rows go
// to the test side after a seeded shuffle.
inline std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& data,
                                                                  double test_fraction,
                                                                  std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ConfigError("test fraction must be in (0,1)");
    LabeledDataset train, test;
    train.schema_id = test.schema_id = data.schema_id;
    for (int cls = 0; cls < 2; ++cls) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < data.size(); ++i)
            if (label_value(data.labels[i]) == cls) idx.push_back(i);
        Rng rng(mix_seed(seed, 0x57A7u, static_cast<std::uint64_t>(cls)));
        rng.shuffle(idx);
        const std::size_t n_test =
            static_cast<std::size_t>(std::lround(static_cast<double>(idx.size()) * test_fraction));
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const std::size_t i = idx[k];
            LabeledDataset& dst = k < n_test ? test : train;
            dst.append(data.ids[i], data.contexts[i], data.labels[i], data.provenance[i]);
        }
    }
    return {std::move(train), std::move(test)};
}

}  // namespace safescore
