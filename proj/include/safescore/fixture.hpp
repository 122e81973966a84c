#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "safescore/csv.hpp"
#include "safescore/errors.hpp"
#include "safescore/ingest.hpp"
#include "safescore/kinematics.hpp"
#include "safescore/rng.hpp"
#include "safescore/schema.hpp"
#include "safescore/types.hpp"

namespace safescore {

// ---------------------------------------------------------------------------
// Planted-signal numeric data: ten uniform features, label 1 iff f0 + f1 > 1,
// with a configurable label-noise rate.  Two group layouts exist so group
// ablation can be exercised both with the signal concentrated in one group
// and spread over two.
// ---------------------------------------------------------------------------

struct PlantedSpec {
    enum class Layout { Joint, Split };

    std::size_t rows = 20000;
    double noise = 0.05;
    Layout layout = Layout::Joint;
    std::uint64_t seed = 1;
};

inline FeatureSchema planted_schema(PlantedSpec::Layout layout) {
    using G = FeatureGroup;
    std::vector<FeatureSpec> f;
    const bool joint = layout == PlantedSpec::Layout::Joint;
    for (int i = 0; i < 10; ++i) {
        FeatureSpec s;
        s.name = "f" + std::to_string(i);
        s.kind = FeatureKind::Numeric;
        if (i == 0)
            s.group = G::Environmental;
        else if (i == 1)
            s.group = joint ? G::Environmental : G::Temporal;
        else if (i < 6)
            s.group = G::Location;
        else
            s.group = G::Metadata;
        f.push_back(std::move(s));
    }
    return FeatureSchema(joint ? "planted_joint_10" : "planted_split_10", std::move(f));
}

inline LabeledDataset make_planted(const PlantedSpec& spec) {
    if (!(spec.noise >= 0.0 && spec.noise < 0.5))
        throw ConfigError("planted noise must be in [0, 0.5)");
    const FeatureSchema schema = planted_schema(spec.layout);
    LabeledDataset d;
    d.schema_id = schema.id();
    for (std::size_t i = 0; i < spec.rows; ++i) {
        Rng rng(mix_seed(spec.seed, 0x9A77u, i));
        DrivingContext ctx;
        ctx.schema_id = schema.id();
        ctx.values.resize(10);
        for (auto& v : ctx.values) v = rng.uniform();
        bool y = ctx.values[0] + ctx.values[1] > 1.0;
        if (rng.bernoulli(spec.noise)) y = !y;
        d.append("p" + std::to_string(i), std::move(ctx), y ? Label::Crash : Label::Safe,
                 y ? Provenance::RealCrash : Provenance::SyntheticSafe);
    }
    return d;
}

// ---------------------------------------------------------------------------
// Crash-record data shaped like the 64-feature source schema.  Training mode
// over-represents risky levels so the crash/synthetic contrast is strong;
// prevalence mode draws risk factors at typical crash-population shares.
// ---------------------------------------------------------------------------

struct CrashFixtureSpec {
    enum class Mode { Training, Prevalence };

    std::size_t rows = 8000;
    Mode mode = Mode::Training;
    std::uint64_t seed = 7;
};

namespace detail {

// Weighted pick: values[i] with probability weights[i] (weights sum to 1).
inline int pick(Rng& rng, const std::vector<int>& values, const std::vector<double>& weights) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        acc += weights[i];
        if (u < acc) return values[i];
    }
    return values.back();
}

inline int pick_from(Rng& rng, const std::set<int>& s) {
    std::vector<int> v(s.begin(), s.end());
    return v[rng.below(v.size())];
}

}  // namespace detail

inline std::vector<CrashRecord> make_crash_records(const CrashFixtureSpec& spec,
                                                   const CodeMap& codes = CodeMap::defaults()) {
    const bool training = spec.mode == CrashFixtureSpec::Mode::Training;
    std::vector<CrashRecord> out;
    out.reserve(spec.rows);
    for (std::size_t i = 0; i < spec.rows; ++i) {
        Rng rng(mix_seed(spec.seed, 0xC4A5u, i));
        CrashRecord r;
        r.casenum = "c" + std::to_string(100000 + i);

        // Hour category: night / rush / other daytime.
        const double u_time = rng.uniform();
        const double p_night = training ? 0.60 : 0.214;
        const double p_rush = training ? 0.15 : 0.353;
        int hour;
        if (u_time < p_night)
            hour = detail::pick_from(rng, codes.night_hours);
        else if (u_time < p_night + p_rush)
            hour = detail::pick_from(rng, codes.rush_hours);
        else {
            static const std::vector<int> day{5, 6, 9, 10, 11, 12, 13, 14, 15, 19, 20, 21};
            hour = day[rng.below(day.size())];
        }
        r.set("HOUR", hour);
        r.set("MINUTE", static_cast<double>(rng.below(60)));
        r.set("MONTH", static_cast<double>(1 + rng.below(12)));
        r.set("DAY", static_cast<double>(1 + rng.below(28)));
        const double p_weekend = training ? 2.0 / 7.0 : 0.251;
        if (rng.bernoulli(p_weekend))
            r.set("DAY_WEEK", rng.bernoulli(0.5) ? 1 : 7);
        else
            r.set("DAY_WEEK", static_cast<double>(2 + rng.below(5)));

        // Weather.
        if (training)
            r.set("WEATHER", detail::pick(rng, {2, 3, 4, 5, 1, 10}, {0.30, 0.05, 0.12, 0.08, 0.40, 0.05}));
        else
            r.set("WEATHER", detail::pick(rng, {2, 4, 5, 1, 10}, {0.150, 0.050, 0.033, 0.667, 0.100}));

        // Lighting.
        if (training)
            r.set("LGT_COND", detail::pick(rng, {2, 3, 4, 5, 1}, {0.35, 0.25, 0.05, 0.05, 0.30}));
        else
            r.set("LGT_COND", detail::pick(rng, {2, 3, 4, 5, 1}, {0.100, 0.120, 0.035, 0.037, 0.708}));

        // Road surface.
        if (training)
            r.set("ROAD_COND", detail::pick(rng, {2, 3, 4, 1}, {0.30, 0.08, 0.12, 0.50}));
        else
            r.set("ROAD_COND", detail::pick(rng, {2, 3, 4, 1}, {0.12, 0.03, 0.03, 0.82}));

        // Speed over the limit, by band.
        const double lim = detail::pick(rng, {25, 30, 35, 45}, {0.25, 0.35, 0.25, 0.15});
        int band;
        if (training)
            band = detail::pick(rng, {0, 1, 2, 3}, {0.30, 0.20, 0.30, 0.20});
        else
            band = detail::pick(rng, {0, 1, 2, 3}, {0.55, 0.20, 0.15, 0.10});
        double over = 0.0;
        switch (band) {
            case 0: over = -5.0 + static_cast<double>(rng.below(10)); break;
            case 1: over = 5.0 + static_cast<double>(rng.below(5)); break;
            case 2: over = 10.0 + static_cast<double>(rng.below(10)); break;
            default: over = 20.0 + static_cast<double>(rng.below(16)); break;
        }
        r.set("VSPD_LIM", lim);
        r.set("TRAV_SP", std::max(0.0, lim + over));

        // VRU involvement.
        const bool vru = training ? true : rng.bernoulli(0.087);
        double peds = 0.0, cycs = 0.0;
        if (vru) {
            const double u = rng.uniform();
            if (u < 0.75)
                peds = rng.bernoulli(0.2) ? 2.0 : 1.0;
            else if (u < 0.90)
                cycs = 1.0;
            else {
                peds = 1.0;
                cycs = 1.0;
            }
        }
        r.set("pedestrian_count", peds);
        r.set("cyclist_count", cycs);
        r.set("max_vru_injury",
              vru ? detail::pick(rng, {0, 1, 2, 3, 4}, {0.15, 0.25, 0.30, 0.20, 0.10}) : 0.0);

        // Location.
        r.set("TYP_INT", detail::pick(rng, {1, 2, 3, 4}, {0.50, 0.20, 0.20, 0.10}));
        r.set("REL_ROAD", detail::pick(rng, {1, 2, 3}, {0.70, 0.20, 0.10}));
        r.set("WRK_ZONE", rng.bernoulli(0.03) ? 1 : 0);
        r.set("INT_HWY", rng.bernoulli(0.10) ? 1 : 0);
        r.set("REL_JUNC", detail::pick(rng, {1, 2, 3}, {0.60, 0.30, 0.10}));
        r.set("TRAF_WAY", detail::pick(rng, {1, 2, 3}, {0.50, 0.30, 0.20}));
        r.set("NUM_LANES", static_cast<double>(1 + rng.below(5)));

        // Crash and vehicle descriptors (label-neutral noise).
        r.set("HARM_EV", static_cast<double>(1 + rng.below(12)));
        r.set("MAN_COLL", static_cast<double>(rng.below(12)));
        r.set("ALCOHOL", rng.bernoulli(0.12) ? codes.alcohol_involved : codes.alcohol_none);
        r.set("MAX_SEV", detail::pick(rng, {0, 1, 2, 3, 4}, {0.20, 0.30, 0.25, 0.15, 0.10}));
        r.set("NUM_INJ", static_cast<double>(rng.below(4)));
        r.set("VE_TOTAL", detail::pick(rng, {1, 2, 3}, {0.60, 0.30, 0.10}));
        r.set("PEDS", peds + cycs);
        r.set("PERSONS", static_cast<double>(1 + rng.below(4)));
        r.set("HIT_RUN", rng.bernoulli(0.05) ? 1 : 0);
        r.set("FIRE_EXP", rng.bernoulli(0.02) ? 1 : 0);
        r.set("TOW_VEH", rng.bernoulli(0.30) ? 1 : 0);
        r.set("DRUGS", rng.bernoulli(0.05) ? 1 : 0);
        r.set("SCH_BUS", rng.bernoulli(0.01) ? 1 : 0);
        r.set("BODY_TYP", static_cast<double>(1 + rng.below(6)));
        r.set("MOD_YEAR", static_cast<double>(2000 + rng.below(24)));
        r.set("DEFORMED", detail::pick(rng, {0, 2, 4, 6}, {0.25, 0.25, 0.25, 0.25}));

        // Sampling design metadata.
        r.set("STRATUM", static_cast<double>(1 + rng.below(10)));
        r.set("REGION", static_cast<double>(1 + rng.below(4)));
        r.set("URBANICITY", rng.bernoulli(0.7) ? 1 : 2);
        r.set("PJ", static_cast<double>(1 + rng.below(50)));
        r.set("PSU_VAR", static_cast<double>(1 + rng.below(20)));
        r.set("PSU", static_cast<double>(1 + rng.below(99)));
        r.set("PSUSTRAT", static_cast<double>(1 + rng.below(30)));
        r.set("WEIGHT", 0.5 + 4.5 * rng.uniform());

        out.push_back(std::move(r));
    }
    return out;
}

inline CsvWriter make_crash_csv(const std::vector<CrashRecord>& records,
                                const std::vector<std::string>& columns) {
    std::vector<std::string> header{"CASENUM"};
    header.insert(header.end(), columns.begin(), columns.end());
    CsvWriter w(header);
    for (const auto& r : records) {
        std::vector<std::string> row{r.casenum};
        for (const auto& c : columns) row.push_back(fmt_double(r.get(c)));
        w.append_row(row);
    }
    return w;
}

inline void save_crash_csv(const std::filesystem::path& path,
                           const std::vector<CrashRecord>& records,
                           const std::vector<std::string>& columns) {
    make_crash_csv(records, columns).save(path);
}

// Graded reset rates for the speed dimension, used when a trained model must
// rank speed bands; the four base dimensions keep their defaults.
inline SynthesisRates graded_synthesis_rates() {
    SynthesisRates r;
    r.speed_moderate = 0.50;
    r.speed_high = 0.75;
    r.speed_very_high = 0.90;
    return r;
}

// ---------------------------------------------------------------------------
// Trajectory episodes at 10 Hz: a subject vehicle driving +x past a static
// vulnerable road user placed exactly on a sampled ego position, so the
// closest approach equals the scripted lateral offset.  Safe episodes keep
// wide clearance at modest speed; near misses pass within two meters at
// moderately high speed and brake hard afterwards; collision episodes pass
// within half a meter at high speed.
// ---------------------------------------------------------------------------

struct TrajectoryFixtureSpec {
    int n_safe = 40;
    int n_near_miss = 12;
    int n_collision = 8;
    std::uint64_t seed = 3;
    int steps = 91;
    double dt = 0.1;
};

namespace detail {

inline TrajectoryScenario make_episode(const std::string& id, ScenarioType type, Rng& rng,
                                       int steps, double dt, bool cyclist) {
    double speed = 0.0, offset = 0.0, target_x = 0.0;
    bool brake = false;
    switch (type) {
        case ScenarioType::Safe:
            // Clearance wide enough that projected time to collision never
            // dips near the threshold (its floor is 2*offset/speed).
            speed = rng.uniform(8.0, 11.0);
            offset = rng.uniform(12.0, 16.0);
            target_x = 40.0;
            break;
        case ScenarioType::NearMiss:
            speed = rng.uniform(16.0, 18.0);
            offset = rng.uniform(0.8, 1.8);
            target_x = 45.0;
            brake = true;
            break;
        case ScenarioType::Collision:
            speed = rng.uniform(20.0, 25.0);
            offset = rng.uniform(0.05, 0.30);
            target_x = 50.0;
            brake = true;
            break;
    }
    // Snap the encounter to a sampled instant.
    const int k_pass = std::max(1, static_cast<int>(std::llround(target_x / (speed * dt))));
    const double x_pass = speed * dt * k_pass;

    AgentTrack ego;
    ego.agent_id = "ego";
    ego.type = AgentType::Vehicle;
    double x = 0.0, v = speed;
    for (int i = 0; i < steps; ++i) {
        ego.t.push_back(dt * i);
        ego.x.push_back(x);
        ego.y.push_back(0.0);
        ego.v.push_back(v);
        double a = 0.0;
        if (brake && i >= k_pass && v > 8.0) a = -4.0;
        x += v * dt + 0.5 * a * dt * dt;
        v = std::max(0.0, v + a * dt);
    }

    AgentTrack vru;
    vru.agent_id = cyclist ? "cyclist_1" : "pedestrian_1";
    vru.type = cyclist ? AgentType::Cyclist : AgentType::Pedestrian;
    for (int i = 0; i < steps; ++i) {
        vru.t.push_back(dt * i);
        vru.x.push_back(x_pass);
        vru.y.push_back(offset);
        vru.v.push_back(0.0);
    }

    TrajectoryScenario scen;
    scen.scenario_id = id;
    scen.agents.push_back(std::move(ego));
    scen.agents.push_back(std::move(vru));
    scen.ego_index = 0;
    return scen;
}

}  // namespace detail

inline std::vector<TrajectoryScenario> make_trajectories(const TrajectoryFixtureSpec& spec) {
    std::vector<TrajectoryScenario> out;
    int n = 0;
    const auto add = [&](ScenarioType type, int count, const char* prefix) {
        for (int i = 0; i < count; ++i, ++n) {
            Rng rng(mix_seed(spec.seed, 0x7A8Au, static_cast<std::uint64_t>(n)));
            out.push_back(detail::make_episode(prefix + std::to_string(i), type, rng, spec.steps,
                                               spec.dt, i % 3 == 2));
        }
    };
    add(ScenarioType::Safe, spec.n_safe, "safe_");
    add(ScenarioType::NearMiss, spec.n_near_miss, "near_");
    add(ScenarioType::Collision, spec.n_collision, "collision_");
    return out;
}

inline CsvWriter make_trajectory_csv(const std::vector<TrajectoryScenario>& scenarios) {
    CsvWriter w({"scenario_id", "agent_id", "agent_type", "t", "x", "y", "v"});
    for (const auto& scen : scenarios)
        for (const auto& agent : scen.agents)
            for (std::size_t i = 0; i < agent.steps(); ++i)
                w.append_row({scen.scenario_id, agent.agent_id,
                              std::string(agent_type_name(agent.type)), fmt_double(agent.t[i]),
                              fmt_double(agent.x[i]), fmt_double(agent.y[i]),
                              fmt_double(agent.v[i])});
    return w;
}

inline void save_trajectory_csv(const std::filesystem::path& path,
                                const std::vector<TrajectoryScenario>& scenarios) {
    make_trajectory_csv(scenarios).save(path);
}

}  // namespace safescore
