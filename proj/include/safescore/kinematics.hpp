#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "safescore/csv.hpp"
#include "safescore/errors.hpp"
#include "safescore/io.hpp"

namespace safescore {

enum class AgentType { Vehicle, Pedestrian, Cyclist };

inline std::string_view agent_type_name(AgentType t) {
    switch (t) {
        case AgentType::Vehicle: return "vehicle";
        case AgentType::Pedestrian: return "pedestrian";
        case AgentType::Cyclist: return "cyclist";
    }
    return "?";
}

inline AgentType parse_agent_type(std::string_view s) {
    if (s == "vehicle") return AgentType::Vehicle;
    if (s == "pedestrian") return AgentType::Pedestrian;
    if (s == "cyclist") return AgentType::Cyclist;
    throw DataError("unknown agent type: " + std::string(s));
}

struct AgentTrack {
    std::string agent_id;
    AgentType type = AgentType::Vehicle;
    std::vector<double> t;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> v;

    std::size_t steps() const { return t.size(); }
};

struct TrajectoryScenario {
    std::string scenario_id;
    std::vector<AgentTrack> agents;
    std::size_t ego_index = 0;

    const AgentTrack& ego() const { return agents.at(ego_index); }
};

// Long-format CSV: scenario_id,agent_id,agent_type,t,x,y,v.  Rows for one
// agent must be in time order; all agents in a scenario must share the same
// timestamp grid.  The agent with id "ego" is the subject vehicle; if no
// agent carries that id the scenario's first agent is used.
inline std::vector<TrajectoryScenario> load_trajectories(const std::filesystem::path& path) {
    const CsvTable table = load_csv(path);
    const int c_scen = table.require_column("scenario_id");
    const int c_agent = table.require_column("agent_id");
    const int c_type = table.require_column("agent_type");
    const int c_t = table.require_column("t");
    const int c_x = table.require_column("x");
    const int c_y = table.require_column("y");
    const int c_v = table.require_column("v");

    std::vector<TrajectoryScenario> scenarios;
    std::map<std::string, std::size_t> scen_index;
    std::map<std::pair<std::string, std::string>, std::size_t> agent_index;

    for (const auto& row : table.rows) {
        const std::string& sid = row[static_cast<std::size_t>(c_scen)];
        auto [sit, snew] = scen_index.try_emplace(sid, scenarios.size());
        if (snew) {
            scenarios.emplace_back();
            scenarios.back().scenario_id = sid;
        }
        TrajectoryScenario& scen = scenarios[sit->second];

        const std::string& aid = row[static_cast<std::size_t>(c_agent)];
        auto [ait, anew] = agent_index.try_emplace({sid, aid}, scen.agents.size());
        if (anew) {
            AgentTrack track;
            track.agent_id = aid;
            track.type = parse_agent_type(row[static_cast<std::size_t>(c_type)]);
            scen.agents.push_back(std::move(track));
        }
        AgentTrack& track = scen.agents[ait->second];
        const double t = parse_double(row[static_cast<std::size_t>(c_t)]);
        if (!track.t.empty() && t <= track.t.back())
            throw DataError("scenario " + sid + " agent " + aid + ": timestamps must strictly increase");
        track.t.push_back(t);
        track.x.push_back(parse_double(row[static_cast<std::size_t>(c_x)]));
        track.y.push_back(parse_double(row[static_cast<std::size_t>(c_y)]));
        track.v.push_back(parse_double(row[static_cast<std::size_t>(c_v)]));
    }

    for (auto& scen : scenarios) {
        if (scen.agents.empty()) throw DataError("scenario " + scen.scenario_id + " has no agents");
        scen.ego_index = 0;
        for (std::size_t i = 0; i < scen.agents.size(); ++i)
            if (scen.agents[i].agent_id == "ego") scen.ego_index = i;
        const auto& grid = scen.agents[scen.ego_index].t;
        if (grid.empty())
            throw DataError("scenario " + scen.scenario_id + " has an empty ego track");
        for (const auto& a : scen.agents)
            if (a.t != grid)
                throw DataError("scenario " + scen.scenario_id + " agent " + a.agent_id +
                                ": timestamp grid differs from ego");
    }
    return scenarios;
}

struct KinematicThresholds {
    double collision_distance = 0.5;  // meters
    double near_miss_distance = 2.0;  // meters
    double ttc_threshold = 1.5;       // seconds
    double harsh_accel = 3.0;         // m/s^2, magnitude
    double speed_limit_mps = 13.41;   // 30 mph

    json to_json() const {
        return json{{"collision_distance", collision_distance},
                    {"near_miss_distance", near_miss_distance},
                    {"ttc_threshold", ttc_threshold},
                    {"harsh_accel", harsh_accel},
                    {"speed_limit_mps", speed_limit_mps}};
    }

    static KinematicThresholds from_json(const json& j) {
        KinematicThresholds t;
        if (j.contains("collision_distance")) t.collision_distance = j.at("collision_distance").get<double>();
        if (j.contains("near_miss_distance")) t.near_miss_distance = j.at("near_miss_distance").get<double>();
        if (j.contains("ttc_threshold")) t.ttc_threshold = j.at("ttc_threshold").get<double>();
        if (j.contains("harsh_accel")) t.harsh_accel = j.at("harsh_accel").get<double>();
        if (j.contains("speed_limit_mps")) t.speed_limit_mps = j.at("speed_limit_mps").get<double>();
        return t;
    }
};

struct AggressiveFlags {
    bool hard_accel = false;
    bool hard_brake = false;
    bool speeding = false;

    int count() const { return (hard_accel ? 1 : 0) + (hard_brake ? 1 : 0) + (speeding ? 1 : 0); }
};

struct KinematicFeatures {
    double mean_speed = 0.0;
    double max_speed = 0.0;
    double min_distance = std::numeric_limits<double>::infinity();
    double min_ttc = std::numeric_limits<double>::infinity();
    bool collision_flag = false;
    bool near_miss_flag = false;
    AggressiveFlags aggressive;
    std::size_t n_pedestrians = 0;
    std::size_t n_cyclists = 0;
};

// Derives per-scenario driving features.  Time to collision assumes constant
// closing speed over each step: the separation series is forward-differenced,
// so the final timestep contributes no sample.  Separations that are opening
// (closing speed <= 0) contribute no sample either.
inline KinematicFeatures extract_kinematics(const TrajectoryScenario& scen,
                                            const KinematicThresholds& thresholds = {}) {
    const AgentTrack& ego = scen.ego();
    const std::size_t n = ego.steps();
    KinematicFeatures f;

    double speed_sum = 0.0;
    for (double v : ego.v) {
        speed_sum += v;
        f.max_speed = std::max(f.max_speed, v);
    }
    f.mean_speed = n > 0 ? speed_sum / static_cast<double>(n) : 0.0;

    for (std::size_t a = 0; a < scen.agents.size(); ++a) {
        if (a == scen.ego_index) continue;
        const AgentTrack& other = scen.agents[a];
        if (other.type == AgentType::Pedestrian) ++f.n_pedestrians;
        if (other.type == AgentType::Cyclist) ++f.n_cyclists;
        std::vector<double> dist(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double dx = ego.x[i] - other.x[i];
            const double dy = ego.y[i] - other.y[i];
            dist[i] = std::hypot(dx, dy);
            f.min_distance = std::min(f.min_distance, dist[i]);
        }
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double dt = ego.t[i + 1] - ego.t[i];
            if (dt <= 0.0) continue;
            const double closing = (dist[i] - dist[i + 1]) / dt;
            if (closing > 0.0) f.min_ttc = std::min(f.min_ttc, dist[i] / closing);
        }
    }

    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double dt = ego.t[i + 1] - ego.t[i];
        if (dt <= 0.0) continue;
        const double accel = (ego.v[i + 1] - ego.v[i]) / dt;
        if (accel > thresholds.harsh_accel) f.aggressive.hard_accel = true;
        if (accel < -thresholds.harsh_accel) f.aggressive.hard_brake = true;
    }
    f.aggressive.speeding = f.max_speed > thresholds.speed_limit_mps;

    f.collision_flag = f.min_distance < thresholds.collision_distance;
    f.near_miss_flag = !f.collision_flag && (f.min_distance < thresholds.near_miss_distance ||
                                             f.min_ttc < thresholds.ttc_threshold);
    return f;
}

enum class ScenarioType { Safe = 0, NearMiss = 1, Collision = 2 };

inline std::string_view scenario_type_name(ScenarioType t) {
    switch (t) {
        case ScenarioType::Safe: return "safe";
        case ScenarioType::NearMiss: return "near_miss";
        case ScenarioType::Collision: return "collision";
    }
    return "?";
}

inline ScenarioType scenario_type(const KinematicFeatures& f) {
    if (f.collision_flag) return ScenarioType::Collision;
    if (f.near_miss_flag) return ScenarioType::NearMiss;
    return ScenarioType::Safe;
}

}  // namespace safescore
