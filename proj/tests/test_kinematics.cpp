#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "safescore/safescore.hpp"

using namespace safescore;
namespace fs = std::filesystem;

namespace {

AgentTrack track(std::string id, AgentType type, std::vector<double> t, std::vector<double> x,
                 std::vector<double> y, std::vector<double> v) {
    AgentTrack a;
    a.agent_id = std::move(id);
    a.type = type;
    a.t = std::move(t);
    a.x = std::move(x);
    a.y = std::move(y);
    a.v = std::move(v);
    return a;
}

TrajectoryScenario approach_scenario(double ego_speed, double other_x) {
    // ego drives +x at constant speed for two seconds toward a standing
    // pedestrian; final separation controls the scenario type
    TrajectoryScenario s;
    s.scenario_id = "s";
    s.agents.push_back(track("ego", AgentType::Vehicle, {0, 1, 2},
                             {0, ego_speed, 2 * ego_speed}, {0, 0, 0},
                             {ego_speed, ego_speed, ego_speed}));
    s.agents.push_back(track("p1", AgentType::Pedestrian, {0, 1, 2}, {other_x, other_x, other_x},
                             {0, 0, 0}, {0, 0, 0}));
    s.ego_index = 0;
    return s;
}

fs::path temp_file(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "safescore_kin";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST(Kinematics, SpeedsAndCountsFromTracks) {
    TrajectoryScenario s = approach_scenario(10.0, 100.0);
    s.agents.push_back(track("c1", AgentType::Cyclist, {0, 1, 2}, {50, 50, 50}, {20, 20, 20},
                             {0, 0, 0}));
    const KinematicFeatures f = extract_kinematics(s);
    EXPECT_DOUBLE_EQ(f.mean_speed, 10.0);
    EXPECT_DOUBLE_EQ(f.max_speed, 10.0);
    EXPECT_EQ(f.n_pedestrians, 1u);
    EXPECT_EQ(f.n_cyclists, 1u);
    EXPECT_FALSE(f.aggressive.hard_accel);
    EXPECT_FALSE(f.aggressive.hard_brake);
    EXPECT_FALSE(f.aggressive.speeding);
}

TEST(Kinematics, TimeToCollisionForwardDifference) {
    // separations 30, 20, 10 at 1 Hz: samples 30/10 and 20/10, none from the
    // final timestep
    const TrajectoryScenario s = approach_scenario(10.0, 30.0);
    const KinematicFeatures f = extract_kinematics(s);
    EXPECT_DOUBLE_EQ(f.min_distance, 10.0);
    EXPECT_DOUBLE_EQ(f.min_ttc, 2.0);
    EXPECT_EQ(scenario_type(f), ScenarioType::Safe);
}

TEST(Kinematics, OpeningSeparationYieldsNoTtc) {
    TrajectoryScenario s = approach_scenario(10.0, -5.0);  // pedestrian behind
    const KinematicFeatures f = extract_kinematics(s);
    EXPECT_TRUE(std::isinf(f.min_ttc));
    EXPECT_DOUBLE_EQ(f.min_distance, 5.0);
    EXPECT_EQ(scenario_type(f), ScenarioType::Safe);
}

TEST(Kinematics, SingleStepHasNoDerivatives) {
    TrajectoryScenario s;
    s.scenario_id = "one";
    s.agents.push_back(track("ego", AgentType::Vehicle, {0}, {0}, {0}, {20}));
    s.agents.push_back(track("p", AgentType::Pedestrian, {0}, {3}, {0}, {0}));
    const KinematicFeatures f = extract_kinematics(s);
    EXPECT_TRUE(std::isinf(f.min_ttc));
    EXPECT_DOUBLE_EQ(f.min_distance, 3.0);
    EXPECT_FALSE(f.aggressive.hard_accel);
    EXPECT_TRUE(f.aggressive.speeding);  // 20 m/s over the 13.41 limit
}

TEST(Kinematics, ScenarioTypeThresholds) {
    // near miss by distance: closest approach 1.5 m
    EXPECT_EQ(scenario_type(extract_kinematics(approach_scenario(15.0, 31.5))),
              ScenarioType::NearMiss);
    // near miss by time: separation stays wide but the closing rate is high
    TrajectoryScenario fast = approach_scenario(22.0, 52.0);
    const KinematicFeatures ff = extract_kinematics(fast);
    EXPECT_GE(ff.min_distance, 2.0);
    EXPECT_LT(ff.min_ttc, 1.5);
    EXPECT_EQ(scenario_type(ff), ScenarioType::NearMiss);
    // collision: closest approach 0.2 m
    EXPECT_EQ(scenario_type(extract_kinematics(approach_scenario(20.0, 40.2))),
              ScenarioType::Collision);

    KinematicFeatures manual;
    manual.collision_flag = true;
    manual.near_miss_flag = true;
    EXPECT_EQ(scenario_type(manual), ScenarioType::Collision);
}

TEST(Kinematics, HarshAccelerationUsesStrictMagnitude) {
    TrajectoryScenario s;
    s.scenario_id = "acc";
    s.agents.push_back(track("ego", AgentType::Vehicle, {0, 1, 2, 3}, {0, 1, 6, 7}, {0, 0, 0, 0},
                             {1, 5, 1, 1}));
    const KinematicFeatures f = extract_kinematics(s);
    EXPECT_TRUE(f.aggressive.hard_accel);   // +4 m/s^2
    EXPECT_TRUE(f.aggressive.hard_brake);   // -4 m/s^2
    EXPECT_EQ(f.aggressive.count(), 2);

    TrajectoryScenario b;
    b.scenario_id = "edge";
    b.agents.push_back(track("ego", AgentType::Vehicle, {0, 1}, {0, 3}, {0, 0}, {0, 3}));
    const KinematicFeatures fb = extract_kinematics(b);
    EXPECT_FALSE(fb.aggressive.hard_accel);  // exactly 3 m/s^2 is not harsh
    EXPECT_FALSE(fb.aggressive.speeding);
}

TEST(KinematicThresholds, PartialJsonKeepsDefaults) {
    const KinematicThresholds t = KinematicThresholds::from_json(json{{"ttc_threshold", 2.5}});
    EXPECT_DOUBLE_EQ(t.ttc_threshold, 2.5);
    EXPECT_DOUBLE_EQ(t.collision_distance, 0.5);
    EXPECT_DOUBLE_EQ(t.near_miss_distance, 2.0);
    const KinematicThresholds rt = KinematicThresholds::from_json(t.to_json());
    EXPECT_EQ(rt.to_json(), t.to_json());
}

TEST(TrajectoryIo, LongFormatCsvRoundTrip) {
    const fs::path p = temp_file("good.csv");
    write_text_file(p,
                    "scenario_id,agent_id,agent_type,t,x,y,v\n"
                    "a,car,vehicle,0,0,0,10\n"
                    "a,car,vehicle,1,10,0,10\n"
                    "a,ego,vehicle,0,5,5,8\n"
                    "a,ego,vehicle,1,13,5,8\n"
                    "a,ped,pedestrian,0,20,0,0\n"
                    "a,ped,pedestrian,1,20,0,0\n"
                    "b,only,vehicle,0,0,0,1\n");
    const auto scenarios = load_trajectories(p);
    ASSERT_EQ(scenarios.size(), 2u);
    EXPECT_EQ(scenarios[0].scenario_id, "a");
    ASSERT_EQ(scenarios[0].agents.size(), 3u);
    EXPECT_EQ(scenarios[0].ego_index, 1u);  // the agent literally named ego
    EXPECT_EQ(scenarios[0].ego().agent_id, "ego");
    EXPECT_EQ(scenarios[0].agents[2].type, AgentType::Pedestrian);
    EXPECT_EQ(scenarios[0].ego().v, (std::vector<double>{8, 8}));
    EXPECT_EQ(scenarios[1].ego_index, 0u);  // no ego id: first agent drives
}

TEST(TrajectoryIo, RejectsMalformedInput) {
    const fs::path bad_time = temp_file("bad_time.csv");
    write_text_file(bad_time,
                    "scenario_id,agent_id,agent_type,t,x,y,v\n"
                    "a,ego,vehicle,1,0,0,1\n"
                    "a,ego,vehicle,1,1,0,1\n");
    EXPECT_THROW(load_trajectories(bad_time), DataError);

    const fs::path bad_grid = temp_file("bad_grid.csv");
    write_text_file(bad_grid,
                    "scenario_id,agent_id,agent_type,t,x,y,v\n"
                    "a,ego,vehicle,0,0,0,1\n"
                    "a,ped,pedestrian,0.5,1,0,0\n");
    EXPECT_THROW(load_trajectories(bad_grid), DataError);

    const fs::path bad_type = temp_file("bad_type.csv");
    write_text_file(bad_type,
                    "scenario_id,agent_id,agent_type,t,x,y,v\n"
                    "a,ego,scooter,0,0,0,1\n");
    EXPECT_THROW(load_trajectories(bad_type), DataError);

    const fs::path bad_cols = temp_file("bad_cols.csv");
    write_text_file(bad_cols, "scenario_id,agent_id,t,x,y,v\na,ego,0,0,0,1\n");
    EXPECT_THROW(load_trajectories(bad_cols), DataError);
}

TEST(TrajectoryValidation, TypesOrderWhenModelRanksSpeed) {
    const FeatureEngineer eng(default_schema(), CodeMap::defaults());
    const FeatureSchema& s = eng.schema();
    // crash probability keyed to SPEED_OVER: under limit 0.1, slight 0.3, high 0.7
    const int fi = static_cast<int>(s.index_of("SPEED_OVER"));
    json hi{{"f", fi}, {"t", 10.0}, {"n", json::array({4, 4})},
            {"l", json{{"n", json::array({3, 1})}, {"p", 0.3}}},
            {"r", json{{"n", json::array({1, 3})}, {"p", 0.7}}}};
    json root{{"f", fi}, {"t", 0.0}, {"n", json::array({10, 5})},
              {"l", json{{"n", json::array({6, 1})}, {"p", 0.1}}},
              {"r", hi}};
    json j{{"format_version", "1"},
           {"schema_id", s.id()},
           {"n_features", s.size()},
           {"params", ForestParams{}.to_json()},
           {"training", {{"seed", 0}, {"n_train_rows", 15}, {"oob_accuracy", -1.0}}},
           {"trees", json::array({root})}};
    const Forest model = Forest::from_json(j);

    // 10 m/s ~ 22 mph (under), 15 m/s ~ 34 mph (+4), 20 m/s ~ 45 mph (+15)
    std::vector<TrajectoryScenario> scenarios;
    scenarios.push_back(approach_scenario(10.0, 100.0));
    scenarios[0].scenario_id = "safe1";
    scenarios.push_back(approach_scenario(15.0, 31.5));
    scenarios[1].scenario_id = "near1";
    scenarios.push_back(approach_scenario(20.0, 40.2));
    scenarios[2].scenario_id = "hit1";

    const TrajectoryValidationReport r = validate_trajectories(
        scenarios, model, eng, CalibrationTable::defaults(), RiskBands{});
    ASSERT_EQ(r.scenarios.size(), 3u);
    EXPECT_EQ(r.scenarios[0].type, ScenarioType::Safe);
    EXPECT_EQ(r.scenarios[1].type, ScenarioType::NearMiss);
    EXPECT_EQ(r.scenarios[2].type, ScenarioType::Collision);
    ASSERT_EQ(r.per_type.size(), 3u);
    EXPECT_EQ(r.per_type[0].n, 1u);
    EXPECT_NEAR(r.per_type[0].mean_p_crash, 0.1, 1e-9);
    EXPECT_NEAR(r.per_type[1].mean_p_crash, 0.3, 1e-9);
    EXPECT_NEAR(r.per_type[2].mean_p_crash, 0.7, 1e-9);
    EXPECT_TRUE(r.ordered);
}

TEST(TrajectoryValidation, FlatModelIsNotOrdered) {
    const FeatureEngineer eng(default_schema(), CodeMap::defaults());
    json tree{{"n", json::array({1, 1})}, {"p", 0.5}};
    json j{{"format_version", "1"},
           {"schema_id", eng.schema().id()},
           {"n_features", eng.schema().size()},
           {"params", ForestParams{}.to_json()},
           {"training", {{"seed", 0}, {"n_train_rows", 2}, {"oob_accuracy", -1.0}}},
           {"trees", json::array({tree})}};
    const Forest model = Forest::from_json(j);

    std::vector<TrajectoryScenario> scenarios;
    scenarios.push_back(approach_scenario(10.0, 100.0));
    scenarios[0].scenario_id = "s1";
    scenarios.push_back(approach_scenario(20.0, 40.2));
    scenarios[1].scenario_id = "c1";
    const TrajectoryValidationReport r = validate_trajectories(
        scenarios, model, eng, CalibrationTable::defaults(), RiskBands{});
    EXPECT_FALSE(r.ordered);  // equal means cannot strictly increase
}
