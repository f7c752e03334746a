#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "usv/controllers.hpp"
#include "usv/disturbances.hpp"
#include "usv/estimation.hpp"
#include "usv/guidance.hpp"
#include "usv/reachability.hpp"

namespace usv {

inline constexpr int kScenarioSchemaVersion = 1;

struct TriggerSpec {
    enum class Kind { Start, Time, AlongTrack, TurnComplete, StationAcquired };
    Kind kind = Kind::Start;
    double value = 0.0; // seconds (time, or delay after station acquisition) or metres
    int index = 0;      // turn number for turn_complete
};

struct DisturbanceSpec {
    enum class Type { ThrusterFault, DragDevice, HullWash, BankEffect };
    Type type = Type::ThrusterFault;
    std::string name;
    TriggerSpec trigger;
    int vehicle = 0; // -1: every vehicle
    FaultConfig fault;
    DragDeviceConfig drag;
    HullWashConfig hull_wash;
    BankEffectConfig bank;
};

struct RatesConfig {
    int base = 40, imu = 40, gps = 5, helm = 4, controller = 10, estimator = 10, reachability = 10;
    void validate() const;
    int period(int rate) const { return base / rate; }
};

struct SensorConfig {
    bool noise = true;
    double pos_sigma = 0.5;
    double heading_sigma_deg = 1.0;
    double yaw_rate_sigma_deg = 0.5;
    double u_sigma = 0.05, v_sigma = 0.05;
    double share_latency = 0.0; // s, guide state seen by the approach ship (UNREP)
};

// Optional constant + white bias on the matched channels, command units.
struct NaturalDisturbance {
    double surge_bias = 0.0, yaw_bias = 0.0;
    double surge_sigma = 0.0, yaw_sigma = 0.0;
};

struct MissionConfig {
    enum class Type { LegRun, Straight, Unrep, Canal };
    Type type = Type::Straight;
    double speed = 1.0;
    LegRunPath legrun;
    std::vector<Vec2> path{Vec2(0.0, 0.0), Vec2(100.0, 0.0)}; // straight, canal centreline, UNREP guide track
    TracklineGains trackline;
    double L1 = 10.0;
    DecisionGrid grid;
    // UNREP
    double station_along = 0.0, station_cross = 5.0;
    Vec2 approach_start{-12.0, 9.0};
    double approach_speed = 1.0;
    UnrepGains unrep;
    double station_tol = 1.0;
    double separation_min = 2.0; // lateral separation below this is a violation
    double abort_distance = 1.5; // centre distance below this aborts the run
};

struct EstimatorConfig {
    bool enabled = false;
    MheConfig mhe = MheConfig::vehicle_default();
};

struct ReachConfig {
    bool enabled = false;
    int horizon = 20;
    double gamma = 3.0;
    UnsafeRegion unsafe;
};

struct ScenarioConfig {
    int schema_version = kScenarioSchemaVersion;
    std::string name = "scenario";
    uint64_t seed = 0;
    double duration = 300.0;
    ControllerKind controller = ControllerKind::LqrPi;
    ControllerTuning tuning;
    VehicleModel model;            // nominal, as seen by controllers and estimators
    double truth_lambda_1 = 1.0;   // control effectiveness of the simulated plant
    double truth_lambda_2 = 1.0;
    HelmFilterState helm;
    MissionConfig mission;
    std::vector<DisturbanceSpec> disturbances;
    RatesConfig rates;
    SensorConfig sensors;
    NaturalDisturbance natural;
    EstimatorConfig estimator;
    ReachConfig reach;

    int vehicles() const { return mission.type == MissionConfig::Type::Unrep ? 2 : 1; }
    void validate() const;
};

nlohmann::json to_json(const ScenarioConfig& cfg);
// Missing keys take defaults except `seed`; unknown keys are rejected.
ScenarioConfig scenario_from_json(const nlohmann::json& j);
ScenarioConfig load_scenario(const std::string& path);

std::vector<std::string> builtin_scenario_names();
ScenarioConfig builtin_scenario(const std::string& name);

} // namespace usv
