#pragma once

#include <optional>
#include <string>
#include <vector>

#include "usv/scenario.hpp"

namespace usv {

inline constexpr const char* kRunLogSchema = "usvsim.runlog/1";

struct ErrorStats {
    double rmse = 0.0;
    double rmsd = 0.0; // RMS deviation about the mean
};

struct MetricsSummary {
    ErrorStats speed;       // m/s
    ErrorStats heading;     // deg
    ErrorStats yaw_rate;    // rad/s
    ErrorStats position;    // m
    size_t samples = 0;
};

ErrorStats error_stats(const std::vector<double>& e);

struct EstimateRecord {
    Vec6 x_hat = Vec6::Zero();
    Vec6 Q_diag = Vec6::Zero();
    DisturbanceEstimate dist;
    bool diverged = false;
    int iterations = 0;
};

struct CertifyRecord {
    FrozenTracklinePolicy policy;
    bool safe = true;
    int first_violation = -1;
    std::vector<HyperRect> rsoa; // 6-dim, one per horizon step
};

struct VehicleTick {
    Vec6 truth = Vec6::Zero();
    Vec6 meas = Vec6::Zero();
    double u_DES = 0.0, theta_DES = 0.0, u_des = 0.0, r_des = 0.0;
    ControllerOutput cmd;
    double uL_applied = 0.0, uR_applied = 0.0;
};

struct TickRecord {
    int tick = 0;
    double t = 0.0;
    std::vector<VehicleTick> v; // own ship first
    std::vector<std::string> active;
    double progress = 0.0; // along-track distance of the own ship's path tracker
    double e_speed = 0.0, e_heading_deg = 0.0, e_yaw_rate = 0.0, e_position = 0.0;
    std::optional<EstimateRecord> est;
    std::optional<CertifyRecord> cert;
};

struct EventRecord {
    double t = 0.0;
    int tick = 0;
    std::string name;
    int vehicle = 0;
    std::string detail;
};

struct RunCounts {
    long ticks = 0, imu = 0, gps = 0, helm = 0, controller = 0, estimator = 0, certify = 0;
    long estimates = 0, certificates = 0;
};

struct RunLog {
    ScenarioConfig config;
    std::vector<TickRecord> ticks; // controller ticks
    std::vector<EventRecord> events;
    RunCounts counts;
    std::string outcome;  // complete, halt, abort, timeout
    double end_time = 0.0;
    bool projection_ok = true;
    double max_station_error = 0.0; // UNREP, after station acquisition
    bool has_event(const std::string& name) const;
};

RunLog run_scenario(const ScenarioConfig& cfg);

MetricsSummary compute_metrics(const RunLog& log);

} // namespace usv
