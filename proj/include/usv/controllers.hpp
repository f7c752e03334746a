#pragma once

#include <optional>
#include <string>

#include "usv/closed_loop.hpp"
#include "usv/control.hpp"

namespace usv {

enum class ControllerKind { Pid, LqrPi, Mrac };

ControllerKind controller_kind_from_string(const std::string& s);
const char* to_string(ControllerKind k);

struct MracTuning {
    double gamma_bl_speed = 10.0, gamma_rbf_speed = 10.0;
    double gamma_bl_yaw = 0.1, gamma_rbf_yaw = 400.0;
    double deadzone_speed = 0.02, deadzone_yaw = 0.02;
    double bound = 50.0;
    double bl_lower = -1.0, bl_upper = 0.5;
};

struct ControllerTuning {
    PidGains pid;
    MracTuning mrac;
    double thr_limit = 100.0;
    double rud_limit = 50.0;
};

struct ControllerInput {
    double u = 0.0, v = 0.0, r = 0.0, theta = 0.0; // measured
    double u_des = 0.0, r_des = 0.0, theta_DES = 0.0;
};

struct ControllerOutput {
    double u_thr = 0.0, u_rud = 0.0; // saturated channel commands
    double uL = 0.0, uR = 0.0;       // mixed and saturated thruster commands
    double u_ad_thr = 0.0, u_ad_rud = 0.0;
    double e_speed = 0.0, e_yaw = 0.0; // reference-model error norms (MRAC)
    double theta_bl_speed = 0.0, theta_bl_yaw = 0.0;   // weight on u_bl
    double theta_rbf_speed = 0.0, theta_rbf_yaw = 0.0; // max |weight| over bias and RBFs
};

class InnerLoopController {
public:
    InnerLoopController(ControllerKind kind, const VehicleModel& model, ControllerTuning tuning, double dt);

    ControllerKind kind() const { return kind_; }
    // Integrators set so the first command holds steady surge at u0.
    void warm_start(double u0);
    ControllerOutput step(const ControllerInput& in);

    const LqrPiGains& gains() const { return gains_; }
    const IntegratorState& integrators() const { return integ_; }
    const AdaptiveState& adaptive_speed() const { return ad_u_; }
    const AdaptiveState& adaptive_yaw() const { return ad_r_; }
    const ChannelDesign& speed_design() const { return d_u_; }
    const ChannelDesign& yaw_design() const { return d_r_; }
    bool projection_respected() const;

    // Current loop frozen around a trackline segment for reachability.
    FrozenTracklinePolicy frozen_policy(const Segment& seg, double u_des, const TracklineGains& guide,
                                        double tau_theta) const;

private:
    ControllerKind kind_;
    VehicleModel model_;
    ControllerTuning tuning_;
    double dt_;
    ChannelDesign d_u_, d_r_;
    LqrPiGains gains_;
    IntegratorState integ_;
    PidState pid_;
    RbfRegressor reg_u_, reg_r_;
    AdaptiveState ad_u_, ad_r_;
    ReferenceModel rm_u_, rm_r_;
    ReferenceModelState ref_u_, ref_r_;
    double last_u_ad_thr_ = 0.0, last_u_ad_rud_ = 0.0;
};

} // namespace usv
