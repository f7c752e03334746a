#include "usv/controllers.hpp"

namespace usv {

ControllerKind controller_kind_from_string(const std::string& s)
{
    if (s == "pid") return ControllerKind::Pid;
    if (s == "lqr-pi" || s == "lqr_pi" || s == "lqrpi") return ControllerKind::LqrPi;
    if (s == "mrac") return ControllerKind::Mrac;
    throw ConfigError("unknown controller '" + s + "' (expected pid, lqr-pi or mrac)");
}

const char* to_string(ControllerKind k)
{
    switch (k) {
    case ControllerKind::Pid: return "pid";
    case ControllerKind::LqrPi: return "lqr-pi";
    case ControllerKind::Mrac: return "mrac";
    }
    return "?";
}

InnerLoopController::InnerLoopController(ControllerKind kind, const VehicleModel& model, ControllerTuning tuning,
                                         double dt)
    : kind_(kind), model_(model), tuning_(tuning), dt_(dt)
{
    if (!(dt > 0.0)) throw ConfigError("controller dt must be positive");
    // Controllers only ever see the nominal model.
    model_.speed.lambda_1 = 1.0;
    model_.sway_yaw.lambda_2 = 1.0;
    d_u_ = design_speed_channel(model_.speed);
    d_r_ = design_yaw_channel(model_.sway_yaw);
    gains_ = gains_from_designs(d_u_, d_r_);
    reg_u_ = RbfRegressor::speed_default();
    reg_r_ = RbfRegressor::yaw_default();
    const MracTuning& mt = tuning_.mrac;
    ad_u_ = AdaptiveState::make(reg_u_.size() + 1, mt.gamma_bl_speed, mt.gamma_rbf_speed, d_u_.P, mt.deadzone_speed, mt.bound,
                                 mt.bl_lower, mt.bl_upper);
    ad_r_ = AdaptiveState::make(reg_r_.size() + 1, mt.gamma_bl_yaw, mt.gamma_rbf_yaw, d_r_.P, mt.deadzone_yaw, mt.bound, mt.bl_lower,
                                 mt.bl_upper);
    rm_u_ = reference_model_for(d_u_, model_.substeps);
    rm_r_ = reference_model_for(d_r_, model_.substeps);
    ref_u_.x = Eigen::VectorXd::Zero(2);
    ref_r_.x = Eigen::VectorXd::Zero(3);
}

void InnerLoopController::warm_start(double u0)
{
    const double trim = model_.thrust_ref * u0;
    integ_.e_uI = -(trim + gains_.k_u_p * u0) / gains_.k_u_i;
    integ_.e_rI = 0.0;
    pid_ = PidState{};
    ref_u_.x << integ_.e_uI, u0;
    ref_r_.x.setZero();
}

bool InnerLoopController::projection_respected() const
{
    auto ok = [](const AdaptiveState& a) {
        return (a.theta_hat.array() >= a.lower.array()).all() && (a.theta_hat.array() <= a.upper.array()).all();
    };
    return ok(ad_u_) && ok(ad_r_);
}

ControllerOutput InnerLoopController::step(const ControllerInput& in)
{
    ControllerOutput out;
    const double u_sog = std::hypot(in.u, in.v);
    const double tl = tuning_.thr_limit, rl = tuning_.rud_limit;
    if (kind_ == ControllerKind::Pid) {
        PidOutput p = pid_baseline_step(u_sog, in.u_des, in.theta, in.theta_DES, in.r, pid_, tuning_.pid, dt_, tl, rl);
        pid_ = p.state;
        out.u_thr = p.u_thr;
        out.u_rud = p.u_rud;
    } else if (kind_ == ControllerKind::LqrPi) {
        ChannelOutput s = lqr_pi_speed_step(u_sog, in.u_des, integ_, gains_, dt_, tl);
        integ_.e_uI = s.integ.e_uI;
        ChannelOutput y = lqr_pi_yaw_step(in.v, in.r, in.r_des, integ_, gains_, dt_, rl);
        integ_.e_rI = y.integ.e_rI;
        out.u_thr = s.command;
        out.u_rud = y.command;
    } else {
        const LqrPiGains& g = gains_;
        // speed channel
        integ_.e_uI += dt_ * (u_sog - in.u_des);
        Eigen::Vector2d xu(integ_.e_uI, u_sog);
        const double ubl_u = -(g.k_u_i * xu[0] + g.k_u_p * xu[1]);
        MracStepResult mu = mrac_step(xu, ref_u_, ubl_u, ad_u_, reg_u_, u_sog, d_u_.B, rm_u_, in.u_des, dt_);
        ad_u_ = mu.adaptive;
        ref_u_ = mu.ref;
        const double uu = ubl_u + mu.u_ad;
        out.u_thr = clamp_val(uu, -tl, tl);
        integ_.e_uI += dt_ * g.k_u_aw * (uu - out.u_thr);
        // yaw channel
        integ_.e_rI += dt_ * (in.r - in.r_des);
        Eigen::Vector3d xr(integ_.e_rI, in.v, in.r);
        const double ubl_r = -(g.k_r_i * xr[0] + g.k_v_p * xr[1] + g.k_r_p * xr[2]);
        MracStepResult mr = mrac_step(xr, ref_r_, ubl_r, ad_r_, reg_r_, in.r, d_r_.B, rm_r_, in.r_des, dt_);
        ad_r_ = mr.adaptive;
        ref_r_ = mr.ref;
        const double ur = ubl_r + mr.u_ad;
        out.u_rud = clamp_val(ur, -rl, rl);
        integ_.e_rI += dt_ * g.k_r_aw * (ur - out.u_rud);
        out.u_ad_thr = last_u_ad_thr_ = mu.u_ad;
        out.u_ad_rud = last_u_ad_rud_ = mr.u_ad;
        out.e_speed = mu.error.norm();
        out.e_yaw = mr.error.norm();
        out.theta_bl_speed = ad_u_.theta_hat[0];
        out.theta_bl_yaw = ad_r_.theta_hat[0];
        out.theta_rbf_speed = ad_u_.theta_hat.tail(ad_u_.theta_hat.size() - 1).cwiseAbs().maxCoeff();
        out.theta_rbf_yaw = ad_r_.theta_hat.tail(ad_r_.theta_hat.size() - 1).cwiseAbs().maxCoeff();
    }
    auto [uL, uR] = allocate_thrusters(out.u_thr, out.u_rud, model_.rudder_max, model_.thruster_limit);
    out.uL = uL;
    out.uR = uR;
    return out;
}

FrozenTracklinePolicy InnerLoopController::frozen_policy(const Segment& seg, double u_des, const TracklineGains& guide,
                                                         double tau_theta) const
{
    if (kind_ == ControllerKind::Pid) throw Error("reachability policy: PID baseline is not supported");
    FrozenTracklinePolicy p;
    p.azimuth = seg.azimuth();
    p.p1x = seg.p1[0];
    p.p1y = seg.p1[1];
    p.u_des = u_des;
    p.guide = guide;
    p.tau_theta = tau_theta;
    p.gains = gains_;
    p.e_uI = integ_.e_uI;
    p.e_rI = integ_.e_rI;
    if (kind_ == ControllerKind::Mrac) {
        p.u_ad_thr = last_u_ad_thr_;
        p.u_ad_rud = last_u_ad_rud_;
    }
    p.thr_limit = tuning_.thr_limit;
    p.rud_limit = tuning_.rud_limit;
    return p;
}

} // namespace usv
