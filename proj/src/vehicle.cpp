#include "usv/vehicle.hpp"

#include <Eigen/Eigenvalues>

namespace usv {

Vec6 VehicleState::to_vec() const
{
    Vec6 s;
    s << pose.x, pose.y, pose.theta, vel.u, vel.v, vel.r;
    return s;
}

VehicleState VehicleState::from_vec(const Vec6& s)
{
    return VehicleState{{s[kX], s[kY], s[kTheta]}, {s[kU], s[kV], s[kR]}};
}

void VehicleModel::validate() const
{
    if (!(speed.a_p1 < 0.0)) throw ConfigError("a_p1 must be negative");
    Eigen::EigenSolver<Eigen::Matrix2d> es(sway_yaw.A_p);
    for (int i = 0; i < 2; ++i)
        if (!(es.eigenvalues()[i].real() < 0.0)) throw ConfigError("A_p must be Hurwitz");
    if (!(rudder_max > 0.0) || !(thruster_limit > 0.0) || !(thrust_ref > 0.0))
        throw ConfigError("rudder_max, thruster_limit and thrust_ref must be positive");
    if (substeps < 1) throw ConfigError("substeps must be >= 1");
}

Pose kinematics_step(const Pose& p, const BodyVelocity& vel, double dt)
{
    if (!(dt > 0.0)) throw Error("kinematics_step: dt must be positive");
    for (double q : {p.x, p.y, p.theta, vel.u, vel.v, vel.r}) require_finite(q, "kinematics input");
    const double c = std::cos(p.theta), s = std::sin(p.theta);
    Pose out;
    out.x = p.x + dt * (vel.u * c - vel.v * s);
    out.y = p.y + dt * (vel.u * s + vel.v * c);
    out.theta = wrap_angle(p.theta + dt * vel.r);
    return out;
}

double speed_dynamics_step(double u_sog, double u_thr, double matched_bias, const LinearSpeedModel& m,
                           double dt)
{
    if (!(dt > 0.0)) throw Error("speed_dynamics_step: dt must be positive");
    double out = u_sog + dt * (m.a_p1 * u_sog + m.b_p1 * m.lambda_1 * (u_thr + matched_bias));
    require_finite(out, "surge speed");
    return out;
}

std::pair<double, double> sway_yaw_dynamics_step(double v, double r, double u_rud, double matched_bias,
                                                 const LinearSwayYawModel& m, double dt)
{
    if (!(dt > 0.0)) throw Error("sway_yaw_dynamics_step: dt must be positive");
    const double u_eff = m.lambda_2 * (u_rud + matched_bias);
    double vn = v + dt * (m.A_p(0, 0) * v + m.A_p(0, 1) * r + m.B_p[0] * u_eff);
    double rn = r + dt * (m.A_p(1, 0) * v + m.A_p(1, 1) * r + m.B_p[1] * u_eff);
    require_finite(vn, "sway");
    require_finite(rn, "yaw rate");
    return {vn, rn};
}

double speed_over_ground(const BodyVelocity& vel) { return std::hypot(vel.u, vel.v); }

std::pair<double, double> thrusters_to_channels(double uL, double uR, const VehicleModel& m)
{
    const double g = m.rudder_max / (2.0 * m.thrust_ref);
    return {0.5 * uL + 0.5 * uR, g * uL + -g * uR};
}

} // namespace usv
