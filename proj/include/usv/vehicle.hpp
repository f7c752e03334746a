#pragma once

#include <array>

#include <Eigen/Dense>

#include "usv/common.hpp"

namespace usv {

struct Pose {
    double x = 0.0;     // m north
    double y = 0.0;     // m east
    double theta = 0.0; // rad from north, (-pi, pi]
};

struct BodyVelocity {
    double u = 0.0; // surge m/s
    double v = 0.0; // sway m/s
    double r = 0.0; // yaw rate rad/s
};

// State ordering used everywhere a flat vector is needed: (x, y, theta, u, v, r).
using Vec6 = Eigen::Matrix<double, 6, 1>;
using DisturbanceVector = Vec6;

enum StateIndex { kX = 0, kY = 1, kTheta = 2, kU = 3, kV = 4, kR = 5 };

struct VehicleState {
    Pose pose;
    BodyVelocity vel;

    Vec6 to_vec() const;
    static VehicleState from_vec(const Vec6& s);
};

struct LinearSpeedModel {
    double a_p1 = -24.0;
    double b_p1 = 0.618;
    double lambda_1 = 1.0;
};

struct LinearSwayYawModel {
    Eigen::Matrix2d A_p = (Eigen::Matrix2d() << -0.023, -0.0075, 0.0, -61.0).finished();
    Eigen::Vector2d B_p = Eigen::Vector2d(-0.0009, 0.90);
    double lambda_2 = 1.0;
};

// Everything f_cl needs besides the policy. Thruster commands map onto the
// two dynamic channels as thrust = (uL+uR)/2 and
// rudder = (uL-uR)*R_max/(2*thrust_ref), the inverse of the mixer at trim.
struct VehicleModel {
    LinearSpeedModel speed;
    LinearSwayYawModel sway_yaw;
    double rudder_max = 50.0;
    double thruster_limit = 100.0;
    double thrust_ref = 24.0 / 0.618; // trim command for 1 m/s
    int substeps = 8;                 // Euler substeps per controller period

    void validate() const;
};

Pose kinematics_step(const Pose& pose, const BodyVelocity& vel, double dt);

double speed_dynamics_step(double u_sog, double u_thr, double matched_bias,
                           const LinearSpeedModel& model, double dt);

std::pair<double, double> sway_yaw_dynamics_step(double v, double r, double u_rud, double matched_bias,
                                                 const LinearSwayYawModel& model, double dt);

double speed_over_ground(const BodyVelocity& vel);

// Thruster pair -> equivalent (thrust, rudder) inputs of the linear channels.
std::pair<double, double> thrusters_to_channels(double uL, double uR, const VehicleModel& m);

} // namespace usv
