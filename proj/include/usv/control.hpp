#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "usv/vehicle.hpp"

namespace usv {

struct LqrResult {
    Eigen::RowVectorXd K;
    Eigen::MatrixXd P;
};

// Stabilizing solution of A'P + PA - PB R^-1 B'P + Q = 0 and K = R^-1 B'P.
LqrResult solve_care_lqr(const Eigen::MatrixXd& A, const Eigen::VectorXd& B, const Eigen::MatrixXd& Q, double R);

// P with P A + A' P + Q = 0.
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A_ref, const Eigen::MatrixXd& Q);

// Servomechanism design for one channel, extended state (e_I, plant states...).
struct ChannelDesign {
    Eigen::MatrixXd A;      // extended open loop
    Eigen::VectorXd B;
    Eigen::VectorXd B_ref;  // command input of the integrator row (-1)
    Eigen::MatrixXd Q;
    double R = 1.0;
    Eigen::RowVectorXd K;
    Eigen::MatrixXd P_care;
    Eigen::MatrixXd A_ref;  // A - B K
    Eigen::MatrixXd P;      // Lyapunov solution for A_ref with identity weight
    int output_index = 1;   // extended-state index of the regulated output
};

ChannelDesign design_speed_channel(const LinearSpeedModel& m, const Eigen::Matrix2d& Q = Eigen::Vector2d(150.0, 1.0).asDiagonal(),
                                   double R = 2.0);
ChannelDesign design_yaw_channel(const LinearSwayYawModel& m,
                                 const Eigen::Matrix3d& Q = Eigen::Vector3d(100.0, 10.0, 10.0).asDiagonal(),
                                 double R = 0.01);

struct LqrPiGains {
    double k_u_p = 0.0, k_u_i = 0.0;
    double k_v_p = 0.0, k_r_p = 0.0, k_r_i = 0.0;
    double k_u_aw = 0.1407, k_r_aw = 1.1667;
};

LqrPiGains gains_from_designs(const ChannelDesign& speed, const ChannelDesign& yaw);
LqrPiGains synthesize_gains(const VehicleModel& m);

struct IntegratorState {
    double e_uI = 0.0;
    double e_rI = 0.0;
};

struct ChannelOutput {
    double command = 0.0;     // saturated
    double unsaturated = 0.0;
    IntegratorState integ;
};

// Discrete LQR-PI laws in regulator sign convention u = -K x_ext. The
// integrator is advanced first; back-calculation anti-windup acts on the
// stored integrator after saturation. `bias` is an additive term (u_ad).
ChannelOutput lqr_pi_speed_step(double u_sog, double u_des, const IntegratorState& integ, const LqrPiGains& g,
                                double dt, double limit = 100.0, double bias = 0.0);
ChannelOutput lqr_pi_yaw_step(double v, double r, double r_des, const IntegratorState& integ, const LqrPiGains& g,
                              double dt, double limit = 50.0, double bias = 0.0);

std::pair<double, double> allocate_thrusters(double u_thr, double u_rud, double R_max = 50.0, double limit = 100.0);

struct RbfRegressor {
    std::vector<double> centers;
    double sigma = 1.0;

    static RbfRegressor speed_default();
    static RbfRegressor yaw_default();
    void validate() const;
    int size() const { return static_cast<int>(centers.size()) + 1; }
};

Eigen::VectorXd rbf_eval(const RbfRegressor& reg, double s);

struct AdaptiveState {
    Eigen::VectorXd theta_hat;
    Eigen::MatrixXd gamma;
    Eigen::MatrixXd P;
    double deadzone = 0.02;
    Eigen::VectorXd lower, upper; // rectangular projection bounds

    // Weight 0 multiplies u_bl, so the baseline gain becomes (1 - theta_0);
    // its bounds keep that factor in [1 - bl_upper, 1 - bl_lower].
    static AdaptiveState make(int n_weights, double gamma_bl, double gamma_rbf, const Eigen::MatrixXd& P,
                              double deadzone = 0.02, double bound = 50.0, double bl_lower = -1.0,
                              double bl_upper = 0.5);
};

// Sampled-data realization of the baseline closed loop for one channel:
// integrator at the control rate, plant part by Euler substeps under a held
// baseline command. Stored between ticks as (e_I of previous tick, plant
// states at the current tick).
struct ReferenceModel {
    Eigen::MatrixXd A_plant;
    Eigen::VectorXd B_plant;
    Eigen::RowVectorXd K;
    int output_index = 0; // index into plant states
    int substeps = 8;
};

ReferenceModel reference_model_for(const ChannelDesign& d, int substeps);

struct ReferenceModelState {
    Eigen::VectorXd x; // extended (e_I, plant...)
};

// Completes the reference extended state for this tick (integrator update).
ReferenceModelState reference_integrate(const ReferenceModelState& ref, const ReferenceModel& m, double y_cmd, double dt);
// Propagates plant part of the reference to the next tick.
ReferenceModelState reference_propagate(const ReferenceModelState& ref, const ReferenceModel& m, double dt);

struct MracStepResult {
    double u_ad = 0.0;
    AdaptiveState adaptive;
    ReferenceModelState ref;   // propagated to the next tick
    Eigen::VectorXd error;     // x - x_ref at this tick
    bool updated = false;
};

// x_ext: plant extended state at this tick with the integrator already
// advanced; ref: stored reference state (see ReferenceModel).
MracStepResult mrac_step(const Eigen::VectorXd& x_ext, const ReferenceModelState& ref, double u_bl,
                         const AdaptiveState& adaptive, const RbfRegressor& reg, double reg_input,
                         const Eigen::VectorXd& B, const ReferenceModel& model, double y_cmd, double dt);

struct PidGains {
    double k_ff_u = 24.0 / 0.618; // speed feedforward, command per m/s
    double kp_u = 30.0, ki_u = 6.0, kd_u = 0.0;
    double kp_h = 15.0, ki_h = 0.0, kd_h = 8.0; // heading, per rad; kd acts on yaw rate
    double i_limit_u = 60.0, i_limit_h = 25.0;  // integrator contribution clamps
};

struct PidState {
    double i_u = 0.0;
    double i_h = 0.0;
    double prev_e_u = 0.0;
    bool primed = false;
};

struct PidOutput {
    double u_thr = 0.0;
    double u_rud = 0.0;
    PidState state;
};

PidOutput pid_baseline_step(double u_sog, double u_des, double theta, double theta_DES, double r, const PidState& s,
                            const PidGains& g, double dt, double thr_limit = 100.0, double rud_limit = 50.0);

} // namespace usv
