#include "usv/control.hpp"

#include <Eigen/Eigenvalues>

#include "usv/common.hpp"
#include "usv/guidance.hpp"

namespace usv {

namespace {

bool hurwitz(const Eigen::MatrixXd& A)
{
    Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
    for (int i = 0; i < A.rows(); ++i)
        if (!(es.eigenvalues()[i].real() < 0.0)) return false;
    return true;
}

void require_stabilizable(const Eigen::MatrixXd& A, const Eigen::VectorXd& B)
{
    const int n = static_cast<int>(A.rows());
    Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
    for (int i = 0; i < n; ++i) {
        std::complex<double> lam = es.eigenvalues()[i];
        if (lam.real() < 0.0) continue;
        Eigen::MatrixXcd M(n, n + 1);
        M.leftCols(n) = A.cast<std::complex<double>>() - lam * Eigen::MatrixXcd::Identity(n, n);
        M.col(n) = B.cast<std::complex<double>>();
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
        const auto& sv = svd.singularValues();
        if (sv[n - 1] <= 1e-10 * std::max(1.0, sv[0])) throw Error("solve_care_lqr: (A, B) is not stabilizable");
    }
}

// Solve Aᵀ P + P A + Q = 0 with A Hurwitz (no check).
Eigen::MatrixXd lyap_core(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q)
{
    using Cm = Eigen::MatrixXcd;
    const int n = static_cast<int>(A.rows());
    Eigen::ComplexSchur<Cm> schur(A.cast<std::complex<double>>());
    const Cm& T = schur.matrixT();
    const Cm& U = schur.matrixU();
    Cm C = U.adjoint() * Q.cast<std::complex<double>>() * U;
    Cm Y = Cm::Zero(n, n);
    Cm TH = T.adjoint();
    for (int j = 0; j < n; ++j) {
        Eigen::VectorXcd rhs = -C.col(j);
        for (int k = 0; k < j; ++k) rhs -= Y.col(k) * T(k, j);
        Cm L = TH;
        L.diagonal().array() += T(j, j);
        Y.col(j) = L.triangularView<Eigen::Lower>().solve(rhs);
    }
    Eigen::MatrixXd P = (U * Y * U.adjoint()).real();
    return 0.5 * (P + P.transpose());
}

} // namespace

LqrResult solve_care_lqr(const Eigen::MatrixXd& A, const Eigen::VectorXd& B, const Eigen::MatrixXd& Q, double R)
{
    const int n = static_cast<int>(A.rows());
    if (A.cols() != n || B.size() != n || Q.rows() != n || Q.cols() != n) throw Error("solve_care_lqr: dimension mismatch");
    if (!(R > 0.0)) throw Error("solve_care_lqr: R must be positive");
    require_stabilizable(A, B);

    const Eigen::MatrixXd G = B * B.transpose() / R;
    Eigen::MatrixXd H(2 * n, 2 * n);
    H << A, -G, -Q, -A.transpose();

    // Matrix sign function with determinant scaling.
    Eigen::MatrixXd Z = H;
    for (int it = 0; it < 100; ++it) {
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(Z);
        double det = std::abs(lu.determinant());
        if (!(det > 0.0) || !std::isfinite(det)) throw Error("solve_care_lqr: Hamiltonian has imaginary-axis eigenvalues");
        double c = std::pow(det, -1.0 / (2.0 * n));
        Eigen::MatrixXd Zn = 0.5 * (c * Z + lu.inverse() / c);
        double delta = (Zn - Z).norm() / std::max(1.0, Z.norm());
        Z = Zn;
        if (delta < 1e-14) break;
    }
    Eigen::MatrixXd lhs(2 * n, n), rhs(2 * n, n);
    lhs << Z.topRightCorner(n, n), Z.bottomRightCorner(n, n) + Eigen::MatrixXd::Identity(n, n);
    rhs << -(Z.topLeftCorner(n, n) + Eigen::MatrixXd::Identity(n, n)), -Z.bottomLeftCorner(n, n);
    Eigen::MatrixXd P = lhs.colPivHouseholderQr().solve(rhs);
    P = 0.5 * (P + P.transpose());

    // Newton-Kleinman polish.
    for (int it = 0; it < 8; ++it) {
        Eigen::RowVectorXd K = B.transpose() * P / R;
        Eigen::MatrixXd Acl = A - B * K;
        if (!hurwitz(Acl)) break;
        Eigen::MatrixXd Pn = lyap_core(Acl, Q + K.transpose() * R * K);
        double delta = (Pn - P).norm() / std::max(1.0, P.norm());
        P = Pn;
        if (delta < 1e-15) break;
    }
    Eigen::RowVectorXd K = B.transpose() * P / R;
    if (!hurwitz(A - B * K)) throw Error("solve_care_lqr: no stabilizing solution found");
    return {K, P};
}

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A_ref, const Eigen::MatrixXd& Q)
{
    if (A_ref.rows() != A_ref.cols() || Q.rows() != A_ref.rows() || Q.cols() != A_ref.cols())
        throw Error("solve_lyapunov: dimension mismatch");
    if (!hurwitz(A_ref)) throw Error("solve_lyapunov: A_ref is not Hurwitz");
    return lyap_core(A_ref, Q);
}

ChannelDesign design_speed_channel(const LinearSpeedModel& m, const Eigen::Matrix2d& Q, double R)
{
    ChannelDesign d;
    d.A = Eigen::MatrixXd::Zero(2, 2);
    d.A(0, 1) = 1.0;
    d.A(1, 1) = m.a_p1;
    d.B = Eigen::Vector2d(0.0, m.b_p1);
    d.B_ref = Eigen::Vector2d(-1.0, 0.0);
    d.Q = Q;
    d.R = R;
    d.output_index = 1;
    LqrResult lqr = solve_care_lqr(d.A, d.B, d.Q, R);
    d.K = lqr.K;
    d.P_care = lqr.P;
    d.A_ref = d.A - d.B * d.K;
    d.P = solve_lyapunov(d.A_ref, Eigen::MatrixXd::Identity(2, 2));
    return d;
}

ChannelDesign design_yaw_channel(const LinearSwayYawModel& m, const Eigen::Matrix3d& Q, double R)
{
    ChannelDesign d;
    d.A = Eigen::MatrixXd::Zero(3, 3);
    d.A(0, 2) = 1.0;
    d.A.bottomRightCorner(2, 2) = m.A_p;
    d.B = Eigen::Vector3d(0.0, m.B_p[0], m.B_p[1]);
    d.B_ref = Eigen::Vector3d(-1.0, 0.0, 0.0);
    d.Q = Q;
    d.R = R;
    d.output_index = 2;
    LqrResult lqr = solve_care_lqr(d.A, d.B, d.Q, R);
    d.K = lqr.K;
    d.P_care = lqr.P;
    d.A_ref = d.A - d.B * d.K;
    d.P = solve_lyapunov(d.A_ref, Eigen::MatrixXd::Identity(3, 3));
    return d;
}

LqrPiGains gains_from_designs(const ChannelDesign& speed, const ChannelDesign& yaw)
{
    LqrPiGains g;
    g.k_u_i = speed.K[0];
    g.k_u_p = speed.K[1];
    g.k_r_i = yaw.K[0];
    g.k_v_p = yaw.K[1];
    g.k_r_p = yaw.K[2];
    return g;
}

LqrPiGains synthesize_gains(const VehicleModel& m)
{
    return gains_from_designs(design_speed_channel(m.speed), design_yaw_channel(m.sway_yaw));
}

ChannelOutput lqr_pi_speed_step(double u_sog, double u_des, const IntegratorState& integ, const LqrPiGains& g,
                                double dt, double limit, double bias)
{
    if (!(dt > 0.0)) throw Error("lqr_pi_speed_step: dt must be positive");
    ChannelOutput out;
    out.integ = integ;
    out.integ.e_uI += dt * (u_sog - u_des);
    out.unsaturated = -(g.k_u_i * out.integ.e_uI + g.k_u_p * u_sog) + bias;
    out.command = clamp_val(out.unsaturated, -limit, limit);
    out.integ.e_uI += dt * g.k_u_aw * (out.unsaturated - out.command);
    return out;
}

ChannelOutput lqr_pi_yaw_step(double v, double r, double r_des, const IntegratorState& integ, const LqrPiGains& g,
                              double dt, double limit, double bias)
{
    if (!(dt > 0.0)) throw Error("lqr_pi_yaw_step: dt must be positive");
    ChannelOutput out;
    out.integ = integ;
    out.integ.e_rI += dt * (r - r_des);
    out.unsaturated = -(g.k_r_i * out.integ.e_rI + g.k_v_p * v + g.k_r_p * r) + bias;
    out.command = clamp_val(out.unsaturated, -limit, limit);
    out.integ.e_rI += dt * g.k_r_aw * (out.unsaturated - out.command);
    return out;
}

std::pair<double, double> allocate_thrusters(double u_thr, double u_rud, double R_max, double limit)
{
    const double k = u_thr * u_rud;
    const double uL = u_thr + k / R_max;
    const double uR = u_thr + -k / R_max;
    return {clamp_val(uL, -limit, limit), clamp_val(uR, -limit, limit)};
}

RbfRegressor RbfRegressor::speed_default()
{
    RbfRegressor r;
    for (int i = 0; i <= 10; ++i) r.centers.push_back(0.5 + 0.1 * i);
    r.sigma = 0.05;
    return r;
}

RbfRegressor RbfRegressor::yaw_default()
{
    RbfRegressor r;
    for (int i = 0; i <= 20; ++i) r.centers.push_back(deg2rad(-20.0 + 2.0 * i));
    r.sigma = deg2rad(1.0);
    return r;
}

void RbfRegressor::validate() const
{
    if (!(sigma > 0.0)) throw ConfigError("rbf width must be positive");
    for (size_t i = 1; i < centers.size(); ++i)
        if (!(centers[i] > centers[i - 1])) throw ConfigError("rbf centers must be strictly increasing");
}

Eigen::VectorXd rbf_eval(const RbfRegressor& reg, double s)
{
    Eigen::VectorXd phi(reg.size());
    phi[0] = 1.0;
    const double inv = 1.0 / (2.0 * reg.sigma * reg.sigma);
    for (size_t k = 0; k < reg.centers.size(); ++k) {
        double d = s - reg.centers[k];
        phi[k + 1] = std::exp(-d * d * inv);
    }
    return phi;
}

AdaptiveState AdaptiveState::make(int n_weights, double gamma_bl, double gamma_rbf, const Eigen::MatrixXd& P,
                                  double deadzone, double bound, double bl_lower, double bl_upper)
{
    if (!(bl_lower <= 0.0 && 0.0 <= bl_upper && bl_upper < 1.0))
        throw ConfigError("u_bl weight bounds must bracket 0 and stay below 1");
    AdaptiveState a;
    a.theta_hat = Eigen::VectorXd::Zero(n_weights);
    a.gamma = Eigen::MatrixXd::Identity(n_weights, n_weights) * gamma_rbf;
    a.gamma(0, 0) = gamma_bl;
    a.P = P;
    a.deadzone = deadzone;
    a.lower = Eigen::VectorXd::Constant(n_weights, -bound);
    a.upper = Eigen::VectorXd::Constant(n_weights, bound);
    a.lower[0] = bl_lower;
    a.upper[0] = bl_upper;
    return a;
}

ReferenceModel reference_model_for(const ChannelDesign& d, int substeps)
{
    const int n = static_cast<int>(d.A.rows());
    ReferenceModel m;
    m.A_plant = d.A.bottomRightCorner(n - 1, n - 1);
    m.B_plant = d.B.tail(n - 1);
    m.K = d.K;
    m.output_index = d.output_index - 1;
    m.substeps = substeps;
    return m;
}

ReferenceModelState reference_integrate(const ReferenceModelState& ref, const ReferenceModel& m, double y_cmd, double dt)
{
    ReferenceModelState out = ref;
    out.x[0] += dt * (ref.x[1 + m.output_index] - y_cmd);
    return out;
}

ReferenceModelState reference_propagate(const ReferenceModelState& ref, const ReferenceModel& m, double dt)
{
    ReferenceModelState out = ref;
    const double u = -(m.K * ref.x)(0);
    const double h = dt / m.substeps;
    Eigen::VectorXd xp = ref.x.tail(ref.x.size() - 1);
    for (int i = 0; i < m.substeps; ++i) xp = xp + h * (m.A_plant * xp + m.B_plant * u);
    out.x.tail(xp.size()) = xp;
    return out;
}

MracStepResult mrac_step(const Eigen::VectorXd& x_ext, const ReferenceModelState& ref, double u_bl,
                         const AdaptiveState& adaptive, const RbfRegressor& reg, double reg_input,
                         const Eigen::VectorXd& B, const ReferenceModel& model, double y_cmd, double dt)
{
    if (!(dt > 0.0)) throw Error("mrac_step: dt must be positive");
    MracStepResult out;
    out.adaptive = adaptive;
    Eigen::VectorXd phi_bar(reg.size() + 1);
    phi_bar[0] = u_bl;
    phi_bar.tail(reg.size()) = rbf_eval(reg, reg_input);
    if (phi_bar.size() != adaptive.theta_hat.size()) throw Error("mrac_step: regressor/weight size mismatch");

    ReferenceModelState now = reference_integrate(ref, model, y_cmd, dt);
    out.error = x_ext - now.x;
    if (out.error.norm() >= adaptive.deadzone) {
        const double s = (out.error.transpose() * adaptive.P * B)(0);
        out.adaptive.theta_hat += dt * (adaptive.gamma * phi_bar) * s;
        out.adaptive.theta_hat = out.adaptive.theta_hat.cwiseMax(adaptive.lower).cwiseMin(adaptive.upper);
        out.updated = true;
    }
    out.u_ad = -out.adaptive.theta_hat.dot(phi_bar);
    out.ref = reference_propagate(now, model, dt);
    return out;
}

PidOutput pid_baseline_step(double u_sog, double u_des, double theta, double theta_DES, double r, const PidState& s,
                            const PidGains& g, double dt, double thr_limit, double rud_limit)
{
    if (!(dt > 0.0)) throw Error("pid_baseline_step: dt must be positive");
    PidOutput out;
    out.state = s;
    const double e_u = u_des - u_sog;
    const double e_h = delta_theta(theta, theta_DES);
    out.state.i_u = clamp_val(s.i_u + g.ki_u * e_u * dt, -g.i_limit_u, g.i_limit_u);
    out.state.i_h = clamp_val(s.i_h + g.ki_h * e_h * dt, -g.i_limit_h, g.i_limit_h);
    const double de_u = s.primed ? (e_u - s.prev_e_u) / dt : 0.0;
    out.state.prev_e_u = e_u;
    out.state.primed = true;
    out.u_thr = clamp_val(g.k_ff_u * u_des + g.kp_u * e_u + out.state.i_u + g.kd_u * de_u, -thr_limit, thr_limit);
    out.u_rud = clamp_val(g.kp_h * e_h + out.state.i_h - g.kd_h * r, -rud_limit, rud_limit);
    return out;
}

} // namespace usv
