#include <doctest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "usv/control.hpp"
#include "usv/controllers.hpp"

using namespace usv;
using doctest::Approx;

namespace {

double riccati_residual(const ChannelDesign& d)
{
    const Eigen::MatrixXd& P = d.P_care;
    const Eigen::MatrixXd res =
        d.A.transpose() * P + P * d.A - P * d.B * d.B.transpose() * P / d.R + d.Q;
    return res.cwiseAbs().maxCoeff();
}

double lyap_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q)
{
    return (P * A + A.transpose() * P + Q).cwiseAbs().maxCoeff();
}

bool hurwitz(const Eigen::MatrixXd& A)
{
    return (A.eigenvalues().real().array() < 0.0).all();
}

} // namespace

TEST_CASE("CARE: scalar hand solution")
{
    Eigen::MatrixXd A(1, 1), Q(1, 1);
    A << -1;
    Q << 1;
    Eigen::VectorXd B(1);
    B << 1;
    const LqrResult r = solve_care_lqr(A, B, Q, 1.0);
    CHECK(r.P(0, 0) == Approx(std::sqrt(2.0) - 1).epsilon(1e-12));
    CHECK(r.K(0) == Approx(std::sqrt(2.0) - 1).epsilon(1e-12));
}

TEST_CASE("CARE: non-stabilizable pair rejected")
{
    Eigen::MatrixXd A(2, 2), Q = Eigen::MatrixXd::Identity(2, 2);
    A << 1, 0, 0, -1;
    Eigen::VectorXd B(2);
    B << 0, 1;
    CHECK_THROWS_AS(solve_care_lqr(A, B, Q, 1.0), Error);
}

TEST_CASE("channel designs: gains, Hurwitz, residuals")
{
    const ChannelDesign s = design_speed_channel(LinearSpeedModel{});
    CHECK(s.K(0) == Approx(8.6603).epsilon(1e-4));
    CHECK(s.K(1) == Approx(0.36556).epsilon(1e-4));
    CHECK(riccati_residual(s) <= 1e-8);
    CHECK(hurwitz(s.A_ref));

    const ChannelDesign y = design_yaw_channel(LinearSwayYawModel{});
    CHECK(y.K(0) == Approx(100.0).epsilon(1e-6));
    CHECK(std::abs(y.K(1) - (-0.33)) <= 1e-2);
    CHECK(riccati_residual(y) <= 1e-8);
    CHECK(hurwitz(y.A_ref));

    for (const ChannelDesign* d : {&s, &y}) {
        const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d->P.rows(), d->P.cols());
        CHECK(lyap_residual(d->A_ref, d->P, I) <= 1e-10);
        CHECK((d->P - d->P.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    }

    const LqrPiGains g = gains_from_designs(s, y);
    CHECK(g.k_u_i == s.K(0));
    CHECK(g.k_u_p == s.K(1));
    CHECK(g.k_r_i == y.K(0));
    CHECK(g.k_v_p == y.K(1));
    CHECK(g.k_r_p == y.K(2));
}

TEST_CASE("Lyapunov: examples and Kronecker oracle")
{
    Eigen::MatrixXd P = solve_lyapunov(-Eigen::MatrixXd::Identity(3, 3), 2 * Eigen::MatrixXd::Identity(3, 3));
    CHECK((P - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-12);

    Eigen::MatrixXd A = Eigen::Vector2d(-1, -2).asDiagonal();
    P = solve_lyapunov(A, Eigen::MatrixXd::Identity(2, 2));
    CHECK(P(0, 0) == Approx(0.5));
    CHECK(P(1, 1) == Approx(0.25));
    CHECK(std::abs(P(0, 1)) <= 1e-14);

    std::mt19937_64 rng(17);
    std::normal_distribution<double> n(0, 1);
    for (int trial = 0; trial < 20; ++trial) {
        const int k = 4;
        Eigen::MatrixXd M(k, k);
        for (int i = 0; i < k * k; ++i) M(i) = n(rng);
        // shift so the spectrum is strictly in the left half plane
        const double shift = M.eigenvalues().real().maxCoeff() + 0.5;
        const Eigen::MatrixXd Ar = M - shift * Eigen::MatrixXd::Identity(k, k);
        const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(k, k);
        const Eigen::MatrixXd Ps = solve_lyapunov(Ar, Q);

        // vec(PA + A'P) = (A' kron I + I kron A') vec(P)
        Eigen::MatrixXd L = Eigen::MatrixXd::Zero(k * k, k * k);
        const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(k, k);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
                L.block(i * k, j * k, k, k) += Ar(j, i) * I;
                L.block(i * k, j * k, k, k) += (i == j ? 1.0 : 0.0) * Ar.transpose();
            }
        Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXd>(Q.data(), k * k);
        Eigen::VectorXd p = L.fullPivLu().solve(-q);
        Eigen::MatrixXd Po = Eigen::Map<Eigen::MatrixXd>(p.data(), k, k);
        REQUIRE((Ps - Po).cwiseAbs().maxCoeff() <= 1e-8 * (1 + Po.cwiseAbs().maxCoeff()));
        REQUIRE(lyap_residual(Ar, Ps, Q) <= 1e-10);
    }

    CHECK_THROWS_AS(solve_lyapunov(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2)), Error);
}

TEST_CASE("LQR-PI speed law")
{
    const LqrPiGains g = synthesize_gains(VehicleModel{});
    // regulator sign: u = -K x with x = (e_uI, u)
    ChannelOutput o = lqr_pi_speed_step(0.8, 0.8, {}, g, 0.1, 1e9);
    CHECK(o.integ.e_uI == 0.0);
    CHECK(o.command == Approx(-g.k_u_p * 0.8));

    IntegratorState it;
    for (int i = 0; i < 10; ++i) it = lqr_pi_speed_step(1.1, 1.0, it, g, 0.1, 1e9).integ;
    CHECK(it.e_uI == Approx(0.1));

    // saturation bleeds the integrator through back-calculation
    IntegratorState free, sat;
    for (int i = 0; i < 50; ++i) {
        free = lqr_pi_speed_step(0.0, 2.0, free, g, 0.1, 1e9).integ;
        sat = lqr_pi_speed_step(0.0, 2.0, sat, g, 0.1, 10.0).integ;
    }
    CHECK(std::abs(sat.e_uI) < std::abs(free.e_uI));
    CHECK(lqr_pi_speed_step(0.0, 2.0, sat, g, 0.1, 10.0).command <= 10.0);
}

TEST_CASE("LQR-PI yaw law")
{
    const LqrPiGains g = synthesize_gains(VehicleModel{});
    CHECK(lqr_pi_yaw_step(0, 0, 0, {}, g, 0.1, 1e9).command == 0.0);
    IntegratorState it;
    it.e_rI = 1.0;
    CHECK(std::abs(lqr_pi_yaw_step(0, 0, 0, it, g, 0.1, 1e9).command) == Approx(100.0).epsilon(1e-6));

    // closed loop on the truth channel: r follows a ramp that levels off, steady error -> 0
    const LinearSwayYawModel m;
    double v = 0, r = 0;
    IntegratorState s;
    const double dt = 0.1;
    for (int k = 0; k < 600; ++k) {
        const double r_des = std::min(0.02 * k * dt, 0.2);
        const double u = lqr_pi_yaw_step(v, r, r_des, s, g, dt).command;
        s = lqr_pi_yaw_step(v, r, r_des, s, g, dt).integ;
        for (int i = 0; i < 8; ++i) std::tie(v, r) = sway_yaw_dynamics_step(v, r, u, 0, m, dt / 8);
    }
    CHECK(r == Approx(0.2).epsilon(1e-4));
}

TEST_CASE("thruster allocation")
{
    CHECK(allocate_thrusters(50, 0) == std::pair<double, double>{50, 50});
    CHECK(allocate_thrusters(50, 50) == std::pair<double, double>{100, 0});
    CHECK(allocate_thrusters(0, 37) == std::pair<double, double>{0, 0});
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-40, 40), d(-50, 50);
    for (int i = 0; i < 1000; ++i) {
        const double t = u(rng), r = d(rng);
        auto [l, rr] = allocate_thrusters(t, r, 50, 1e9);
        REQUIRE(l + rr == Approx(2 * t).epsilon(1e-12));
    }
    auto [l, rr] = allocate_thrusters(90, 40);
    CHECK(l == 100);
    CHECK(rr == Approx(18));
}

TEST_CASE("RBF regressor")
{
    const RbfRegressor reg = RbfRegressor::yaw_default();
    const Eigen::VectorXd at = rbf_eval(reg, reg.centers[4]);
    CHECK(at.size() == reg.size());
    CHECK(at[0] == 1.0);
    CHECK(at[5] == 1.0);
    CHECK(((at.array() > 0.0) && (at.array() <= 1.0)).all());
    const Eigen::VectorXd plus = rbf_eval(reg, reg.centers[4] + 0.013), minus = rbf_eval(reg, reg.centers[4] - 0.013);
    CHECK(plus[5] == Approx(minus[5]).epsilon(1e-14));
    const Eigen::VectorXd far = rbf_eval(reg, 1e3);
    CHECK(far[0] == 1.0);
    CHECK(far.tail(far.size() - 1).cwiseAbs().maxCoeff() == 0.0);

    RbfRegressor bad;
    bad.sigma = 0.0;
    bad.centers = {0.0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("MRAC step: e = 0, zero weights, deadzone, projection")
{
    const ChannelDesign d = design_yaw_channel(LinearSwayYawModel{});
    const ReferenceModel rm = reference_model_for(d, 8);
    const RbfRegressor reg = RbfRegressor::yaw_default();
    AdaptiveState ad = AdaptiveState::make(reg.size() + 1, 5.0, 5.0, d.P);
    ReferenceModelState ref{Eigen::VectorXd::Zero(3)};

    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0, 1);
    for (int i = 0; i < ad.theta_hat.size(); ++i) ad.theta_hat[i] = 0.1 * n(rng);
    const MracStepResult still = mrac_step(Eigen::VectorXd::Zero(3), ref, 3.0, ad, reg, 0.01, d.B, rm, 0.0, 0.1);
    CHECK(still.error.norm() == 0.0);
    CHECK_FALSE(still.updated);
    CHECK((still.adaptive.theta_hat.array() == ad.theta_hat.array()).all());

    AdaptiveState zero = AdaptiveState::make(reg.size() + 1, 5.0, 5.0, d.P);
    CHECK(mrac_step(Eigen::VectorXd::Zero(3), ref, 3.0, zero, reg, 0.0, d.B, rm, 0.0, 0.1).u_ad == 0.0);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
    x[2] = 0.5 * zero.deadzone;
    const MracStepResult dz = mrac_step(x, ref, 3.0, ad, reg, 0.0, d.B, rm, 0.0, 0.1);
    CHECK_FALSE(dz.updated);
    CHECK((dz.adaptive.theta_hat.array() == ad.theta_hat.array()).all());

    // hammer the law with large errors: weights never leave their box
    AdaptiveState big = AdaptiveState::make(reg.size() + 1, 5e4, 5e4, d.P);
    for (int k = 0; k < 500; ++k) {
        Eigen::VectorXd xe(3);
        xe << 5 * n(rng), 5 * n(rng), 5 * n(rng);
        const MracStepResult r = mrac_step(xe, ref, 40 * n(rng), big, reg, 0.3 * n(rng), d.B, rm, 0.0, 0.1);
        big = r.adaptive;
        REQUIRE((big.theta_hat.array() >= big.lower.array()).all());
        REQUIRE((big.theta_hat.array() <= big.upper.array()).all());
    }
    CHECK_THROWS_AS(mrac_step(Eigen::VectorXd::Zero(3), ref, 0, ad, reg, 0, d.B, rm, 0, 0.0), Error);
}

TEST_CASE("PID baseline")
{
    PidGains g;
    PidOutput o = pid_baseline_step(0, 0, 0.3, 0.3, 0, {}, g, 0.1);
    CHECK(o.u_thr == 0.0);
    CHECK(o.u_rud == 0.0);

    g.k_ff_u = 0.0;
    g.ki_u = 0.0;
    o = pid_baseline_step(0.0, 1.0, 0, 0, 0, {}, g, 0.1);
    CHECK(o.u_thr == Approx(g.kp_u));

    // heading error goes through delta_theta
    o = pid_baseline_step(0, 0, 3.0, -3.0, 0, {}, g, 0.1);
    CHECK(o.u_rud == Approx(g.kp_h * (2 * kPi - 6.0)));
}

TEST_CASE("inner-loop controller: warm start holds surge")
{
    const VehicleModel m;
    for (ControllerKind k : {ControllerKind::Pid, ControllerKind::LqrPi, ControllerKind::Mrac}) {
        InnerLoopController c(k, m, ControllerTuning{}, 0.1);
        c.warm_start(1.0);
        ControllerInput in;
        in.u = 1.0;
        in.u_des = 1.0;
        const ControllerOutput o = c.step(in);
        CAPTURE(to_string(k));
        CHECK(o.u_thr == Approx(-m.speed.a_p1 / m.speed.b_p1).epsilon(1e-3));
        CHECK(o.uL == Approx(o.uR));
        CHECK(c.projection_respected());
    }
    CHECK(controller_kind_from_string("lqr-pi") == ControllerKind::LqrPi);
    CHECK_THROWS_AS(controller_kind_from_string("pd"), ConfigError);
}
