#include <doctest.h>

#include <random>

#include "usv/estimation.hpp"

using namespace usv;
using doctest::Approx;

namespace {

MheConfig scalar_config(int window, double wy, double w)
{
    MheConfig c;
    c.window = window;
    c.Wy = Eigen::VectorXd::Constant(1, wy);
    c.W = Eigen::VectorXd::Constant(1, w);
    c.tol = 1e-14;
    return c;
}

// Rauch-Tung-Striebel smoother for x+ = x + w, y = x + v with prior N(x0, P0).
std::vector<double> rts(const std::vector<double>& y, double x0, double P0, double R, double W)
{
    const size_t n = y.size();
    std::vector<double> xf(n), Pf(n), xp(n), Pp(n);
    for (size_t k = 0; k < n; ++k) {
        xp[k] = k ? xf[k - 1] : x0;
        Pp[k] = k ? Pf[k - 1] + W : P0;
        const double K = Pp[k] / (Pp[k] + R);
        xf[k] = xp[k] + K * (y[k] - xp[k]);
        Pf[k] = (1 - K) * Pp[k];
    }
    std::vector<double> xs = xf;
    for (size_t k = n - 1; k-- > 0;) {
        const double C = Pf[k] / Pp[k + 1];
        xs[k] = xf[k] + C * (xs[k + 1] - xp[k + 1]);
    }
    return xs;
}

Transition identity_f()
{
    return [](const Eigen::VectorXd& x, int) -> Eigen::VectorXd { return x; };
}

} // namespace

TEST_CASE("MHE matches a fixed-interval Kalman smoother on the scalar random walk")
{
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> n(0, 1);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const double wy = 0.2 + 0.1 * (trial % 7), w = 0.05 + 0.02 * (trial % 5), P0 = 0.5;
        MheProblem p;
        p.f = identity_f();
        p.x_bar = Eigen::VectorXd::Constant(1, n(rng));
        p.Q_prior = Eigen::MatrixXd::Constant(1, 1, P0);
        double x = p.x_bar[0] + std::sqrt(P0) * n(rng);
        std::vector<double> ys;
        for (int k = 0; k <= 5; ++k) {
            ys.push_back(x + std::sqrt(wy) * n(rng));
            p.y.push_back(Eigen::VectorXd::Constant(1, ys.back()));
            x += std::sqrt(w) * n(rng);
        }
        const MheSolution s = mhe_solve(p, scalar_config(5, wy, w));
        const std::vector<double> ref = rts(ys, p.x_bar[0], P0, wy, w);
        for (int k = 0; k <= 5; ++k) worst = std::max(worst, std::abs(s.x_hat[k][0] - ref[k]));
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("MHE: objective trace, exact w identity, initialization independence")
{
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(0, 1);
    MheProblem p;
    p.f = [](const Eigen::VectorXd& x, int) -> Eigen::VectorXd {
        Eigen::Matrix2d A;
        A << 0.9, 0.1, -0.2, 0.95;
        return A * x;
    };
    p.x_bar = Eigen::Vector2d(1, -1);
    p.Q_prior = Eigen::Matrix2d::Identity();
    for (int k = 0; k <= 8; ++k) p.y.push_back(Eigen::Vector2d(n(rng), n(rng)));
    MheConfig c;
    c.window = 8;
    c.Wy = Eigen::Vector2d(0.3, 0.3);
    c.W = Eigen::Vector2d(0.1, 0.2);
    c.tol = 1e-14;

    const MheSolution a = mhe_solve(p, c);
    CHECK(a.objective <= a.initial_objective);
    for (size_t i = 1; i < a.objective_trace.size(); ++i) CHECK(a.objective_trace[i] <= a.objective_trace[i - 1]);
    for (int k = 0; k < 8; ++k) CHECK(((a.x_hat[k + 1] - p.f(a.x_hat[k], k)).array() == a.w_hat[k].array()).all());

    std::vector<Eigen::VectorXd> init(9, Eigen::Vector2d(25, -40));
    const MheSolution b = mhe_solve(p, c, &init);
    for (int k = 0; k <= 8; ++k) CHECK((a.x_hat[k] - b.x_hat[k]).cwiseAbs().maxCoeff() <= 1e-8);

    const Eigen::MatrixXd Q = a.Q_last;
    CHECK((Q - Q.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Q).eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("MHE: zero-noise vehicle window is a fixed point")
{
    const VehicleModel m;
    const double dt = 0.1;
    std::vector<ReplayPolicy> cmds;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> thr(20, 60), rud(-10, 10);
    for (int k = 0; k < 20; ++k) cmds.push_back({thr(rng), rud(rng)});
    MheProblem p;
    p.f = [&](const Eigen::VectorXd& x, int k) -> Eigen::VectorXd {
        return closed_loop_unwrapped(Vec6(x), Policy(cmds[k]), m, dt);
    };
    Vec6 x = (Vec6() << 2, -1, 0.3, 0.9, 0.02, 0.05).finished();
    p.x_bar = x;
    for (int k = 0; k <= 20; ++k) {
        p.y.push_back(x);
        if (k < 20) x = closed_loop_unwrapped(x, Policy(cmds[k]), m, dt);
    }
    MheConfig c = MheConfig::vehicle_default();
    p.Q_prior = Eigen::MatrixXd(c.Wy.asDiagonal());
    const MheSolution s = mhe_solve(p, c);
    for (int k = 0; k <= 20; ++k) CHECK((s.x_hat[k] - p.y[k]).cwiseAbs().maxCoeff() <= 1e-8);
    for (const auto& w : s.w_hat) CHECK(w.cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("prior update limits and Jacobian")
{
    MheSolution s;
    s.x_hat = {Eigen::Vector2d(1, 2), Eigen::Vector2d(1.5, 2)};
    s.w_hat = {Eigen::Vector2d(0.5, 0)};
    s.Q_prior = Eigen::Vector2d(0.4, 0.9).asDiagonal();
    const Eigen::MatrixXd huge = 1e15 * Eigen::MatrixXd::Identity(2, 2);
    PriorUpdate u = prior_update(s, identity_f(), huge, Eigen::MatrixXd::Zero(2, 2));
    CHECK((u.Q - s.Q_prior).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(u.x_bar.isApprox(s.x_hat[1]));

    // A = I, W = 0: the prediction keeps the posterior
    const Eigen::MatrixXd R = Eigen::Vector2d(0.4, 0.1).asDiagonal();
    u = prior_update(s, identity_f(), R, Eigen::MatrixXd::Zero(2, 2));
    const Eigen::MatrixXd post = (s.Q_prior.inverse() + R.inverse()).inverse();
    CHECK((u.Q - post).cwiseAbs().maxCoeff() <= 1e-12);

    s.Q_prior(0, 0) = -1;
    CHECK_THROWS_AS(prior_update(s, identity_f(), R, R), Error);

    const VehicleModel m;
    const Transition f = [&](const Eigen::VectorXd& x, int) -> Eigen::VectorXd {
        return closed_loop_unwrapped(Vec6(x), Policy(ReplayPolicy{45, 12}), m, 0.1);
    };
    const Vec6 x0 = (Vec6() << 1, 2, 0.7, 1.1, 0.05, 0.1).finished();
    const Eigen::MatrixXd J = numerical_jacobian(f, x0, 0);
    for (int j = 0; j < 6; ++j) {
        const double h = 1e-7;
        Vec6 a = x0, b = x0;
        a[j] += h;
        b[j] -= h;
        const Eigen::VectorXd col = (f(a, 0) - f(b, 0)) / (2 * h);
        CHECK((J.col(j) - col).norm() <= 1e-5 * std::max(1.0, col.norm()));
    }
}

TEST_CASE("disturbance statistics")
{
    const MheConfig c = MheConfig::vehicle_default();
    MheSolution s;
    const Vec6 cst = (Vec6() << 0.1, -0.2, 0.0, 0.3, 0.0, 0.01).finished();
    s.w_hat.assign(10, cst);
    DisturbanceEstimate d = disturbance_stats(s, c);
    CHECK((d.mu_hat - cst).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(d.W_hat.cwiseAbs().maxCoeff() <= 1e-30);
    CHECK(d.delta_mu[kU] == Approx(0.01 * 0.3));
    CHECK(d.delta_mu[kV] == c.delta_mu_floor[kV]);

    s.w_hat = {Vec6::Zero(), Vec6::Zero()};
    s.w_hat[1][kU] = 2.0;
    d = disturbance_stats(s, c);
    CHECK(d.mu_hat[kU] == 1.0);
    CHECK(d.W_hat[kU] == 2.0);

    std::mt19937_64 rng(77);
    std::normal_distribution<double> g(0.4, 1.5);
    const int N = 20000;
    s.w_hat.assign(N, Vec6::Zero());
    for (auto& w : s.w_hat) w[kR] = g(rng);
    d = disturbance_stats(s, c);
    CHECK(std::abs(d.mu_hat[kR] - 0.4) <= 3 * 1.5 / std::sqrt(N));
    CHECK(std::abs(d.W_hat[kR] - 2.25) <= 3 * 2.25 * std::sqrt(2.0 / (N - 1)));
}

TEST_CASE("vehicle MHE recovers a constant surge bias")
{
    const VehicleModel m;
    const double dt = 0.1, b = -0.05;
    VehicleMhe mhe(m, dt, MheConfig::vehicle_default());
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0, 1);
    const Vec6 sy = MheConfig::vehicle_default().Wy.cwiseSqrt();
    Vec6 x = (Vec6() << 0, 0, 0, 1, 0, 0).finished();
    double mean_w = 0.0;
    int samples = 0;
    for (int k = 0; k < 120; ++k) {
        Vec6 y = x;
        for (int i = 0; i < 6; ++i) y[i] += sy[i] * n(rng);
        const ReplayPolicy cmd{38.835 + 3 * std::sin(0.1 * k), 4 * std::sin(0.05 * k)};
        auto out = mhe.update(y, cmd);
        if (k >= 60) {
            REQUIRE(out);
            mean_w += out->dist.mu_hat[kU];
            ++samples;
        }
        Vec6 w = Vec6::Zero();
        w[kU] = b;
        x = closed_loop_unwrapped(x, Policy(cmd), m, dt) + w;
    }
    mean_w /= samples;
    CHECK(std::abs(mean_w - b) <= 0.1 * std::abs(b));
}

TEST_CASE("MHE config validation")
{
    MheConfig c = MheConfig::vehicle_default();
    CHECK_NOTHROW(c.validate(6));
    CHECK_THROWS_AS(c.validate(3), ConfigError);
    c.W[2] = 0.0;
    CHECK_THROWS_AS(c.validate(6), ConfigError);
}
