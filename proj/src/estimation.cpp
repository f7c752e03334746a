#include "usv/estimation.hpp"

#include <algorithm>

namespace usv {

void MheConfig::validate(int n) const
{
    if (window < 2) throw ConfigError("MHE window must be >= 2");
    if (Wy.size() != n || W.size() != n) throw ConfigError("MHE covariance dimension mismatch");
    for (int i = 0; i < n; ++i)
        if (!(Wy[i] > 0.0) || !(W[i] > 0.0)) throw ConfigError("MHE covariances must be positive definite");
    if (max_iter < 1) throw ConfigError("MHE iteration cap must be >= 1");
}

MheConfig MheConfig::vehicle_default()
{
    MheConfig c;
    c.window = 20;
    Vec6 sy, sw;
    sy << 0.5, 0.5, deg2rad(1.0), 0.05, 0.05, deg2rad(0.5);
    sw << 0.2, 0.2, deg2rad(0.5), 0.5, 0.05, deg2rad(5.0);
    c.Wy = sy.cwiseProduct(sy);
    c.W = sw.cwiseProduct(sw);
    c.angle_components = {kTheta};
    c.delta_frac = 0.01;
    Vec6 fm, fs;
    fm << 1e-3, 1e-3, 1e-4, 1e-3, 1e-3, 1e-4;
    fs = fm;
    c.delta_mu_floor = fm;
    c.delta_sigma_floor = fs;
    return c;
}

namespace {

Eigen::VectorXd wrap_components(Eigen::VectorXd r, const std::vector<int>& angles)
{
    for (int i : angles) r[i] = wrap_angle(r[i]);
    return r;
}

struct Weights {
    Eigen::MatrixXd prior_sqrt; // S with S'S = Q^-1
    Eigen::VectorXd meas_sqrt, proc_sqrt;
};

struct Eval {
    Eigen::VectorXd r;
    double cost = 0.0;
};

} // namespace

Eigen::MatrixXd numerical_jacobian(const Transition& f, const Eigen::VectorXd& x, int k,
                                   const std::vector<int>& angle_components)
{
    const int n = static_cast<int>(x.size());
    Eigen::VectorXd f0 = f(x, k);
    Eigen::MatrixXd J(f0.size(), n);
    for (int i = 0; i < n; ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        Eigen::VectorXd d = f(xp, k) - f(xm, k);
        d = wrap_components(d, angle_components);
        J.col(i) = d / (xp[i] - xm[i]);
    }
    return J;
}

MheSolution mhe_solve(const MheProblem& prob, const MheConfig& cfg, const std::vector<Eigen::VectorXd>* x_init)
{
    const int N = cfg.window;
    if (static_cast<int>(prob.y.size()) != N + 1) throw Error("mhe_solve: window not fully populated");
    const int n = static_cast<int>(prob.x_bar.size());
    cfg.validate(n);
    if (prob.Q_prior.rows() != n || prob.Q_prior.cols() != n) throw Error("mhe_solve: prior covariance dimension");
    const auto& ang = cfg.angle_components;

    Weights w;
    {
        Eigen::LLT<Eigen::MatrixXd> llt(prob.Q_prior);
        if (llt.info() != Eigen::Success) throw Error("mhe_solve: prior covariance not positive definite");
        // Q = L L'  =>  Q^-1 = L^-T L^-1, so S = L^-1.
        w.prior_sqrt = llt.matrixL().solve(Eigen::MatrixXd::Identity(n, n));
        w.meas_sqrt = cfg.Wy.cwiseSqrt().cwiseInverse();
        w.proc_sqrt = cfg.W.cwiseSqrt().cwiseInverse();
    }

    const int nv = (N + 1) * n;
    const int nr = n + (N + 1) * n + N * n;
    auto unpack = [&](const Eigen::VectorXd& X, int k) { return X.segment(k * n, n); };

    std::vector<Eigen::VectorXd> fx(N);
    auto evaluate = [&](const Eigen::VectorXd& X) {
        Eval e;
        e.r.resize(nr);
        e.r.head(n) = w.prior_sqrt * wrap_components(unpack(X, 0) - prob.x_bar, ang);
        for (int k = 0; k <= N; ++k)
            e.r.segment(n + k * n, n) = w.meas_sqrt.cwiseProduct(wrap_components(prob.y[k] - unpack(X, k), ang));
        for (int k = 0; k < N; ++k) {
            fx[k] = prob.f(unpack(X, k), k);
            e.r.segment(n + (N + 1) * n + k * n, n) =
                w.proc_sqrt.cwiseProduct(wrap_components(unpack(X, k + 1) - fx[k], ang));
        }
        e.cost = e.r.squaredNorm();
        return e;
    };

    auto jacobian = [&](const Eigen::VectorXd& X) {
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(nr, nv);
        J.block(0, 0, n, n) = w.prior_sqrt;
        for (int k = 0; k <= N; ++k) J.block(n + k * n, k * n, n, n) = -Eigen::MatrixXd(w.meas_sqrt.asDiagonal());
        for (int k = 0; k < N; ++k) {
            const int row = n + (N + 1) * n + k * n;
            Eigen::MatrixXd A = numerical_jacobian(prob.f, unpack(X, k), k, ang);
            J.block(row, k * n, n, n) = -(w.proc_sqrt.asDiagonal() * A);
            J.block(row, (k + 1) * n, n, n) = Eigen::MatrixXd(w.proc_sqrt.asDiagonal());
        }
        return J;
    };

    Eigen::VectorXd X(nv);
    if (x_init) {
        if (static_cast<int>(x_init->size()) != N + 1) throw Error("mhe_solve: initial guess has wrong length");
        for (int k = 0; k <= N; ++k) X.segment(k * n, n) = (*x_init)[k];
    } else {
        for (int k = 0; k <= N; ++k) X.segment(k * n, n) = prob.y[k];
    }

    Eval cur = evaluate(X);
    MheSolution sol;
    sol.initial_objective = cur.cost;
    sol.objective_trace.push_back(cur.cost);
    double lambda = 1e-9;
    bool converged = false;
    Eigen::MatrixXd H;
    int it = 0;
    for (; it < cfg.max_iter; ++it) {
        Eigen::MatrixXd J = jacobian(X);
        H = J.transpose() * J;
        Eigen::VectorXd g = J.transpose() * cur.r;
        bool accepted = false;
        Eigen::VectorXd step;
        for (int tries = 0; tries < 30; ++tries) {
            Eigen::MatrixXd Hd = H;
            Hd.diagonal() += lambda * (H.diagonal().array() + 1e-12).matrix();
            step = Hd.ldlt().solve(-g);
            Eval cand = evaluate(X + step);
            if (std::isfinite(cand.cost) && cand.cost <= cur.cost) {
                const double rel = (cur.cost - cand.cost) / std::max(cur.cost, 1e-300);
                X += step;
                cur = cand;
                accepted = true;
                lambda = std::max(lambda / 10.0, 1e-12);
                if (rel < cfg.tol || step.norm() < cfg.tol * (1.0 + X.norm())) converged = true;
                break;
            }
            lambda *= 10.0;
        }
        sol.objective_trace.push_back(cur.cost);
        if (!accepted) {
            // No descent direction left at working precision: stationary.
            converged = g.norm() < 1e-6 * (1.0 + cur.cost) || cur.cost == 0.0;
            break;
        }
        if (converged) break;
    }
    sol.iterations = it + 1;

    // Final state and covariance from the Gauss-Newton Hessian at the solution.
    cur = evaluate(X);
    Eigen::MatrixXd J = jacobian(X);
    H = J.transpose() * J;
    sol.x_hat.resize(N + 1);
    sol.w_hat.resize(N);
    for (int k = 0; k <= N; ++k) sol.x_hat[k] = unpack(X, k);
    for (int k = 0; k < N; ++k) sol.w_hat[k] = wrap_components(sol.x_hat[k + 1] - fx[k], ang);
    sol.objective = cur.cost;
    sol.Q_prior = prob.Q_prior;
    Eigen::MatrixXd Hinv_last = H.ldlt().solve(Eigen::MatrixXd::Identity(nv, nv)).bottomRightCorner(n, n);
    sol.Q_last = 0.5 * (Hinv_last + Hinv_last.transpose());
    sol.x_bar_next = sol.x_hat[1];
    if (!converged) throw MheDivergence("mhe_solve: no convergence within iteration cap", sol);
    return sol;
}

PriorUpdate prior_update(const MheSolution& sol, const Transition& f, const Eigen::MatrixXd& R, const Eigen::MatrixXd& W)
{
    if (sol.x_hat.size() < 2 || sol.w_hat.empty()) throw Error("prior_update: empty solution");
    const int n = static_cast<int>(sol.x_hat[0].size());
    auto inv = [&](const Eigen::MatrixXd& M, const char* what) {
        Eigen::LLT<Eigen::MatrixXd> llt(M);
        if (llt.info() != Eigen::Success) throw Error(std::string("prior_update: singular ") + what);
        return Eigen::MatrixXd(llt.solve(Eigen::MatrixXd::Identity(n, n)));
    };
    PriorUpdate out;
    out.x_bar = f(sol.x_hat[0], 0) + sol.w_hat[0];
    Eigen::MatrixXd info = inv(sol.Q_prior, "prior covariance") + inv(R, "measurement covariance");
    Eigen::MatrixXd Qtt = inv(info, "posterior information");
    out.A = numerical_jacobian(f, sol.x_hat[0], 0);
    out.Q = out.A * Qtt * out.A.transpose() + W;
    out.Q = 0.5 * (out.Q + out.Q.transpose());
    return out;
}

DisturbanceEstimate disturbance_stats(const MheSolution& sol, const MheConfig& cfg)
{
    const size_t m = sol.w_hat.size();
    if (m < 2) throw Error("disturbance_stats: need at least two samples");
    const int n = static_cast<int>(sol.w_hat[0].size());
    if (n != 6) throw Error("disturbance_stats: expects 6-dimensional disturbances");
    DisturbanceEstimate d;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n), var = Eigen::VectorXd::Zero(n);
    for (const auto& w : sol.w_hat) mean += w;
    mean /= static_cast<double>(m);
    for (const auto& w : sol.w_hat) var += (w - mean).cwiseAbs2();
    var /= static_cast<double>(m - 1);
    d.mu_hat = mean;
    d.W_hat = var;
    const Eigen::VectorXd fm = cfg.delta_mu_floor.size() == n ? cfg.delta_mu_floor : Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd fs = cfg.delta_sigma_floor.size() == n ? cfg.delta_sigma_floor : Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        d.delta_mu[i] = std::max(cfg.delta_frac * std::abs(mean[i]), fm[i]);
        d.delta_sigma[i] = std::max(cfg.delta_frac * std::sqrt(var[i]), fs[i]);
    }
    return d;
}

VehicleMhe::VehicleMhe(VehicleModel model, double dt, MheConfig cfg) : model_(std::move(model)), dt_(dt), cfg_(std::move(cfg))
{
    cfg_.validate(6);
    if (!(dt > 0.0)) throw ConfigError("estimator dt must be positive");
}

std::optional<EstimatorOutput> VehicleMhe::update(const Vec6& y, const ReplayPolicy& cmd)
{
    const int N = cfg_.window;
    // Unwrap the heading measurement against the previous one so the window
    // is continuous.
    Vec6 yu = y;
    if (!ys_.empty()) yu[kTheta] = ys_.back()[kTheta] + wrap_angle(y[kTheta] - ys_.back()[kTheta]);
    ys_.push_back(yu);
    cmds_.push_back(cmd);
    if (static_cast<int>(ys_.size()) > N + 1) {
        ys_.pop_front();
        cmds_.pop_front();
    }
    if (static_cast<int>(ys_.size()) < N + 1) return std::nullopt;

    std::vector<ReplayPolicy> cmds(cmds_.begin(), cmds_.end());
    const VehicleModel& m = model_;
    const double dt = dt_;
    Transition f = [cmds, &m, dt](const Eigen::VectorXd& x, int k) -> Eigen::VectorXd {
        return closed_loop_unwrapped(Vec6(x), Policy(cmds[k]), m, dt);
    };

    MheProblem prob;
    prob.y.assign(ys_.begin(), ys_.end());
    prob.f = f;
    if (!x_bar_) {
        x_bar_ = Eigen::VectorXd(prob.y.front());
        Q_ = Eigen::MatrixXd(cfg_.Wy.asDiagonal()) * 4.0;
    }
    // Keep the prior on the same heading branch as the window.
    Eigen::VectorXd xb = *x_bar_;
    xb[kTheta] = prob.y.front()[kTheta] + wrap_angle(xb[kTheta] - prob.y.front()[kTheta]);
    prob.x_bar = xb;
    prob.Q_prior = Q_;

    std::vector<Eigen::VectorXd> init;
    const std::vector<Eigen::VectorXd>* init_ptr = nullptr;
    if (static_cast<int>(last_.size()) == N + 1) {
        init.assign(last_.begin() + 1, last_.end());
        init.push_back(f(init.back(), N - 1));
        for (int k = 0; k <= N; ++k)
            init[k][kTheta] = prob.y[k][kTheta] + wrap_angle(init[k][kTheta] - prob.y[k][kTheta]);
        init_ptr = &init;
    }

    EstimatorOutput out;
    try {
        out.solution = mhe_solve(prob, cfg_, init_ptr);
    } catch (const MheDivergence& e) {
        out.solution = e.best();
        out.diverged = true;
    }
    last_ = out.solution.x_hat;

    const Eigen::MatrixXd R = cfg_.Wy.asDiagonal();
    const Eigen::MatrixXd W = cfg_.W.asDiagonal();
    PriorUpdate pu = prior_update(out.solution, f, R, W);
    x_bar_ = pu.x_bar;
    Q_ = pu.Q;

    out.x_hat = out.solution.x_hat.back();
    out.Q_diag = out.solution.Q_last.diagonal().cwiseMax(0.0);
    out.dist = disturbance_stats(out.solution, cfg_);
    return out;
}

} // namespace usv
