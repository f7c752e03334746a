#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "usv/closed_loop.hpp"
#include "usv/reachability.hpp"

namespace usv {

// x_{k+1} = f(x_k, k) + w_k over the window (k = 0..N-1).
using Transition = std::function<Eigen::VectorXd(const Eigen::VectorXd& x, int k)>;

struct MheConfig {
    int window = 20;               // tau_e transitions, window + 1 measurements
    Eigen::VectorXd Wy;            // measurement covariance diagonal
    Eigen::VectorXd W;             // process (disturbance) covariance diagonal
    int max_iter = 50;
    double tol = 1e-10;            // relative cost decrease / step size for convergence
    std::vector<int> angle_components; // residuals wrapped to (-pi, pi]
    double delta_frac = 0.01;      // drift bounds as a fraction of |mu|, sigma
    Eigen::VectorXd delta_mu_floor;
    Eigen::VectorXd delta_sigma_floor;

    void validate(int n) const;
    static MheConfig vehicle_default();
};

struct MheProblem {
    std::vector<Eigen::VectorXd> y; // window + 1 measurements (H = I)
    Transition f;
    Eigen::VectorXd x_bar;          // prior on the first window state
    Eigen::MatrixXd Q_prior;
};

struct MheSolution {
    std::vector<Eigen::VectorXd> x_hat; // window + 1 states
    std::vector<Eigen::VectorXd> w_hat; // window disturbances, w_k = x_{k+1} - f(x_k)
    Eigen::MatrixXd Q_prior;            // arrival covariance used for this window
    Eigen::MatrixXd Q_last;             // posterior covariance of the newest state
    Eigen::VectorXd x_bar_next;
    double objective = 0.0;
    double initial_objective = 0.0;
    std::vector<double> objective_trace;
    int iterations = 0;
};

class MheDivergence : public Error {
public:
    MheDivergence(const std::string& what, MheSolution best) : Error(what), best_(std::move(best)) {}
    const MheSolution& best() const { return best_; }

private:
    MheSolution best_;
};

MheSolution mhe_solve(const MheProblem& prob, const MheConfig& cfg,
                      const std::vector<Eigen::VectorXd>* x_init = nullptr);

struct PriorUpdate {
    Eigen::VectorXd x_bar;
    Eigen::MatrixXd Q;
    Eigen::MatrixXd A; // Jacobian of f at the first window state
};

// Arrival prior for the next (shifted) window.
PriorUpdate prior_update(const MheSolution& sol, const Transition& f, const Eigen::MatrixXd& R,
                         const Eigen::MatrixXd& W);

Eigen::MatrixXd numerical_jacobian(const Transition& f, const Eigen::VectorXd& x, int k,
                                   const std::vector<int>& angle_components = {});

DisturbanceEstimate disturbance_stats(const MheSolution& sol, const MheConfig& cfg);

struct EstimatorOutput {
    Vec6 x_hat;
    Vec6 Q_diag;
    DisturbanceEstimate dist;
    MheSolution solution;
    bool diverged = false;
};

// Receding-horizon estimator over f_cl with replayed commands.
class VehicleMhe {
public:
    VehicleMhe(VehicleModel model, double dt, MheConfig cfg);
    // y: measured state at this tick, cmd: channel commands issued at this tick.
    std::optional<EstimatorOutput> update(const Vec6& y, const ReplayPolicy& cmd);
    const MheConfig& config() const { return cfg_; }

private:
    VehicleModel model_;
    double dt_;
    MheConfig cfg_;
    std::deque<Vec6> ys_;
    std::deque<ReplayPolicy> cmds_;
    std::optional<Eigen::VectorXd> x_bar_;
    Eigen::MatrixXd Q_;
    std::vector<Eigen::VectorXd> last_;
};

} // namespace usv
