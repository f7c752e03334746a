#pragma once

#include <initializer_list>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "usv/closed_loop.hpp"

namespace usv {

enum class NodeKind { Input, Const, Affine, Multiply, Sin, Cos, Rbf, Clamp };

const char* node_kind_name(NodeKind k);

struct Node {
    NodeKind kind = NodeKind::Const;
    std::vector<int> in;
    std::vector<double> coef; // affine coefficients, aligned with `in`
    double b = 0.0;           // affine bias / constant value
    double p0 = 0.0, p1 = 0.0; // clamp (lo, hi) or rbf (center, 1/(2 sigma^2))
    int input_index = -1;
};

class CompGraph {
public:
    explicit CompGraph(int n_inputs = 0);

    int n_inputs() const { return n_inputs_; }
    int n_outputs() const { return static_cast<int>(outputs_.size()); }
    size_t node_count() const { return nodes_.size(); }
    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<int>& outputs() const { return outputs_; }

    int input_node(int i) const;
    // Nodes may only reference earlier nodes, so insertion order is topological.
    int add(Node n);
    void set_outputs(std::vector<int> outs);

    Eigen::VectorXd evaluate(const Eigen::VectorXd& z) const;

private:
    int n_inputs_;
    std::vector<Node> nodes_;
    std::vector<int> outputs_;
};

struct HyperRect {
    Eigen::VectorXd center;
    Eigen::VectorXd radii;

    HyperRect() = default;
    HyperRect(Eigen::VectorXd c, Eigen::VectorXd r);
    static HyperRect from_bounds(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);
    int dim() const { return static_cast<int>(center.size()); }
    Eigen::VectorXd lo() const { return center - radii; }
    Eigen::VectorXd hi() const { return center + radii; }
    bool contains(const Eigen::VectorXd& z, double tol = 0.0) const;
    HyperRect head(int n) const;
};

struct LinearBounds {
    Eigen::MatrixXd Psi; // lower: Psi z + alpha
    Eigen::VectorXd alpha;
    Eigen::MatrixXd Phi; // upper: Phi z + beta
    Eigen::VectorXd beta;
};

struct Relaxation {
    LinearBounds bounds;
    HyperRect output;
};

Relaxation relax(const CompGraph& g, const HyperRect& input);

// Graph of f_cl alone (6 inputs, 6 outputs, heading unwrapped).
CompGraph build_closed_loop_graph(const Policy& policy, const VehicleModel& m, double dt);

struct AugmentedGraph {
    CompGraph graph;
    double gamma = 3.0;
};

// 24 inputs (x, mu, mu_drift, sigma_drift): x' = f_cl(x) + mu,
// mu' = mu + mu_drift + gamma sigma_drift, drifts unchanged.
AugmentedGraph build_augmented_graph(const Policy& policy, const VehicleModel& m, double dt, double gamma);

HyperRect augmented_step(const AugmentedGraph& g, const HyperRect& rect);

Eigen::VectorXd concretize(const Eigen::VectorXd& cov_diag, double gamma);

struct ConvexPolygon {
    std::vector<Eigen::Vector2d> vertices; // (x north, y east)
};

struct UnsafeRegion {
    std::vector<ConvexPolygon> polygons;
    std::optional<double> max_speed;           // unsafe if surge may exceed
    std::optional<double> heading_lo, heading_hi; // safe heading band (unwrapped)

    bool empty() const { return polygons.empty() && !max_speed && !heading_lo && !heading_hi; }
};

void validate_polygon(const ConvexPolygon& p);

// Axis-aligned box (x, y) against the region; closed sets.
bool rect_intersects_polygon(const Eigen::Vector2d& lo, const Eigen::Vector2d& hi, const ConvexPolygon& p);
bool rect_intersects_region(const HyperRect& state_rect, const UnsafeRegion& region);

struct DisturbanceEstimate {
    Vec6 mu_hat = Vec6::Zero();
    Vec6 W_hat = Vec6::Zero(); // diagonal
    Vec6 delta_mu = Vec6::Zero();
    Vec6 delta_sigma = Vec6::Zero();
};

struct CertifyInput {
    Vec6 x_hat = Vec6::Zero();
    Vec6 Q_diag = Vec6::Zero(); // state covariance diagonal
    DisturbanceEstimate dist;
};

struct CertifyResult {
    bool safe = true;
    int first_violation = -1;      // index into rsoa, -1 if none
    HyperRect initial;             // 24-dim
    std::vector<HyperRect> rsoa;   // projected 6-dim sets, one per horizon step
};

CertifyResult certify(const AugmentedGraph& g, const CertifyInput& in, int horizon, const UnsafeRegion& unsafe);

} // namespace usv
