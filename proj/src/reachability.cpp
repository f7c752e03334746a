#include "usv/reachability.hpp"

#include <algorithm>
#include <cfloat>
#include <limits>

namespace usv {

const char* node_kind_name(NodeKind k)
{
    switch (k) {
    case NodeKind::Input: return "input";
    case NodeKind::Const: return "const";
    case NodeKind::Affine: return "affine";
    case NodeKind::Multiply: return "multiply";
    case NodeKind::Sin: return "sin";
    case NodeKind::Cos: return "cos";
    case NodeKind::Rbf: return "rbf";
    case NodeKind::Clamp: return "clamp";
    }
    return "?";
}

CompGraph::CompGraph(int n_inputs) : n_inputs_(n_inputs)
{
    for (int i = 0; i < n_inputs; ++i) {
        Node n;
        n.kind = NodeKind::Input;
        n.input_index = i;
        nodes_.push_back(n);
    }
}

int CompGraph::input_node(int i) const
{
    if (i < 0 || i >= n_inputs_) throw Error("CompGraph: input index out of range");
    return i;
}

int CompGraph::add(Node n)
{
    const int id = static_cast<int>(nodes_.size());
    for (int src : n.in)
        if (src < 0 || src >= id) throw Error("CompGraph: edge to a later or missing node");
    if (n.kind == NodeKind::Affine && n.coef.size() != n.in.size()) throw Error("CompGraph: affine arity mismatch");
    if (n.kind == NodeKind::Input) throw Error("CompGraph: inputs are created with the graph");
    nodes_.push_back(std::move(n));
    return id;
}

void CompGraph::set_outputs(std::vector<int> outs)
{
    for (int o : outs)
        if (o < 0 || o >= static_cast<int>(nodes_.size())) throw Error("CompGraph: bad output node");
    outputs_ = std::move(outs);
}

Eigen::VectorXd CompGraph::evaluate(const Eigen::VectorXd& z) const
{
    if (z.size() != n_inputs_) throw Error("CompGraph::evaluate: input dimension mismatch");
    std::vector<double> val(nodes_.size());
    for (size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        switch (n.kind) {
        case NodeKind::Input: val[i] = z[n.input_index]; break;
        case NodeKind::Const: val[i] = n.b; break;
        case NodeKind::Affine: {
            double acc = n.b;
            for (size_t k = 0; k < n.in.size(); ++k) acc += n.coef[k] * val[n.in[k]];
            val[i] = acc;
            break;
        }
        case NodeKind::Multiply: val[i] = val[n.in[0]] * val[n.in[1]]; break;
        case NodeKind::Sin: val[i] = std::sin(val[n.in[0]]); break;
        case NodeKind::Cos: val[i] = std::cos(val[n.in[0]]); break;
        case NodeKind::Rbf: val[i] = rbf_scalar(val[n.in[0]], n.p0, n.p1); break;
        case NodeKind::Clamp: val[i] = clamp_val(val[n.in[0]], n.p0, n.p1); break;
        }
    }
    Eigen::VectorXd out(outputs_.size());
    for (size_t k = 0; k < outputs_.size(); ++k) out[k] = val[outputs_[k]];
    return out;
}

// ---- tracer -------------------------------------------------------------

namespace {

CompGraph* graph_of(std::initializer_list<const Sym*> xs)
{
    for (const Sym* s : xs)
        if (!s->is_const) return s->g;
    return nullptr;
}

Sym make_const(double v)
{
    Sym s;
    s.is_const = true;
    s.value = v;
    return s;
}

int node_for(const Sym& s, CompGraph* g)
{
    if (!s.is_const) return s.id;
    Node n;
    n.kind = NodeKind::Const;
    n.b = s.value;
    return g->add(n);
}

Sym unary(const Sym& a, NodeKind kind, double p0 = 0.0, double p1 = 0.0)
{
    Node n;
    n.kind = kind;
    n.in = {a.id};
    n.p0 = p0;
    n.p1 = p1;
    return Sym(a.g, a.g->add(n));
}

} // namespace

Sym konst(const Sym& /*like*/, double b) { return make_const(b); }

Sym lin(double b, std::initializer_list<Term<Sym>> terms)
{
    CompGraph* g = nullptr;
    for (const auto& t : terms)
        if (!t.v.is_const) g = t.v.g;
    if (!g) {
        double acc = b;
        for (const auto& t : terms) acc += t.c * t.v.value;
        return make_const(acc);
    }
    Node n;
    n.kind = NodeKind::Affine;
    n.b = b;
    for (const auto& t : terms) {
        n.in.push_back(node_for(t.v, g));
        n.coef.push_back(t.c);
    }
    return Sym(g, g->add(n));
}

Sym mul(const Sym& a, const Sym& b)
{
    CompGraph* g = graph_of({&a, &b});
    if (!g) return make_const(a.value * b.value);
    Node n;
    n.kind = NodeKind::Multiply;
    n.in = {node_for(a, g), node_for(b, g)};
    return Sym(g, g->add(n));
}

Sym sin_of(const Sym& a) { return a.is_const ? make_const(std::sin(a.value)) : unary(a, NodeKind::Sin); }
Sym cos_of(const Sym& a) { return a.is_const ? make_const(std::cos(a.value)) : unary(a, NodeKind::Cos); }

Sym clamp_of(const Sym& a, double lo, double hi)
{
    return a.is_const ? make_const(clamp_val(a.value, lo, hi)) : unary(a, NodeKind::Clamp, lo, hi);
}

Sym rbf_of(const Sym& a, double c, double k)
{
    return a.is_const ? make_const(rbf_scalar(a.value, c, k)) : unary(a, NodeKind::Rbf, c, k);
}

// ---- boxes ---------------------------------------------------------------

HyperRect::HyperRect(Eigen::VectorXd c, Eigen::VectorXd r) : center(std::move(c)), radii(std::move(r))
{
    if (center.size() != radii.size()) throw Error("HyperRect: dimension mismatch");
    for (int i = 0; i < radii.size(); ++i)
        if (!(radii[i] >= 0.0)) throw Error("HyperRect: radii must be non-negative");
}

HyperRect HyperRect::from_bounds(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi)
{
    Eigen::VectorXd c = 0.5 * (lo + hi);
    // Radius large enough that [c - r, c + r] covers [lo, hi] after rounding.
    Eigen::VectorXd r = ((hi - c).cwiseMax(c - lo)).cwiseMax(0.0);
    return HyperRect(c, r);
}

bool HyperRect::contains(const Eigen::VectorXd& z, double tol) const
{
    if (z.size() != center.size()) throw Error("HyperRect::contains: dimension mismatch");
    for (int i = 0; i < z.size(); ++i)
        if (std::abs(z[i] - center[i]) > radii[i] + tol) return false;
    return true;
}

HyperRect HyperRect::head(int n) const { return HyperRect(center.head(n), radii.head(n)); }

// ---- relaxation ------------------------------------------------------------

namespace {

constexpr double kPad = 64.0 * DBL_EPSILON;

struct Bound {
    Eigen::RowVectorXd L, U;
    double l0 = 0.0, u0 = 0.0;
    double lo = 0.0, hi = 0.0;
};

struct Box {
    Eigen::RowVectorXd c, r, mag;
};

// min / max of row*z + c0 over the box, padded outward.
double conc_lo(const Eigen::RowVectorXd& row, double c0, const Box& box)
{
    const double v = c0 + row.dot(box.c) - row.cwiseAbs().dot(box.r);
    return v - kPad * (std::abs(c0) + row.cwiseAbs().dot(box.mag)) - DBL_MIN;
}

double conc_hi(const Eigen::RowVectorXd& row, double c0, const Box& box)
{
    const double v = c0 + row.dot(box.c) + row.cwiseAbs().dot(box.r);
    return v + kPad * (std::abs(c0) + row.cwiseAbs().dot(box.mag)) + DBL_MIN;
}

void set_constant(Bound& b, int n, double lo, double hi)
{
    b.L = Eigen::RowVectorXd::Zero(n);
    b.U = Eigen::RowVectorXd::Zero(n);
    b.l0 = b.lo = lo;
    b.u0 = b.hi = hi;
}

// a*x + c substituted into x's symbolic bounds.
void scaled(const Bound& x, double a, Eigen::RowVectorXd& lo_row, double& lo_c, Eigen::RowVectorXd& hi_row,
            double& hi_c)
{
    if (a >= 0.0) {
        lo_row += a * x.L;
        lo_c += a * x.l0;
        hi_row += a * x.U;
        hi_c += a * x.u0;
    } else {
        lo_row += a * x.U;
        lo_c += a * x.u0;
        hi_row += a * x.L;
        hi_c += a * x.l0;
    }
}

std::pair<double, double> sin_range(double l, double u)
{
    if (u - l >= 2.0 * kPi) return {-1.0, 1.0};
    double lo = std::min(std::sin(l), std::sin(u)), hi = std::max(std::sin(l), std::sin(u));
    const double kmax = std::ceil((l - kPi / 2.0) / (2.0 * kPi));
    if (kPi / 2.0 + 2.0 * kPi * kmax <= u) hi = 1.0;
    const double kmin = std::ceil((l + kPi / 2.0) / (2.0 * kPi));
    if (-kPi / 2.0 + 2.0 * kPi * kmin <= u) lo = -1.0;
    return {std::max(-1.0, lo - 4.0 * DBL_EPSILON), std::min(1.0, hi + 4.0 * DBL_EPSILON)};
}

std::pair<double, double> cos_range(double l, double u)
{
    if (u - l >= 2.0 * kPi) return {-1.0, 1.0};
    double lo = std::min(std::cos(l), std::cos(u)), hi = std::max(std::cos(l), std::cos(u));
    const double kmax = std::ceil(l / (2.0 * kPi));
    if (2.0 * kPi * kmax <= u) hi = 1.0;
    const double kmin = std::ceil((l - kPi) / (2.0 * kPi));
    if (kPi + 2.0 * kPi * kmin <= u) lo = -1.0;
    return {std::max(-1.0, lo - 4.0 * DBL_EPSILON), std::min(1.0, hi + 4.0 * DBL_EPSILON)};
}

std::pair<double, double> rbf_range(double l, double u, double c, double k)
{
    const double fl = rbf_scalar(l, c, k), fu = rbf_scalar(u, c, k);
    double hi = (l <= c && c <= u) ? 1.0 : std::max(fl, fu);
    double lo = std::min(fl, fu);
    return {std::max(0.0, lo - 4.0 * DBL_EPSILON * (1.0 + lo) - DBL_MIN), std::min(1.0, hi + 4.0 * DBL_EPSILON)};
}

// Sound linear bounds of relu(z) for z = x - t with x in [l, u]; returned as
// (lower slope, lower offset, upper slope, upper offset) in terms of x.
struct Lin1 {
    double ls, lc, us, uc;
};

Lin1 relu_shift(double t, double l, double u)
{
    const double zl = l - t, zu = u - t;
    if (zl >= 0.0) return {1.0, -t, 1.0, -t};
    if (zu <= 0.0) return {0.0, 0.0, 0.0, 0.0};
    const double s = zu / (zu - zl);
    // upper chord s*(z - zl); lower either 0 or z
    const Lin1 up{0.0, 0.0, s, s * (-t - zl)};
    if (zu > -zl) return {1.0, -t, up.us, up.uc};
    return {0.0, 0.0, up.us, up.uc};
}

} // namespace

Relaxation relax(const CompGraph& g, const HyperRect& input)
{
    const int n = g.n_inputs();
    if (input.dim() != n) throw Error("relax: input dimension mismatch");
    Box box{input.center.transpose(), input.radii.transpose(), (input.center.cwiseAbs() + input.radii).transpose()};
    const auto& nodes = g.nodes();
    std::vector<Bound> bd(nodes.size());

    for (size_t i = 0; i < nodes.size(); ++i) {
        const Node& nd = nodes[i];
        Bound& b = bd[i];
        switch (nd.kind) {
        case NodeKind::Input: {
            b.L = Eigen::RowVectorXd::Unit(n, nd.input_index);
            b.U = b.L;
            b.l0 = b.u0 = 0.0;
            b.lo = input.center[nd.input_index] - input.radii[nd.input_index];
            b.hi = input.center[nd.input_index] + input.radii[nd.input_index];
            continue;
        }
        case NodeKind::Const: set_constant(b, n, nd.b, nd.b); continue;
        case NodeKind::Affine: {
            b.L = Eigen::RowVectorXd::Zero(n);
            b.U = Eigen::RowVectorXd::Zero(n);
            b.l0 = b.u0 = nd.b;
            for (size_t k = 0; k < nd.in.size(); ++k) scaled(bd[nd.in[k]], nd.coef[k], b.L, b.l0, b.U, b.u0);
            break;
        }
        case NodeKind::Multiply: {
            const Bound& x = bd[nd.in[0]];
            const Bound& y = bd[nd.in[1]];
            const double xl = x.lo, xu = x.hi, yl = y.lo, yu = y.hi;
            // Mean of the two McCormick under- and over-estimators.
            const double a = 0.5 * (yl + yu), c = 0.5 * (xl + xu);
            b.L = Eigen::RowVectorXd::Zero(n);
            b.U = Eigen::RowVectorXd::Zero(n);
            b.l0 = -0.5 * (xl * yl + xu * yu);
            b.u0 = -0.5 * (xl * yu + xu * yl);
            Eigen::RowVectorXd dummy_row = Eigen::RowVectorXd::Zero(n);
            double dummy = 0.0;
            scaled(x, a, b.L, b.l0, dummy_row, dummy);
            scaled(y, c, b.L, b.l0, dummy_row, dummy);
            dummy_row.setZero();
            scaled(x, a, dummy_row, dummy, b.U, b.u0);
            scaled(y, c, dummy_row, dummy, b.U, b.u0);
            const double p[4] = {xl * yl, xl * yu, xu * yl, xu * yu};
            const double ia_lo = *std::min_element(p, p + 4), ia_hi = *std::max_element(p, p + 4);
            const double pad = kPad * (std::abs(ia_lo) + std::abs(ia_hi)) + DBL_MIN;
            b.lo = std::max(conc_lo(b.L, b.l0, box), ia_lo - pad);
            b.hi = std::min(conc_hi(b.U, b.u0, box), ia_hi + pad);
            b.l0 -= kPad * std::abs(b.l0);
            b.u0 += kPad * std::abs(b.u0);
            continue;
        }
        case NodeKind::Sin:
        case NodeKind::Cos:
        case NodeKind::Rbf: {
            const Bound& x = bd[nd.in[0]];
            auto [lo, hi] = nd.kind == NodeKind::Sin   ? sin_range(x.lo, x.hi)
                            : nd.kind == NodeKind::Cos ? cos_range(x.lo, x.hi)
                                                       : rbf_range(x.lo, x.hi, nd.p0, nd.p1);
            set_constant(b, n, lo, hi);
            continue;
        }
        case NodeKind::Clamp: {
            const Bound& x = bd[nd.in[0]];
            const double lo_c = nd.p0, hi_c = nd.p1;
            if (x.hi <= lo_c) {
                set_constant(b, n, lo_c, lo_c);
                continue;
            }
            if (x.lo >= hi_c) {
                set_constant(b, n, hi_c, hi_c);
                continue;
            }
            if (x.lo >= lo_c && x.hi <= hi_c) {
                b = x;
                continue;
            }
            // clamp(x) = lo_c + relu(x - lo_c) - relu(x - hi_c)
            const Lin1 r1 = relu_shift(lo_c, x.lo, x.hi);
            const Lin1 r2 = relu_shift(hi_c, x.lo, x.hi);
            const double ls = r1.ls - r2.us, lc = lo_c + r1.lc - r2.uc;
            const double us = r1.us - r2.ls, uc = lo_c + r1.uc - r2.lc;
            b.L = Eigen::RowVectorXd::Zero(n);
            b.U = Eigen::RowVectorXd::Zero(n);
            b.l0 = lc;
            b.u0 = uc;
            Eigen::RowVectorXd dummy_row = Eigen::RowVectorXd::Zero(n);
            double dummy = 0.0;
            scaled(x, ls, b.L, b.l0, dummy_row, dummy);
            dummy_row.setZero();
            scaled(x, us, dummy_row, dummy, b.U, b.u0);
            const double pad = kPad * (std::abs(lo_c) + std::abs(hi_c) + std::abs(x.lo) + std::abs(x.hi));
            b.l0 -= pad;
            b.u0 += pad;
            b.lo = std::max(conc_lo(b.L, b.l0, box), clamp_val(x.lo, lo_c, hi_c));
            b.hi = std::min(conc_hi(b.U, b.u0, box), clamp_val(x.hi, lo_c, hi_c));
            continue;
        }
        }
        // affine tail: pad symbolic constants, then concretize
        const double mag = std::abs(nd.b);
        b.l0 -= kPad * (mag + std::abs(b.l0));
        b.u0 += kPad * (mag + std::abs(b.u0));
        b.lo = conc_lo(b.L, b.l0, box);
        b.hi = conc_hi(b.U, b.u0, box);
    }

    Relaxation out;
    const int m = g.n_outputs();
    out.bounds.Psi.resize(m, n);
    out.bounds.Phi.resize(m, n);
    out.bounds.alpha.resize(m);
    out.bounds.beta.resize(m);
    Eigen::VectorXd lo(m), hi(m);
    for (int k = 0; k < m; ++k) {
        const Bound& b = bd[g.outputs()[k]];
        out.bounds.Psi.row(k) = b.L;
        out.bounds.Phi.row(k) = b.U;
        out.bounds.alpha[k] = b.l0;
        out.bounds.beta[k] = b.u0;
        lo[k] = b.lo;
        hi[k] = b.hi;
    }
    out.output = HyperRect::from_bounds(lo, hi);
    return out;
}

// ---- closed-loop graphs ------------------------------------------------------

CompGraph build_closed_loop_graph(const Policy& policy, const VehicleModel& m, double dt)
{
    if (!(dt > 0.0)) throw Error("build_closed_loop_graph: dt must be positive");
    CompGraph g(6);
    State6<Sym> s;
    for (int i = 0; i < 6; ++i) s[i] = Sym(&g, g.input_node(i));
    State6<Sym> out = closed_loop_map(s, policy, m, dt);
    std::vector<int> outs;
    for (int i = 0; i < 6; ++i) outs.push_back(node_for(out[i], &g));
    g.set_outputs(outs);
    return g;
}

AugmentedGraph build_augmented_graph(const Policy& policy, const VehicleModel& m, double dt, double gamma)
{
    if (!(dt > 0.0)) throw Error("build_augmented_graph: dt must be positive");
    if (!(gamma > 0.0)) throw Error("build_augmented_graph: gamma must be positive");
    AugmentedGraph ag;
    ag.gamma = gamma;
    CompGraph& g = ag.graph;
    g = CompGraph(24);
    State6<Sym> s;
    for (int i = 0; i < 6; ++i) s[i] = Sym(&g, g.input_node(i));
    State6<Sym> f = closed_loop_map(s, policy, m, dt);
    std::vector<int> outs;
    for (int i = 0; i < 6; ++i) {
        Sym mu(&g, g.input_node(6 + i));
        outs.push_back(node_for(lin(0.0, {{1.0, f[i]}, {1.0, mu}}), &g));
    }
    for (int i = 0; i < 6; ++i) {
        Sym mu(&g, g.input_node(6 + i)), dmu(&g, g.input_node(12 + i)), dsig(&g, g.input_node(18 + i));
        outs.push_back(lin(0.0, {{1.0, mu}, {1.0, dmu}, {gamma, dsig}}).id);
    }
    for (int i = 12; i < 24; ++i) outs.push_back(g.input_node(i));
    g.set_outputs(outs);
    return ag;
}

HyperRect augmented_step(const AugmentedGraph& g, const HyperRect& rect)
{
    if (rect.dim() != 24) throw Error("augmented_step: rect must be 24-dimensional");
    return relax(g.graph, rect).output;
}

Eigen::VectorXd concretize(const Eigen::VectorXd& cov_diag, double gamma)
{
    if (!(gamma > 0.0)) throw Error("concretize: gamma must be positive");
    Eigen::VectorXd r(cov_diag.size());
    for (int i = 0; i < cov_diag.size(); ++i) {
        if (!(cov_diag[i] >= 0.0)) throw Error("concretize: negative variance");
        r[i] = gamma * std::sqrt(cov_diag[i]);
    }
    return r;
}

// ---- unsafe regions ----------------------------------------------------------

void validate_polygon(const ConvexPolygon& p)
{
    const auto& v = p.vertices;
    if (v.size() < 3) throw Error("polygon needs at least three vertices");
    int sign = 0;
    double area2 = 0.0;
    for (size_t i = 0; i < v.size(); ++i) {
        const Eigen::Vector2d a = v[i], b = v[(i + 1) % v.size()], c = v[(i + 2) % v.size()];
        const double cr = (b - a).x() * (c - b).y() - (b - a).y() * (c - b).x();
        area2 += a.x() * b.y() - b.x() * a.y();
        if (std::abs(cr) < 1e-12) continue;
        const int s = cr > 0.0 ? 1 : -1;
        if (sign == 0) sign = s;
        else if (s != sign) throw Error("polygon is not convex");
    }
    if (std::abs(area2) < 1e-12) throw Error("polygon is degenerate");
}

bool rect_intersects_polygon(const Eigen::Vector2d& lo, const Eigen::Vector2d& hi, const ConvexPolygon& p)
{
    validate_polygon(p);
    const auto& v = p.vertices;
    double pxl = v[0].x(), pxh = v[0].x(), pyl = v[0].y(), pyh = v[0].y();
    for (const auto& q : v) {
        pxl = std::min(pxl, q.x());
        pxh = std::max(pxh, q.x());
        pyl = std::min(pyl, q.y());
        pyh = std::max(pyh, q.y());
    }
    if (pxh < lo.x() || pxl > hi.x() || pyh < lo.y() || pyl > hi.y()) return false;
    const Eigen::Vector2d corners[4] = {lo, {hi.x(), lo.y()}, hi, {lo.x(), hi.y()}};
    for (size_t i = 0; i < v.size(); ++i) {
        const Eigen::Vector2d e = v[(i + 1) % v.size()] - v[i];
        const Eigen::Vector2d nrm(-e.y(), e.x());
        double pmin = std::numeric_limits<double>::infinity(), pmax = -pmin;
        for (const auto& q : v) {
            pmin = std::min(pmin, nrm.dot(q));
            pmax = std::max(pmax, nrm.dot(q));
        }
        double bmin = std::numeric_limits<double>::infinity(), bmax = -bmin;
        for (const auto& c : corners) {
            bmin = std::min(bmin, nrm.dot(c));
            bmax = std::max(bmax, nrm.dot(c));
        }
        if (bmax < pmin || bmin > pmax) return false;
    }
    return true;
}

bool rect_intersects_region(const HyperRect& r, const UnsafeRegion& region)
{
    if (r.dim() < 2) throw Error("rect_intersects_region: need at least (x, y)");
    const Eigen::Vector2d lo = r.lo().head<2>(), hi = r.hi().head<2>();
    for (const auto& p : region.polygons)
        if (rect_intersects_polygon(lo, hi, p)) return true;
    if (r.dim() >= 6) {
        if (region.max_speed && r.hi()[kU] > *region.max_speed) return true;
        if (region.heading_lo && r.lo()[kTheta] < *region.heading_lo) return true;
        if (region.heading_hi && r.hi()[kTheta] > *region.heading_hi) return true;
    }
    return false;
}

CertifyResult certify(const AugmentedGraph& g, const CertifyInput& in, int horizon, const UnsafeRegion& unsafe)
{
    if (horizon < 1) throw Error("certify: horizon must be >= 1");
    for (int i = 0; i < 6; ++i) {
        require_finite(in.x_hat[i], "certify state");
        require_finite(in.dist.mu_hat[i], "certify disturbance mean");
    }
    const double gamma = g.gamma;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(24), eps(24);
    z.head<6>() = in.x_hat;
    z.segment<6>(6) = in.dist.mu_hat;
    eps.head<6>() = concretize(in.Q_diag, gamma);
    eps.segment<6>(6) = concretize(in.dist.W_hat, gamma);
    eps.segment<6>(12) = in.dist.delta_mu.cwiseAbs();
    eps.segment<6>(18) = gamma * in.dist.delta_sigma.cwiseAbs();

    CertifyResult res;
    res.initial = HyperRect(z, eps);
    HyperRect R = res.initial;
    for (int i = 0; i < horizon; ++i) {
        R = augmented_step(g, R);
        HyperRect proj = R.head(6);
        if (rect_intersects_region(proj, unsafe)) {
            res.safe = false;
            if (res.first_violation < 0) res.first_violation = i;
        }
        res.rsoa.push_back(std::move(proj));
    }
    return res;
}

} // namespace usv
