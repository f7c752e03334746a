#include <doctest.h>

#include <random>

#include "usv/reachability.hpp"

using namespace usv;
using doctest::Approx;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v)
{
    Eigen::VectorXd out(static_cast<int>(v.size()));
    int i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

Node unary(NodeKind k, int in, double p0 = 0.0, double p1 = 0.0)
{
    Node n;
    n.kind = k;
    n.in = {in};
    n.p0 = p0;
    n.p1 = p1;
    return n;
}

Eigen::VectorXd sample_in(const HyperRect& r, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd z(r.dim());
    for (int i = 0; i < r.dim(); ++i) {
        // a quarter of the draws land on a face
        const double t = (rng() % 4 == 0) ? (rng() % 2 ? 1.0 : -1.0) : u(rng);
        z[i] = r.center[i] + t * r.radii[i];
    }
    return z;
}

// Samples z in the box; graph output must be inside the relaxed rect and
// between the linear bounds.
void check_sound(const CompGraph& g, const HyperRect& box, int samples, std::mt19937_64& rng)
{
    const Relaxation rel = relax(g, box);
    for (int s = 0; s < samples; ++s) {
        const Eigen::VectorXd z = sample_in(box, rng);
        const Eigen::VectorXd y = g.evaluate(z);
        REQUIRE(rel.output.contains(y, 1e-9));
        const Eigen::VectorXd lo = rel.bounds.Psi * z + rel.bounds.alpha;
        const Eigen::VectorXd hi = rel.bounds.Phi * z + rel.bounds.beta;
        REQUIRE(((lo.array() - 1e-9) <= y.array()).all());
        REQUIRE((y.array() <= (hi.array() + 1e-9)).all());
    }
}

FrozenTracklinePolicy test_policy()
{
    FrozenTracklinePolicy p;
    p.azimuth = 0.3;
    p.p1x = -2.0;
    p.p1y = 1.0;
    p.u_des = 1.0;
    p.gains = synthesize_gains(VehicleModel{});
    p.e_uI = -4.4;
    p.e_rI = 0.01;
    p.u_ad_rud = 1.5;
    return p;
}

HyperRect state_box(double scale)
{
    return HyperRect(vec({3.0, 1.0, 0.35, 0.95, 0.02, 0.03}),
                     scale * vec({0.5, 0.5, 0.05, 0.05, 0.02, 0.02}));
}

HyperRect augmented_box(double scale)
{
    Eigen::VectorXd c = Eigen::VectorXd::Zero(24), r = Eigen::VectorXd::Zero(24);
    const HyperRect s = state_box(scale);
    c.head(6) = s.center;
    r.head(6) = s.radii;
    c.segment(6, 6) = vec({0.01, -0.02, 0.0, -0.01, 0.0, 0.001});
    r.segment(6, 6) = scale * vec({0.05, 0.05, 0.005, 0.02, 0.01, 0.005});
    r.segment(12, 6) = scale * vec({1e-3, 1e-3, 1e-4, 1e-3, 1e-3, 1e-4});
    r.segment(18, 6) = scale * vec({3e-3, 3e-3, 3e-4, 3e-3, 3e-3, 3e-4});
    return HyperRect(c, r);
}

} // namespace

TEST_CASE("affine nodes are exact up to outward rounding")
{
    CompGraph g(1);
    Node a;
    a.kind = NodeKind::Affine;
    a.in = {g.input_node(0)};
    a.coef = {2.0};
    a.b = 1.0;
    g.set_outputs({g.add(a)});
    const Relaxation r = relax(g, HyperRect::from_bounds(vec({0}), vec({1})));
    CHECK(r.output.lo()[0] <= 1.0);
    CHECK(r.output.hi()[0] >= 3.0);
    CHECK(r.output.lo()[0] >= 1.0 - 1e-12);
    CHECK(r.output.hi()[0] <= 3.0 + 1e-12);
}

TEST_CASE("sin over [0, pi/2] contains [0, 1]")
{
    CompGraph g(1);
    g.set_outputs({g.add(unary(NodeKind::Sin, g.input_node(0)))});
    const Relaxation r = relax(g, HyperRect::from_bounds(vec({0}), vec({kPi / 2})));
    CHECK(r.output.lo()[0] <= 0.0);
    CHECK(r.output.hi()[0] >= 1.0);
    CHECK(r.output.hi()[0] - r.output.lo()[0] <= 1.0 + 1e-9);
}

TEST_CASE("per node kind soundness, 1e5 samples each")
{
    std::mt19937_64 rng(42);
    const std::vector<HyperRect> boxes{HyperRect::from_bounds(vec({0, 0}), vec({1, 1})),
                                       HyperRect::from_bounds(vec({-2.5, -0.3}), vec({0.7, 4.0})),
                                       HyperRect::from_bounds(vec({1.2, -3}), vec({5.9, -2.2}))};
    for (NodeKind k : {NodeKind::Multiply, NodeKind::Sin, NodeKind::Cos, NodeKind::Rbf, NodeKind::Clamp}) {
        CAPTURE(node_kind_name(k));
        CompGraph g(2);
        int out;
        if (k == NodeKind::Multiply) {
            Node n;
            n.kind = k;
            n.in = {g.input_node(0), g.input_node(1)};
            out = g.add(n);
        } else if (k == NodeKind::Rbf) {
            out = g.add(unary(k, g.input_node(0), 0.4, 1.0 / (2 * 0.3 * 0.3)));
        } else if (k == NodeKind::Clamp) {
            out = g.add(unary(k, g.input_node(1), -0.5, 1.5));
        } else {
            out = g.add(unary(k, g.input_node(0)));
        }
        g.set_outputs({out});
        for (const auto& b : boxes) check_sound(g, b, 100000 / static_cast<int>(boxes.size()) + 1, rng);
    }
}

TEST_CASE("product node: x*y over the unit square")
{
    CompGraph g(2);
    Node n;
    n.kind = NodeKind::Multiply;
    n.in = {g.input_node(0), g.input_node(1)};
    g.set_outputs({g.add(n)});
    const HyperRect box = HyperRect::from_bounds(vec({0, 0}), vec({1, 1}));
    const Relaxation r = relax(g, box);
    CHECK(r.output.lo()[0] <= 0.0);
    CHECK(r.output.hi()[0] >= 1.0);
    std::mt19937_64 rng(8);
    check_sound(g, box, 100000, rng);
}

TEST_CASE("closed-loop graph agrees with f_cl")
{
    const VehicleModel m;
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1, 1);
    for (const Policy& p : {Policy(ZeroPolicy{}), Policy(ReplayPolicy{45, -7}), Policy(test_policy())}) {
        const CompGraph g = build_closed_loop_graph(p, m, 0.1);
        CHECK(g.node_count() == build_closed_loop_graph(p, m, 0.1).node_count());
        for (int t = 0; t < 100; ++t) {
            Vec6 s;
            s << 20 * u(rng), 20 * u(rng), 3 * u(rng), 1 + u(rng), 0.2 * u(rng), 0.5 * u(rng);
            const Eigen::VectorXd a = g.evaluate(s);
            const Vec6 b = closed_loop_unwrapped(s, p, m, 0.1);
            REQUIRE((a - b).cwiseAbs().maxCoeff() <= 1e-9);
        }
    }
}

TEST_CASE("composed closed-loop graph is sound, 1e5 samples")
{
    const AugmentedGraph ag = build_augmented_graph(test_policy(), VehicleModel{}, 0.1, 3.0);
    std::mt19937_64 rng(99);
    check_sound(ag.graph, augmented_box(1.0), 100000, rng);
}

TEST_CASE("relaxation: point consistency and monotonicity")
{
    const AugmentedGraph ag = build_augmented_graph(test_policy(), VehicleModel{}, 0.1, 3.0);
    const HyperRect pt(augmented_box(1.0).center, Eigen::VectorXd::Zero(24));
    const HyperRect out = augmented_step(ag, pt);
    CHECK(out.radii.maxCoeff() <= 1e-9);
    CHECK((out.center - ag.graph.evaluate(pt.center)).cwiseAbs().maxCoeff() <= 1e-9);

    HyperRect prev = augmented_step(ag, augmented_box(0.2));
    for (double s : {0.5, 1.0, 2.0}) {
        const HyperRect cur = augmented_step(ag, augmented_box(s));
        CHECK((cur.lo().array() <= prev.lo().array() + 1e-12).all());
        CHECK((cur.hi().array() >= prev.hi().array() - 1e-12).all());
        prev = cur;
    }
}

TEST_CASE("augmented step: drift rows pass through, mean widens by drift bounds")
{
    const double gamma = 3.0;
    const AugmentedGraph ag = build_augmented_graph(test_policy(), VehicleModel{}, 0.1, gamma);
    const HyperRect in = augmented_box(1.0);
    const HyperRect out = augmented_step(ag, in);
    for (int i = 12; i < 24; ++i) {
        CHECK(out.center[i] == in.center[i]);
        CHECK(out.radii[i] == in.radii[i]);
    }
    for (int i = 0; i < 6; ++i) {
        CHECK(out.radii[6 + i] == Approx(in.radii[6 + i] + in.radii[12 + i] + gamma * in.radii[18 + i]).epsilon(1e-12));
        CHECK(out.center[6 + i] == Approx(in.center[6 + i]).epsilon(1e-12));
    }

    // zero radii, zero disturbance: point propagation equals f_cl
    Eigen::VectorXd c = Eigen::VectorXd::Zero(24);
    c.head(6) = state_box(1).center;
    const HyperRect o = augmented_step(ag, HyperRect(c, Eigen::VectorXd::Zero(24)));
    const Vec6 f = closed_loop_unwrapped(Vec6(c.head(6)), test_policy(), VehicleModel{}, 0.1);
    CHECK((o.center.head(6) - f).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("concretize")
{
    CHECK(concretize(vec({0.01}), 3.0)[0] == Approx(0.3));
    CHECK(concretize(vec({0, 0}), 3.0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(concretize(vec({0.36}), 3.0)[0] == Approx(2 * concretize(vec({0.09}), 3.0)[0]));
    CHECK_THROWS_AS(concretize(vec({-1}), 3.0), Error);
}

TEST_CASE("polygon geometry")
{
    const ConvexPolygon sq{{{0, 0}, {0, 1}, {1, 1}, {1, 0}}};
    CHECK_FALSE(rect_intersects_polygon({2, 2}, {3, 3}, sq));
    CHECK(rect_intersects_polygon({0.5, 0.5}, {3, 3}, sq));
    CHECK(rect_intersects_polygon({1, -1}, {2, 2}, sq));   // shares an edge
    CHECK(rect_intersects_polygon({1, 1}, {2, 2}, sq));    // shares a corner
    CHECK(rect_intersects_polygon({-5, -5}, {5, 5}, sq));  // contains it

    const ConvexPolygon tri{{{0, 0}, {4, 0}, {0, 4}}};
    CHECK_FALSE(rect_intersects_polygon({2.1, 2.1}, {3, 3}, tri)); // only the diagonal separates
    CHECK(rect_intersects_polygon({2, 2}, {3, 3}, tri));           // touches the diagonal

    CHECK_THROWS_AS(validate_polygon(ConvexPolygon{{{0, 0}, {1, 1}}}), Error);
    CHECK_THROWS_AS(validate_polygon(ConvexPolygon{{{0, 0}, {1, 1}, {2, 2}}}), Error);

    UnsafeRegion reg;
    reg.max_speed = 1.5;
    CHECK_FALSE(rect_intersects_region(state_box(1), reg));
    reg.max_speed = 0.97;
    CHECK(rect_intersects_region(state_box(1), reg));
}

TEST_CASE("certify")
{
    const AugmentedGraph ag = build_augmented_graph(test_policy(), VehicleModel{}, 0.1, 3.0);
    CertifyInput in;
    in.x_hat = state_box(1).center;
    in.Q_diag = (Vec6() << 0.01, 0.01, 1e-4, 1e-4, 1e-5, 1e-5).finished();
    in.dist.W_hat = (Vec6() << 1e-4, 1e-4, 1e-6, 1e-4, 1e-6, 1e-6).finished();
    in.dist.delta_mu = Vec6::Constant(1e-4);
    in.dist.delta_sigma = Vec6::Constant(1e-4);

    const CertifyResult ok = certify(ag, in, 20, UnsafeRegion{});
    CHECK(ok.safe);
    CHECK(ok.first_violation == -1);
    CHECK(ok.rsoa.size() == 20);

    UnsafeRegion around;
    around.polygons.push_back({{{2, 0}, {2, 2}, {4, 2}, {4, 0}}});
    const CertifyResult bad = certify(ag, in, 20, around);
    CHECK_FALSE(bad.safe);
    CHECK(bad.first_violation == 0);

    const CertifyResult again = certify(ag, in, 20, UnsafeRegion{});
    for (size_t i = 0; i < ok.rsoa.size(); ++i) {
        CHECK((ok.rsoa[i].center.array() == again.rsoa[i].center.array()).all());
        CHECK((ok.rsoa[i].radii.array() == again.rsoa[i].radii.array()).all());
    }

    // wider gamma never shrinks a set
    const CertifyResult wide = certify(build_augmented_graph(test_policy(), VehicleModel{}, 0.1, 4.0), in, 20, {});
    const CertifyResult narrow = certify(build_augmented_graph(test_policy(), VehicleModel{}, 0.1, 2.0), in, 20, {});
    for (size_t i = 0; i < ok.rsoa.size(); ++i) {
        CHECK((narrow.rsoa[i].radii.array() <= ok.rsoa[i].radii.array() + 1e-12).all());
        CHECK((ok.rsoa[i].radii.array() <= wide.rsoa[i].radii.array() + 1e-12).all());
    }

    in.x_hat[0] = NAN;
    CHECK_THROWS_AS(certify(ag, in, 20, {}), Error);
}
