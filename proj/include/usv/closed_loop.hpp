#pragma once

#include <array>
#include <cmath>
#include <initializer_list>
#include <variant>

#include "usv/control.hpp"
#include "usv/guidance.hpp"
#include "usv/vehicle.hpp"

namespace usv {

// Scalar primitives f_cl is written in. The double overloads evaluate
// directly; the graph tracer (reachability.hpp) provides overloads that
// record nodes, and its evaluator repeats these exact operations.
template <class S>
struct Term {
    double c;
    S v;
};

inline double lin(double b, std::initializer_list<Term<double>> terms)
{
    double acc = b;
    for (const auto& t : terms) acc += t.c * t.v;
    return acc;
}
inline double konst(double /*like*/, double b) { return b; }
inline double mul(double a, double b) { return a * b; }
inline double sin_of(double a) { return std::sin(a); }
inline double cos_of(double a) { return std::cos(a); }
inline double clamp_of(double a, double lo, double hi) { return clamp_val(a, lo, hi); }
inline double rbf_scalar(double a, double c, double inv_two_sigma_sq)
{
    const double d = a - c;
    return std::exp(-(d * d) * inv_two_sigma_sq);
}
inline double rbf_of(double a, double c, double inv_two_sigma_sq) { return rbf_scalar(a, c, inv_two_sigma_sq); }

class CompGraph;

// Tracing scalar for the reachability graph (reachability.hpp): arithmetic
// on Sym records nodes. Values computable from
// constants alone are folded with the double primitives.
struct Sym {
    Sym() = default;
    Sym(CompGraph* graph, int node) : g(graph), id(node) {}

    CompGraph* g = nullptr;
    int id = -1;
    bool is_const = false;
    double value = 0.0;
};

Sym konst(const Sym& like, double b);
Sym lin(double b, std::initializer_list<Term<Sym>> terms);
Sym mul(const Sym& a, const Sym& b);
Sym sin_of(const Sym& a);
Sym cos_of(const Sym& a);
Sym clamp_of(const Sym& a, double lo, double hi);
Sym rbf_of(const Sym& a, double c, double inv_two_sigma_sq);

struct ZeroPolicy {};

// Holds logged (u_thr, u_rud) channel commands.
struct ReplayPolicy {
    double u_thr = 0.0;
    double u_rud = 0.0;
};

// Trackline LQR-PI policy with integrators and adaptive terms frozen. The
// guidance correction uses the clamped PD term instead of its arctangent and
// the helm filter at steady state (r_des = tau_theta * dtheta).
struct FrozenTracklinePolicy {
    double azimuth = 0.0;
    double p1x = 0.0, p1y = 0.0;
    double u_des = 1.0;
    TracklineGains guide;
    double corr_limit = kPi / 2.0;
    double tau_theta = 0.2;
    LqrPiGains gains;
    double e_uI = 0.0, e_rI = 0.0;
    double u_ad_thr = 0.0, u_ad_rud = 0.0;
    double thr_limit = 100.0, rud_limit = 50.0;
};

using Policy = std::variant<ZeroPolicy, ReplayPolicy, FrozenTracklinePolicy>;

template <class S>
using State6 = std::array<S, 6>;

template <class S>
std::pair<S, S> policy_commands(const State6<S>& s, const Policy& policy, double dt)
{
    if (const auto* rp = std::get_if<ReplayPolicy>(&policy)) return {konst(s[0], rp->u_thr), konst(s[0], rp->u_rud)};
    if (std::holds_alternative<ZeroPolicy>(policy)) return {konst(s[0], 0.0), konst(s[0], 0.0)};
    const auto& p = std::get<FrozenTracklinePolicy>(policy);
    const double sa = std::sin(p.azimuth), ca = std::cos(p.azimuth);
    const LqrPiGains& g = p.gains;

    const S e = lin(sa * p.p1x - ca * p.p1y, {{-sa, s[kX]}, {ca, s[kY]}});
    const S rel = lin(-p.azimuth, {{1.0, s[kTheta]}});
    const S e_dot = mul(s[kU], sin_of(rel));
    const S corr = clamp_of(lin(0.0, {{p.guide.k_p, e}, {p.guide.k_d, e_dot}}), -p.corr_limit, p.corr_limit);
    const S r_des = lin(p.tau_theta * p.azimuth, {{-p.tau_theta, corr}, {-p.tau_theta, s[kTheta]}});
    const S e_rI = lin(p.e_rI, {{dt, s[kR]}, {-dt, r_des}});
    const S rud = clamp_of(lin(p.u_ad_rud, {{-g.k_r_i, e_rI}, {-g.k_v_p, s[kV]}, {-g.k_r_p, s[kR]}}), -p.rud_limit,
                           p.rud_limit);
    const S e_uI = lin(p.e_uI - dt * p.u_des, {{dt, s[kU]}});
    const S thr = clamp_of(lin(p.u_ad_thr, {{-g.k_u_i, e_uI}, {-g.k_u_p, s[kU]}}), -p.thr_limit, p.thr_limit);
    return {thr, rud};
}

// f_cl without the final heading wrap: controller, mixer, saturation, then
// model.substeps Euler substeps of dynamics and kinematics.
template <class S>
State6<S> closed_loop_map(const State6<S>& s0, const Policy& policy, const VehicleModel& m, double dt)
{
    const auto [thr, rud] = policy_commands(s0, policy, dt);
    const S k = mul(thr, rud);
    const double lim = m.thruster_limit;
    const S uL = clamp_of(lin(0.0, {{1.0, thr}, {1.0 / m.rudder_max, k}}), -lim, lim);
    const S uR = clamp_of(lin(0.0, {{1.0, thr}, {-1.0 / m.rudder_max, k}}), -lim, lim);
    const double gr = m.rudder_max / (2.0 * m.thrust_ref);
    const S thr_eff = lin(0.0, {{0.5, uL}, {0.5, uR}});
    const S rud_eff = lin(0.0, {{gr, uL}, {-gr, uR}});

    const double h = dt / m.substeps;
    const auto& A = m.sway_yaw.A_p;
    const auto& B = m.sway_yaw.B_p;
    const double bu = h * m.speed.b_p1 * m.speed.lambda_1;
    const double bv = h * B[0] * m.sway_yaw.lambda_2, br = h * B[1] * m.sway_yaw.lambda_2;
    State6<S> s = s0;
    for (int i = 0; i < m.substeps; ++i) {
        const S c = cos_of(s[kTheta]);
        const S sn = sin_of(s[kTheta]);
        const S uc = mul(s[kU], c), vs = mul(s[kV], sn), us = mul(s[kU], sn), vc = mul(s[kV], c);
        State6<S> n = s;
        n[kX] = lin(0.0, {{1.0, s[kX]}, {h, uc}, {-h, vs}});
        n[kY] = lin(0.0, {{1.0, s[kY]}, {h, us}, {h, vc}});
        n[kTheta] = lin(0.0, {{1.0, s[kTheta]}, {h, s[kR]}});
        n[kU] = lin(0.0, {{1.0 + h * m.speed.a_p1, s[kU]}, {bu, thr_eff}});
        n[kV] = lin(0.0, {{1.0 + h * A(0, 0), s[kV]}, {h * A(0, 1), s[kR]}, {bv, rud_eff}});
        n[kR] = lin(0.0, {{h * A(1, 0), s[kV]}, {1.0 + h * A(1, 1), s[kR]}, {br, rud_eff}});
        s = n;
    }
    return s;
}

Vec6 closed_loop_unwrapped(const Vec6& s, const Policy& policy, const VehicleModel& m, double dt);

// f_cl(x; pi) + w, heading re-wrapped.
VehicleState closed_loop_step(const VehicleState& state, const Policy& policy, const DisturbanceVector& w,
                              const VehicleModel& m, double dt);
Vec6 closed_loop_step(const Vec6& state, const Policy& policy, const DisturbanceVector& w, const VehicleModel& m,
                      double dt);

} // namespace usv
