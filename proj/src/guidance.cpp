#include "usv/guidance.hpp"

#include <algorithm>
#include <limits>

#include "usv/common.hpp"

namespace usv {

int DecisionGrid::n_speed() const { return static_cast<int>(std::floor((u_max - u_min) / u_step + 1e-9)) + 1; }
int DecisionGrid::n_heading() const { return static_cast<int>(std::lround(2.0 * kPi / heading_step)); }
double DecisionGrid::speed(int i) const { return u_min + i * u_step; }
double DecisionGrid::heading(int j) const { return -kPi + (j + 1) * (2.0 * kPi / n_heading()); }

BehaviorDecision arbiter(const std::vector<WeightedBehavior>& behaviors, const DecisionGrid& grid)
{
    if (behaviors.empty()) throw Error("arbiter: no active behaviors");
    const int ns = grid.n_speed(), nh = grid.n_heading();
    if (ns < 1 || nh < 1) throw Error("arbiter: empty decision grid");
    for (const auto& b : behaviors)
        if (!(b.weight >= 0.0)) throw Error("arbiter: negative weight");
    double best = -std::numeric_limits<double>::infinity();
    BehaviorDecision out{grid.speed(0), grid.heading(0)};
    for (int i = 0; i < ns; ++i) {
        const double u = grid.speed(i);
        for (int j = 0; j < nh; ++j) {
            const double th = grid.heading(j);
            double total = 0.0;
            for (const auto& b : behaviors) total += b.weight * b.utility(u, th);
            if (total > best) {
                best = total;
                out = {u, th};
            }
        }
    }
    return out;
}

UtilityFn peaked_utility(BehaviorDecision peak, double speed_span)
{
    return [peak, speed_span](double u, double th) {
        // |wrap(th - peak)| equals |delta_theta| and is cheaper inside the grid search
        return -std::abs(u - peak.u_DES) / speed_span - std::abs(wrap_angle(th - peak.theta_DES)) / kPi;
    };
}

double delta_theta(double theta, double theta_DES)
{
    const double dot = std::sin(theta) * std::sin(theta_DES) + std::cos(theta) * std::cos(theta_DES);
    const double e3 = std::sin(theta) * std::cos(theta_DES) - std::cos(theta) * std::sin(theta_DES);
    const double mag = std::acos(clamp_val(dot, -1.0, 1.0));
    if (e3 > 0.0) return -mag;
    if (e3 < 0.0) return mag;
    return dot < 0.0 ? kPi : 0.0;
}

double Segment::azimuth() const { return std::atan2(p2[1] - p1[1], p2[0] - p1[0]); }

double cross_track(const Vec2& p, const Segment& seg)
{
    const double az = seg.azimuth();
    return -std::sin(az) * (p[0] - seg.p1[0]) + std::cos(az) * (p[1] - seg.p1[1]);
}

BehaviorDecision trackline_pd(const Pose& pose, double u_sog, const Segment& seg, const TracklineGains& g,
                              double leg_speed)
{
    if (!(seg.length() > 0.0)) throw Error("trackline_pd: degenerate segment");
    const double az = seg.azimuth();
    const double e = cross_track(Vec2(pose.x, pose.y), seg);
    const double e_dot = u_sog * std::sin(pose.theta - az);
    return {leg_speed, wrap_angle(az - std::atan(g.k_p * e + g.k_d * e_dot))};
}

double l1_yaw_rate(double u_sog, double L1, double eta)
{
    if (!(L1 > 0.0)) throw Error("l1_yaw_rate: L1 must be positive");
    return 2.0 * u_sog * std::sin(eta) / L1;
}

L1Reference l1_reference_point(const Pose& pose, const std::vector<Vec2>& path, double L1)
{
    if (path.empty()) throw Error("l1_reference_point: empty path");
    const Vec2 p(pose.x, pose.y);
    L1Reference out;
    double best_s = -1.0, s0 = 0.0;
    for (size_t i = 0; i + 1 < path.size(); ++i) {
        const Vec2 a = path[i], d = path[i + 1] - path[i];
        const double len = d.norm();
        if (len > 0.0) {
            // |a + t d - p|^2 = L1^2
            const Vec2 f = a - p;
            const double A = d.dot(d), B = 2.0 * f.dot(d), C = f.dot(f) - L1 * L1;
            const double disc = B * B - 4.0 * A * C;
            if (disc >= 0.0) {
                const double sq = std::sqrt(disc);
                for (double t : {(-B - sq) / (2.0 * A), (-B + sq) / (2.0 * A)}) {
                    if (t < 0.0 || t > 1.0) continue;
                    const double s = s0 + t * len;
                    if (s > best_s) {
                        best_s = s;
                        out.point = a + t * d;
                        out.intersected = true;
                    }
                }
            }
        }
        s0 += len;
    }
    if (!out.intersected) {
        double best_d = std::numeric_limits<double>::infinity();
        out.point = path.front();
        for (size_t i = 0; i + 1 < path.size(); ++i) {
            const Vec2 a = path[i], d = path[i + 1] - path[i];
            const double A = d.dot(d);
            const double t = A > 0.0 ? clamp_val((p - a).dot(d) / A, 0.0, 1.0) : 0.0;
            const Vec2 q = a + t * d;
            if ((q - p).norm() < best_d) {
                best_d = (q - p).norm();
                out.point = q;
            }
        }
        if (path.size() == 1) out.point = path.front();
    }
    const Vec2 los = out.point - p;
    out.eta = los.norm() > 0.0 ? wrap_angle(std::atan2(los[1], los[0]) - pose.theta) : 0.0;
    return out;
}

HelmFilterOutput helm_filter_step(const HelmFilterState& s, const BehaviorDecision& d, double theta, double dt)
{
    if (!(dt > 0.0)) throw Error("helm_filter_step: dt must be positive");
    if (!(s.tau_u > 0.0 && s.tau_r > 0.0)) throw Error("helm_filter_step: time constants must be positive");
    HelmFilterOutput out;
    out.state = s;
    out.state.q1 = s.q1 + dt * (-s.q1 / s.tau_u + d.u_DES);
    out.state.q2 = s.q2 + dt * (-s.q2 / s.tau_r + s.tau_theta * delta_theta(theta, d.theta_DES));
    out.u_des = out.state.q1 / s.tau_u;
    out.r_des = out.state.q2 / s.tau_r;
    return out;
}

namespace {

Vec2 heading_vec(double psi) { return Vec2(std::cos(psi), std::sin(psi)); }
Vec2 right_of(double psi) { return Vec2(-std::sin(psi), std::cos(psi)); }

struct PlanBuilder {
    PathPlan plan;
    Vec2 pos;
    double psi = 0.0;
    double arc_step;

    void push_point(const Vec2& q)
    {
        if (plan.points.empty() || (plan.points.back() - q).norm() > 1e-12) plan.points.push_back(q);
    }

    void line_to(const Vec2& q)
    {
        PathPiece pc;
        pc.kind = PathPiece::Line;
        pc.start = pos;
        pc.end = q;
        pc.heading_start = pc.heading_end = std::atan2(q[1] - pos[1], q[0] - pos[0]);
        plan.pieces.push_back(pc);
        push_point(q);
        pos = q;
        psi = pc.heading_end;
    }

    // dir +1 right, -1 left
    void arc(double R, int dir, double angle)
    {
        PathPiece pc;
        pc.kind = PathPiece::Arc;
        pc.start = pos;
        pc.radius = R;
        pc.direction = dir;
        pc.center = pos + dir * R * right_of(psi);
        pc.heading_start = wrap_angle(psi);
        const int n = std::max(1, static_cast<int>(std::ceil(angle / arc_step - 1e-9)));
        const double psi0 = psi;
        for (int k = 1; k <= n; ++k) {
            const double ps = psi0 + dir * angle * k / n;
            push_point(pc.center - dir * R * right_of(ps));
        }
        psi = psi0 + dir * angle;
        pos = pc.center - dir * R * right_of(psi);
        pc.end = pos;
        pc.heading_end = wrap_angle(psi);
        plan.pieces.push_back(pc);
    }
};

} // namespace

double PathPlan::length() const
{
    double L = 0.0;
    for (size_t i = 0; i + 1 < points.size(); ++i) L += (points[i + 1] - points[i]).norm();
    return L;
}

PathPlan legrun_waypoints(const LegRunPath& path)
{
    const Vec2 d = path.vx2 - path.vx1;
    if (!(d.norm() > 0.0)) throw Error("legrun_waypoints: vertices coincide");
    if (path.turn_radii.empty()) throw Error("legrun_waypoints: no turns scheduled");
    for (double R : path.turn_radii)
        if (!(R > 0.0)) throw Error("legrun_waypoints: radii must be positive");
    if (!(path.arc_step > 0.0)) throw Error("legrun_waypoints: arc step must be positive");

    PlanBuilder b;
    b.arc_step = path.arc_step;
    b.pos = path.vx1;
    b.psi = std::atan2(d[1], d[0]);
    b.push_point(path.vx1);
    b.line_to(path.vx2);
    for (size_t k = 0; k < path.turn_radii.size(); ++k) {
        const double R = path.turn_radii[k];
        // Odd turns loop to the right, even turns to the left: a quarter turn
        // away from the loop side, then three quarters back onto the
        // reciprocal track 2R past the vertex.
        const int loop_dir = (k % 2 == 0) ? +1 : -1;
        b.arc(R, -loop_dir, kPi / 2.0);
        b.arc(R, loop_dir, 1.5 * kPi);
        b.plan.events.push_back({b.plan.length(), "turn_complete", static_cast<int>(k) + 1});
        const Vec2 target = (k % 2 == 0) ? path.vx1 : path.vx2;
        b.line_to(target);
    }
    return b.plan;
}

PathTracker::PathTracker(std::vector<Vec2> points) : pts_(std::move(points))
{
    if (pts_.size() < 2) throw Error("PathTracker: need at least two points");
    cum_.push_back(0.0);
    for (size_t i = 0; i + 1 < pts_.size(); ++i) {
        Segment s{pts_[i], pts_[i + 1]};
        if (!(s.length() > 0.0)) throw Error("PathTracker: degenerate segment");
        segs_.push_back(s);
        cum_.push_back(cum_.back() + s.length());
    }
}

void PathTracker::update(const Vec2& p)
{
    while (true) {
        const Segment& s = segs_[idx_];
        const Vec2 d = s.p2 - s.p1;
        t_ = (p - s.p1).dot(d) / d.dot(d);
        if (t_ < 1.0) break;
        if (idx_ + 1 == segs_.size()) {
            done_ = true;
            break;
        }
        ++idx_;
    }
}

double PathTracker::progress() const
{
    return cum_[idx_] + clamp_val(t_, 0.0, 1.0) * segs_[idx_].length();
}

double PathTracker::cross_track_error(const Vec2& p) const { return cross_track(p, segs_[idx_]); }

StationError station_error(const VehicleState& guide, const VehicleState& own, double along, double cross)
{
    const double th = guide.pose.theta;
    const Vec2 target = Vec2(guide.pose.x, guide.pose.y) + along * heading_vec(th) + cross * right_of(th);
    const Vec2 rel = target - Vec2(own.pose.x, own.pose.y);
    return {rel.dot(heading_vec(th)), rel.dot(right_of(th))};
}

BehaviorDecision unrep_target(const VehicleState& guide, const VehicleState& own, double along, double cross,
                              const UnrepGains& g)
{
    const StationError e = station_error(guide, own, along, cross);
    const double u_guide = speed_over_ground(guide.vel);
    const double u_own = speed_over_ground(own.vel);
    BehaviorDecision out;
    out.u_DES = clamp_val(u_guide + g.k_along * e.inline_err, g.u_min, g.u_max);
    out.theta_DES = wrap_angle(guide.pose.theta + std::atan(g.k_cross * e.cross_err / std::max(u_own, g.eps)));
    return out;
}

} // namespace usv
