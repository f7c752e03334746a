#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "usv/vehicle.hpp"

namespace usv {

struct BehaviorDecision {
    double u_DES = 0.0;
    double theta_DES = 0.0;
};

struct DecisionGrid {
    double u_min = 0.0;
    double u_max = 2.0;
    double u_step = 0.05;
    double heading_step = deg2rad(1.0);

    int n_speed() const;
    int n_heading() const;
    double speed(int i) const;
    double heading(int j) const; // in (-pi, pi]
};

using UtilityFn = std::function<double(double u, double theta)>;

struct WeightedBehavior {
    double weight = 1.0;
    UtilityFn utility;
};

// Weighted-sum argmax over the grid, ties to the lowest flat index
// (speed-major).
BehaviorDecision arbiter(const std::vector<WeightedBehavior>& behaviors, const DecisionGrid& grid);

// Utility peaked at a single (u, theta) decision, linear fall-off.
UtilityFn peaked_utility(BehaviorDecision peak, double speed_span);

double delta_theta(double theta, double theta_DES);

struct TracklineGains {
    double k_p = 0.5;
    double k_d = 1.0;
};

using Vec2 = Eigen::Vector2d;

struct Segment {
    Vec2 p1, p2;
    double azimuth() const;
    double length() const { return (p2 - p1).norm(); }
};

// Signed cross-track distance, positive to the right of the segment.
double cross_track(const Vec2& p, const Segment& seg);

BehaviorDecision trackline_pd(const Pose& pose, double u_sog, const Segment& seg, const TracklineGains& g,
                              double leg_speed);

double l1_yaw_rate(double u_sog, double L1, double eta);

struct L1Reference {
    Vec2 point;
    double eta = 0.0;
    bool intersected = false;
};

L1Reference l1_reference_point(const Pose& pose, const std::vector<Vec2>& path, double L1);

struct HelmFilterState {
    double q1 = 0.0;
    double q2 = 0.0;
    double tau_u = 1.0;
    double tau_r = 0.1;
    double tau_theta = 0.2;
};

struct HelmFilterOutput {
    double u_des = 0.0;
    double r_des = 0.0;
    HelmFilterState state;
};

HelmFilterOutput helm_filter_step(const HelmFilterState& s, const BehaviorDecision& d, double theta, double dt);

struct LegRunPath {
    Vec2 vx1{0.0, 0.0};
    Vec2 vx2{40.0, 0.0};
    std::vector<double> turn_radii{20.0, 20.0, 10.0, 10.0};
    double arc_step = deg2rad(5.0);
};

struct ProgressEvent {
    double s = 0.0; // path distance at which the event fires
    std::string name;
    int index = 0;
};

struct PathPiece {
    enum Kind { Line, Arc } kind = Line;
    Vec2 start, end;
    double heading_start = 0.0, heading_end = 0.0; // tangent headings
    Vec2 center{0.0, 0.0};
    double radius = 0.0;
    int direction = 0; // +1 right turn, -1 left turn
};

struct PathPlan {
    std::vector<PathPiece> pieces;
    std::vector<Vec2> points;
    std::vector<ProgressEvent> events;
    double length() const;
};

PathPlan legrun_waypoints(const LegRunPath& path);

// Follows a polyline segment by segment, advancing when the along-track
// projection passes a segment end.
class PathTracker {
public:
    explicit PathTracker(std::vector<Vec2> points);
    void update(const Vec2& p);
    const Segment& segment() const { return segs_[idx_]; }
    size_t index() const { return idx_; }
    double progress() const; // path distance of the projection
    bool finished() const { return done_; }
    double cross_track_error(const Vec2& p) const;
    const std::vector<Vec2>& points() const { return pts_; }

private:
    std::vector<Vec2> pts_;
    std::vector<Segment> segs_;
    std::vector<double> cum_;
    size_t idx_ = 0;
    double t_ = 0.0;
    bool done_ = false;
};

struct UnrepGains {
    double k_along = 0.3;
    double k_cross = 0.4;
    double u_min = 0.0;
    double u_max = 2.0;
    double eps = 0.2;
};

struct StationError {
    double inline_err = 0.0; // target ahead of own ship along guide heading
    double cross_err = 0.0;  // target to starboard of own ship
};

StationError station_error(const VehicleState& guide, const VehicleState& own, double along, double cross);

BehaviorDecision unrep_target(const VehicleState& guide, const VehicleState& own, double along, double cross,
                              const UnrepGains& g = {});

} // namespace usv
