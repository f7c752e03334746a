#include "usv/simulation.hpp"

#include <algorithm>
#include <deque>
#include <random>

namespace usv {

bool RunLog::has_event(const std::string& name) const
{
    return std::any_of(events.begin(), events.end(), [&](const EventRecord& e) { return e.name == name; });
}

namespace {

using MType = MissionConfig::Type;

struct Vessel {
    VehicleState truth;
    Vec6 meas = Vec6::Zero();
    InnerLoopController ctrl;
    HelmFilterState helm;
    BehaviorDecision decision;
    ControllerOutput cmd;
    double u_des = 0.0, r_des = 0.0;
    double uL_applied = 0.0, uR_applied = 0.0;
    std::optional<PathTracker> tracker;
    DecisionGrid grid;
};

double polyline_distance(const std::vector<Vec2>& pts, const Vec2& p, int* side)
{
    double best = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
        const Vec2 d = pts[i + 1] - pts[i];
        const double t = clamp_val((p - pts[i]).dot(d) / d.squaredNorm(), 0.0, 1.0);
        const Vec2 q = pts[i] + t * d;
        const double dist = (p - q).norm();
        if (dist < best) {
            best = dist;
            const double cross = d[0] * (p[1] - pts[i][1]) - d[1] * (p[0] - pts[i][0]);
            *side = cross < 0.0 ? -1 : 1; // +1: right of the centreline
        }
    }
    return best;
}

class Simulation {
public:
    explicit Simulation(const ScenarioConfig& cfg);
    RunLog run();

private:
    void sense(int k);
    void evaluate_triggers(int k, double t);
    void helm(int k);
    void control(int k, double t);
    bool physics(int k, double t); // false ends the run
    void event(int k, double t, const std::string& name, int vehicle, const std::string& detail = "");
    Vec2 pos(const VehicleState& s) const { return Vec2(s.pose.x, s.pose.y); }
    double progress() const;

    ScenarioConfig cfg_;
    VehicleModel truth_model_;
    double dt_base_, dt_ctrl_;
    int substeps_per_tick_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::vector<Vessel> vs_;
    PathPlan plan_;
    std::vector<bool> fired_;
    std::optional<VehicleMhe> mhe_;
    std::optional<EstimatorOutput> last_est_;
    std::deque<std::pair<int, Vec6>> shared_; // guide measurements for the approach ship
    std::optional<double> t_acquired_;
    bool in_violation_ = false;
    RunLog log_;
};

Simulation::Simulation(const ScenarioConfig& cfg) : cfg_(cfg), rng_(cfg.seed)
{
    cfg_.validate();
    const RatesConfig& r = cfg_.rates;
    dt_base_ = 1.0 / r.base;
    dt_ctrl_ = 1.0 / r.controller;
    if ((cfg_.model.substeps * r.controller) % r.base != 0)
        throw ConfigError("model.substeps must spread evenly over the base ticks of one controller period");
    substeps_per_tick_ = cfg_.model.substeps * r.controller / r.base;
    truth_model_ = cfg_.model;
    truth_model_.speed.lambda_1 = cfg_.truth_lambda_1;
    truth_model_.sway_yaw.lambda_2 = cfg_.truth_lambda_2;

    const MissionConfig& m = cfg_.mission;
    std::vector<Vec2> path = m.path;
    if (m.type == MType::LegRun) {
        plan_ = legrun_waypoints(m.legrun);
        path = plan_.points;
    }
    auto make_vessel = [&](Vec2 p, double heading, double u0) {
        Vessel v{VehicleState{}, Vec6::Zero(), InnerLoopController(cfg_.controller, cfg_.model, cfg_.tuning, dt_ctrl_),
                 cfg_.helm, {}, {}, u0, 0.0, 0.0, 0.0, std::nullopt, m.grid};
        v.truth.pose = {p[0], p[1], wrap_angle(heading)};
        v.truth.vel.u = u0;
        v.meas = v.truth.to_vec();
        v.ctrl.warm_start(u0);
        v.helm.q1 = cfg_.helm.tau_u * u0;
        v.decision = {u0, v.truth.pose.theta};
        return v;
    };
    const double az0 = Segment{path[0], path[1]}.azimuth();
    if (m.type == MType::Unrep) {
        vs_.push_back(make_vessel(m.approach_start, az0, m.approach_speed));
        vs_.push_back(make_vessel(path[0], az0, m.speed));
        vs_[1].tracker.emplace(path);
        vs_[0].grid.u_min = m.unrep.u_min;
        vs_[0].grid.u_max = m.unrep.u_max;
        vs_[1].grid = DecisionGrid{};
    } else {
        vs_.push_back(make_vessel(path[0], az0, m.speed));
        vs_[0].tracker.emplace(path);
    }
    for (const auto& d : cfg_.disturbances) {
        if (d.trigger.kind != TriggerSpec::Kind::TurnComplete) continue;
        bool found = false;
        for (const auto& e : plan_.events) found |= (e.name == "turn_complete" && e.index == d.trigger.index);
        if (!found) throw ConfigError("disturbance '" + d.name + "': no turn " + std::to_string(d.trigger.index));
    }
    fired_.assign(cfg_.disturbances.size(), false);
    if (cfg_.estimator.enabled) mhe_.emplace(cfg_.model, dt_ctrl_, cfg_.estimator.mhe);
    log_.config = cfg_;
}

void Simulation::event(int k, double t, const std::string& name, int vehicle, const std::string& detail)
{
    log_.events.push_back({t, k, name, vehicle, detail});
}

double Simulation::progress() const
{
    const Vessel& v = vs_.size() == 2 ? vs_[1] : vs_[0];
    return v.tracker ? v.tracker->progress() : 0.0;
}

void Simulation::sense(int k)
{
    const RatesConfig& r = cfg_.rates;
    const SensorConfig& s = cfg_.sensors;
    const bool imu = k % r.period(r.imu) == 0, gps = k % r.period(r.gps) == 0;
    if (imu) ++log_.counts.imu;
    if (gps) ++log_.counts.gps;
    for (auto& v : vs_) {
        const Vec6 x = v.truth.to_vec();
        auto noise = [&](double sigma) { return s.noise ? sigma * normal_(rng_) : 0.0; };
        if (gps) {
            v.meas[kX] = x[kX] + noise(s.pos_sigma);
            v.meas[kY] = x[kY] + noise(s.pos_sigma);
        }
        if (imu) {
            v.meas[kTheta] = wrap_angle(x[kTheta] + noise(deg2rad(s.heading_sigma_deg)));
            v.meas[kU] = x[kU] + noise(s.u_sigma);
            v.meas[kV] = x[kV] + noise(s.v_sigma);
            v.meas[kR] = x[kR] + noise(deg2rad(s.yaw_rate_sigma_deg));
        }
    }
    if (vs_.size() == 2) {
        shared_.emplace_back(k, vs_[1].meas);
        const int lag = static_cast<int>(std::lround(s.share_latency / dt_base_));
        while (shared_.size() > 1 && shared_[1].first <= k - lag) shared_.pop_front();
    }
}

void Simulation::evaluate_triggers(int k, double t)
{
    for (size_t i = 0; i < cfg_.disturbances.size(); ++i) {
        if (fired_[i]) continue;
        const DisturbanceSpec& d = cfg_.disturbances[i];
        bool fire = false;
        switch (d.trigger.kind) {
        case TriggerSpec::Kind::Start: fire = true; break;
        case TriggerSpec::Kind::Time: fire = t >= d.trigger.value; break;
        case TriggerSpec::Kind::AlongTrack: fire = progress() >= d.trigger.value; break;
        case TriggerSpec::Kind::TurnComplete:
            for (const auto& e : plan_.events)
                if (e.name == "turn_complete" && e.index == d.trigger.index) fire = progress() >= e.s;
            break;
        case TriggerSpec::Kind::StationAcquired: fire = t_acquired_ && t >= *t_acquired_ + d.trigger.value; break;
        }
        if (fire) {
            fired_[i] = true;
            event(k, t, "disturbance_on", d.vehicle, d.name);
        }
    }
}

void Simulation::helm(int k)
{
    const RatesConfig& r = cfg_.rates;
    if (k % r.period(r.helm) != 0) return;
    ++log_.counts.helm;
    const MissionConfig& m = cfg_.mission;
    const double span = std::max(m.grid.u_max - m.grid.u_min, 1e-9);
    for (size_t i = 0; i < vs_.size(); ++i) {
        Vessel& v = vs_[i];
        const VehicleState ms = VehicleState::from_vec(v.meas);
        const double u_sog = speed_over_ground(ms.vel);
        BehaviorDecision want;
        if (m.type == MType::Unrep && i == 0) {
            const VehicleState guide = VehicleState::from_vec(shared_.front().second);
            want = unrep_target(guide, ms, m.station_along, m.station_cross, m.unrep);
        } else {
            v.tracker->update(pos(ms));
            if (m.type == MType::Canal) {
                const L1Reference ref = l1_reference_point(ms.pose, v.tracker->points(), m.L1);
                const double r_cmd = l1_yaw_rate(std::max(u_sog, 0.1), m.L1, ref.eta);
                want = {m.speed, wrap_angle(ms.pose.theta + clamp_val(r_cmd / v.helm.tau_theta, -kPi / 2, kPi / 2))};
            } else {
                want = trackline_pd(ms.pose, u_sog, v.tracker->segment(), m.trackline, m.speed);
            }
        }
        v.decision = arbiter({{1.0, peaked_utility(want, span)}}, v.grid);
    }
}

void Simulation::control(int k, double t)
{
    const RatesConfig& r = cfg_.rates;
    if (k % r.period(r.controller) != 0) return;
    ++log_.counts.controller;
    TickRecord rec;
    rec.tick = k;
    rec.t = t;
    for (auto& v : vs_) {
        const HelmFilterOutput hf = helm_filter_step(v.helm, v.decision, v.meas[kTheta], dt_ctrl_);
        v.helm = hf.state;
        v.u_des = hf.u_des;
        v.r_des = hf.r_des;
        ControllerInput in{v.meas[kU], v.meas[kV], v.meas[kR], v.meas[kTheta], v.u_des, v.r_des, v.decision.theta_DES};
        v.cmd = v.ctrl.step(in);
        VehicleTick vt;
        vt.truth = v.truth.to_vec();
        vt.meas = v.meas;
        vt.u_DES = v.decision.u_DES;
        vt.theta_DES = v.decision.theta_DES;
        vt.u_des = v.u_des;
        vt.r_des = v.r_des;
        vt.cmd = v.cmd;
        rec.v.push_back(vt);
    }
    for (size_t i = 0; i < cfg_.disturbances.size(); ++i)
        if (fired_[i]) rec.active.push_back(cfg_.disturbances[i].name);

    const Vessel& own = vs_[0];
    const VehicleState& ts = own.truth;
    rec.progress = progress();
    rec.e_speed = speed_over_ground(ts.vel) - own.u_des;
    rec.e_heading_deg = rad2deg(delta_theta(ts.pose.theta, own.decision.theta_DES));
    rec.e_yaw_rate = ts.vel.r - own.r_des;
    if (cfg_.mission.type == MType::Unrep) {
        const VehicleState& g = vs_[1].truth;
        const StationError se = station_error(g, ts, cfg_.mission.station_along, cfg_.mission.station_cross);
        rec.e_position = std::hypot(se.inline_err, se.cross_err);
        if (!t_acquired_ && std::abs(se.inline_err) < cfg_.mission.station_tol &&
            std::abs(se.cross_err) < cfg_.mission.station_tol) {
            t_acquired_ = t;
            event(k, t, "station_acquired", 0);
        }
        if (t_acquired_) log_.max_station_error = std::max(log_.max_station_error, rec.e_position);
        const Vec2 d = pos(ts) - pos(g);
        const double lateral = -std::sin(g.pose.theta) * d[0] + std::cos(g.pose.theta) * d[1];
        const bool viol = std::abs(lateral) < cfg_.mission.separation_min;
        if (viol && !in_violation_) event(k, t, "separation_violation", 0, "lateral " + std::to_string(lateral));
        in_violation_ = viol;
    } else {
        rec.e_position = cross_track(pos(ts), own.tracker->segment());
    }

    if (mhe_ && k % r.period(r.estimator) == 0) {
        ++log_.counts.estimator;
        last_est_ = mhe_->update(own.meas, ReplayPolicy{own.cmd.u_thr, own.cmd.u_rud});
        if (last_est_) {
            ++log_.counts.estimates;
            EstimateRecord e{last_est_->x_hat, last_est_->Q_diag, last_est_->dist, last_est_->diverged,
                             last_est_->solution.iterations};
            if (e.diverged) event(k, t, "mhe_diverged", 0);
            rec.est = e;
        }
    }
    if (cfg_.reach.enabled && k % r.period(r.reachability) == 0) {
        ++log_.counts.certify;
        if (rec.est) {
            CertifyRecord c;
            c.policy = own.ctrl.frozen_policy(own.tracker->segment(), own.u_des, cfg_.mission.trackline,
                                              cfg_.helm.tau_theta);
            const AugmentedGraph ag = build_augmented_graph(c.policy, cfg_.model, dt_ctrl_, cfg_.reach.gamma);
            CertifyInput in{rec.est->x_hat, rec.est->Q_diag, rec.est->dist};
            CertifyResult res = certify(ag, in, cfg_.reach.horizon, cfg_.reach.unsafe);
            c.safe = res.safe;
            c.first_violation = res.first_violation;
            c.rsoa = std::move(res.rsoa);
            ++log_.counts.certificates;
            rec.cert = std::move(c);
        }
    }
    log_.ticks.push_back(std::move(rec));
}

bool Simulation::physics(int k, double t)
{
    const double lim = cfg_.model.thruster_limit;
    bool halt = false;
    for (size_t i = 0; i < vs_.size(); ++i) {
        Vessel& v = vs_[i];
        FaultConfig fc;
        double fL = 0.0, fR = 0.0, bias_u = 0.0, bias_r = 0.0;
        for (size_t j = 0; j < cfg_.disturbances.size(); ++j) {
            const DisturbanceSpec& d = cfg_.disturbances[j];
            if (!fired_[j] || (d.vehicle != -1 && d.vehicle != static_cast<int>(i))) continue;
            switch (d.type) {
            case DisturbanceSpec::Type::ThrusterFault:
                fc.rudder_factor *= d.fault.rudder_factor;
                fc.thrust_factor_L *= d.fault.thrust_factor_L;
                fc.thrust_factor_R *= d.fault.thrust_factor_R;
                fc.thrust_bias_L += d.fault.thrust_bias_L;
                fc.thrust_bias_R += d.fault.thrust_bias_R;
                break;
            case DisturbanceSpec::Type::DragDevice: {
                auto [su, sr] = drag_device_bias(d.drag, true);
                bias_u += su;
                bias_r += sr;
                break;
            }
            case DisturbanceSpec::Type::HullWash: {
                if (vs_.size() < 2) break;
                const VehicleState& o = vs_[1 - i].truth;
                const Vec2 dp = pos(o) - pos(v.truth);
                const double th = v.truth.pose.theta;
                const double sx = std::abs(std::cos(th) * dp[0] + std::sin(th) * dp[1]);
                const double sy = std::abs(-std::sin(th) * dp[0] + std::cos(th) * dp[1]);
                // bows are drawn toward the other hull
                const int delta = -hull_wash_direction(th, std::atan2(dp[1], dp[0]));
                const double F = hull_wash(sx, sy, delta, d.hull_wash);
                fL += F;
                fR -= F;
                break;
            }
            case DisturbanceSpec::Type::BankEffect: {
                int side = 1;
                const double dy = polyline_distance(cfg_.mission.path, pos(v.truth), &side);
                // pushes the bow toward the nearer bank
                const BankEffect be = bank_effect(dy, side, d.bank);
                if (be.halt) {
                    fL += be.bias;
                    fR += be.bias;
                    halt = true;
                } else {
                    fL += be.bias;
                    fR -= be.bias;
                }
                break;
            }
            }
        }
        auto [uL, uR] = apply_fault(v.cmd.uL, v.cmd.uR, fc);
        v.uL_applied = clamp_val(uL + fL, -lim, lim);
        v.uR_applied = clamp_val(uR + fR, -lim, lim);
        if (i == 0 && !log_.ticks.empty() && log_.ticks.back().tick == k) {
            log_.ticks.back().v[0].uL_applied = v.uL_applied;
            log_.ticks.back().v[0].uR_applied = v.uR_applied;
        }
        if (i == 1 && !log_.ticks.empty() && log_.ticks.back().tick == k) {
            log_.ticks.back().v[1].uL_applied = v.uL_applied;
            log_.ticks.back().v[1].uR_applied = v.uR_applied;
        }
        const NaturalDisturbance& nd = cfg_.natural;
        if (nd.surge_sigma > 0.0) bias_u += nd.surge_sigma * normal_(rng_);
        if (nd.yaw_sigma > 0.0) bias_r += nd.yaw_sigma * normal_(rng_);
        bias_u += nd.surge_bias;
        bias_r += nd.yaw_bias;
        if (halt) {
            event(k, t, "HALT", static_cast<int>(i), "ran aground");
            v.truth.vel = BodyVelocity{};
            return false;
        }
        auto [thr, rud] = thrusters_to_channels(v.uL_applied, v.uR_applied, truth_model_);
        const double h = dt_ctrl_ / cfg_.model.substeps;
        for (int s = 0; s < substeps_per_tick_; ++s) {
            const Pose p = kinematics_step(v.truth.pose, v.truth.vel, h);
            const double u = speed_dynamics_step(v.truth.vel.u, thr, bias_u, truth_model_.speed, h);
            auto [vv, rr] = sway_yaw_dynamics_step(v.truth.vel.v, v.truth.vel.r, rud, bias_r, truth_model_.sway_yaw, h);
            v.truth.pose = p;
            v.truth.vel = {u, vv, rr};
        }
    }
    if (vs_.size() == 2) {
        const double dist = (pos(vs_[0].truth) - pos(vs_[1].truth)).norm();
        if (dist < cfg_.mission.abort_distance) {
            event(k, t + dt_base_, "collision_abort", 0, "distance " + std::to_string(dist));
            log_.outcome = "abort";
            return false;
        }
    }
    return true;
}

RunLog Simulation::run()
{
    const long n_ticks = std::lround(cfg_.duration * cfg_.rates.base);
    log_.outcome = "timeout";
    long k = 0;
    for (; k < n_ticks; ++k) {
        const double t = k * dt_base_;
        sense(static_cast<int>(k));
        evaluate_triggers(static_cast<int>(k), t);
        helm(static_cast<int>(k));
        if (vs_[0].tracker && cfg_.mission.type != MType::Unrep && vs_[0].tracker->finished()) {
            event(static_cast<int>(k), t, "mission_complete", 0);
            log_.outcome = "complete";
            break;
        }
        control(static_cast<int>(k), t);
        ++log_.counts.ticks;
        if (!physics(static_cast<int>(k), t)) {
            if (log_.outcome != "abort") log_.outcome = "halt";
            ++k;
            break;
        }
    }
    if (cfg_.mission.type == MType::Unrep && log_.outcome == "timeout") log_.outcome = "complete";
    log_.end_time = k * dt_base_;
    for (const auto& v : vs_) log_.projection_ok = log_.projection_ok && v.ctrl.projection_respected();
    return std::move(log_);
}

} // namespace

RunLog run_scenario(const ScenarioConfig& cfg) { return Simulation(cfg).run(); }

ErrorStats error_stats(const std::vector<double>& e)
{
    if (e.empty()) return {};
    double sum = 0.0, sq = 0.0;
    for (double x : e) {
        sum += x;
        sq += x * x;
    }
    const double n = static_cast<double>(e.size());
    const double mean = sum / n;
    double dev = 0.0;
    for (double x : e) dev += (x - mean) * (x - mean);
    return {std::sqrt(sq / n), std::sqrt(dev / n)};
}

MetricsSummary compute_metrics(const RunLog& log)
{
    if (log.ticks.empty()) throw Error("compute_metrics: empty run log");
    std::vector<double> s, h, r, p;
    for (const auto& t : log.ticks) {
        s.push_back(t.e_speed);
        h.push_back(t.e_heading_deg);
        r.push_back(t.e_yaw_rate);
        p.push_back(t.e_position);
    }
    return {error_stats(s), error_stats(h), error_stats(r), error_stats(p), log.ticks.size()};
}

} // namespace usv
