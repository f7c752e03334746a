#include "usv/scenario.hpp"

#include <fstream>
#include <set>

namespace usv {

using nlohmann::json;

void RatesConfig::validate() const
{
    if (base <= 0) throw ConfigError("rates.base must be positive");
    for (auto [name, r] : {std::pair{"imu", imu}, {"gps", gps}, {"helm", helm}, {"controller", controller},
                           {"estimator", estimator}, {"reachability", reachability}}) {
        if (r <= 0 || r > base || base % r != 0)
            throw ConfigError(std::string("rates.") + name + " must divide the base rate");
    }
}

void ScenarioConfig::validate() const
{
    if (schema_version != kScenarioSchemaVersion) throw ConfigError("unsupported scenario schema_version");
    if (!(duration > 0.0) || !std::isfinite(duration)) throw ConfigError("duration must be positive");
    model.validate();
    rates.validate();
    if (!(truth_lambda_1 > 0.0 && truth_lambda_2 > 0.0)) throw ConfigError("truth control effectiveness must be positive");
    if (!(helm.tau_u > 0.0 && helm.tau_r > 0.0 && helm.tau_theta > 0.0)) throw ConfigError("helm time constants must be positive");
    if (!(mission.speed > 0.0)) throw ConfigError("mission.speed must be positive");
    if (mission.type != MissionConfig::Type::LegRun && mission.path.size() < 2)
        throw ConfigError("mission.path needs at least two points");
    if (!(mission.L1 > 0.0)) throw ConfigError("mission.L1 must be positive");
    if (!(mission.grid.u_step > 0.0 && mission.grid.heading_step > 0.0 && mission.grid.u_max > mission.grid.u_min))
        throw ConfigError("mission.grid is degenerate");
    if (sensors.share_latency < 0.0) throw ConfigError("sensors.share_latency must be >= 0");
    for (const auto& d : disturbances) {
        d.fault.validate();
        if (d.type == DisturbanceSpec::Type::BankEffect) d.bank.validate();
        if (d.vehicle < -1 || d.vehicle >= vehicles()) throw ConfigError("disturbance '" + d.name + "' targets a missing vehicle");
        if (d.type == DisturbanceSpec::Type::DragDevice && d.drag.surge_bias > 0.0)
            throw ConfigError("drag device surge_bias must be <= 0");
        if (d.trigger.kind == TriggerSpec::Kind::StationAcquired && mission.type != MissionConfig::Type::Unrep)
            throw ConfigError("station_acquired trigger needs an UNREP mission");
        if (d.trigger.kind == TriggerSpec::Kind::TurnComplete && mission.type != MissionConfig::Type::LegRun)
            throw ConfigError("turn_complete trigger needs a LegRun mission");
    }
    if (estimator.enabled) {
        estimator.mhe.validate(6);
        if (rates.estimator != rates.controller)
            throw ConfigError("estimator rate must equal the controller rate (one f_cl step per sample)");
    }
    if (reach.enabled) {
        if (!estimator.enabled) throw ConfigError("reachability needs the estimator");
        if (rates.reachability != rates.controller) throw ConfigError("reachability rate must equal the controller rate");
        if (controller == ControllerKind::Pid) throw ConfigError("reachability policy: PID baseline is not supported");
        if (mission.type == MissionConfig::Type::Unrep || mission.type == MissionConfig::Type::Canal)
            throw ConfigError("reachability is supported on trackline missions only");
        if (reach.horizon <= 0 || !(reach.gamma > 0.0)) throw ConfigError("reach.horizon and reach.gamma must be positive");
        for (const auto& p : reach.unsafe.polygons) validate_polygon(p);
    }
}

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where)
{
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <class T>
void get(const json& j, const char* key, T& out)
{
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("key '") + key + "': " + e.what());
    }
}

json vec2_json(const Vec2& v) { return json::array({v[0], v[1]}); }
Vec2 vec2_from(const json& j)
{
    if (!j.is_array() || j.size() != 2) throw ConfigError("expected [north, east]");
    return Vec2(j[0].get<double>(), j[1].get<double>());
}
json points_json(const std::vector<Vec2>& pts)
{
    json a = json::array();
    for (const auto& p : pts) a.push_back(vec2_json(p));
    return a;
}
std::vector<Vec2> points_from(const json& j)
{
    std::vector<Vec2> out;
    for (const auto& p : j) out.push_back(vec2_from(p));
    return out;
}
json vec_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }
Eigen::VectorXd vec_from(const json& j, int n, const char* what)
{
    auto v = j.get<std::vector<double>>();
    if (static_cast<int>(v.size()) != n) throw ConfigError(std::string(what) + ": wrong length");
    return Eigen::Map<Eigen::VectorXd>(v.data(), n);
}

const char* trigger_name(TriggerSpec::Kind k)
{
    switch (k) {
    case TriggerSpec::Kind::Start: return "start";
    case TriggerSpec::Kind::Time: return "time";
    case TriggerSpec::Kind::AlongTrack: return "along_track";
    case TriggerSpec::Kind::TurnComplete: return "turn_complete";
    case TriggerSpec::Kind::StationAcquired: return "station_acquired";
    }
    return "?";
}
TriggerSpec::Kind trigger_kind(const std::string& s)
{
    for (auto k : {TriggerSpec::Kind::Start, TriggerSpec::Kind::Time, TriggerSpec::Kind::AlongTrack,
                   TriggerSpec::Kind::TurnComplete, TriggerSpec::Kind::StationAcquired})
        if (s == trigger_name(k)) return k;
    throw ConfigError("unknown trigger '" + s + "'");
}
const char* dist_type_name(DisturbanceSpec::Type t)
{
    switch (t) {
    case DisturbanceSpec::Type::ThrusterFault: return "thruster_fault";
    case DisturbanceSpec::Type::DragDevice: return "drag_device";
    case DisturbanceSpec::Type::HullWash: return "hull_wash";
    case DisturbanceSpec::Type::BankEffect: return "bank_effect";
    }
    return "?";
}
DisturbanceSpec::Type dist_type(const std::string& s)
{
    for (auto t : {DisturbanceSpec::Type::ThrusterFault, DisturbanceSpec::Type::DragDevice,
                   DisturbanceSpec::Type::HullWash, DisturbanceSpec::Type::BankEffect})
        if (s == dist_type_name(t)) return t;
    throw ConfigError("unknown disturbance type '" + s + "'");
}
const char* mission_name(MissionConfig::Type t)
{
    switch (t) {
    case MissionConfig::Type::LegRun: return "legrun";
    case MissionConfig::Type::Straight: return "straight";
    case MissionConfig::Type::Unrep: return "unrep";
    case MissionConfig::Type::Canal: return "canal";
    }
    return "?";
}
MissionConfig::Type mission_type(const std::string& s)
{
    for (auto t : {MissionConfig::Type::LegRun, MissionConfig::Type::Straight, MissionConfig::Type::Unrep,
                   MissionConfig::Type::Canal})
        if (s == mission_name(t)) return t;
    throw ConfigError("unknown mission type '" + s + "'");
}

json disturbance_json(const DisturbanceSpec& d)
{
    json j{{"type", dist_type_name(d.type)}, {"name", d.name}, {"vehicle", d.vehicle}};
    json t{{"kind", trigger_name(d.trigger.kind)}};
    if (d.trigger.kind != TriggerSpec::Kind::Start) t["value"] = d.trigger.value;
    if (d.trigger.kind == TriggerSpec::Kind::TurnComplete) t["index"] = d.trigger.index;
    j["trigger"] = t;
    switch (d.type) {
    case DisturbanceSpec::Type::ThrusterFault:
        j["params"] = {{"rudder_factor", d.fault.rudder_factor},     {"rudder_bias", d.fault.rudder_bias},
                       {"thrust_factor_L", d.fault.thrust_factor_L}, {"thrust_factor_R", d.fault.thrust_factor_R},
                       {"thrust_bias_L", d.fault.thrust_bias_L},     {"thrust_bias_R", d.fault.thrust_bias_R}};
        break;
    case DisturbanceSpec::Type::DragDevice:
        j["params"] = {{"surge_bias", d.drag.surge_bias}, {"yaw_bias", d.drag.yaw_bias}};
        break;
    case DisturbanceSpec::Type::HullWash:
        j["params"] = {{"F_max", d.hull_wash.F_max}, {"range", d.hull_wash.range}};
        break;
    case DisturbanceSpec::Type::BankEffect:
        j["params"] = {{"canal_width", d.bank.canal_width}, {"deadzone_width", d.bank.deadzone_width},
                       {"F_min", d.bank.F_min},             {"F_max", d.bank.F_max},
                       {"halt_bias", d.bank.halt_bias}};
        break;
    }
    return j;
}

DisturbanceSpec disturbance_from(const json& j)
{
    check_keys(j, {"type", "name", "vehicle", "trigger", "params"}, "disturbance");
    DisturbanceSpec d;
    if (!j.contains("type")) throw ConfigError("disturbance: missing type");
    d.type = dist_type(j.at("type").get<std::string>());
    d.name = dist_type_name(d.type);
    get(j, "name", d.name);
    get(j, "vehicle", d.vehicle);
    if (j.contains("trigger")) {
        const json& t = j.at("trigger");
        check_keys(t, {"kind", "value", "index"}, "trigger");
        if (t.contains("kind")) d.trigger.kind = trigger_kind(t.at("kind").get<std::string>());
        get(t, "value", d.trigger.value);
        get(t, "index", d.trigger.index);
    }
    const json p = j.value("params", json::object());
    switch (d.type) {
    case DisturbanceSpec::Type::ThrusterFault:
        check_keys(p, {"rudder_factor", "rudder_bias", "thrust_factor_L", "thrust_factor_R", "thrust_bias_L", "thrust_bias_R"},
                   "thruster_fault");
        get(p, "rudder_factor", d.fault.rudder_factor);
        get(p, "rudder_bias", d.fault.rudder_bias);
        get(p, "thrust_factor_L", d.fault.thrust_factor_L);
        get(p, "thrust_factor_R", d.fault.thrust_factor_R);
        get(p, "thrust_bias_L", d.fault.thrust_bias_L);
        get(p, "thrust_bias_R", d.fault.thrust_bias_R);
        break;
    case DisturbanceSpec::Type::DragDevice:
        check_keys(p, {"surge_bias", "yaw_bias"}, "drag_device");
        get(p, "surge_bias", d.drag.surge_bias);
        get(p, "yaw_bias", d.drag.yaw_bias);
        break;
    case DisturbanceSpec::Type::HullWash:
        check_keys(p, {"F_max", "range"}, "hull_wash");
        get(p, "F_max", d.hull_wash.F_max);
        get(p, "range", d.hull_wash.range);
        break;
    case DisturbanceSpec::Type::BankEffect:
        check_keys(p, {"canal_width", "deadzone_width", "F_min", "F_max", "halt_bias"}, "bank_effect");
        get(p, "canal_width", d.bank.canal_width);
        get(p, "deadzone_width", d.bank.deadzone_width);
        get(p, "F_min", d.bank.F_min);
        get(p, "F_max", d.bank.F_max);
        get(p, "halt_bias", d.bank.halt_bias);
        break;
    }
    return d;
}

} // namespace

json to_json(const ScenarioConfig& c)
{
    json j;
    j["schema_version"] = c.schema_version;
    j["name"] = c.name;
    j["seed"] = c.seed;
    j["duration"] = c.duration;
    j["controller"] = to_string(c.controller);
    const PidGains& p = c.tuning.pid;
    const MracTuning& m = c.tuning.mrac;
    j["tuning"] = {{"pid",
                    {{"k_ff_u", p.k_ff_u}, {"kp_u", p.kp_u}, {"ki_u", p.ki_u}, {"kd_u", p.kd_u}, {"kp_h", p.kp_h},
                     {"ki_h", p.ki_h}, {"kd_h", p.kd_h}, {"i_limit_u", p.i_limit_u}, {"i_limit_h", p.i_limit_h}}},
                   {"mrac",
                    {{"gamma_bl_speed", m.gamma_bl_speed}, {"gamma_rbf_speed", m.gamma_rbf_speed},
                     {"gamma_bl_yaw", m.gamma_bl_yaw}, {"gamma_rbf_yaw", m.gamma_rbf_yaw},
                     {"deadzone_speed", m.deadzone_speed}, {"deadzone_yaw", m.deadzone_yaw}, {"bound", m.bound},
                     {"bl_lower", m.bl_lower}, {"bl_upper", m.bl_upper}}},
                   {"thr_limit", c.tuning.thr_limit},
                   {"rud_limit", c.tuning.rud_limit}};
    j["model"] = {{"a_p1", c.model.speed.a_p1},
                  {"b_p1", c.model.speed.b_p1},
                  {"A_p", {c.model.sway_yaw.A_p(0, 0), c.model.sway_yaw.A_p(0, 1), c.model.sway_yaw.A_p(1, 0), c.model.sway_yaw.A_p(1, 1)}},
                  {"B_p", {c.model.sway_yaw.B_p[0], c.model.sway_yaw.B_p[1]}},
                  {"rudder_max", c.model.rudder_max},
                  {"thruster_limit", c.model.thruster_limit},
                  {"thrust_ref", c.model.thrust_ref},
                  {"substeps", c.model.substeps},
                  {"truth_lambda_1", c.truth_lambda_1},
                  {"truth_lambda_2", c.truth_lambda_2}};
    j["helm"] = {{"tau_u", c.helm.tau_u}, {"tau_r", c.helm.tau_r}, {"tau_theta", c.helm.tau_theta}};
    const MissionConfig& mi = c.mission;
    json mj{{"type", mission_name(mi.type)},
            {"speed", mi.speed},
            {"trackline", {{"k_p", mi.trackline.k_p}, {"k_d", mi.trackline.k_d}}},
            {"L1", mi.L1},
            {"grid",
             {{"u_min", mi.grid.u_min}, {"u_max", mi.grid.u_max}, {"u_step", mi.grid.u_step},
              {"heading_step_deg", rad2deg(mi.grid.heading_step)}}}};
    if (mi.type == MissionConfig::Type::LegRun) {
        mj["legrun"] = {{"vx1", vec2_json(mi.legrun.vx1)},
                        {"vx2", vec2_json(mi.legrun.vx2)},
                        {"turn_radii", mi.legrun.turn_radii},
                        {"arc_step_deg", rad2deg(mi.legrun.arc_step)}};
    } else {
        mj["path"] = points_json(mi.path);
    }
    if (mi.type == MissionConfig::Type::Unrep) {
        mj["unrep"] = {{"station_along", mi.station_along},
                       {"station_cross", mi.station_cross},
                       {"approach_start", vec2_json(mi.approach_start)},
                       {"approach_speed", mi.approach_speed},
                       {"k_along", mi.unrep.k_along},
                       {"k_cross", mi.unrep.k_cross},
                       {"u_min", mi.unrep.u_min},
                       {"u_max", mi.unrep.u_max},
                       {"eps", mi.unrep.eps},
                       {"station_tol", mi.station_tol},
                       {"separation_min", mi.separation_min},
                       {"abort_distance", mi.abort_distance}};
    }
    j["mission"] = mj;
    json ds = json::array();
    for (const auto& d : c.disturbances) ds.push_back(disturbance_json(d));
    j["disturbances"] = ds;
    const RatesConfig& r = c.rates;
    j["rates"] = {{"base", r.base},   {"imu", r.imu},         {"gps", r.gps},
                  {"helm", r.helm},   {"controller", r.controller}, {"estimator", r.estimator},
                  {"reachability", r.reachability}};
    const SensorConfig& s = c.sensors;
    j["sensors"] = {{"noise", s.noise},
                    {"pos_sigma", s.pos_sigma},
                    {"heading_sigma_deg", s.heading_sigma_deg},
                    {"yaw_rate_sigma_deg", s.yaw_rate_sigma_deg},
                    {"u_sigma", s.u_sigma},
                    {"v_sigma", s.v_sigma},
                    {"share_latency", s.share_latency}};
    j["natural"] = {{"surge_bias", c.natural.surge_bias},
                    {"yaw_bias", c.natural.yaw_bias},
                    {"surge_sigma", c.natural.surge_sigma},
                    {"yaw_sigma", c.natural.yaw_sigma}};
    const MheConfig& e = c.estimator.mhe;
    j["estimator"] = {{"enabled", c.estimator.enabled},
                      {"window", e.window},
                      {"Wy", vec_json(e.Wy)},
                      {"W", vec_json(e.W)},
                      {"max_iter", e.max_iter},
                      {"tol", e.tol},
                      {"delta_frac", e.delta_frac},
                      {"delta_mu_floor", vec_json(e.delta_mu_floor)},
                      {"delta_sigma_floor", vec_json(e.delta_sigma_floor)}};
    json polys = json::array();
    for (const auto& poly : c.reach.unsafe.polygons) polys.push_back(points_json(poly.vertices));
    json rj{{"enabled", c.reach.enabled}, {"horizon", c.reach.horizon}, {"gamma", c.reach.gamma}, {"unsafe_polygons", polys}};
    if (c.reach.unsafe.max_speed) rj["unsafe_max_speed"] = *c.reach.unsafe.max_speed;
    if (c.reach.unsafe.heading_lo && c.reach.unsafe.heading_hi)
        rj["safe_heading_deg"] = {rad2deg(*c.reach.unsafe.heading_lo), rad2deg(*c.reach.unsafe.heading_hi)};
    j["reachability"] = rj;
    return j;
}

ScenarioConfig scenario_from_json(const json& j)
{
    check_keys(j, {"schema_version", "name", "seed", "duration", "controller", "tuning", "model", "helm", "mission",
                   "disturbances", "rates", "sensors", "natural", "estimator", "reachability"},
               "scenario");
    ScenarioConfig c;
    get(j, "schema_version", c.schema_version);
    get(j, "name", c.name);
    if (!j.contains("seed")) throw ConfigError("scenario: 'seed' is mandatory");
    get(j, "seed", c.seed);
    get(j, "duration", c.duration);
    if (j.contains("controller")) c.controller = controller_kind_from_string(j.at("controller").get<std::string>());
    if (j.contains("tuning")) {
        const json& t = j.at("tuning");
        check_keys(t, {"pid", "mrac", "thr_limit", "rud_limit"}, "tuning");
        if (t.contains("pid")) {
            const json& p = t.at("pid");
            check_keys(p, {"k_ff_u", "kp_u", "ki_u", "kd_u", "kp_h", "ki_h", "kd_h", "i_limit_u", "i_limit_h"}, "tuning.pid");
            PidGains& g = c.tuning.pid;
            get(p, "k_ff_u", g.k_ff_u);
            get(p, "kp_u", g.kp_u);
            get(p, "ki_u", g.ki_u);
            get(p, "kd_u", g.kd_u);
            get(p, "kp_h", g.kp_h);
            get(p, "ki_h", g.ki_h);
            get(p, "kd_h", g.kd_h);
            get(p, "i_limit_u", g.i_limit_u);
            get(p, "i_limit_h", g.i_limit_h);
        }
        if (t.contains("mrac")) {
            const json& m = t.at("mrac");
            check_keys(m, {"gamma_bl_speed", "gamma_rbf_speed", "gamma_bl_yaw", "gamma_rbf_yaw", "deadzone_speed",
                           "deadzone_yaw", "bound", "bl_lower", "bl_upper"},
                       "tuning.mrac");
            MracTuning& g = c.tuning.mrac;
            get(m, "gamma_bl_speed", g.gamma_bl_speed);
            get(m, "gamma_rbf_speed", g.gamma_rbf_speed);
            get(m, "gamma_bl_yaw", g.gamma_bl_yaw);
            get(m, "gamma_rbf_yaw", g.gamma_rbf_yaw);
            get(m, "deadzone_speed", g.deadzone_speed);
            get(m, "deadzone_yaw", g.deadzone_yaw);
            get(m, "bound", g.bound);
            get(m, "bl_lower", g.bl_lower);
            get(m, "bl_upper", g.bl_upper);
        }
        get(t, "thr_limit", c.tuning.thr_limit);
        get(t, "rud_limit", c.tuning.rud_limit);
    }
    if (j.contains("model")) {
        const json& m = j.at("model");
        check_keys(m, {"a_p1", "b_p1", "A_p", "B_p", "rudder_max", "thruster_limit", "thrust_ref", "substeps",
                       "truth_lambda_1", "truth_lambda_2"},
                   "model");
        get(m, "a_p1", c.model.speed.a_p1);
        get(m, "b_p1", c.model.speed.b_p1);
        if (m.contains("A_p")) {
            auto a = vec_from(m.at("A_p"), 4, "model.A_p");
            c.model.sway_yaw.A_p << a[0], a[1], a[2], a[3];
        }
        if (m.contains("B_p")) c.model.sway_yaw.B_p = vec_from(m.at("B_p"), 2, "model.B_p");
        get(m, "rudder_max", c.model.rudder_max);
        get(m, "thruster_limit", c.model.thruster_limit);
        get(m, "thrust_ref", c.model.thrust_ref);
        get(m, "substeps", c.model.substeps);
        get(m, "truth_lambda_1", c.truth_lambda_1);
        get(m, "truth_lambda_2", c.truth_lambda_2);
    }
    if (j.contains("helm")) {
        const json& h = j.at("helm");
        check_keys(h, {"tau_u", "tau_r", "tau_theta"}, "helm");
        get(h, "tau_u", c.helm.tau_u);
        get(h, "tau_r", c.helm.tau_r);
        get(h, "tau_theta", c.helm.tau_theta);
    }
    if (j.contains("mission")) {
        const json& m = j.at("mission");
        check_keys(m, {"type", "speed", "trackline", "L1", "grid", "legrun", "path", "unrep"}, "mission");
        MissionConfig& mi = c.mission;
        if (m.contains("type")) mi.type = mission_type(m.at("type").get<std::string>());
        get(m, "speed", mi.speed);
        if (m.contains("trackline")) {
            check_keys(m.at("trackline"), {"k_p", "k_d"}, "mission.trackline");
            get(m.at("trackline"), "k_p", mi.trackline.k_p);
            get(m.at("trackline"), "k_d", mi.trackline.k_d);
        }
        get(m, "L1", mi.L1);
        if (m.contains("grid")) {
            const json& g = m.at("grid");
            check_keys(g, {"u_min", "u_max", "u_step", "heading_step_deg"}, "mission.grid");
            get(g, "u_min", mi.grid.u_min);
            get(g, "u_max", mi.grid.u_max);
            get(g, "u_step", mi.grid.u_step);
            if (g.contains("heading_step_deg")) mi.grid.heading_step = deg2rad(g.at("heading_step_deg").get<double>());
        }
        if (m.contains("legrun")) {
            const json& l = m.at("legrun");
            check_keys(l, {"vx1", "vx2", "turn_radii", "arc_step_deg"}, "mission.legrun");
            if (l.contains("vx1")) mi.legrun.vx1 = vec2_from(l.at("vx1"));
            if (l.contains("vx2")) mi.legrun.vx2 = vec2_from(l.at("vx2"));
            get(l, "turn_radii", mi.legrun.turn_radii);
            if (l.contains("arc_step_deg")) mi.legrun.arc_step = deg2rad(l.at("arc_step_deg").get<double>());
        }
        if (m.contains("path")) mi.path = points_from(m.at("path"));
        if (m.contains("unrep")) {
            const json& u = m.at("unrep");
            check_keys(u, {"station_along", "station_cross", "approach_start", "approach_speed", "k_along", "k_cross",
                           "u_min", "u_max", "eps", "station_tol", "separation_min", "abort_distance"},
                       "mission.unrep");
            get(u, "station_along", mi.station_along);
            get(u, "station_cross", mi.station_cross);
            if (u.contains("approach_start")) mi.approach_start = vec2_from(u.at("approach_start"));
            get(u, "approach_speed", mi.approach_speed);
            get(u, "k_along", mi.unrep.k_along);
            get(u, "k_cross", mi.unrep.k_cross);
            get(u, "u_min", mi.unrep.u_min);
            get(u, "u_max", mi.unrep.u_max);
            get(u, "eps", mi.unrep.eps);
            get(u, "station_tol", mi.station_tol);
            get(u, "separation_min", mi.separation_min);
            get(u, "abort_distance", mi.abort_distance);
        }
    }
    if (j.contains("disturbances"))
        for (const auto& d : j.at("disturbances")) c.disturbances.push_back(disturbance_from(d));
    if (j.contains("rates")) {
        const json& r = j.at("rates");
        check_keys(r, {"base", "imu", "gps", "helm", "controller", "estimator", "reachability"}, "rates");
        get(r, "base", c.rates.base);
        get(r, "imu", c.rates.imu);
        get(r, "gps", c.rates.gps);
        get(r, "helm", c.rates.helm);
        get(r, "controller", c.rates.controller);
        get(r, "estimator", c.rates.estimator);
        get(r, "reachability", c.rates.reachability);
    }
    if (j.contains("sensors")) {
        const json& s = j.at("sensors");
        check_keys(s, {"noise", "pos_sigma", "heading_sigma_deg", "yaw_rate_sigma_deg", "u_sigma", "v_sigma", "share_latency"},
                   "sensors");
        get(s, "noise", c.sensors.noise);
        get(s, "pos_sigma", c.sensors.pos_sigma);
        get(s, "heading_sigma_deg", c.sensors.heading_sigma_deg);
        get(s, "yaw_rate_sigma_deg", c.sensors.yaw_rate_sigma_deg);
        get(s, "u_sigma", c.sensors.u_sigma);
        get(s, "v_sigma", c.sensors.v_sigma);
        get(s, "share_latency", c.sensors.share_latency);
    }
    if (j.contains("natural")) {
        const json& n = j.at("natural");
        check_keys(n, {"surge_bias", "yaw_bias", "surge_sigma", "yaw_sigma"}, "natural");
        get(n, "surge_bias", c.natural.surge_bias);
        get(n, "yaw_bias", c.natural.yaw_bias);
        get(n, "surge_sigma", c.natural.surge_sigma);
        get(n, "yaw_sigma", c.natural.yaw_sigma);
    }
    if (j.contains("estimator")) {
        const json& e = j.at("estimator");
        check_keys(e, {"enabled", "window", "Wy", "W", "max_iter", "tol", "delta_frac", "delta_mu_floor", "delta_sigma_floor"},
                   "estimator");
        MheConfig& m = c.estimator.mhe;
        get(e, "enabled", c.estimator.enabled);
        get(e, "window", m.window);
        if (e.contains("Wy")) m.Wy = vec_from(e.at("Wy"), 6, "estimator.Wy");
        if (e.contains("W")) m.W = vec_from(e.at("W"), 6, "estimator.W");
        get(e, "max_iter", m.max_iter);
        get(e, "tol", m.tol);
        get(e, "delta_frac", m.delta_frac);
        if (e.contains("delta_mu_floor")) m.delta_mu_floor = vec_from(e.at("delta_mu_floor"), 6, "estimator.delta_mu_floor");
        if (e.contains("delta_sigma_floor"))
            m.delta_sigma_floor = vec_from(e.at("delta_sigma_floor"), 6, "estimator.delta_sigma_floor");
    }
    if (j.contains("reachability")) {
        const json& r = j.at("reachability");
        check_keys(r, {"enabled", "horizon", "gamma", "unsafe_polygons", "unsafe_max_speed", "safe_heading_deg"}, "reachability");
        get(r, "enabled", c.reach.enabled);
        get(r, "horizon", c.reach.horizon);
        get(r, "gamma", c.reach.gamma);
        if (r.contains("unsafe_polygons"))
            for (const auto& p : r.at("unsafe_polygons")) c.reach.unsafe.polygons.push_back({points_from(p)});
        if (r.contains("unsafe_max_speed")) c.reach.unsafe.max_speed = r.at("unsafe_max_speed").get<double>();
        if (r.contains("safe_heading_deg")) {
            auto h = vec_from(r.at("safe_heading_deg"), 2, "reachability.safe_heading_deg");
            c.reach.unsafe.heading_lo = deg2rad(h[0]);
            c.reach.unsafe.heading_hi = deg2rad(h[1]);
        }
    }
    c.validate();
    return c;
}

ScenarioConfig load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file " + path);
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return scenario_from_json(j);
}

namespace {

DisturbanceSpec fault_spec(const std::string& name, double fL, double fR, TriggerSpec trig, int vehicle = 0)
{
    DisturbanceSpec d;
    d.type = DisturbanceSpec::Type::ThrusterFault;
    d.name = name;
    d.trigger = trig;
    d.vehicle = vehicle;
    d.fault.thrust_factor_L = fL;
    d.fault.thrust_factor_R = fR;
    return d;
}

DisturbanceSpec drag_spec(const std::string& name, double surge, double yaw, TriggerSpec trig, int vehicle = 0)
{
    DisturbanceSpec d;
    d.type = DisturbanceSpec::Type::DragDevice;
    d.name = name;
    d.trigger = trig;
    d.vehicle = vehicle;
    d.drag.surge_bias = surge;
    d.drag.yaw_bias = yaw;
    return d;
}

ScenarioConfig legrun_base(const std::string& name, uint64_t seed)
{
    ScenarioConfig c;
    c.name = name;
    c.seed = seed;
    c.duration = 900.0;
    c.mission.type = MissionConfig::Type::LegRun;
    c.natural = {-2.0, 2.0, 2.0, 1.0};
    return c;
}

ScenarioConfig straight_base(const std::string& name, uint64_t seed)
{
    ScenarioConfig c;
    c.name = name;
    c.seed = seed;
    c.duration = 200.0;
    c.controller = ControllerKind::Mrac;
    c.mission.type = MissionConfig::Type::Straight;
    c.mission.path = {Vec2(0.0, 0.0), Vec2(100.0, 0.0)};
    c.estimator.enabled = true;
    c.reach.enabled = true;
    // corridor banks 3 m either side of the trackline
    c.reach.unsafe.polygons.push_back({{Vec2(-20.0, 3.0), Vec2(140.0, 3.0), Vec2(140.0, 20.0), Vec2(-20.0, 20.0)}});
    c.reach.unsafe.polygons.push_back({{Vec2(-20.0, -20.0), Vec2(140.0, -20.0), Vec2(140.0, -3.0), Vec2(-20.0, -3.0)}});
    return c;
}

} // namespace

std::vector<std::string> builtin_scenario_names()
{
    return {"legrun_baseline", "legrun_fault", "legrun_drogue", "legrun_sail",
            "straight_fault",  "straight_drogue", "unrep",       "canal"};
}

ScenarioConfig builtin_scenario(const std::string& name)
{
    const TriggerSpec after_turn1{TriggerSpec::Kind::TurnComplete, 0.0, 1};
    if (name == "legrun_baseline") return legrun_base(name, 101);
    if (name == "legrun_fault") {
        auto c = legrun_base(name, 102);
        c.disturbances.push_back(fault_spec("left_thruster_50", 0.5, 1.0, after_turn1));
        return c;
    }
    if (name == "legrun_drogue") {
        auto c = legrun_base(name, 103);
        c.disturbances.push_back(drag_spec("drogue", -15.0, 5.0, after_turn1));
        return c;
    }
    if (name == "legrun_sail") {
        auto c = legrun_base(name, 104);
        c.disturbances.push_back(drag_spec("sail", -5.0, 8.0, after_turn1));
        return c;
    }
    if (name == "straight_fault") {
        auto c = straight_base(name, 201);
        c.disturbances.push_back(fault_spec("dual_thruster_30", 0.3, 0.3, {TriggerSpec::Kind::AlongTrack, 50.0, 0}));
        return c;
    }
    if (name == "straight_drogue") {
        auto c = straight_base(name, 202);
        c.disturbances.push_back(drag_spec("drogue", -75.0, 5.0, {TriggerSpec::Kind::AlongTrack, 50.0, 0}));
        return c;
    }
    if (name == "unrep") {
        ScenarioConfig c;
        c.name = name;
        c.seed = 301;
        c.duration = 240.0;
        c.mission.type = MissionConfig::Type::Unrep;
        c.mission.path = {Vec2(0.0, 0.0), Vec2(600.0, 0.0)};
        c.mission.grid.u_step = 0.01;
        c.rates.helm = 10;
        DisturbanceSpec hw;
        hw.type = DisturbanceSpec::Type::HullWash;
        hw.name = "hull_wash";
        hw.vehicle = -1;
        c.disturbances.push_back(hw);
        return c;
    }
    if (name == "canal") {
        ScenarioConfig c;
        c.name = name;
        c.seed = 401;
        c.duration = 300.0;
        c.mission.type = MissionConfig::Type::Canal;
        c.mission.path = {Vec2(0.0, 0.0), Vec2(140.0, 0.0)};
        DisturbanceSpec be;
        be.type = DisturbanceSpec::Type::BankEffect;
        be.name = "bank_effect";
        c.disturbances.push_back(be);
        c.disturbances.push_back(drag_spec("sail", -5.0, -8.0, {TriggerSpec::Kind::AlongTrack, 70.0, 0}));
        c.disturbances.push_back(fault_spec("left_thruster_50", 0.5, 1.0, {TriggerSpec::Kind::AlongTrack, 70.0, 0}));
        return c;
    }
    throw ConfigError("unknown builtin scenario '" + name + "'");
}

} // namespace usv
