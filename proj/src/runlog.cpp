#include "usv/runlog.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

namespace usv {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json vec_json(const Vec6& v) { return json::array({v[0], v[1], v[2], v[3], v[4], v[5]}); }

Vec6 vec_from(const json& j)
{
    if (!j.is_array() || j.size() != 6) throw Error("run log: expected a 6-vector");
    Vec6 v;
    for (int i = 0; i < 6; ++i) v[i] = j[i].get<double>();
    return v;
}

json metrics_json(const MetricsSummary& m)
{
    auto es = [](const ErrorStats& e) { return json{{"rmse", e.rmse}, {"rmsd", e.rmsd}}; };
    return {{"speed", es(m.speed)},
            {"heading_deg", es(m.heading)},
            {"yaw_rate", es(m.yaw_rate)},
            {"position", es(m.position)},
            {"samples", m.samples}};
}

json vehicle_json(const VehicleTick& v)
{
    const ControllerOutput& c = v.cmd;
    return {{"truth", vec_json(v.truth)},
            {"meas", vec_json(v.meas)},
            {"ref", {{"u_DES", v.u_DES}, {"theta_DES", v.theta_DES}, {"u_des", v.u_des}, {"r_des", v.r_des}}},
            {"cmd",
             {{"u_thr", c.u_thr},
              {"u_rud", c.u_rud},
              {"uL", c.uL},
              {"uR", c.uR},
              {"uL_applied", v.uL_applied},
              {"uR_applied", v.uR_applied}}},
            {"adaptive",
             {{"u_ad_thr", c.u_ad_thr},
              {"u_ad_rud", c.u_ad_rud},
              {"e_speed", c.e_speed},
              {"e_yaw", c.e_yaw},
              {"theta_bl_speed", c.theta_bl_speed},
              {"theta_bl_yaw", c.theta_bl_yaw},
              {"theta_rbf_speed", c.theta_rbf_speed},
              {"theta_rbf_yaw", c.theta_rbf_yaw}}}};
}

json rsoa_json(const std::vector<HyperRect>& rs)
{
    json a = json::array();
    for (const auto& r : rs) {
        json row = json::array();
        const Eigen::VectorXd lo = r.lo(), hi = r.hi();
        for (int i = 0; i < r.dim(); ++i) row.push_back(lo[i]);
        for (int i = 0; i < r.dim(); ++i) row.push_back(hi[i]);
        a.push_back(std::move(row));
    }
    return a;
}

json estimate_json(const EstimateRecord& e)
{
    return {{"x_hat", vec_json(e.x_hat)},
            {"Q_diag", vec_json(e.Q_diag)},
            {"mu_hat", vec_json(e.dist.mu_hat)},
            {"W_hat", vec_json(e.dist.W_hat)},
            {"delta_mu", vec_json(e.dist.delta_mu)},
            {"delta_sigma", vec_json(e.dist.delta_sigma)},
            {"diverged", e.diverged},
            {"iterations", e.iterations}};
}

json tick_json(const TickRecord& t)
{
    json j{{"type", "tick"},
           {"tick", t.tick},
           {"t", t.t},
           {"progress", t.progress},
           {"active", t.active},
           {"err",
            {{"speed", t.e_speed},
             {"heading_deg", t.e_heading_deg},
             {"yaw_rate", t.e_yaw_rate},
             {"position", t.e_position}}}};
    json vs = json::array();
    for (const auto& v : t.v) vs.push_back(vehicle_json(v));
    j["vehicles"] = std::move(vs);
    if (t.est) j["est"] = estimate_json(*t.est);
    if (t.cert) {
        j["cert"] = {{"policy", policy_to_json(t.cert->policy)},
                     {"safe", t.cert->safe},
                     {"first_violation", t.cert->first_violation},
                     {"rsoa", rsoa_json(t.cert->rsoa)}};
    }
    return j;
}

json event_json(const EventRecord& e)
{
    return {{"type", "event"}, {"t", e.t}, {"tick", e.tick}, {"name", e.name}, {"vehicle", e.vehicle}, {"detail", e.detail}};
}

json counts_json(const RunCounts& c)
{
    return {{"ticks", c.ticks},         {"imu", c.imu},
            {"gps", c.gps},             {"helm", c.helm},
            {"controller", c.controller}, {"estimator", c.estimator},
            {"certify", c.certify},     {"estimates", c.estimates},
            {"certificates", c.certificates}};
}

std::ofstream open_out(const fs::path& p)
{
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cannot write " + p.string());
    return f;
}

// %.17g round-trips doubles and does not depend on the locale's stream state.
std::string num(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void csv_row(std::ostream& os, const std::vector<double>& xs)
{
    for (size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << num(xs[i]);
    os << '\n';
}

void write_tables(const RunLog& log, const fs::path& dir)
{
    const bool two = !log.ticks.empty() && log.ticks.front().v.size() > 1;
    {
        auto f = open_out(dir / "ticks.csv");
        f << "t,x,y,theta,u,v,r,x_meas,y_meas,theta_meas,u_meas,v_meas,r_meas,u_DES,theta_DES,u_des,r_des,"
             "u_thr,u_rud,uL,uR,uL_applied,uR_applied,u_ad_thr,u_ad_rud,e_speed,e_heading_deg,e_yaw_rate,e_position";
        if (two) f << ",guide_x,guide_y,guide_theta,guide_u";
        f << '\n';
        for (const auto& t : log.ticks) {
            const VehicleTick& v = t.v[0];
            std::vector<double> row{t.t};
            for (int i = 0; i < 6; ++i) row.push_back(v.truth[i]);
            for (int i = 0; i < 6; ++i) row.push_back(v.meas[i]);
            row.insert(row.end(), {v.u_DES, v.theta_DES, v.u_des, v.r_des, v.cmd.u_thr, v.cmd.u_rud, v.cmd.uL, v.cmd.uR,
                                   v.uL_applied, v.uR_applied, v.cmd.u_ad_thr, v.cmd.u_ad_rud, t.e_speed,
                                   t.e_heading_deg, t.e_yaw_rate, t.e_position});
            if (two) row.insert(row.end(), {t.v[1].truth[0], t.v[1].truth[1], t.v[1].truth[2], t.v[1].truth[3]});
            csv_row(f, row);
        }
    }
    {
        auto f = open_out(dir / "events.csv");
        f << "t,tick,name,vehicle,detail\n";
        for (const auto& e : log.events)
            f << num(e.t) << ',' << e.tick << ',' << e.name << ',' << e.vehicle << ",\"" << e.detail << "\"\n";
    }
    {
        auto f = open_out(dir / "estimates.csv");
        f << "t,x_hat,y_hat,theta_hat,u_hat,v_hat,r_hat,mu_x,mu_y,mu_theta,mu_u,mu_v,mu_r,"
             "W_x,W_y,W_theta,W_u,W_v,W_r,iterations\n";
        for (const auto& t : log.ticks) {
            if (!t.est) continue;
            std::vector<double> row{t.t};
            for (int i = 0; i < 6; ++i) row.push_back(t.est->x_hat[i]);
            for (int i = 0; i < 6; ++i) row.push_back(t.est->dist.mu_hat[i]);
            for (int i = 0; i < 6; ++i) row.push_back(t.est->dist.W_hat[i]);
            row.push_back(t.est->iterations);
            csv_row(f, row);
        }
    }
    {
        auto f = open_out(dir / "rsoa.csv");
        f << "t,step,x_lo,x_hi,y_lo,y_hi,theta_lo,theta_hi,u_lo,u_hi,v_lo,v_hi,r_lo,r_hi,safe\n";
        for (const auto& t : log.ticks) {
            if (!t.cert) continue;
            for (size_t s = 0; s < t.cert->rsoa.size(); ++s) {
                const HyperRect& r = t.cert->rsoa[s];
                std::vector<double> row{t.t, static_cast<double>(s + 1)};
                for (int i = 0; i < 6; ++i) {
                    row.push_back(r.center[i] - r.radii[i]);
                    row.push_back(r.center[i] + r.radii[i]);
                }
                row.push_back(t.cert->safe ? 1.0 : 0.0);
                csv_row(f, row);
            }
        }
    }
}

} // namespace

json policy_to_json(const FrozenTracklinePolicy& p)
{
    const LqrPiGains& g = p.gains;
    return {{"azimuth", p.azimuth},
            {"p1", {p.p1x, p.p1y}},
            {"u_des", p.u_des},
            {"guide", {{"k_p", p.guide.k_p}, {"k_d", p.guide.k_d}}},
            {"corr_limit", p.corr_limit},
            {"tau_theta", p.tau_theta},
            {"gains",
             {{"k_u_p", g.k_u_p},
              {"k_u_i", g.k_u_i},
              {"k_v_p", g.k_v_p},
              {"k_r_p", g.k_r_p},
              {"k_r_i", g.k_r_i},
              {"k_u_aw", g.k_u_aw},
              {"k_r_aw", g.k_r_aw}}},
            {"e_uI", p.e_uI},
            {"e_rI", p.e_rI},
            {"u_ad_thr", p.u_ad_thr},
            {"u_ad_rud", p.u_ad_rud},
            {"thr_limit", p.thr_limit},
            {"rud_limit", p.rud_limit}};
}

FrozenTracklinePolicy policy_from_json(const json& j)
{
    FrozenTracklinePolicy p;
    try {
        p.azimuth = j.at("azimuth");
        p.p1x = j.at("p1").at(0);
        p.p1y = j.at("p1").at(1);
        p.u_des = j.at("u_des");
        p.guide.k_p = j.at("guide").at("k_p");
        p.guide.k_d = j.at("guide").at("k_d");
        p.corr_limit = j.at("corr_limit");
        p.tau_theta = j.at("tau_theta");
        const json& g = j.at("gains");
        p.gains.k_u_p = g.at("k_u_p");
        p.gains.k_u_i = g.at("k_u_i");
        p.gains.k_v_p = g.at("k_v_p");
        p.gains.k_r_p = g.at("k_r_p");
        p.gains.k_r_i = g.at("k_r_i");
        p.gains.k_u_aw = g.at("k_u_aw");
        p.gains.k_r_aw = g.at("k_r_aw");
        p.e_uI = j.at("e_uI");
        p.e_rI = j.at("e_rI");
        p.u_ad_thr = j.at("u_ad_thr");
        p.u_ad_rud = j.at("u_ad_rud");
        p.thr_limit = j.at("thr_limit");
        p.rud_limit = j.at("rud_limit");
    } catch (const json::exception& e) {
        throw Error(std::string("policy record: ") + e.what());
    }
    return p;
}

json summary_json(const RunLog& log)
{
    json events = json::array();
    for (const auto& e : log.events) events.push_back(e.name);
    long unsafe = 0;
    for (const auto& t : log.ticks) unsafe += t.cert && !t.cert->safe;
    json j{{"schema", kSummarySchema},
           {"scenario", log.config.name},
           {"controller", to_string(log.config.controller)},
           {"seed", log.config.seed},
           {"outcome", log.outcome},
           {"end_time", log.end_time},
           {"counts", counts_json(log.counts)},
           {"events", events},
           {"projection_ok", log.projection_ok},
           {"max_station_error", log.max_station_error},
           {"certify", {{"calls", log.counts.certificates}, {"unsafe", unsafe}}}};
    j["metrics"] = log.ticks.empty() ? json(nullptr) : metrics_json(compute_metrics(log));
    return j;
}

void write_run(const RunLog& log, const std::string& dir_s)
{
    const fs::path dir(dir_s);
    fs::create_directories(dir);
    {
        auto f = open_out(dir / "run.jsonl");
        f << json{{"type", "header"}, {"schema", kRunLogSchema}, {"config", to_json(log.config)}}.dump() << '\n';
        size_t e = 0;
        for (const auto& t : log.ticks) {
            for (; e < log.events.size() && log.events[e].t <= t.t; ++e) f << event_json(log.events[e]).dump() << '\n';
            f << tick_json(t).dump() << '\n';
        }
        for (; e < log.events.size(); ++e) f << event_json(log.events[e]).dump() << '\n';
        f << json{{"type", "footer"},
                  {"outcome", log.outcome},
                  {"end_time", log.end_time},
                  {"counts", counts_json(log.counts)},
                  {"projection_ok", log.projection_ok},
                  {"max_station_error", log.max_station_error}}
                 .dump()
          << '\n';
    }
    open_out(dir / "summary.json") << summary_json(log).dump(2) << '\n';
    write_tables(log, dir);
}

std::vector<SuiteRun> suite_plan()
{
    using K = ControllerKind;
    std::vector<SuiteRun> plan;
    const K all[] = {K::Pid, K::LqrPi, K::Mrac};
    for (const char* s : {"legrun_baseline", "legrun_fault", "legrun_drogue", "legrun_sail"})
        for (K k : all) plan.push_back({s, k});
    for (const char* s : {"straight_fault", "straight_drogue"})
        for (K k : {K::LqrPi, K::Mrac}) plan.push_back({s, k});
    for (const char* s : {"unrep", "canal"})
        for (K k : all) plan.push_back({s, k});
    return plan;
}

const SuiteEntry* SuiteResult::find(const std::string& scenario, ControllerKind c) const
{
    for (const auto& e : entries)
        if (e.run.scenario == scenario && e.run.controller == c) return &e;
    return nullptr;
}

SuiteResult run_suite(const std::string& out, const std::vector<SuiteRun>& plan, const SuiteObserver& observe)
{
    SuiteResult res;
    for (const auto& r : plan) {
        ScenarioConfig cfg = builtin_scenario(r.scenario);
        cfg.controller = r.controller;
        const RunLog log = run_scenario(cfg);
        SuiteEntry e;
        e.run = r;
        e.outcome = log.outcome;
        e.end_time = log.end_time;
        e.metrics = compute_metrics(log);
        e.projection_ok = log.projection_ok;
        e.max_station_error = log.max_station_error;
        for (const auto& ev : log.events) e.events.push_back(ev.name);
        if (!out.empty()) write_run(log, (fs::path(out) / r.scenario / to_string(r.controller)).string());
        if (observe) observe(log, e);
        res.entries.push_back(std::move(e));
    }
    for (auto& e : res.entries) {
        const SuiteEntry* pid = res.find(e.run.scenario, ControllerKind::Pid);
        if (pid && pid->metrics.position.rmse > 0.0)
            e.position_improvement_pct =
                100.0 * (pid->metrics.position.rmse - e.metrics.position.rmse) / pid->metrics.position.rmse;
    }
    if (out.empty()) return res;

    auto f = open_out(fs::path(out) / "comparison.csv");
    f << "scenario,controller,outcome,end_time,position_rmse,position_rmsd,speed_rmse,speed_rmsd,heading_rmse_deg,"
         "heading_rmsd_deg,yaw_rate_rmse,yaw_rate_rmsd,max_station_error,position_improvement_pct\n";
    json runs = json::array();
    for (const auto& e : res.entries) {
        const MetricsSummary& m = e.metrics;
        f << e.run.scenario << ',' << to_string(e.run.controller) << ',' << e.outcome << ',' << num(e.end_time) << ','
          << num(m.position.rmse) << ',' << num(m.position.rmsd) << ',' << num(m.speed.rmse) << ','
          << num(m.speed.rmsd) << ',' << num(m.heading.rmse) << ',' << num(m.heading.rmsd) << ','
          << num(m.yaw_rate.rmse) << ',' << num(m.yaw_rate.rmsd) << ',' << num(e.max_station_error) << ','
          << (e.position_improvement_pct ? num(*e.position_improvement_pct) : "") << '\n';
        runs.push_back({{"scenario", e.run.scenario},
                        {"controller", to_string(e.run.controller)},
                        {"outcome", e.outcome},
                        {"end_time", e.end_time},
                        {"metrics", metrics_json(m)},
                        {"projection_ok", e.projection_ok},
                        {"max_station_error", e.max_station_error},
                        {"events", e.events},
                        {"position_improvement_pct",
                         e.position_improvement_pct ? json(*e.position_improvement_pct) : json(nullptr)}});
    }
    open_out(fs::path(out) / "suite.json") << json{{"schema", kSuiteSchema}, {"runs", runs}}.dump(2) << '\n';
    return res;
}

OfflineCertifyStats certify_log(const std::string& run_jsonl, int horizon, double gamma)
{
    if (horizon < 1) throw ConfigError("horizon must be at least 1");
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
    std::ifstream in(run_jsonl);
    if (!in) throw Error("cannot read " + run_jsonl);
    std::string line;
    if (!std::getline(in, line)) throw Error(run_jsonl + ": empty log");
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw Error(run_jsonl + ": " + e.what());
    }
    if (header.value("type", "") != "header" || header.value("schema", "") != kRunLogSchema)
        throw Error(run_jsonl + ": not a " + std::string(kRunLogSchema) + " log");
    const ScenarioConfig cfg = scenario_from_json(header.at("config"));
    const double dt = 1.0 / cfg.rates.reachability;

    OfflineCertifyStats st;
    st.output = (fs::path(run_jsonl).parent_path() / "certify.jsonl").string();
    auto out = open_out(st.output);
    out << json{{"type", "header"},
                {"schema", kCertifySchema},
                {"source", fs::path(run_jsonl).filename().string()},
                {"scenario", cfg.name},
                {"horizon", horizon},
                {"gamma", gamma}}
               .dump()
        << '\n';
    // Graphs depend only on the policy; consecutive calls often share one.
    std::map<std::string, AugmentedGraph> cache;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(run_jsonl + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (j.value("type", "") != "tick" || !j.contains("est") || !j.contains("cert")) continue;
        const json& ej = j["est"];
        CertifyInput ci;
        ci.x_hat = vec_from(ej.at("x_hat"));
        ci.Q_diag = vec_from(ej.at("Q_diag"));
        ci.dist.mu_hat = vec_from(ej.at("mu_hat"));
        ci.dist.W_hat = vec_from(ej.at("W_hat"));
        ci.dist.delta_mu = vec_from(ej.at("delta_mu"));
        ci.dist.delta_sigma = vec_from(ej.at("delta_sigma"));
        const json& pj = j["cert"].at("policy");
        const std::string key = pj.dump();
        auto it = cache.find(key);
        if (it == cache.end()) {
            if (cache.size() > 64) cache.clear();
            it = cache.emplace(key, build_augmented_graph(policy_from_json(pj), cfg.model, dt, gamma)).first;
        }
        const CertifyResult r = certify(it->second, ci, horizon, cfg.reach.unsafe);
        ++st.calls;
        st.unsafe += !r.safe;
        out << json{{"type", "certify"},
                    {"tick", j.at("tick")},
                    {"t", j.at("t")},
                    {"safe", r.safe},
                    {"first_violation", r.first_violation},
                    {"rsoa", rsoa_json(r.rsoa)}}
                   .dump()
            << '\n';
    }
    if (st.calls == 0) throw Error(run_jsonl + ": no estimator/certify records to re-certify");
    return st;
}

} // namespace usv
