#include "usvsim/usvsim.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <string>

#include "usv/runlog.hpp"

struct usvsim_scenario {
    usv::ScenarioConfig cfg;
};

struct usvsim_run {
    usv::RunLog log;
    usv::MetricsSummary metrics;
};

struct usvsim_suite {
    usv::SuiteResult res;
    std::vector<std::string> controllers;
};

namespace {

thread_local std::string g_error;

usvsim_status fail(usvsim_status s, const std::string& msg)
{
    g_error = msg;
    return s;
}

// Runs f, mapping exceptions to status codes; clears the error on success.
template <class F>
usvsim_status guarded(F&& f)
{
    try {
        const usvsim_status s = f();
        if (s == USVSIM_OK) g_error.clear();
        return s;
    } catch (const usv::ConfigError& e) {
        return fail(USVSIM_ERR_CONFIG, e.what());
    } catch (const usv::Error& e) {
        return fail(USVSIM_ERR_RUNTIME, e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(USVSIM_ERR_IO, e.what());
    } catch (const std::exception& e) {
        return fail(USVSIM_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(USVSIM_ERR_INTERNAL, "unknown exception");
    }
}

char* dup_string(const std::string& s)
{
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (!p) throw std::bad_alloc();
    std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

void fill_metrics(const usv::MetricsSummary& m, double end_time, double station, bool proj, usvsim_metrics* out)
{
    out->position_rmse = m.position.rmse;
    out->position_rmsd = m.position.rmsd;
    out->speed_rmse = m.speed.rmse;
    out->speed_rmsd = m.speed.rmsd;
    out->heading_rmse_deg = m.heading.rmse;
    out->heading_rmsd_deg = m.heading.rmsd;
    out->yaw_rate_rmse = m.yaw_rate.rmse;
    out->yaw_rate_rmsd = m.yaw_rate.rmsd;
    out->samples = m.samples;
    out->end_time = end_time;
    out->max_station_error = station;
    out->projection_ok = proj ? 1 : 0;
}

bool readable(const char* path)
{
    std::ifstream f(path);
    return static_cast<bool>(f);
}

void copy_matrix(const Eigen::MatrixXd& M, double* out)
{
    for (int i = 0; i < M.rows(); ++i)
        for (int j = 0; j < M.cols(); ++j) out[i * M.cols() + j] = M(i, j);
}

double lyapunov_residual(const usv::ChannelDesign& d)
{
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d.A_ref.rows(), d.A_ref.cols());
    return (d.P * d.A_ref + d.A_ref.transpose() * d.P + I).cwiseAbs().maxCoeff();
}

} // namespace

extern "C" {

const char* usvsim_version(void) { return "1.0.0"; }

const char* usvsim_status_string(usvsim_status s)
{
    switch (s) {
    case USVSIM_OK: return "ok";
    case USVSIM_ERR_NULL: return "null argument";
    case USVSIM_ERR_CONFIG: return "invalid configuration";
    case USVSIM_ERR_IO: return "i/o error";
    case USVSIM_ERR_RUNTIME: return "runtime error";
    case USVSIM_ERR_RANGE: return "index out of range";
    case USVSIM_ERR_NOT_FOUND: return "not found";
    case USVSIM_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* usvsim_last_error(void) { return g_error.c_str(); }

void usvsim_string_free(char* s) { std::free(s); }

size_t usvsim_builtin_count(void) { return usv::builtin_scenario_names().size(); }

const char* usvsim_builtin_name(size_t i)
{
    static const std::vector<std::string> names = usv::builtin_scenario_names();
    return i < names.size() ? names[i].c_str() : nullptr;
}

usvsim_status usvsim_scenario_builtin(const char* name, usvsim_scenario** out)
{
    if (!name || !out) return fail(USVSIM_ERR_NULL, "usvsim_scenario_builtin: null argument");
    return guarded([&] {
        const auto names = usv::builtin_scenario_names();
        if (std::find(names.begin(), names.end(), name) == names.end())
            return fail(USVSIM_ERR_NOT_FOUND, std::string("unknown builtin scenario '") + name + "'");
        *out = new usvsim_scenario{usv::builtin_scenario(name)};
        return USVSIM_OK;
    });
}

usvsim_status usvsim_scenario_load(const char* path, usvsim_scenario** out)
{
    if (!path || !out) return fail(USVSIM_ERR_NULL, "usvsim_scenario_load: null argument");
    if (!readable(path)) return fail(USVSIM_ERR_IO, std::string("cannot read ") + path);
    return guarded([&] {
        *out = new usvsim_scenario{usv::load_scenario(path)};
        return USVSIM_OK;
    });
}

usvsim_status usvsim_scenario_parse(const char* json_text, usvsim_scenario** out)
{
    if (!json_text || !out) return fail(USVSIM_ERR_NULL, "usvsim_scenario_parse: null argument");
    return guarded([&] {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(json_text, nullptr, true, true);
        } catch (const nlohmann::json::exception& e) {
            return fail(USVSIM_ERR_CONFIG, e.what());
        }
        *out = new usvsim_scenario{usv::scenario_from_json(j)};
        return USVSIM_OK;
    });
}

usvsim_status usvsim_scenario_set_controller(usvsim_scenario* s, const char* kind)
{
    if (!s || !kind) return fail(USVSIM_ERR_NULL, "usvsim_scenario_set_controller: null argument");
    return guarded([&] {
        usv::ScenarioConfig c = s->cfg;
        c.controller = usv::controller_kind_from_string(kind);
        c.validate();
        s->cfg = std::move(c);
        return USVSIM_OK;
    });
}

usvsim_status usvsim_scenario_set_seed(usvsim_scenario* s, uint64_t seed)
{
    if (!s) return fail(USVSIM_ERR_NULL, "usvsim_scenario_set_seed: null scenario");
    s->cfg.seed = seed;
    g_error.clear();
    return USVSIM_OK;
}

usvsim_status usvsim_scenario_set_duration(usvsim_scenario* s, double seconds)
{
    if (!s) return fail(USVSIM_ERR_NULL, "usvsim_scenario_set_duration: null scenario");
    if (!(seconds > 0.0) || !std::isfinite(seconds)) return fail(USVSIM_ERR_CONFIG, "duration must be positive");
    s->cfg.duration = seconds;
    g_error.clear();
    return USVSIM_OK;
}

usvsim_status usvsim_scenario_to_json(const usvsim_scenario* s, char** out)
{
    if (!s || !out) return fail(USVSIM_ERR_NULL, "usvsim_scenario_to_json: null argument");
    return guarded([&] {
        *out = dup_string(usv::to_json(s->cfg).dump(2));
        return USVSIM_OK;
    });
}

void usvsim_scenario_free(usvsim_scenario* s) { delete s; }

usvsim_status usvsim_run_scenario(const usvsim_scenario* s, usvsim_run** out)
{
    if (!s || !out) return fail(USVSIM_ERR_NULL, "usvsim_run_scenario: null argument");
    return guarded([&] {
        auto r = std::make_unique<usvsim_run>();
        r->log = usv::run_scenario(s->cfg);
        if (!r->log.ticks.empty()) r->metrics = usv::compute_metrics(r->log);
        *out = r.release();
        return USVSIM_OK;
    });
}

usvsim_status usvsim_run_outcome(const usvsim_run* r, const char** outcome)
{
    if (!r || !outcome) return fail(USVSIM_ERR_NULL, "usvsim_run_outcome: null argument");
    *outcome = r->log.outcome.c_str();
    g_error.clear();
    return USVSIM_OK;
}

usvsim_status usvsim_run_metrics(const usvsim_run* r, usvsim_metrics* out)
{
    if (!r || !out) return fail(USVSIM_ERR_NULL, "usvsim_run_metrics: null argument");
    fill_metrics(r->metrics, r->log.end_time, r->log.max_station_error, r->log.projection_ok, out);
    g_error.clear();
    return USVSIM_OK;
}

usvsim_status usvsim_run_event_count(const usvsim_run* r, size_t* n)
{
    if (!r || !n) return fail(USVSIM_ERR_NULL, "usvsim_run_event_count: null argument");
    *n = r->log.events.size();
    g_error.clear();
    return USVSIM_OK;
}

usvsim_status usvsim_run_event(const usvsim_run* r, size_t i, double* t, const char** name, const char** detail)
{
    if (!r) return fail(USVSIM_ERR_NULL, "usvsim_run_event: null run");
    if (i >= r->log.events.size()) return fail(USVSIM_ERR_RANGE, "usvsim_run_event: index out of range");
    const auto& e = r->log.events[i];
    if (t) *t = e.t;
    if (name) *name = e.name.c_str();
    if (detail) *detail = e.detail.c_str();
    g_error.clear();
    return USVSIM_OK;
}

usvsim_status usvsim_run_has_event(const usvsim_run* r, const char* name, int* found)
{
    if (!r || !name || !found) return fail(USVSIM_ERR_NULL, "usvsim_run_has_event: null argument");
    *found = r->log.has_event(name) ? 1 : 0;
    g_error.clear();
    return USVSIM_OK;
}

usvsim_status usvsim_run_summary_json(const usvsim_run* r, char** out)
{
    if (!r || !out) return fail(USVSIM_ERR_NULL, "usvsim_run_summary_json: null argument");
    return guarded([&] {
        *out = dup_string(usv::summary_json(r->log).dump(2));
        return USVSIM_OK;
    });
}

usvsim_status usvsim_run_write(const usvsim_run* r, const char* dir)
{
    if (!r || !dir) return fail(USVSIM_ERR_NULL, "usvsim_run_write: null argument");
    return guarded([&] {
        try {
            usv::write_run(r->log, dir);
        } catch (const usv::Error& e) {
            return fail(USVSIM_ERR_IO, e.what());
        }
        return USVSIM_OK;
    });
}

void usvsim_run_free(usvsim_run* r) { delete r; }

usvsim_status usvsim_suite_run(const char* out_dir, usvsim_suite** out)
{
    if (!out) return fail(USVSIM_ERR_NULL, "usvsim_suite_run: null argument");
    return guarded([&] {
        auto s = std::make_unique<usvsim_suite>();
        s->res = usv::run_suite(out_dir ? out_dir : "");
        for (const auto& e : s->res.entries) s->controllers.emplace_back(usv::to_string(e.run.controller));
        *out = s.release();
        return USVSIM_OK;
    });
}

usvsim_status usvsim_suite_count(const usvsim_suite* s, size_t* n)
{
    if (!s || !n) return fail(USVSIM_ERR_NULL, "usvsim_suite_count: null argument");
    *n = s->res.entries.size();
    g_error.clear();
    return USVSIM_OK;
}

usvsim_status usvsim_suite_entry(const usvsim_suite* s, size_t i, const char** scenario, const char** controller,
                                 const char** outcome, usvsim_metrics* metrics, double* improvement_pct)
{
    if (!s) return fail(USVSIM_ERR_NULL, "usvsim_suite_entry: null suite");
    if (i >= s->res.entries.size()) return fail(USVSIM_ERR_RANGE, "usvsim_suite_entry: index out of range");
    const usv::SuiteEntry& e = s->res.entries[i];
    if (scenario) *scenario = e.run.scenario.c_str();
    if (controller) *controller = s->controllers[i].c_str();
    if (outcome) *outcome = e.outcome.c_str();
    if (metrics) fill_metrics(e.metrics, e.end_time, e.max_station_error, e.projection_ok, metrics);
    if (improvement_pct)
        *improvement_pct = e.position_improvement_pct ? *e.position_improvement_pct
                                                      : std::numeric_limits<double>::quiet_NaN();
    g_error.clear();
    return USVSIM_OK;
}

void usvsim_suite_free(usvsim_suite* s) { delete s; }

usvsim_status usvsim_certify_log(const char* run_jsonl, int horizon, double gamma, long* calls, long* unsafe)
{
    if (!run_jsonl) return fail(USVSIM_ERR_NULL, "usvsim_certify_log: null path");
    if (!readable(run_jsonl)) return fail(USVSIM_ERR_IO, std::string("cannot read ") + run_jsonl);
    return guarded([&] {
        const usv::OfflineCertifyStats st = usv::certify_log(run_jsonl, horizon, gamma);
        if (calls) *calls = st.calls;
        if (unsafe) *unsafe = st.unsafe;
        return USVSIM_OK;
    });
}

usvsim_status usvsim_lqr_gains(usvsim_gains* out)
{
    if (!out) return fail(USVSIM_ERR_NULL, "usvsim_lqr_gains: null argument");
    return guarded([&] {
        const usv::VehicleModel m;
        const usv::ChannelDesign su = usv::design_speed_channel(m.speed);
        const usv::ChannelDesign sy = usv::design_yaw_channel(m.sway_yaw);
        const usv::LqrPiGains g = usv::gains_from_designs(su, sy);
        out->k_u_p = g.k_u_p;
        out->k_u_i = g.k_u_i;
        out->k_v_p = g.k_v_p;
        out->k_r_p = g.k_r_p;
        out->k_r_i = g.k_r_i;
        copy_matrix(su.P_care, out->riccati_P_speed);
        copy_matrix(sy.P_care, out->riccati_P_yaw);
        copy_matrix(su.P, out->lyapunov_P_speed);
        copy_matrix(sy.P, out->lyapunov_P_yaw);
        out->lyapunov_residual_speed = lyapunov_residual(su);
        out->lyapunov_residual_yaw = lyapunov_residual(sy);
        return USVSIM_OK;
    });
}

} // extern "C"
