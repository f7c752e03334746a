#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "usv/runlog.hpp"
#include "usv/simulation.hpp"

using namespace usv;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch_dir(const std::string& name)
{
    const fs::path d = fs::temp_directory_path() / ("usvsim_test_" + name);
    fs::remove_all(d);
    return d;
}

ScenarioConfig quiet_straight(ControllerKind c)
{
    ScenarioConfig cfg = builtin_scenario("straight_fault");
    cfg.controller = c;
    cfg.disturbances.clear();
    cfg.natural = {};
    cfg.sensors.noise = false;
    cfg.estimator.enabled = false;
    cfg.reach.enabled = false;
    return cfg;
}

} // namespace

TEST_CASE("error statistics")
{
    const ErrorStats c = error_stats({1, 1, 1, 1});
    CHECK(c.rmse == 1.0);
    CHECK(c.rmsd == 0.0);
    const ErrorStats z = error_stats({0, 0, 0});
    CHECK(z.rmse == 0.0);
    CHECK(z.rmsd == 0.0);
    const ErrorStats a = error_stats({1, -1, 1, -1});
    CHECK(a.rmse == 1.0);
    CHECK(a.rmsd == 1.0);
}

TEST_CASE("scenario JSON round trip and validation")
{
    for (const auto& name : builtin_scenario_names()) {
        CAPTURE(name);
        const ScenarioConfig cfg = builtin_scenario(name);
        const nlohmann::json j = to_json(cfg);
        CHECK(to_json(scenario_from_json(j)) == j);
    }
    nlohmann::json j = to_json(builtin_scenario("canal"));
    nlohmann::json no_seed = j;
    no_seed.erase("seed");
    CHECK_THROWS_AS(scenario_from_json(no_seed), ConfigError);
    nlohmann::json extra = j;
    extra["colour"] = "blue";
    CHECK_THROWS_AS(scenario_from_json(extra), ConfigError);
    nlohmann::json rates = j;
    rates["rates"]["gps"] = 7;
    CHECK_THROWS_AS(scenario_from_json(rates), ConfigError);
    CHECK_THROWS_AS(builtin_scenario("nope"), ConfigError);
    CHECK_THROWS_AS(load_scenario("/nonexistent/file.json"), Error);
}

TEST_CASE("zero-noise straight trackline with LQR-PI settles on the line")
{
    const ScenarioConfig cfg = quiet_straight(ControllerKind::LqrPi);
    const RunLog log = run_scenario(cfg);
    CHECK(log.outcome == "complete");
    const Vec6& x = log.ticks.back().v[0].truth;
    const Segment seg{cfg.mission.path.front(), cfg.mission.path.back()};
    CHECK(std::abs(cross_track(Vec2(x[kX], x[kY]), seg)) < 0.2);
}

TEST_CASE("MRAC tracks its reference model without matched uncertainty")
{
    const RunLog log = run_scenario(quiet_straight(ControllerKind::Mrac));
    double worst = 0.0;
    for (const auto& t : log.ticks)
        if (t.t >= 5.0) worst = std::max({worst, t.v[0].cmd.e_speed, t.v[0].cmd.e_yaw});
    CHECK(worst < 0.05);
    CHECK(log.projection_ok);
}

TEST_CASE("rate counts are duration times rate")
{
    ScenarioConfig cfg = builtin_scenario("straight_fault");
    cfg.duration = 20.0;
    const RunLog log = run_scenario(cfg);
    REQUIRE(log.outcome == "timeout");
    const RatesConfig& r = cfg.rates;
    CHECK(log.counts.ticks == 20 * r.base);
    CHECK(log.counts.imu == 20 * r.imu);
    CHECK(log.counts.gps == 20 * r.gps);
    CHECK(log.counts.helm == 20 * r.helm);
    CHECK(log.counts.controller == 20 * r.controller);
    CHECK(log.counts.estimator == 20 * r.estimator);
    CHECK(log.counts.certify == 20 * r.reachability);
    CHECK(log.ticks.size() == static_cast<size_t>(20 * r.controller));

    for (size_t i = 1; i < log.ticks.size(); ++i) CHECK(log.ticks[i].t > log.ticks[i - 1].t);
    // the estimator only reports once its window has filled
    CHECK(log.counts.estimates == log.counts.estimator - cfg.estimator.mhe.window);
}

TEST_CASE("disturbance triggers fire once at their progress event")
{
    const RunLog log = run_scenario(builtin_scenario("legrun_fault"));
    int on = 0;
    double t_on = -1.0;
    for (const auto& e : log.events)
        if (e.name == "disturbance_on") {
            ++on;
            t_on = e.t;
        }
    CHECK(on == 1);
    const PathPlan plan = legrun_waypoints(log.config.mission.legrun);
    // first tick whose tracker progress passes the first loop's end
    double t_prog = -1.0;
    for (const auto& t : log.ticks)
        if (t.progress >= plan.events.front().s) {
            t_prog = t.t;
            break;
        }
    CHECK(t_on >= 0.0);
    CHECK(std::abs(t_on - t_prog) <= 0.1 + 1e-9);
}

TEST_CASE("canal with PID ends in HALT, recorded as an event")
{
    ScenarioConfig cfg = builtin_scenario("canal");
    cfg.controller = ControllerKind::Pid;
    const RunLog log = run_scenario(cfg);
    CHECK(log.outcome == "halt");
    CHECK(log.has_event("HALT"));
}

TEST_CASE("run logs are deterministic and complete")
{
    ScenarioConfig cfg = builtin_scenario("straight_fault");
    cfg.duration = 8.0;
    const fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
    write_run(run_scenario(cfg), a.string());
    write_run(run_scenario(cfg), b.string());
    for (const char* f : {"run.jsonl", "summary.json", "ticks.csv", "events.csv", "estimates.csv", "rsoa.csv"}) {
        CAPTURE(f);
        REQUIRE(fs::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }

    std::ifstream in(a / "run.jsonl");
    std::string line;
    std::getline(in, line);
    const auto header = nlohmann::json::parse(line);
    CHECK(header["type"] == "header");
    CHECK(header["schema"] == kRunLogSchema);
    const auto summary = nlohmann::json::parse(slurp(a / "summary.json"));
    CHECK(summary["schema"] == kSummarySchema);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("offline certification reproduces the logged reachable sets")
{
    ScenarioConfig cfg = builtin_scenario("straight_fault");
    cfg.duration = 6.0;
    const RunLog log = run_scenario(cfg);
    const fs::path d = scratch_dir("cert");
    write_run(log, d.string());
    const OfflineCertifyStats st = certify_log((d / "run.jsonl").string(), cfg.reach.horizon, cfg.reach.gamma);
    CHECK(st.calls == log.counts.certificates);

    std::ifstream in(st.output);
    std::string line;
    std::getline(in, line);
    CHECK(nlohmann::json::parse(line)["schema"] == kCertifySchema);
    size_t i = 0;
    for (const auto& t : log.ticks) {
        if (!t.cert) continue;
        REQUIRE(std::getline(in, line));
        const auto rec = nlohmann::json::parse(line);
        CHECK(rec["safe"].get<bool>() == t.cert->safe);
        const auto& last = rec["rsoa"].back();
        const HyperRect& want = t.cert->rsoa.back();
        for (int k = 0; k < 6; ++k) {
            CHECK(last[k].get<double>() == want.lo()[k]);
            CHECK(last[6 + k].get<double>() == want.hi()[k]);
        }
        ++i;
    }
    CHECK(i == static_cast<size_t>(st.calls));
    CHECK_THROWS(certify_log((d / "missing.jsonl").string(), 20, 3.0));
    fs::remove_all(d);
}
