#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>

#include "usvsim/usvsim.h"

namespace fs = std::filesystem;

TEST_CASE("status strings and errors")
{
    CHECK(std::string(usvsim_status_string(USVSIM_OK)) == "ok");
    CHECK(std::strlen(usvsim_version()) > 0);

    usvsim_scenario* s = nullptr;
    CHECK(usvsim_scenario_builtin("no_such_mission", &s) == USVSIM_ERR_NOT_FOUND);
    CHECK(s == nullptr);
    CHECK(std::strlen(usvsim_last_error()) > 0);
    CHECK(usvsim_scenario_builtin(nullptr, &s) == USVSIM_ERR_NULL);
    CHECK(usvsim_scenario_load("/nonexistent/cfg.json", &s) == USVSIM_ERR_IO);
    CHECK(usvsim_scenario_parse("{\"name\": 3}", &s) == USVSIM_ERR_CONFIG);
    CHECK(usvsim_scenario_parse("not json", &s) == USVSIM_ERR_CONFIG);
    usvsim_scenario_free(nullptr);
    usvsim_run_free(nullptr);
}

TEST_CASE("builtins round-trip through JSON text")
{
    REQUIRE(usvsim_builtin_count() == 8);
    CHECK(usvsim_builtin_name(usvsim_builtin_count()) == nullptr);
    for (size_t i = 0; i < usvsim_builtin_count(); ++i) {
        usvsim_scenario* a = nullptr;
        REQUIRE(usvsim_scenario_builtin(usvsim_builtin_name(i), &a) == USVSIM_OK);
        char* text = nullptr;
        REQUIRE(usvsim_scenario_to_json(a, &text) == USVSIM_OK);
        usvsim_scenario* b = nullptr;
        REQUIRE(usvsim_scenario_parse(text, &b) == USVSIM_OK);
        char* again = nullptr;
        REQUIRE(usvsim_scenario_to_json(b, &again) == USVSIM_OK);
        CHECK(std::string(text) == std::string(again));
        usvsim_string_free(text);
        usvsim_string_free(again);
        usvsim_scenario_free(a);
        usvsim_scenario_free(b);
    }
}

TEST_CASE("run a scenario through the handle API")
{
    usvsim_scenario* s = nullptr;
    REQUIRE(usvsim_scenario_builtin("canal", &s) == USVSIM_OK);
    CHECK(usvsim_scenario_set_controller(s, "bogus") == USVSIM_ERR_CONFIG);
    REQUIRE(usvsim_scenario_set_controller(s, "pid") == USVSIM_OK);
    CHECK(usvsim_scenario_set_duration(s, -1.0) == USVSIM_ERR_CONFIG);

    usvsim_run* r = nullptr;
    REQUIRE(usvsim_run_scenario(s, &r) == USVSIM_OK);
    const char* outcome = nullptr;
    REQUIRE(usvsim_run_outcome(r, &outcome) == USVSIM_OK);
    CHECK(std::string(outcome) == "halt");
    int halted = 0;
    CHECK(usvsim_run_has_event(r, "HALT", &halted) == USVSIM_OK);
    CHECK(halted == 1);

    usvsim_metrics m{};
    REQUIRE(usvsim_run_metrics(r, &m) == USVSIM_OK);
    CHECK(m.samples > 0);
    CHECK(m.position_rmse >= m.position_rmsd);
    CHECK(m.end_time > 0.0);

    size_t n = 0;
    REQUIRE(usvsim_run_event_count(r, &n) == USVSIM_OK);
    REQUIRE(n > 0);
    double t = 0.0;
    const char *name = nullptr, *detail = nullptr;
    CHECK(usvsim_run_event(r, n, &t, &name, &detail) == USVSIM_ERR_RANGE);
    CHECK(usvsim_run_event(r, n - 1, &t, &name, &detail) == USVSIM_OK);

    char* summary = nullptr;
    REQUIRE(usvsim_run_summary_json(r, &summary) == USVSIM_OK);
    CHECK(std::string(summary).find("usvsim.summary/1") != std::string::npos);
    usvsim_string_free(summary);

    const fs::path dir = fs::temp_directory_path() / "usvsim_capi_run";
    fs::remove_all(dir);
    REQUIRE(usvsim_run_write(r, dir.c_str()) == USVSIM_OK);
    CHECK(fs::exists(dir / "run.jsonl"));
    CHECK(fs::exists(dir / "ticks.csv"));
    fs::remove_all(dir);

    usvsim_run_free(r);
    REQUIRE(usvsim_scenario_set_controller(s, "mrac") == USVSIM_OK);
    REQUIRE(usvsim_run_scenario(s, &r) == USVSIM_OK);
    REQUIRE(usvsim_run_outcome(r, &outcome) == USVSIM_OK);
    CHECK(std::string(outcome) == "complete");
    usvsim_run_free(r);
    usvsim_scenario_free(s);
}

TEST_CASE("offline certification through the C API")
{
    usvsim_scenario* s = nullptr;
    REQUIRE(usvsim_scenario_builtin("straight_drogue", &s) == USVSIM_OK);
    REQUIRE(usvsim_scenario_set_duration(s, 5.0) == USVSIM_OK);
    usvsim_run* r = nullptr;
    REQUIRE(usvsim_run_scenario(s, &r) == USVSIM_OK);
    const fs::path dir = fs::temp_directory_path() / "usvsim_capi_cert";
    fs::remove_all(dir);
    REQUIRE(usvsim_run_write(r, dir.c_str()) == USVSIM_OK);
    long calls = 0, unsafe = 0;
    CHECK(usvsim_certify_log((dir / "run.jsonl").c_str(), 10, 2.0, &calls, &unsafe) == USVSIM_OK);
    CHECK(calls > 0);
    CHECK(unsafe <= calls);
    CHECK(fs::exists(dir / "certify.jsonl"));
    CHECK(usvsim_certify_log((dir / "run.jsonl").c_str(), 0, 2.0, &calls, &unsafe) != USVSIM_OK);
    CHECK(usvsim_certify_log("/nonexistent/run.jsonl", 10, 2.0, &calls, &unsafe) == USVSIM_ERR_IO);
    fs::remove_all(dir);
    usvsim_run_free(r);
    usvsim_scenario_free(s);
}

TEST_CASE("gains")
{
    usvsim_gains g{};
    REQUIRE(usvsim_lqr_gains(&g) == USVSIM_OK);
    CHECK(std::abs(g.k_u_i - 8.6603) < 1e-3);
    CHECK(std::abs(g.k_u_p - 0.36556) < 1e-3);
    CHECK(std::abs(g.k_r_i - 100.0) < 1e-2);
    CHECK(g.lyapunov_residual_speed <= 1e-10);
    CHECK(g.lyapunov_residual_yaw <= 1e-10);
    CHECK(g.riccati_P_speed[1] == g.riccati_P_speed[2]);
    CHECK(usvsim_lqr_gains(nullptr) == USVSIM_ERR_NULL);
}
