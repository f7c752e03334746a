// Command-line front end; talks to the simulator only through usvsim.h.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "usvsim/usvsim.h"

namespace {

int report(usvsim_status s, const char* what)
{
    if (s == USVSIM_OK) return 0;
    std::fprintf(stderr, "usvsim: %s: %s: %s\n", what, usvsim_status_string(s), usvsim_last_error());
    return 10 + static_cast<int>(s);
}

void print_metrics(const char* label, const usvsim_metrics& m)
{
    std::printf("%-28s pos %.3f ± %.3f m  speed %.3f ± %.3f m/s  heading %.2f ± %.2f deg  yaw rate %.4f ± %.4f rad/s\n",
                label, m.position_rmse, m.position_rmsd, m.speed_rmse, m.speed_rmsd, m.heading_rmse_deg,
                m.heading_rmsd_deg, m.yaw_rate_rmse, m.yaw_rate_rmsd);
}

struct RunArgs {
    std::string scenario, controller, out;
    long long seed = -1;
    double duration = 0.0;
    bool strict = false;
};

int cmd_run(const RunArgs& a)
{
    usvsim_scenario* sc = nullptr;
    // A path to an existing file wins over a builtin of the same name.
    const bool is_file = std::filesystem::is_regular_file(a.scenario);
    int rc = is_file ? report(usvsim_scenario_load(a.scenario.c_str(), &sc), "scenario")
                     : report(usvsim_scenario_builtin(a.scenario.c_str(), &sc), "scenario");
    if (rc) return rc;
    if (!a.controller.empty() && (rc = report(usvsim_scenario_set_controller(sc, a.controller.c_str()), "controller")))
        return usvsim_scenario_free(sc), rc;
    if (a.seed >= 0) usvsim_scenario_set_seed(sc, static_cast<uint64_t>(a.seed));
    if (a.duration > 0.0 && (rc = report(usvsim_scenario_set_duration(sc, a.duration), "duration")))
        return usvsim_scenario_free(sc), rc;

    usvsim_run* run = nullptr;
    rc = report(usvsim_run_scenario(sc, &run), "run");
    usvsim_scenario_free(sc);
    if (rc) return rc;
    const char* outcome = "";
    usvsim_run_outcome(run, &outcome);
    usvsim_metrics m{};
    usvsim_run_metrics(run, &m);
    std::printf("outcome %s at t=%.2f s\n", outcome, m.end_time);
    print_metrics("metrics", m);
    size_t n = 0;
    usvsim_run_event_count(run, &n);
    for (size_t i = 0; i < n; ++i) {
        double t = 0.0;
        const char *name = "", *detail = "";
        usvsim_run_event(run, i, &t, &name, &detail);
        std::printf("  %8.2f  %s %s\n", t, name, detail);
    }
    if (!a.out.empty()) {
        if ((rc = report(usvsim_run_write(run, a.out.c_str()), "write"))) return usvsim_run_free(run), rc;
        std::printf("wrote %s\n", a.out.c_str());
    }
    const bool halted = std::string(outcome) == "halt";
    usvsim_run_free(run);
    return a.strict && halted ? 2 : 0;
}

int cmd_suite(const std::string& out)
{
    usvsim_suite* s = nullptr;
    if (int rc = report(usvsim_suite_run(out.empty() ? nullptr : out.c_str(), &s), "suite")) return rc;
    size_t n = 0;
    usvsim_suite_count(s, &n);
    std::printf("%-16s %-7s %-9s %9s %9s %9s %9s %8s\n", "scenario", "ctrl", "outcome", "pos", "speed", "hdg[deg]",
                "yaw rate", "vs PID");
    for (size_t i = 0; i < n; ++i) {
        const char *sc = "", *ctrl = "", *outcome = "";
        usvsim_metrics m{};
        double imp = 0.0;
        usvsim_suite_entry(s, i, &sc, &ctrl, &outcome, &m, &imp);
        char pct[32] = "-";
        if (!std::isnan(imp)) std::snprintf(pct, sizeof pct, "%+.1f%%", imp);
        std::printf("%-16s %-7s %-9s %9.3f %9.3f %9.2f %9.4f %8s\n", sc, ctrl, outcome, m.position_rmse, m.speed_rmse,
                    m.heading_rmse_deg, m.yaw_rate_rmse, pct);
    }
    usvsim_suite_free(s);
    if (!out.empty()) std::printf("wrote %s/comparison.csv\n", out.c_str());
    return 0;
}

int cmd_certify(const std::string& log, int horizon, double gamma)
{
    long calls = 0, unsafe = 0;
    if (int rc = report(usvsim_certify_log(log.c_str(), horizon, gamma, &calls, &unsafe), "certify")) return rc;
    std::printf("%ld certify calls, %ld unsafe (horizon %d, gamma %g)\n", calls, unsafe, horizon, gamma);
    return 0;
}

void print_matrix(const char* name, const double* m, int n)
{
    for (int i = 0; i < n; ++i) {
        std::printf("  %-12s", i == 0 ? name : "");
        for (int j = 0; j < n; ++j) std::printf(" %14.6g", m[i * n + j]);
        std::printf("\n");
    }
}

int cmd_gains()
{
    usvsim_gains g{};
    if (int rc = report(usvsim_lqr_gains(&g), "gains")) return rc;
    std::printf("speed channel, state (e_uI, u)\n  K = [k_u_i %.5f, k_u_p %.5f]\n", g.k_u_i, g.k_u_p);
    print_matrix("P riccati", g.riccati_P_speed, 2);
    print_matrix("P lyapunov", g.lyapunov_P_speed, 2);
    std::printf("  lyapunov residual %.3e\n", g.lyapunov_residual_speed);
    std::printf("yaw channel, state (e_rI, v, r)\n  K = [k_r_i %.5f, k_v_p %.5f, k_r_p %.5f]\n", g.k_r_i, g.k_v_p,
                g.k_r_p);
    print_matrix("P riccati", g.riccati_P_yaw, 3);
    print_matrix("P lyapunov", g.lyapunov_P_yaw, 3);
    std::printf("  lyapunov residual %.3e\n", g.lyapunov_residual_yaw);
    return 0;
}

int cmd_scenarios(const std::string& dump)
{
    if (dump.empty()) {
        for (size_t i = 0; i < usvsim_builtin_count(); ++i) std::printf("%s\n", usvsim_builtin_name(i));
        return 0;
    }
    usvsim_scenario* sc = nullptr;
    if (int rc = report(usvsim_scenario_builtin(dump.c_str(), &sc), "scenario")) return rc;
    char* text = nullptr;
    const int rc = report(usvsim_scenario_to_json(sc, &text), "dump");
    if (!rc) std::printf("%s\n", text);
    usvsim_string_free(text);
    usvsim_scenario_free(sc);
    return rc;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Twin-thruster USV simulator: guidance, LQR-PI/MRAC control, MHE and reachability"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(usvsim_version()));

    RunArgs ra;
    auto* run = app.add_subcommand("run", "Run one scenario");
    run->add_option("-s,--scenario", ra.scenario, "Scenario JSON file or builtin name")->required();
    run->add_option("--controller", ra.controller, "pid, lqr-pi or mrac")
        ->check(CLI::IsMember({"pid", "lqr-pi", "mrac"}));
    run->add_option("--seed", ra.seed, "Override the scenario seed")->check(CLI::NonNegativeNumber);
    run->add_option("--duration", ra.duration, "Override the duration [s]")->check(CLI::PositiveNumber);
    run->add_option("-o,--out", ra.out, "Output directory for logs and tables");
    run->add_flag("--strict", ra.strict, "Exit 2 if the run ends in HALT");

    std::string suite_out;
    auto* suite = app.add_subcommand("suite", "Run the controller comparison suite");
    suite->add_option("-o,--out", suite_out, "Output directory");

    std::string log;
    int horizon = 20;
    double gamma = 3.0;
    auto* cert = app.add_subcommand("certify", "Re-run reachability certification on a logged run");
    cert->add_option("-l,--log", log, "run.jsonl of a run with the estimator enabled")->required()->check(CLI::ExistingFile);
    cert->add_option("--horizon", horizon, "Horizon in reachability steps")->check(CLI::PositiveNumber);
    cert->add_option("--gamma", gamma, "Concretization width in standard deviations")->check(CLI::PositiveNumber);

    auto* gains = app.add_subcommand("gains", "Print the synthesized LQR-PI gains");

    std::string dump;
    auto* scen = app.add_subcommand("scenarios", "List builtin scenarios or dump one as JSON");
    scen->add_option("--dump", dump, "Builtin scenario to print");

    CLI11_PARSE(app, argc, argv);

    if (*run) return cmd_run(ra);
    if (*suite) return cmd_suite(suite_out);
    if (*cert) return cmd_certify(log, horizon, gamma);
    if (*gains) return cmd_gains();
    if (*scen) return cmd_scenarios(dump);
    return 1;
}
