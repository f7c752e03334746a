#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "usv/simulation.hpp"

namespace usv {

inline constexpr const char* kSummarySchema = "usvsim.summary/1";
inline constexpr const char* kCertifySchema = "usvsim.certify/1";
inline constexpr const char* kSuiteSchema = "usvsim.suite/1";

nlohmann::json policy_to_json(const FrozenTracklinePolicy& p);
FrozenTracklinePolicy policy_from_json(const nlohmann::json& j);

nlohmann::json summary_json(const RunLog& log);

// Writes run.jsonl (header, ticks and events in time order, footer),
// summary.json and the flat tables ticks.csv, events.csv, estimates.csv and
// rsoa.csv into dir, creating it if needed.
void write_run(const RunLog& log, const std::string& dir);

struct SuiteRun {
    std::string scenario;
    ControllerKind controller = ControllerKind::Pid;
};

// LegRun x4 with all controllers, the two straight certify runs with the
// certifiable controllers, UNREP and canal with all controllers.
std::vector<SuiteRun> suite_plan();

struct SuiteEntry {
    SuiteRun run;
    std::string outcome;
    double end_time = 0.0;
    MetricsSummary metrics;
    bool projection_ok = true;
    double max_station_error = 0.0;
    std::vector<std::string> events;
    std::optional<double> position_improvement_pct; // relative to PID on the same scenario
};

struct SuiteResult {
    std::vector<SuiteEntry> entries;
    const SuiteEntry* find(const std::string& scenario, ControllerKind c) const;
};

using SuiteObserver = std::function<void(const RunLog&, const SuiteEntry&)>;

// Runs the plan, writes <out>/<scenario>/<controller>/ per run plus
// comparison.csv and suite.json in <out>. An empty out writes nothing.
SuiteResult run_suite(const std::string& out, const std::vector<SuiteRun>& plan = suite_plan(),
                      const SuiteObserver& observe = {});

struct OfflineCertifyStats {
    long calls = 0;
    long unsafe = 0;
    std::string output;
};

// Re-runs certification over the estimator records of a logged run with a
// new horizon and gamma. Results go to certify.jsonl next to the log.
OfflineCertifyStats certify_log(const std::string& run_jsonl, int horizon, double gamma);

} // namespace usv
