#pragma once

#include "restore/bnb.hpp"
#include "restore/plan.hpp"

#include <string>

namespace restore {

/// Exit codes shared by the command-line front end; scripts depend on them.
///   0 solved/validated, 1 file or parse error, 2 infeasible,
///   3 limit reached with an incumbent, 4 validation violations.
struct RunConfig {
    std::string scenario_path;
    std::string out_plan = "plan.json";
    std::string out_report;     // empty: stdout only
    std::string search_log;     // empty: no log file
    int steps_override = 0;     // 0: scenario value
    bool deterministic = false;
    int threads = 1;
    double gap = 1e-6;
    double solver_tol = 1e-8;
    long node_limit = 2000000;
    double time_limit_sec = 0.0;
    VoltageDrop voltage_drop = VoltageDrop::full;
    RestartClock restart_clock = RestartClock::energization;
};

int cmd_solve(const RunConfig& cfg);
int cmd_validate(const std::string& plan_path, const std::string& scenario_path);
int cmd_plot(const std::string& plan_path, const std::string& svg_path,
             const std::string& csv_path);
int cmd_count_binaries(const std::string& scenario_path, const std::string& mode);

/// Gantt-style timing sketch of a plan; byte-deterministic for equal plans.
std::string plan_to_svg(const RestorationPlan& plan, const Scenario& s);
std::string plan_to_csv(const RestorationPlan& plan, const Scenario& s);

std::string solve_report(const MISOCPModel& m, const LexResult& lex,
                         const RestorationPlan& plan,
                         const ValidationReport& val);

} // namespace restore
