#pragma once

#include "restore/bnb.hpp"
#include "restore/pf.hpp"

#include <map>
#include <string>
#include <vector>

namespace restore {

struct SwitchAction {
    std::string device;
    bool close = false;
    int at_slot = -1; // load-breaker operations happen at slot boundaries
};

struct PlanStep {
    int index = 1;          // 1-based
    double start_min = 0.0; // deployment completion time of this step
    std::vector<SwitchAction> actions;
    std::vector<std::string> closed_switches; // physical state snapshot
};

struct PlanMetrics {
    double f_re_raw = 0.0, f_re_norm = 0.0;
    double f_sw_min = 0.0;
    double f_op_raw = 0.0;
    double soc_gap = 0.0;
    double min_voltage = 0.0, max_voltage = 0.0;
    double min_current_margin = 0.0;
    std::string min_voltage_at, max_voltage_at, min_margin_line;
    long nodes = 0;
    double wall_ms = 0.0;
};

struct ResourceDispatch {
    std::vector<double> p, q; // per slot
    std::vector<double> v;    // substations: slack voltage magnitude
    std::vector<double> e;    // dispatchable DGs: reservoir trajectory
};

struct RestorationPlan {
    std::vector<PlanStep> steps;
    std::vector<int> slot_step; // per slot, 1-based step index
    std::map<std::string, std::vector<int>> load_schedule; // off-outage buses
    std::map<std::string, ResourceDispatch> dispatch;      // by generator id
    PlanMetrics metrics;
};

/// Translate an integral incumbent into timed switching actions: per step,
/// the closed-switch set is diffed against the previous state, opens ordered
/// before closes so no transient loop appears.
RestorationPlan extract_plan(const Incumbent& inc, const MISOCPModel& m);

std::string plan_to_json(const RestorationPlan& plan);
RestorationPlan plan_from_json(const std::string& text, const Scenario& s);

struct ValidationReport {
    bool radial_ok = true;
    bool pf_converged = true;
    double max_mismatch = 0.0;
    std::vector<std::string> failures; // radiality, audit and consistency errors
    LimitReport limits;
    PFResult pf;
};

/// Replay the plan against the exact branch-flow equations slot by slot and
/// audit limits, pickup monotonicity, DG start-up delays and reservoirs.
ValidationReport validate_plan(const RestorationPlan& plan, const Scenario& s);

} // namespace restore
