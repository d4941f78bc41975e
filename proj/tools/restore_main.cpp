#include "restore/cli.hpp"

#include <CLI11.hpp>

int main(int argc, char** argv) {
    CLI::App app{"offline service-restoration planner for radial distribution networks"};
    app.require_subcommand(1);

    restore::RunConfig cfg;
    std::string voltage_drop = "full", restart_clock = "energization";

    auto* solve = app.add_subcommand("solve", "compute a multi-step restoration plan");
    solve->add_option("--scenario", cfg.scenario_path, "scenario JSON file")
        ->required();
    solve->add_option("--steps", cfg.steps_override,
                      "override the scenario step budget");
    solve->add_option("--out", cfg.out_plan, "plan output path");
    solve->add_option("--report", cfg.out_report, "also write the report here");
    solve->add_option("--search-log", cfg.search_log,
                      "write one line per branch-and-bound node");
    solve->add_flag("--deterministic", cfg.deterministic,
                    "serial search with reproducible node counts");
    solve->add_option("--threads", cfg.threads, "parallel node workers");
    solve->add_option("--gap", cfg.gap, "absolute optimality gap");
    solve->add_option("--node-limit", cfg.node_limit, "branch-and-bound node cap");
    solve->add_option("--time-limit", cfg.time_limit_sec, "wall-time cap, seconds");
    solve->add_option("--voltage-drop", voltage_drop, "full | as_printed");
    solve->add_option("--restart-clock", restart_clock, "energization | step");

    std::string plan_path, scenario_path, svg_path, csv_path, mode = "both";
    auto* validate = app.add_subcommand("validate",
                                        "replay a plan with exact power flow");
    validate->add_option("--plan", plan_path, "plan JSON file")->required();
    validate->add_option("--scenario", scenario_path, "scenario JSON file")
        ->required();

    auto* plot = app.add_subcommand("plot", "emit a timing sketch of a plan");
    plot->add_option("--plan", plan_path, "plan JSON file")->required();
    plot->add_option("--svg", svg_path, "SVG output path");
    plot->add_option("--csv", csv_path, "CSV output path");

    auto* count = app.add_subcommand("count-binaries",
                                     "binary-variable accounting per formulation");
    count->add_option("--scenario", scenario_path, "scenario JSON file")
        ->required();
    count->add_option("--mode", mode, "multi | dynamic | both");

    CLI11_PARSE(app, argc, argv);

    if (solve->parsed()) {
        if (voltage_drop == "as_printed")
            cfg.voltage_drop = restore::VoltageDrop::as_printed;
        else if (voltage_drop != "full") {
            std::fprintf(stderr, "error: unknown --voltage-drop '%s'\n",
                         voltage_drop.c_str());
            return 1;
        }
        if (restart_clock == "step")
            cfg.restart_clock = restore::RestartClock::step;
        else if (restart_clock != "energization") {
            std::fprintf(stderr, "error: unknown --restart-clock '%s'\n",
                         restart_clock.c_str());
            return 1;
        }
        return restore::cmd_solve(cfg);
    }
    if (validate->parsed()) return restore::cmd_validate(plan_path, scenario_path);
    if (plot->parsed()) return restore::cmd_plot(plan_path, svg_path, csv_path);
    if (count->parsed()) return restore::cmd_count_binaries(scenario_path, mode);
    return 1;
}
