#include "restore/cli.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace restore {

namespace {

std::string fnum(double v, int prec = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

} // namespace

std::string solve_report(const MISOCPModel& m, const LexResult& lex,
                         const RestorationPlan& plan,
                         const ValidationReport& val) {
    std::ostringstream os;
    const auto& inc = lex.incumbent;
    os << "status: " << to_string(inc.status) << "\n";
    auto multi = binary_breakdown(m, CountMode::multi_step);
    auto dyn = binary_breakdown(m, CountMode::dynamic);
    os << "binaries: switching " << multi.switching << " (dynamic formulation "
       << dyn.switching << "), slot-step " << multi.time_mapping << ", pickup "
       << multi.load_pickup << ", total " << multi.total() << "\n";
    os << "steps:\n";
    for (const auto& st : plan.steps) {
        os << "  step " << st.index << " @ " << fnum(st.start_min, 1) << " min |";
        if (st.actions.empty()) os << " (no actions)";
        for (const auto& a : st.actions) {
            os << " " << (a.close ? "close " : "open ") << a.device;
            if (a.at_slot >= 0) os << "(slot " << a.at_slot << ")";
            os << ";";
        }
        os << "\n";
    }
    os << "F_re (unserved weighted energy, p.u.h): " << fnum(plan.metrics.f_re_raw)
       << " (normalized " << fnum(plan.metrics.f_re_norm) << ")\n";
    os << "F_sw (switching time, min): " << fnum(plan.metrics.f_sw_min) << "\n";
    os << "F_op (weighted losses, p.u.): " << fnum(plan.metrics.f_op_raw) << "\n";
    os << "min voltage (p.u.): " << fnum(plan.metrics.min_voltage, 4) << " at "
       << plan.metrics.min_voltage_at << "\n";
    os << "max voltage (p.u.): " << fnum(plan.metrics.max_voltage, 4) << " at "
       << plan.metrics.max_voltage_at << "\n";
    os << "min current margin (p.u.): " << fnum(plan.metrics.min_current_margin, 4)
       << " on " << plan.metrics.min_margin_line << "\n";
    os << "soc gap: " << fnum(plan.metrics.soc_gap, 8)
       << (plan.metrics.soc_gap > 1e-5 ? "  [FLAG: loose relaxation]" : "") << "\n";
    os << "validation: "
       << (val.failures.empty() ? "PASS" : std::to_string(val.failures.size()) +
                                               " failure(s)")
       << ", max mismatch " << fnum(val.max_mismatch, 10) << "\n";
    for (const auto& f : val.failures) os << "  ! " << f << "\n";
    os << "nodes: " << lex.total_nodes << "\n";
    return os.str();
}

int cmd_solve(const RunConfig& cfg) {
    Scenario s;
    try {
        s = parse_scenario(read_file(cfg.scenario_path));
        auto diags = validate_scenario(s);
        if (!diags.empty()) {
            for (const auto& d : diags)
                std::fprintf(stderr, "error: %s\n", d.message.c_str());
            return 1;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }

    ModelOptions mo;
    mo.steps_override = cfg.steps_override;
    mo.voltage_drop = cfg.voltage_drop;
    mo.restart_clock = cfg.restart_clock;
    MISOCPModel m;
    try {
        ZoneGraph zg = partition_zones(s);
        OffOutageArea area;
        if (!s.faulted_elements.empty()) area = locate_off_outage(s, zg);
        m = assemble(s, zg, area, mo);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }

    LexConfig lc;
    lc.bnb.gap = cfg.gap;
    lc.bnb.solver_tol = cfg.solver_tol;
    lc.bnb.node_limit = cfg.node_limit;
    lc.bnb.time_limit_sec = cfg.time_limit_sec;
    lc.bnb.deterministic = cfg.deterministic || cfg.threads <= 1;
    lc.bnb.threads = cfg.threads;
    lc.bnb.keep_log = !cfg.search_log.empty();
    LexResult lex = lexicographic_solve(m, lc);

    if (!cfg.search_log.empty()) {
        std::ostringstream os;
        for (const auto& n : lex.incumbent.log)
            os << n.seq << " " << n.depth << " " << fnum(n.bound, 9) << " "
               << n.status << "\n";
        write_file(cfg.search_log, os.str());
    }

    if (lex.incumbent.status == MipStatus::infeasible) {
        std::fprintf(stderr, "infeasible: no restoration plan exists\n");
        return 2;
    }
    if (lex.incumbent.x.empty()) {
        std::fprintf(stderr,
                     "limit reached before any feasible plan was found\n");
        return 3;
    }

    RestorationPlan plan = extract_plan(lex.incumbent, m);
    ValidationReport val = validate_plan(plan, s);
    plan.metrics.min_voltage = val.limits.min_voltage;
    plan.metrics.min_voltage_at = val.limits.min_voltage_at;
    plan.metrics.max_voltage = val.limits.max_voltage;
    plan.metrics.max_voltage_at = val.limits.max_voltage_at;
    plan.metrics.min_current_margin = val.limits.min_current_margin;
    plan.metrics.min_margin_line = val.limits.min_margin_line;

    write_file(cfg.out_plan, plan_to_json(plan));
    std::string report = solve_report(m, lex, plan, val);
    std::fputs(report.c_str(), stdout);
    if (!cfg.out_report.empty()) write_file(cfg.out_report, report);
    std::fprintf(stderr, "wall: %.1f ms\n", lex.incumbent.wall_ms);

    if (lex.incumbent.status == MipStatus::limit) return 3;
    return 0;
}

int cmd_validate(const std::string& plan_path, const std::string& scenario_path) {
    Scenario s;
    RestorationPlan plan;
    try {
        s = parse_scenario(read_file(scenario_path));
        plan = plan_from_json(read_file(plan_path), s);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    ValidationReport rep;
    try {
        rep = validate_plan(plan, s);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    std::printf("power flow: %s, max mismatch %.3e\n",
                rep.pf_converged ? "converged" : "FAILED", rep.max_mismatch);
    // Per-slot margins.
    for (size_t t = 0; t < rep.pf.slices.size(); ++t) {
        const PFSlice& sl = rep.pf.slices[t];
        double vmin = kInf, vmax = 0.0, margin = kInf;
        for (size_t b = 0; b < sl.v_mag.size(); ++b) {
            if (sl.v_mag[b] <= 0) continue;
            vmin = std::min(vmin, sl.v_mag[b]);
            vmax = std::max(vmax, sl.v_mag[b]);
        }
        for (size_t li = 0; li < sl.i_mag.size(); ++li)
            if (sl.closed[li])
                margin = std::min(margin, s.lines[li].ampacity - sl.i_mag[li]);
        std::printf("slot %zu: voltage [%.4f, %.4f], current margin %.4f\n", t,
                    std::isfinite(vmin) ? vmin : 0.0, vmax,
                    std::isfinite(margin) ? margin : 0.0);
    }
    if (rep.limits.min_voltage_slot >= 0) {
        std::printf("min voltage %.4f at %s (slot %d)\n", rep.limits.min_voltage,
                    rep.limits.min_voltage_at.c_str(), rep.limits.min_voltage_slot);
        std::printf("max voltage %.4f at %s (slot %d)\n", rep.limits.max_voltage,
                    rep.limits.max_voltage_at.c_str(), rep.limits.max_voltage_slot);
        std::printf("min current margin %.4f on %s (slot %d)\n",
                    rep.limits.min_current_margin, rep.limits.min_margin_line.c_str(),
                    rep.limits.min_margin_slot);
    }
    if (rep.failures.empty()) {
        std::printf("validation: PASS\n");
        return 0;
    }
    for (const auto& f : rep.failures) std::printf("violation: %s\n", f.c_str());
    return 4;
}

std::string plan_to_svg(const RestorationPlan& plan, const Scenario& s) {
    const double horizon = s.horizon_minutes();
    const double width = 720.0, left = 90.0, row_h = 28.0;
    const int rows = static_cast<int>(plan.steps.size());
    const double height = 60.0 + rows * row_h + 40.0;
    auto xpos = [&](double minute) {
        return left + (horizon > 0 ? minute / horizon : 0.0) * (width - left - 20.0);
    };
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
       << "\" height=\"" << height << "\">\n";
    os << "<line x1=\"" << left << "\" y1=\"" << 30 + rows * row_h << "\" x2=\""
       << width - 20 << "\" y2=\"" << 30 + rows * row_h
       << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= s.horizon_slots; ++t) {
        double x = xpos(t * s.slot_minutes);
        os << "<line x1=\"" << fnum(x, 1) << "\" y1=\"" << 30 + rows * row_h
           << "\" x2=\"" << fnum(x, 1) << "\" y2=\"" << 34 + rows * row_h
           << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << fnum(x, 1) << "\" y=\"" << 48 + rows * row_h
           << "\" font-size=\"10\" text-anchor=\"middle\">" << fnum(t * s.slot_minutes, 0)
           << "</text>\n";
    }
    for (int r = 0; r < rows; ++r) {
        const auto& st = plan.steps[r];
        double y = 30 + r * row_h;
        double from = st.start_min;
        double to = horizon;
        for (int r2 = r + 1; r2 < rows; ++r2)
            if (plan.steps[r2].start_min > from) {
                to = plan.steps[r2].start_min;
                break;
            }
        os << "<text x=\"4\" y=\"" << fnum(y + 12, 1)
           << "\" font-size=\"11\">step " << st.index << "</text>\n";
        os << "<rect x=\"" << fnum(xpos(from), 1) << "\" y=\"" << fnum(y, 1)
           << "\" width=\"" << fnum(std::max(2.0, xpos(to) - xpos(from)), 1)
           << "\" height=\"16\" fill=\"#7aa6c2\"/>\n";
    }
    // Load pickups and DG starts as markers on the axis.
    for (const auto& [bus, sched] : plan.load_schedule) {
        for (size_t t = 0; t < sched.size(); ++t) {
            bool rise = sched[t] == 1 && (t == 0 || sched[t - 1] == 0);
            if (!rise) continue;
            double x = xpos(t * s.slot_minutes);
            os << "<circle cx=\"" << fnum(x, 1) << "\" cy=\"" << 24 + rows * row_h
               << "\" r=\"3\" fill=\"green\"/>\n";
            os << "<text x=\"" << fnum(x + 4, 1) << "\" y=\"" << 26 + rows * row_h
               << "\" font-size=\"9\">" << bus << "</text>\n";
        }
    }
    for (const auto& [gid, d] : plan.dispatch) {
        if (!d.e.empty()) {
            for (size_t t = 0; t < d.p.size(); ++t) {
                if (std::abs(d.p[t]) > 1e-7 && (t == 0 || std::abs(d.p[t - 1]) <= 1e-7)) {
                    double x = xpos(t * s.slot_minutes);
                    os << "<polygon points=\"" << fnum(x, 1) << ","
                       << 14 + rows * row_h << " " << fnum(x - 4, 1) << ","
                       << 22 + rows * row_h << " " << fnum(x + 4, 1) << ","
                       << 22 + rows * row_h << "\" fill=\"orange\"/>\n";
                    os << "<text x=\"" << fnum(x + 5, 1) << "\" y=\""
                       << 20 + rows * row_h << "\" font-size=\"9\">" << gid
                       << "</text>\n";
                    break;
                }
            }
        }
    }
    os << "</svg>\n";
    return os.str();
}

std::string plan_to_csv(const RestorationPlan& plan, const Scenario& s) {
    std::ostringstream os;
    os << "event,step,device,time_min\n";
    for (const auto& st : plan.steps)
        for (const auto& a : st.actions) {
            double tmin = a.at_slot >= 0 ? a.at_slot * s.slot_minutes : st.start_min;
            os << (a.close ? "close" : "open") << "," << st.index << ","
               << a.device << "," << fnum(tmin, 2) << "\n";
        }
    for (const auto& [bus, sched] : plan.load_schedule)
        for (size_t t = 0; t < sched.size(); ++t)
            if (sched[t] == 1 && (t == 0 || sched[t - 1] == 0))
                os << "pickup,," << bus << "," << fnum(t * s.slot_minutes, 2) << "\n";
    for (const auto& [gid, d] : plan.dispatch) {
        if (d.e.empty()) continue;
        for (size_t t = 0; t < d.p.size(); ++t)
            if (std::abs(d.p[t]) > 1e-7 && (t == 0 || std::abs(d.p[t - 1]) <= 1e-7)) {
                os << "dg-start,," << gid << "," << fnum(t * s.slot_minutes, 2)
                   << "\n";
                break;
            }
    }
    return os.str();
}

int cmd_plot(const std::string& plan_path, const std::string& svg_path,
             const std::string& csv_path) {
    // The sketch only needs timing fields, so the scenario is not required;
    // horizon information is recovered from the plan itself.
    RestorationPlan plan;
    Scenario shell;
    try {
        std::string text = read_file(plan_path);
        // slot count from slot_step, slot minutes unknown: assume 15 if absent.
        nlohmann::ordered_json j = nlohmann::ordered_json::parse(text);
        shell.horizon_slots = j.contains("slot_step")
                                  ? static_cast<int>(j["slot_step"].size())
                                  : 1;
        shell.slot_minutes = 15.0;
        plan = plan_from_json(text, shell);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    if (!svg_path.empty()) write_file(svg_path, plan_to_svg(plan, shell));
    if (!csv_path.empty()) write_file(csv_path, plan_to_csv(plan, shell));
    return 0;
}

int cmd_count_binaries(const std::string& scenario_path, const std::string& mode) {
    Scenario s;
    MISOCPModel m;
    try {
        s = parse_scenario(read_file(scenario_path));
        m = build_model(s);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    auto print_mode = [&](CountMode cm, const char* name) {
        auto b = binary_breakdown(m, cm);
        std::printf("%s: switching %d, slot-step %d, pickup %d, total %d\n", name,
                    b.switching, b.time_mapping, b.load_pickup, b.total());
    };
    if (mode == "multi" || mode == "both")
        print_mode(CountMode::multi_step, "multi-step");
    if (mode == "dynamic" || mode == "both")
        print_mode(CountMode::dynamic, "dynamic");
    return 0;
}

} // namespace restore
