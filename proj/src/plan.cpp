#include "restore/plan.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace restore {

using ordered_json = nlohmann::ordered_json;

std::string edge_device_name(const Scenario& s, const RestorationGraph& rg,
                             size_t e) {
    int li = rg.edges[e].line;
    return li >= 0 ? s.lines[li].id : "edge" + std::to_string(e);
}

namespace {

bool round_bit(double v) { return v >= 0.5; }

// Physical switch states of one step: ties closed when energized,
// sectionalizers closed unless operated open.
std::vector<bool> step_states(const Incumbent& inc, const MISOCPModel& m,
                              int step) {
    std::vector<bool> closed(m.rg.edges.size(), false);
    for (size_t e = 0; e < m.rg.edges.size(); ++e) {
        const auto& ed = m.rg.edges[e];
        double y = inc.x[m.idx.col(Var::switch_on, static_cast<int>(e), step)];
        if (ed.tie()) {
            closed[e] = round_bit(y);
        } else {
            double op = inc.x[m.idx.col(Var::sec_open, static_cast<int>(e), step)];
            closed[e] = !round_bit(op);
        }
    }
    return closed;
}

std::string edge_device(const MISOCPModel& m, size_t e) {
    return edge_device_name(m.scenario, m.rg, e);
}

} // namespace

RestorationPlan extract_plan(const Incumbent& inc, const MISOCPModel& m) {
    RestorationPlan plan;
    const Scenario& s = m.scenario;
    const int S = m.steps, T = m.slots;

    plan.slot_step.resize(T, 1);
    for (int t = 0; t < T; ++t)
        for (int st = 0; st < S; ++st)
            if (round_bit(inc.x[m.idx.col(Var::step_at, t, st)]))
                plan.slot_step[t] = st + 1;

    // Zone energization per slot (per the active step), used to time the
    // load-breaker operations.
    auto zone_on_at = [&](int bus, int t) {
        int st = plan.slot_step[t] - 1;
        int k = m.zone_pos[m.zg.zone_of_bus[bus]];
        if (k < 0) return false;
        return round_bit(inc.x[m.idx.col(Var::zone_on, k, st)]);
    };

    // Post-fault initial state: ties open, sectionalizers closed.
    std::vector<bool> prev(m.rg.edges.size());
    for (size_t e = 0; e < m.rg.edges.size(); ++e)
        prev[e] = !m.rg.edges[e].tie();

    double t_clock = 0.0;
    for (int st = 0; st < S; ++st) {
        PlanStep step;
        step.index = st + 1;
        std::vector<bool> now = step_states(inc, m, st);
        std::vector<SwitchAction> opens, closes;
        for (size_t e = 0; e < m.rg.edges.size(); ++e) {
            if (prev[e] == now[e]) continue;
            SwitchAction a{edge_device(m, e), now[e], -1};
            (now[e] ? closes : opens).push_back(std::move(a));
        }
        for (auto& a : opens) step.actions.push_back(std::move(a));
        for (auto& a : closes) step.actions.push_back(std::move(a));
        for (size_t e = 0; e < m.rg.edges.size(); ++e)
            if (now[e]) step.closed_switches.push_back(edge_device(m, e));

        // Deployment time per the model's switching-time accounting. The
        // operation and orientation indicators are continuous but integral
        // in practice; fractional values beyond tolerance get a warning.
        double ops = 0.0;
        for (size_t e = 0; e < m.rg.edges.size(); ++e) {
            const auto& ed = m.rg.edges[e];
            for (int d = 0; d < 2; ++d) {
                double z = inc.x[m.idx.col(Var::orient,
                                           2 * static_cast<int>(e) + d, st)];
                if (std::min(std::abs(z), std::abs(z - 1.0)) > 1e-5)
                    log_info("orientation of %s lands at %.6f in step %d",
                             edge_device(m, e).c_str(), z, st + 1);
            }
            if (ed.tie()) {
                ops += ed.op_time_min *
                       round_bit(inc.x[m.idx.col(
                           Var::switch_on, static_cast<int>(e), st)]);
            } else {
                double op = inc.x[m.idx.col(Var::sec_open, static_cast<int>(e), st)];
                if (std::min(std::abs(op), std::abs(op - 1.0)) > 1e-5)
                    log_info("sectionalizer %s lands at %.6f in step %d",
                             edge_device(m, e).c_str(), op, st + 1);
                ops += ed.op_time_min * round_bit(op);
            }
        }
        t_clock += ops;
        step.start_min = t_clock;
        prev = now;
        plan.steps.push_back(std::move(step));
    }

    // Load schedule and breaker actions.
    for (size_t n = 0; n < m.area.buses.size(); ++n) {
        int bus = m.area.buses[n];
        std::vector<int> sched(T, 0);
        for (int t = 0; t < T; ++t)
            sched[t] =
                round_bit(inc.x[m.idx.col(Var::served, static_cast<int>(n), t)]);
        plan.load_schedule[s.buses[bus].id] = sched;
        if (!s.buses[bus].has_load_breaker) continue;
        bool breaker_closed = true; // normal state
        for (int t = 0; t < T; ++t) {
            bool want_closed = !(zone_on_at(bus, t) && sched[t] == 0);
            if (want_closed != breaker_closed) {
                SwitchAction a{"LB:" + s.buses[bus].id, want_closed, t};
                plan.steps[plan.slot_step[t] - 1].actions.push_back(std::move(a));
                breaker_closed = want_closed;
            }
        }
    }

    for (size_t gp = 0; gp < m.resources.size(); ++gp) {
        const Generator& g = s.generators[m.resources[gp]];
        ResourceDispatch d;
        for (int t = 0; t < T; ++t) {
            d.p.push_back(inc.x[m.idx.col(Var::inj_p, static_cast<int>(gp), t)]);
            d.q.push_back(inc.x[m.idx.col(Var::inj_q, static_cast<int>(gp), t)]);
        }
        if (g.kind == GeneratorKind::substation) {
            int bus = s.bus_index(g.node);
            for (int t = 0; t < T; ++t)
                d.v.push_back(
                    std::sqrt(std::max(0.0, inc.x[m.idx.col(Var::volt_sq, bus, t)])));
        }
        for (size_t dn = 0; dn < m.dg_list.size(); ++dn)
            if (m.dg_list[dn] == m.resources[gp])
                for (int t = 0; t < T; ++t)
                    d.e.push_back(inc.x[m.idx.col(
                        Var::reservoir, static_cast<int>(dn), t)]);
        plan.dispatch[g.id] = std::move(d);
    }

    plan.metrics.f_re_raw = m.tiers[0].raw(inc.x);
    plan.metrics.f_re_norm = m.tiers[0].normalized(inc.x);
    plan.metrics.f_sw_min = m.tiers[1].raw(inc.x);
    plan.metrics.f_op_raw = m.tiers[2].raw(inc.x);
    plan.metrics.soc_gap = soc_gap(m, inc.x).gap;
    plan.metrics.nodes = inc.nodes;
    plan.metrics.wall_ms = inc.wall_ms;
    return plan;
}

std::string plan_to_json(const RestorationPlan& plan) {
    ordered_json j;
    j["steps"] = ordered_json::array();
    for (const auto& st : plan.steps) {
        ordered_json js;
        js["index"] = st.index;
        js["start_time_min"] = st.start_min;
        js["actions"] = ordered_json::array();
        for (const auto& a : st.actions) {
            ordered_json ja;
            ja["device"] = a.device;
            ja["op"] = a.close ? "close" : "open";
            if (a.at_slot >= 0) ja["at_slot"] = a.at_slot;
            js["actions"].push_back(ja);
        }
        js["closed_switches"] = st.closed_switches;
        j["steps"].push_back(js);
    }
    j["slot_step"] = plan.slot_step;
    j["load_schedule"] = ordered_json::object();
    for (const auto& [bus, sched] : plan.load_schedule) j["load_schedule"][bus] = sched;
    j["dg_dispatch"] = ordered_json::object();
    for (const auto& [id, d] : plan.dispatch) {
        ordered_json jd;
        jd["p"] = d.p;
        jd["q"] = d.q;
        if (!d.v.empty()) jd["v"] = d.v;
        if (!d.e.empty()) jd["e"] = d.e;
        j["dg_dispatch"][id] = jd;
    }
    ordered_json jm;
    jm["f_re"] = plan.metrics.f_re_raw;
    jm["f_re_normalized"] = plan.metrics.f_re_norm;
    jm["f_sw_min"] = plan.metrics.f_sw_min;
    jm["f_op"] = plan.metrics.f_op_raw;
    jm["soc_gap"] = plan.metrics.soc_gap;
    jm["min_voltage"] = plan.metrics.min_voltage;
    jm["min_voltage_at"] = plan.metrics.min_voltage_at;
    jm["max_voltage"] = plan.metrics.max_voltage;
    jm["max_voltage_at"] = plan.metrics.max_voltage_at;
    jm["min_current_margin"] = plan.metrics.min_current_margin;
    jm["min_margin_line"] = plan.metrics.min_margin_line;
    jm["nodes"] = plan.metrics.nodes;
    // Wall time stays out of the file: plans are byte-reproducible.
    j["metrics"] = jm;
    return j.dump(2) + "\n";
}

RestorationPlan plan_from_json(const std::string& text, const Scenario& s) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw ParseError(std::string("plan: invalid JSON: ") + e.what());
    }
    RestorationPlan plan;
    if (!j.contains("steps") || !j.contains("slot_step"))
        throw ParseError("plan: missing 'steps' or 'slot_step'");
    for (const auto& js : j["steps"]) {
        PlanStep st;
        st.index = js.at("index").get<int>();
        st.start_min = js.at("start_time_min").get<double>();
        if (js.contains("actions"))
            for (const auto& ja : js["actions"]) {
                SwitchAction a;
                a.device = ja.at("device").get<std::string>();
                a.close = ja.at("op").get<std::string>() == "close";
                if (ja.contains("at_slot")) a.at_slot = ja["at_slot"].get<int>();
                st.actions.push_back(std::move(a));
            }
        if (js.contains("closed_switches"))
            st.closed_switches =
                js["closed_switches"].get<std::vector<std::string>>();
        plan.steps.push_back(std::move(st));
    }
    plan.slot_step = j["slot_step"].get<std::vector<int>>();
    if (static_cast<int>(plan.slot_step.size()) != s.horizon_slots)
        throw ParseError("plan: slot_step length does not match the horizon");
    for (int st : plan.slot_step)
        if (st < 1 || st > static_cast<int>(plan.steps.size()))
            throw ParseError("plan: slot_step references an unknown step");
    if (j.contains("load_schedule"))
        for (auto it = j["load_schedule"].begin(); it != j["load_schedule"].end();
             ++it)
            plan.load_schedule[it.key()] = it.value().get<std::vector<int>>();
    if (j.contains("dg_dispatch"))
        for (auto it = j["dg_dispatch"].begin(); it != j["dg_dispatch"].end();
             ++it) {
            ResourceDispatch d;
            d.p = it.value().at("p").get<std::vector<double>>();
            d.q = it.value().at("q").get<std::vector<double>>();
            if (it.value().contains("v"))
                d.v = it.value()["v"].get<std::vector<double>>();
            if (it.value().contains("e"))
                d.e = it.value()["e"].get<std::vector<double>>();
            plan.dispatch[it.key()] = std::move(d);
        }
    if (j.contains("metrics")) {
        const auto& jm = j["metrics"];
        auto num = [&](const char* key, double& out) {
            if (jm.contains(key)) out = jm[key].get<double>();
        };
        auto str = [&](const char* key, std::string& out) {
            if (jm.contains(key)) out = jm[key].get<std::string>();
        };
        num("f_re", plan.metrics.f_re_raw);
        num("f_re_normalized", plan.metrics.f_re_norm);
        num("f_sw_min", plan.metrics.f_sw_min);
        num("f_op", plan.metrics.f_op_raw);
        num("soc_gap", plan.metrics.soc_gap);
        num("min_voltage", plan.metrics.min_voltage);
        num("max_voltage", plan.metrics.max_voltage);
        num("min_current_margin", plan.metrics.min_current_margin);
        str("min_voltage_at", plan.metrics.min_voltage_at);
        str("max_voltage_at", plan.metrics.max_voltage_at);
        str("min_margin_line", plan.metrics.min_margin_line);
        if (jm.contains("nodes")) plan.metrics.nodes = jm["nodes"].get<long>();
    }
    return plan;
}

ValidationReport validate_plan(const RestorationPlan& plan, const Scenario& s) {
    ValidationReport rep;
    ZoneGraph zg = partition_zones(s);
    OffOutageArea area;
    if (!s.faulted_elements.empty()) area = locate_off_outage(s, zg);
    RestorationGraph rg = restoration_graph(s, zg, area, nullptr);

    // Map closed-switch names onto graph edges per step; verify radiality.
    std::vector<std::set<int>> closed_per_step;
    std::vector<std::set<int>> energized_per_step;
    for (const auto& st : plan.steps) {
        std::set<int> closed;
        for (const auto& name : st.closed_switches) {
            bool found = false;
            for (size_t e = 0; e < rg.edges.size(); ++e)
                if (edge_device_name(s, rg, e) == name) {
                    closed.insert(static_cast<int>(e));
                    found = true;
                }
            if (!found)
                rep.failures.push_back("step " + std::to_string(st.index) +
                                       ": unknown switch '" + name + "'");
        }
        // The closed set mixes live edges with sectionalizers that simply
        // were never operated inside a dark pocket; only the part connected
        // to a source carries power and must be radial and island-free.
        std::set<int> closed_live, energized;
        {
            const int src = rg.num_zones;
            std::vector<int> parent(rg.num_zones + 1);
            for (int i = 0; i <= rg.num_zones; ++i) parent[i] = i;
            auto find = [&](int a) {
                while (parent[a] != a) a = parent[a] = parent[parent[a]];
                return a;
            };
            for (int e : closed) {
                const auto& ed = rg.edges[e];
                int a = find(ed.a), b = find(ed.source_edge() ? src : ed.b);
                if (a != b) parent[b] = a;
            }
            int root = find(src);
            for (int e : closed) {
                const auto& ed = rg.edges[e];
                if (find(ed.a) != root) continue;
                closed_live.insert(e);
                energized.insert(ed.a);
                if (!ed.source_edge()) energized.insert(ed.b);
            }
        }
        if (!is_radial_no_island(rg, closed_live, energized)) {
            rep.radial_ok = false;
            rep.failures.push_back("non-radial configuration at step " +
                                   std::to_string(st.index));
        }
        closed_per_step.push_back(std::move(closed));
        energized_per_step.push_back(std::move(energized));
    }
    if (!rep.radial_ok) return rep;

    // Lines removed by fault isolation stay out of every slot topology.
    std::vector<bool> removed(s.lines.size(), false);
    for (const auto& el : s.faulted_elements) {
        int li = s.line_index(el);
        if (li >= 0) removed[li] = true;
    }
    std::vector<bool> bus_quarantined(s.buses.size(), false);
    for (int z : area.quarantined_zones)
        for (int b : zg.zones[z].buses) bus_quarantined[b] = true;
    for (size_t li = 0; li < s.lines.size(); ++li)
        if (bus_quarantined[s.bus_index(s.lines[li].from)] ||
            bus_quarantined[s.bus_index(s.lines[li].to)])
            removed[li] = true;

    std::vector<int> line_to_edge(s.lines.size(), -1);
    for (size_t e = 0; e < rg.edges.size(); ++e)
        if (rg.edges[e].line >= 0) line_to_edge[rg.edges[e].line] = static_cast<int>(e);

    std::vector<int> area_pos(s.buses.size(), -1);
    for (size_t n = 0; n < area.buses.size(); ++n) area_pos[area.buses[n]] = 1;

    // Per-slot exact power flow.
    for (int t = 0; t < s.horizon_slots; ++t) {
        int st = plan.slot_step[t] - 1;
        std::vector<bool> closed(s.lines.size(), false);
        for (size_t li = 0; li < s.lines.size(); ++li) {
            if (removed[li]) continue;
            const Line& l = s.lines[li];
            if (line_to_edge[li] >= 0) {
                closed[li] = closed_per_step[st].count(line_to_edge[li]) > 0;
            } else if (l.is_tie()) {
                closed[li] = false; // out-of-area ties keep their normal state
            } else if (l.is_sectionalizing()) {
                closed[li] = true; // healthy-side sectionalizers stay closed
            } else {
                closed[li] = true;
            }
        }
        std::vector<double> lp(s.buses.size(), 0.0), lq(s.buses.size(), 0.0);
        for (size_t b = 0; b < s.buses.size(); ++b) {
            if (bus_quarantined[b]) continue;
            int served = 1;
            auto it = plan.load_schedule.find(s.buses[b].id);
            if (it != plan.load_schedule.end()) served = it->second.at(t);
            if (area_pos[b] >= 0 && it == plan.load_schedule.end()) served = 0;
            lp[b] = served * s.buses[b].demand_p[t];
            lq[b] = served * s.buses[b].demand_q[t];
        }
        std::vector<double> gp(s.generators.size(), 0.0),
            gq(s.generators.size(), 0.0), gv(s.generators.size(), 0.0);
        for (size_t g = 0; g < s.generators.size(); ++g) {
            auto it = plan.dispatch.find(s.generators[g].id);
            if (it == plan.dispatch.end()) continue;
            if (!it->second.p.empty()) gp[g] = it->second.p.at(t);
            if (!it->second.q.empty()) gq[g] = it->second.q.at(t);
            if (!it->second.v.empty()) gv[g] = it->second.v.at(t);
        }
        try {
            rep.pf.slices.push_back(
                radial_power_flow(s, closed, lp, lq, gp, gq, gv));
        } catch (const ModelError& e) {
            rep.failures.push_back("slot " + std::to_string(t) + ": " + e.what());
            rep.pf_converged = false;
            return rep;
        }
        const PFSlice& sl = rep.pf.slices.back();
        rep.max_mismatch = std::max(rep.max_mismatch, sl.mismatch);
        if (!sl.converged) {
            rep.pf_converged = false;
            rep.failures.push_back("slot " + std::to_string(t) +
                                   ": power flow did not converge");
        }
        // Serving a load requires an energized node.
        for (size_t b = 0; b < s.buses.size(); ++b)
            if (lp[b] > 1e-12 && sl.v_mag[b] <= 0.0)
                rep.failures.push_back("slot " + std::to_string(t) + ": load at '" +
                                       s.buses[b].id +
                                       "' served while de-energized");
    }

    rep.limits = check_operational_limits(rep.pf, s);
    for (const auto& v : rep.limits.violations)
        rep.failures.push_back("slot " + std::to_string(v.slot) + ": " + v.kind +
                               " at '" + v.element + "' (" +
                               std::to_string(v.value) + " vs " +
                               std::to_string(v.limit) + ")");

    // Pickup monotonicity.
    for (const auto& [bus, sched] : plan.load_schedule)
        for (size_t t = 1; t < sched.size(); ++t)
            if (sched[t] < sched[t - 1])
                rep.failures.push_back("load at '" + bus +
                                       "' interrupted after pickup (slot " +
                                       std::to_string(t) + ")");

    // DG start-up and reservoir audits.
    for (const Generator& g : s.generators) {
        if (g.kind != GeneratorKind::dispatchable_dg) continue;
        int bus = s.bus_index(g.node);
        if (area_pos[bus] < 0) continue;
        auto it = plan.dispatch.find(g.id);
        if (it == plan.dispatch.end()) continue;
        int first_inject = -1, first_energized = -1;
        double used = 0.0;
        for (int t = 0; t < s.horizon_slots; ++t) {
            double p = t < static_cast<int>(it->second.p.size()) ? it->second.p[t] : 0.0;
            double q = t < static_cast<int>(it->second.q.size()) ? it->second.q[t] : 0.0;
            used += p * s.slot_hours();
            bool injecting = std::abs(p) > 1e-7 || std::abs(q) > 1e-7;
            bool energized = rep.pf.slices[t].v_mag[bus] > 0.0;
            if (injecting && first_inject < 0) first_inject = t;
            if (energized && first_energized < 0) first_energized = t;
            if (injecting && !energized)
                rep.failures.push_back("generator '" + g.id +
                                       "' injects while de-energized (slot " +
                                       std::to_string(t) + ")");
        }
        if (first_inject >= 0 &&
            (first_energized < 0 || first_inject < first_energized + g.startup_slots))
            rep.failures.push_back(
                "generator '" + g.id + "' injects at slot " +
                std::to_string(first_inject) + ", before start-up completes (" +
                std::to_string(first_energized) + " + " +
                std::to_string(g.startup_slots) + ")");
        if (used > g.initial_energy + 1e-6)
            rep.failures.push_back("generator '" + g.id + "' consumes " +
                                   std::to_string(used) +
                                   " p.u.h, exceeding its reservoir of " +
                                   std::to_string(g.initial_energy));
    }
    return rep;
}

} // namespace restore
