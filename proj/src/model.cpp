#include "restore/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace restore {

const char* var_family_name(Var v) {
    switch (v) {
        case Var::switch_on: return "switch_on";
        case Var::step_at: return "step_at";
        case Var::served: return "served";
        case Var::orient: return "orient";
        case Var::flow_unit: return "flow_unit";
        case Var::zone_on: return "zone_on";
        case Var::line_on: return "line_on";
        case Var::sec_open: return "sec_open";
        case Var::step_start: return "step_start";
        case Var::current_sq: return "current_sq";
        case Var::flow_p: return "flow_p";
        case Var::flow_q: return "flow_q";
        case Var::volt_sq: return "volt_sq";
        case Var::inj_p: return "inj_p";
        case Var::inj_q: return "inj_q";
        case Var::reservoir: return "reservoir";
        case Var::aux: return "aux";
    }
    return "?";
}

std::string VariableIndex::name(int col) const {
    auto [f, a, b] = reverse_.at(col);
    return std::string(var_family_name(static_cast<Var>(f))) + "[" +
           std::to_string(a) + "," + std::to_string(b) + "]";
}

std::vector<Var> VariableIndex::families_present() const {
    std::vector<Var> out;
    for (const auto& [key, col] : map_) {
        Var f = static_cast<Var>(std::get<0>(key));
        if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
    }
    return out;
}

namespace {

struct Builder {
    const Scenario& s;
    MISOCPModel& m;
    int S, T;
    double dt_h;   // slot length in hours
    double m_time; // big-M for the slot-to-step windows

    std::vector<int> line_to_edge; // scenario line -> rg edge position or -1
    std::vector<bool> pinned_line; // alive but held open (out-of-area ties)
    std::vector<bool> bus_quarantined;

    void bound(int col, double l, double u) {
        if (static_cast<int>(m.lo.size()) <= col) {
            m.lo.resize(col + 1, -kInf);
            m.up.resize(col + 1, kInf);
        }
        m.lo[col] = l;
        m.up[col] = u;
    }

    LinRow& row(std::string tag, double lo, double up, bool big_m = false) {
        m.rows.push_back({{}, lo, up, std::move(tag), big_m});
        return m.rows.back();
    }

    bool in_area_bus(int b) const { return m.area_bus_pos[b] >= 0; }

    int zone_var(int bus, int step) const {
        int k = m.zone_pos[m.zg.zone_of_bus[bus]];
        return m.idx.col(Var::zone_on, k, step);
    }

    void register_variables();
    void emit_line_energization();
    void emit_time_mapping();
    void emit_load_pickup();
    void emit_opf();
    void build_objective();
};

void Builder::register_variables() {
    add_topology_variables(m.rg, S, m.idx, m.lo, m.up);
    for (int t = 0; t < T; ++t)
        for (int st = 0; st < S; ++st) bound(m.idx.add(Var::step_at, t, st), 0, 1);
    for (size_t n = 0; n < m.area.buses.size(); ++n)
        for (int t = 0; t < T; ++t)
            bound(m.idx.add(Var::served, static_cast<int>(n), t), 0, 1);
    for (int st = 0; st < S; ++st)
        for (size_t w = 0; w < m.area.lines.size(); ++w)
            bound(m.idx.add(Var::line_on, static_cast<int>(w), st), 0, 1);
    for (int st = 0; st < S; ++st)
        bound(m.idx.add(Var::step_start, st, 0), 0, s.horizon_minutes());

    for (int li : m.alive_lines) {
        const Line& l = s.lines[li];
        double fmax2 = l.ampacity * l.ampacity;
        double mp = s.v_max * l.ampacity;
        bool pin = pinned_line[li];
        for (int t = 0; t < T; ++t) {
            bound(m.idx.add(Var::current_sq, li, t), 0, pin ? 0 : fmax2);
            bound(m.idx.add(Var::flow_p, li, t), pin ? 0 : -mp, pin ? 0 : mp);
            bound(m.idx.add(Var::flow_q, li, t), pin ? 0 : -mp, pin ? 0 : mp);
        }
    }
    double vmin2 = s.v_min * s.v_min, vmax2 = s.v_max * s.v_max;
    for (size_t b = 0; b < s.buses.size(); ++b) {
        bool healthy = !in_area_bus(static_cast<int>(b)) && !bus_quarantined[b];
        for (int t = 0; t < T; ++t) {
            int c = m.idx.add(Var::volt_sq, static_cast<int>(b), t);
            if (bus_quarantined[b])
                bound(c, 0, 0);
            else if (healthy)
                bound(c, vmin2, vmax2);
            else
                bound(c, 0, vmax2);
        }
    }
    for (size_t gp = 0; gp < m.resources.size(); ++gp) {
        const Generator& g = s.generators[m.resources[gp]];
        bool area_dg = g.kind == GeneratorKind::dispatchable_dg &&
                       in_area_bus(s.bus_index(g.node));
        for (int t = 0; t < T; ++t) {
            int cp = m.idx.add(Var::inj_p, static_cast<int>(gp), t);
            int cq = m.idx.add(Var::inj_q, static_cast<int>(gp), t);
            if (g.kind == GeneratorKind::intermittent) {
                bool area = in_area_bus(s.bus_index(g.node));
                double f = g.forecast_p[t];
                bound(cp, area ? 0 : f, f);
                bound(cq, 0, 0);
            } else {
                bound(cp, 0, g.p_max);
                bound(cq, g.q_min, g.q_max);
                if (area_dg && t < g.startup_slots) {
                    bound(cp, 0, 0);
                    bound(cq, 0, 0);
                }
            }
        }
    }
    for (size_t dn = 0; dn < m.dg_list.size(); ++dn)
        for (int t = 0; t < T; ++t)
            bound(m.idx.add(Var::reservoir, static_cast<int>(dn), t), 0, kInf);

    // Binary set: switching, slot-step assignment, load pickup.
    for (int st = 0; st < S; ++st)
        for (size_t e = 0; e < m.rg.edges.size(); ++e)
            m.binaries.push_back(m.idx.col(Var::switch_on, static_cast<int>(e), st));
    for (int t = 0; t < T; ++t)
        for (int st = 0; st < S; ++st)
            m.binaries.push_back(m.idx.col(Var::step_at, t, st));
    for (size_t n = 0; n < m.area.buses.size(); ++n)
        for (int t = 0; t < T; ++t)
            m.binaries.push_back(m.idx.col(Var::served, static_cast<int>(n), t));
}

void Builder::emit_line_energization() {
    for (int st = 0; st < S; ++st) {
        for (size_t w = 0; w < m.area.lines.size(); ++w) {
            int li = m.area.lines[w];
            auto& r = row("line-energize", 0, 0);
            r.coef.emplace_back(m.idx.col(Var::line_on, static_cast<int>(w), st), 1.0);
            if (line_to_edge[li] >= 0) {
                r.coef.emplace_back(
                    m.idx.col(Var::switch_on, line_to_edge[li], st), -1.0);
            } else {
                int k = m.zone_pos[m.zg.zone_of_line[li]];
                r.coef.emplace_back(m.idx.col(Var::zone_on, k, st), -1.0);
            }
        }
    }
}

void Builder::emit_time_mapping() {
    for (int t = 0; t < T; ++t) {
        auto& sos = row("slot-step-assign", 1, 1);
        for (int st = 0; st < S; ++st)
            sos.coef.emplace_back(m.idx.col(Var::step_at, t, st), 1.0);
    }
    for (int t = 0; t < T; ++t) {
        double tau = m.slot_coordinate(t);
        for (int st = 0; st < S; ++st) {
            int k = m.idx.col(Var::step_at, t, st);
            auto& lb = row("step-window-lb", -kInf, tau + m_time, true);
            lb.coef = {{m.idx.col(Var::step_start, st, 0), 1.0}, {k, m_time}};
            if (st + 1 < S) {
                auto& ub = row("step-window-ub", -kInf, m_time - tau, true);
                ub.coef = {{m.idx.col(Var::step_start, st + 1, 0), -1.0},
                           {k, m_time}};
            }
            // For the last step the upper window is the horizon end, which
            // every slot coordinate satisfies.
        }
    }
    for (int st = 0; st < S; ++st) {
        auto& dur = row("step-duration", 0, kInf);
        dur.coef.emplace_back(m.idx.col(Var::step_start, st, 0), 1.0);
        if (st > 0)
            dur.coef.emplace_back(m.idx.col(Var::step_start, st - 1, 0), -1.0);
        for (size_t e = 0; e < m.rg.edges.size(); ++e) {
            const auto& ed = m.rg.edges[e];
            if (ed.tie())
                dur.coef.emplace_back(
                    m.idx.col(Var::switch_on, static_cast<int>(e), st),
                    -ed.op_time_min);
            else if (!ed.source_edge())
                dur.coef.emplace_back(
                    m.idx.col(Var::sec_open, static_cast<int>(e), st),
                    -ed.op_time_min);
        }
    }
}

void Builder::emit_load_pickup() {
    for (size_t n = 0; n < m.area.buses.size(); ++n) {
        int bus = m.area.buses[n];
        bool breaker = s.buses[bus].has_load_breaker;
        for (int t = 0; t < T; ++t) {
            int L = m.idx.col(Var::served, static_cast<int>(n), t);
            for (int st = 0; st < S; ++st) {
                int X = zone_var(bus, st);
                int K = m.idx.col(Var::step_at, t, st);
                auto& gate = row("pickup-gate", -kInf, 1);
                gate.coef = {{L, 1.0}, {X, -1.0}, {K, 1.0}};
                if (!breaker) {
                    // Without a breaker the load cannot be detached: it is
                    // served exactly when its node is energized.
                    auto& force = row("pickup-forced", -1, kInf);
                    force.coef = {{L, 1.0}, {X, -1.0}, {K, -1.0}};
                }
            }
            if (t > 0) {
                auto& mono = row("pickup-monotone", 0, kInf);
                mono.coef = {
                    {L, 1.0},
                    {m.idx.col(Var::served, static_cast<int>(n), t - 1), -1.0}};
            }
        }
    }
}

void Builder::emit_opf() {
    const double vmin2 = s.v_min * s.v_min, vmax2 = s.v_max * s.v_max;
    const double infl = m.options.big_m_inflate;

    for (int li : m.alive_lines) {
        const Line& l = s.lines[li];
        if (pinned_line[li]) continue; // held open, all flow variables fixed 0
        int from = s.bus_index(l.from), to = s.bus_index(l.to);
        double fmax2 = l.ampacity * l.ampacity;
        double mp = s.v_max * l.ampacity * infl;
        int w = m.area_line_pos[li];
        double zloss = l.r * l.r + l.x * l.x;

        for (int t = 0; t < T; ++t) {
            int F = m.idx.col(Var::current_sq, li, t);
            int p = m.idx.col(Var::flow_p, li, t);
            int q = m.idx.col(Var::flow_q, li, t);
            int Vf = m.idx.col(Var::volt_sq, from, t);
            int Vt = m.idx.col(Var::volt_sq, to, t);

            if (w >= 0) {
                // Off-outage line: gate flows on its step energization.
                double mv = (vmax2 + 2.0 * (l.r + l.x) * s.v_max * l.ampacity +
                             zloss * fmax2) *
                            (1.0 + s.big_m_voltage_margin) * infl;
                for (int st = 0; st < S; ++st) {
                    int X = m.idx.col(Var::line_on, w, st);
                    int K = m.idx.col(Var::step_at, t, st);
                    auto& fcap = row("current-cap", -kInf, fmax2, true);
                    fcap.coef = {{F, 1.0}, {X, -fmax2}, {K, fmax2}};
                    auto& pub = row("flow-cap", -kInf, mp, true);
                    pub.coef = {{p, 1.0}, {X, -mp}, {K, mp}};
                    auto& plb = row("flow-cap", -mp, kInf, true);
                    plb.coef = {{p, 1.0}, {X, mp}, {K, -mp}};
                    auto& qub = row("flow-cap", -kInf, mp, true);
                    qub.coef = {{q, 1.0}, {X, -mp}, {K, mp}};
                    auto& qlb = row("flow-cap", -mp, kInf, true);
                    qlb.coef = {{q, 1.0}, {X, mp}, {K, -mp}};

                    // Voltage drop along an energized line, big-M released
                    // otherwise: |Vf - Vt - 2(rp+xq) (+ z^2 F)| <= mv(2-X-K).
                    auto drop = [&](double sgn) {
                        auto& r = row("volt-drop", -kInf, 2.0 * mv, true);
                        r.coef = {{Vf, sgn},
                                  {Vt, -sgn},
                                  {p, -2.0 * l.r * sgn},
                                  {q, -2.0 * l.x * sgn},
                                  {X, mv},
                                  {K, mv}};
                        if (m.options.voltage_drop == VoltageDrop::full)
                            r.coef.emplace_back(F, zloss * sgn);
                    };
                    drop(1.0);
                    drop(-1.0);
                }
            } else {
                // Healthy line, always energized: exact voltage equation.
                auto& r = row("volt-drop", 0, 0);
                r.coef = {{Vf, 1.0},
                          {Vt, -1.0},
                          {p, -2.0 * l.r},
                          {q, -2.0 * l.x}};
                if (m.options.voltage_drop == VoltageDrop::full)
                    r.coef.emplace_back(F, zloss);
            }

            ConeBlock cone;
            cone.tag = "cone-current";
            LinExpr bound_e, u1, u2, u3;
            bound_e.add(F, 1.0).add(Vf, 1.0);
            u1.add(p, 2.0);
            u2.add(q, 2.0);
            u3.add(F, 1.0).add(Vf, -1.0);
            cone.exprs = {bound_e, u1, u2, u3};
            m.cones.push_back(std::move(cone));
        }
    }

    // Voltage windows for off-outage buses follow zone energization.
    for (size_t n = 0; n < m.area.buses.size(); ++n) {
        int bus = m.area.buses[n];
        for (int t = 0; t < T; ++t) {
            int V = m.idx.col(Var::volt_sq, bus, t);
            for (int st = 0; st < S; ++st) {
                int X = zone_var(bus, st);
                int K = m.idx.col(Var::step_at, t, st);
                auto& ub = row("volt-window", -kInf, vmax2, true);
                ub.coef = {{V, 1.0}, {X, -vmax2}, {K, vmax2}};
                auto& lb = row("volt-window", -vmin2, kInf, true);
                lb.coef = {{V, 1.0}, {X, -vmin2}, {K, -vmin2}};
            }
        }
    }

    // Nodal power balance over the reference orientations:
    // sum_in (p - r F) - sum_out p + injections = served demand.
    for (size_t b = 0; b < s.buses.size(); ++b) {
        if (bus_quarantined[b]) continue;
        for (int t = 0; t < T; ++t) {
            auto& bp = row("balance-p", 0, 0);
            auto& bq = row("balance-q", 0, 0);
            for (int li : m.alive_lines) {
                const Line& l = s.lines[li];
                int from = s.bus_index(l.from), to = s.bus_index(l.to);
                if (from == static_cast<int>(b)) {
                    bp.coef.emplace_back(m.idx.col(Var::flow_p, li, t), -1.0);
                    bq.coef.emplace_back(m.idx.col(Var::flow_q, li, t), -1.0);
                } else if (to == static_cast<int>(b)) {
                    bp.coef.emplace_back(m.idx.col(Var::flow_p, li, t), 1.0);
                    bp.coef.emplace_back(m.idx.col(Var::current_sq, li, t), -l.r);
                    bq.coef.emplace_back(m.idx.col(Var::flow_q, li, t), 1.0);
                    bq.coef.emplace_back(m.idx.col(Var::current_sq, li, t), -l.x);
                }
            }
            for (size_t gp = 0; gp < m.resources.size(); ++gp) {
                if (s.bus_index(s.generators[m.resources[gp]].node) !=
                    static_cast<int>(b))
                    continue;
                bp.coef.emplace_back(
                    m.idx.col(Var::inj_p, static_cast<int>(gp), t), 1.0);
                bq.coef.emplace_back(
                    m.idx.col(Var::inj_q, static_cast<int>(gp), t), 1.0);
            }
            int n = m.area_bus_pos[b];
            if (n >= 0) {
                int L = m.idx.col(Var::served, n, t);
                bp.coef.emplace_back(L, -s.buses[b].demand_p[t]);
                bq.coef.emplace_back(L, -s.buses[b].demand_q[t]);
            } else {
                bp.lo = bp.up = s.buses[b].demand_p[t];
                bq.lo = bq.up = s.buses[b].demand_q[t];
            }
        }
    }

    // Resource apparent-power capability cones.
    for (size_t gp = 0; gp < m.resources.size(); ++gp) {
        const Generator& g = s.generators[m.resources[gp]];
        for (int t = 0; t < T; ++t) {
            ConeBlock cone;
            cone.tag = "cone-capacity";
            LinExpr cap, up_, uq;
            cap.constant = g.s_max;
            up_.add(m.idx.col(Var::inj_p, static_cast<int>(gp), t), 1.0);
            uq.add(m.idx.col(Var::inj_q, static_cast<int>(gp), t), 1.0);
            cone.exprs = {cap, up_, uq};
            m.cones.push_back(std::move(cone));
        }
    }

    // Reservoir dynamics for dispatchable DGs.
    for (size_t dn = 0; dn < m.dg_list.size(); ++dn) {
        const Generator& g = s.generators[m.dg_list[dn]];
        int gp = -1;
        for (size_t r = 0; r < m.resources.size(); ++r)
            if (m.resources[r] == m.dg_list[dn]) gp = static_cast<int>(r);
        for (int t = 0; t < T; ++t) {
            auto& r = row("reservoir", t == 0 ? g.initial_energy : 0,
                          t == 0 ? g.initial_energy : 0);
            r.coef.emplace_back(
                m.idx.col(Var::reservoir, static_cast<int>(dn), t), 1.0);
            r.coef.emplace_back(m.idx.col(Var::inj_p, gp, t), dt_h);
            if (t > 0)
                r.coef.emplace_back(
                    m.idx.col(Var::reservoir, static_cast<int>(dn), t - 1), -1.0);
        }
    }

    // Injection gating and start-up delays for off-outage resources.
    for (size_t gp = 0; gp < m.resources.size(); ++gp) {
        const Generator& g = s.generators[m.resources[gp]];
        int bus = s.bus_index(g.node);
        if (!in_area_bus(bus)) continue;

        if (g.kind == GeneratorKind::intermittent) {
            for (int t = 0; t < T; ++t) {
                double f = g.forecast_p[t];
                if (f == 0.0) continue;
                int P = m.idx.col(Var::inj_p, static_cast<int>(gp), t);
                for (int st = 0; st < S; ++st) {
                    int X = zone_var(bus, st);
                    int K = m.idx.col(Var::step_at, t, st);
                    auto& ub = row("intermittent-track", -kInf, f, true);
                    ub.coef = {{P, 1.0}, {X, -f}, {K, f}};
                    auto& lb = row("intermittent-track", -f, kInf, true);
                    lb.coef = {{P, 1.0}, {X, -f}, {K, -f}};
                }
            }
            continue;
        }

        double mg = g.s_max * infl;
        for (int t = 0; t < T; ++t) {
            int P = m.idx.col(Var::inj_p, static_cast<int>(gp), t);
            int Q = m.idx.col(Var::inj_q, static_cast<int>(gp), t);
            for (int st = 0; st < S; ++st) {
                int X = zone_var(bus, st);
                int K = m.idx.col(Var::step_at, t, st);
                auto& pub = row("inj-gate", -kInf, mg, true);
                pub.coef = {{P, 1.0}, {X, -mg}, {K, mg}};
                auto& qub = row("inj-gate", -kInf, mg, true);
                qub.coef = {{Q, 1.0}, {X, -mg}, {K, mg}};
                auto& qlb = row("inj-gate", -mg, kInf, true);
                qlb.coef = {{Q, 1.0}, {X, mg}, {K, -mg}};
            }

            // Start-up delay: no injection until the hosting node has been
            // energized for startup_slots slots (slots before that are fixed
            // to zero through the variable bounds).
            int delta = g.startup_slots;
            if (delta <= 0 || t < delta) continue;
            if (m.options.restart_clock == RestartClock::energization) {
                for (int u = t - delta; u < t; ++u) {
                    for (int st = 0; st < S; ++st) {
                        int X = zone_var(bus, st);
                        int Ku = m.idx.col(Var::step_at, u, st);
                        auto& pr = row("startup-delay", -kInf, g.p_max, true);
                        pr.coef = {{P, 1.0}, {X, -g.p_max}, {Ku, g.p_max}};
                        if (g.q_max > 0) {
                            auto& qr = row("startup-delay", -kInf, g.q_max, true);
                            qr.coef = {{Q, 1.0}, {X, -g.q_max}, {Ku, g.q_max}};
                        }
                        if (g.q_min < 0) {
                            auto& ql = row("startup-delay", g.q_min, kInf, true);
                            ql.coef = {{Q, 1.0}, {X, -g.q_min}, {Ku, g.q_min}};
                        }
                    }
                }
            } else {
                for (int st = 0; st < S; ++st) {
                    int X = zone_var(bus, st);
                    int Kt = m.idx.col(Var::step_at, t, st);
                    int Kd = m.idx.col(Var::step_at, t - delta, st);
                    auto& pr = row("startup-delay", -kInf, 2.0 * g.p_max, true);
                    pr.coef = {{P, 1.0},
                               {X, g.p_max},
                               {Kt, g.p_max},
                               {Kd, -g.p_max}};
                    if (g.q_max > 0) {
                        auto& qr = row("startup-delay", -kInf, 2.0 * g.q_max, true);
                        qr.coef = {{Q, 1.0},
                                   {X, g.q_max},
                                   {Kt, g.q_max},
                                   {Kd, -g.q_max}};
                    }
                    if (g.q_min < 0) {
                        auto& ql = row("startup-delay", 2.0 * g.q_min, kInf, true);
                        ql.coef = {{Q, 1.0},
                                   {X, g.q_min},
                                   {Kt, g.q_min},
                                   {Kd, -g.q_min}};
                    }
                }
            }
        }
    }
}

void Builder::build_objective() {
    auto& re = m.tiers[0];
    re.name = "restored-energy";
    double denom = 0.0;
    for (size_t b = 0; b < s.buses.size(); ++b) {
        if (bus_quarantined[b]) continue;
        const Bus& bus = s.buses[b];
        for (int t = 0; t < T; ++t) {
            double e = bus.importance * bus.demand_p[t] * dt_h;
            denom += e;
            int n = m.area_bus_pos[b];
            if (n >= 0 && e != 0.0) {
                re.constant += e;
                re.coef.emplace_back(m.idx.col(Var::served, n, t), -e);
            }
        }
    }
    re.normalization = std::max(denom, 1e-9);

    auto& sw = m.tiers[1];
    sw.name = "switching-time";
    double lam_total = 0.0;
    for (size_t e = 0; e < m.rg.edges.size(); ++e) {
        const auto& ed = m.rg.edges[e];
        lam_total += ed.op_time_min;
        for (int st = 0; st < S; ++st) {
            if (ed.tie())
                sw.coef.emplace_back(
                    m.idx.col(Var::switch_on, static_cast<int>(e), st),
                    ed.op_time_min);
            else if (!ed.source_edge())
                sw.coef.emplace_back(
                    m.idx.col(Var::sec_open, static_cast<int>(e), st),
                    ed.op_time_min);
        }
    }
    sw.normalization = std::max(lam_total * S, 1e-9);

    auto& op = m.tiers[2];
    op.name = "losses";
    double lnorm = 0.0;
    for (int li : m.alive_lines) {
        const Line& l = s.lines[li];
        lnorm += l.r * l.ampacity * l.ampacity * T;
        for (int t = 0; t < T; ++t)
            if (l.r != 0.0)
                op.coef.emplace_back(m.idx.col(Var::current_sq, li, t), l.r);
    }
    op.normalization = std::max(lnorm, 1e-9);
}

} // namespace

MISOCPModel assemble(const Scenario& s, const ZoneGraph& zg,
                     const OffOutageArea& area, const ModelOptions& opt) {
    MISOCPModel m;
    m.scenario = s;
    m.zg = zg;
    m.area = area;
    m.options = opt;
    m.steps = opt.steps_override > 0 ? opt.steps_override : s.max_steps;
    m.slots = s.horizon_slots;
    m.rg = restoration_graph(s, zg, area, &m.zone_pos);

    m.area_bus_pos.assign(s.buses.size(), -1);
    for (size_t n = 0; n < area.buses.size(); ++n)
        m.area_bus_pos[area.buses[n]] = static_cast<int>(n);
    m.area_line_pos.assign(s.lines.size(), -1);
    for (size_t w = 0; w < area.lines.size(); ++w)
        m.area_line_pos[area.lines[w]] = static_cast<int>(w);

    Builder b{s, m, m.steps, m.slots, s.slot_hours(), 0.0, {}, {}, {}};

    b.bus_quarantined.assign(s.buses.size(), false);
    for (int z : area.quarantined_zones)
        for (int bus : zg.zones[z].buses) b.bus_quarantined[bus] = true;

    // Lines removed by fault isolation: faulted elements, pocket internals,
    // pocket-incident switched lines.
    std::vector<bool> removed(s.lines.size(), false);
    for (const auto& el : s.faulted_elements) {
        int li = s.line_index(el);
        if (li >= 0) removed[li] = true;
    }
    for (size_t li = 0; li < s.lines.size(); ++li) {
        const Line& l = s.lines[li];
        if (b.bus_quarantined[s.bus_index(l.from)] ||
            b.bus_quarantined[s.bus_index(l.to)])
            removed[li] = true;
    }
    b.pinned_line.assign(s.lines.size(), false);
    for (size_t li = 0; li < s.lines.size(); ++li) {
        if (removed[li]) continue;
        m.alive_lines.push_back(static_cast<int>(li));
        // Out-of-area ties keep their normally-open state.
        if (s.lines[li].is_tie() && m.area_line_pos[li] < 0)
            b.pinned_line[li] = true;
    }

    b.line_to_edge.assign(s.lines.size(), -1);
    for (size_t e = 0; e < m.rg.edges.size(); ++e)
        if (m.rg.edges[e].line >= 0)
            b.line_to_edge[m.rg.edges[e].line] = static_cast<int>(e);

    for (size_t g = 0; g < s.generators.size(); ++g) {
        if (b.bus_quarantined[s.bus_index(s.generators[g].node)]) continue;
        m.resources.push_back(static_cast<int>(g));
        if (s.generators[g].kind == GeneratorKind::dispatchable_dg)
            m.dg_list.push_back(static_cast<int>(g));
    }

    double lam_total = 0.0;
    for (const auto& e : m.rg.edges) lam_total += e.op_time_min * m.steps;
    b.m_time = s.horizon_minutes() + lam_total + 1.0;

    b.register_variables();

    ConstraintBlock rad = emit_radiality_constraints(m.rg, m.steps, m.idx);
    for (auto& r : rad.rows) m.rows.push_back(std::move(r));
    ConstraintBlock sec = emit_sectionalizer_constraints(m.rg, m.steps, m.idx);
    for (auto& r : sec.rows) m.rows.push_back(std::move(r));

    b.emit_line_energization();
    b.emit_time_mapping();
    b.emit_load_pickup();
    b.emit_opf();
    b.build_objective();
    return m;
}

MISOCPModel build_model(const Scenario& s, const ModelOptions& opt) {
    auto diags = validate_scenario(s);
    for (const auto& d : diags)
        if (d.code != "step-budget") // advisory, the model still solves
            throw InvariantError("scenario invalid: " + d.message);
    ZoneGraph zg = partition_zones(s);
    OffOutageArea area;
    if (!s.faulted_elements.empty()) area = locate_off_outage(s, zg);
    return assemble(s, zg, area, opt);
}

int count_binaries(const MISOCPModel& m, CountMode mode) {
    int ws = static_cast<int>(m.rg.edges.size());
    if (mode == CountMode::multi_step) return ws * m.steps;
    int instants = (m.slots + 1) / 2; // the dynamic variant switches every 2 slots
    return ws * instants;
}

BinaryBreakdown binary_breakdown(const MISOCPModel& m, CountMode mode) {
    BinaryBreakdown b;
    b.switching = count_binaries(m, mode);
    b.time_mapping = mode == CountMode::multi_step ? m.slots * m.steps : 0;
    b.load_pickup = static_cast<int>(m.area.buses.size()) * m.slots;
    return b;
}

std::string dump_model(const MISOCPModel& m) {
    std::vector<std::string> lines;
    char buf[64];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.9g", v);
        return std::string(buf);
    };
    for (const auto& r : m.rows) {
        std::string s = r.tag + " | ";
        s += std::isfinite(r.lo) ? fmt(r.lo) : std::string("-inf");
        s += " <=";
        for (auto [c, w] : r.coef)
            s += " " + (w < 0 ? std::string("- ") : std::string("+ ")) +
                 fmt(std::abs(w)) + "*" + m.idx.name(c);
        s += " <= ";
        s += std::isfinite(r.up) ? fmt(r.up) : std::string("+inf");
        lines.push_back(std::move(s));
    }
    for (const auto& c : m.cones) {
        std::string s = c.tag + " | cone(";
        for (size_t i = 0; i < c.exprs.size(); ++i) {
            if (i) s += "; ";
            s += fmt(c.exprs[i].constant);
            for (auto [col, w] : c.exprs[i].terms)
                s += (w < 0 ? " - " : " + ") + fmt(std::abs(w)) + "*" +
                     m.idx.name(col);
        }
        s += ")";
        lines.push_back(std::move(s));
    }
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (auto& l : lines) {
        out += l;
        out += "\n";
    }
    return out;
}

SolutionAudit evaluate_solution(const MISOCPModel& m,
                                const std::vector<double>& x) {
    SolutionAudit a;
    for (const auto& r : m.rows) {
        double act = 0.0;
        for (auto [c, w] : r.coef) act += w * x[c];
        if (std::isfinite(r.lo))
            a.max_row_violation = std::max(a.max_row_violation, r.lo - act);
        if (std::isfinite(r.up))
            a.max_row_violation = std::max(a.max_row_violation, act - r.up);
    }
    for (int c = 0; c < m.idx.size(); ++c) {
        if (std::isfinite(m.lo[c]))
            a.max_bound_violation = std::max(a.max_bound_violation, m.lo[c] - x[c]);
        if (std::isfinite(m.up[c]))
            a.max_bound_violation = std::max(a.max_bound_violation, x[c] - m.up[c]);
    }
    for (const auto& cone : m.cones) {
        double t = cone.exprs[0].eval(x);
        double nrm = 0.0;
        for (size_t i = 1; i < cone.exprs.size(); ++i) {
            double u = cone.exprs[i].eval(x);
            nrm += u * u;
        }
        a.max_cone_violation =
            std::max(a.max_cone_violation, std::sqrt(nrm) - t);
    }
    for (int c : m.binaries) {
        double v = x[c];
        a.max_integrality_gap =
            std::max(a.max_integrality_gap, std::min(std::abs(v), std::abs(v - 1.0)));
    }
    return a;
}

LoweredProgram model_to_conic(const MISOCPModel& m,
                              const std::vector<std::pair<int, double>>& objective,
                              double obj_scale,
                              const std::vector<LinRow>& extra_rows,
                              const std::vector<std::pair<int, double>>& fixings,
                              const std::vector<double>* warm_model) {
    LoweredProgram out;
    out.model_cols = m.idx.size();
    ConicProgram& p = out.prog;

    int extra = 0;
    auto count_slacks = [&](const LinRow& r) {
        if (r.lo != r.up) ++extra;
    };
    for (const auto& r : m.rows) count_slacks(r);
    for (const auto& r : extra_rows) count_slacks(r);
    int cone_aux = 0;
    for (const auto& c : m.cones)
        for (const auto& e : c.exprs)
            if (e.terms.size() != 1 || e.terms[0].second != 1.0 ||
                e.constant != 0.0)
                ++cone_aux;

    p.resize(out.model_cols + extra + cone_aux);
    for (int c = 0; c < out.model_cols; ++c) {
        p.lo[c] = m.lo[c];
        p.up[c] = m.up[c];
    }
    for (auto [c, v] : fixings) {
        p.lo[c] = v;
        p.up[c] = v;
    }
    for (auto [c, w] : objective) p.c[c] += w / obj_scale;

    Eigen::VectorXd warm;
    const bool has_warm =
        warm_model && static_cast<int>(warm_model->size()) == out.model_cols;
    if (has_warm) {
        warm.resize(p.num_vars);
        for (int c = 0; c < out.model_cols; ++c) warm[c] = (*warm_model)[c];
    }

    std::vector<Eigen::Triplet<double>> trips;
    std::vector<double> rhs;
    int next = out.model_cols;
    auto add_row = [&](const LinRow& r) {
        int row = static_cast<int>(rhs.size());
        for (auto [c, w] : r.coef) trips.emplace_back(row, c, w);
        if (r.lo == r.up) {
            rhs.push_back(r.lo);
        } else {
            int slack = next++;
            p.lo[slack] = r.lo;
            p.up[slack] = r.up;
            trips.emplace_back(row, slack, -1.0);
            rhs.push_back(0.0);
            if (has_warm) {
                double act = 0.0;
                for (auto [c, w] : r.coef) act += w * (*warm_model)[c];
                warm[slack] = act;
            }
        }
    };
    for (const auto& r : m.rows) add_row(r);
    for (const auto& r : extra_rows) add_row(r);

    for (const auto& c : m.cones) {
        std::vector<int> tuple;
        for (const auto& e : c.exprs) {
            if (e.terms.size() == 1 && e.terms[0].second == 1.0 &&
                e.constant == 0.0) {
                tuple.push_back(e.terms[0].first);
            } else {
                int aux = next++;
                int row = static_cast<int>(rhs.size());
                trips.emplace_back(row, aux, 1.0);
                for (auto [col, w] : e.terms) trips.emplace_back(row, col, -w);
                rhs.push_back(e.constant);
                tuple.push_back(aux);
                if (has_warm) warm[aux] = e.eval(*warm_model);
            }
        }
        p.cones.push_back(std::move(tuple));
    }

    p.A.resize(static_cast<int>(rhs.size()), p.num_vars);
    p.A.setFromTriplets(trips.begin(), trips.end());
    p.b = Eigen::Map<Eigen::VectorXd>(rhs.data(), rhs.size());
    if (has_warm) p.warm_start = warm;
    return out;
}

} // namespace restore
