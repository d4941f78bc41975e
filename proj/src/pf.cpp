#include "restore/pf.hpp"

#include <cmath>
#include <complex>
#include <queue>

namespace restore {

namespace {
using cplx = std::complex<double>;
constexpr double kVoltIterTol = 1e-12;
constexpr int kMaxSweeps = 100;
} // namespace

PFSlice radial_power_flow(const Scenario& s, const std::vector<bool>& closed_lines,
                          const std::vector<double>& load_p,
                          const std::vector<double>& load_q,
                          const std::vector<double>& gen_p,
                          const std::vector<double>& gen_q,
                          const std::vector<double>& slack_v) {
    const int nb = static_cast<int>(s.buses.size());
    const int nl = static_cast<int>(s.lines.size());
    PFSlice out;
    out.v_mag.assign(nb, 0.0);
    out.i_mag.assign(nl, 0.0);
    out.closed = closed_lines;
    out.slack_p.assign(s.generators.size(), 0.0);
    out.slack_q.assign(s.generators.size(), 0.0);

    // Net complex injection per bus from fixed (grid-feeding) resources.
    std::vector<cplx> fixed_inj(nb, 0.0);
    std::vector<int> slack_gen(nb, -1);
    for (size_t g = 0; g < s.generators.size(); ++g) {
        int b = s.bus_index(s.generators[g].node);
        if (s.generators[g].kind == GeneratorKind::substation)
            slack_gen[b] = static_cast<int>(g);
        else
            fixed_inj[b] += cplx(gen_p[g], gen_q[g]);
    }

    std::vector<std::vector<int>> adj(nb);
    for (int li = 0; li < nl; ++li) {
        if (!closed_lines[li]) continue;
        adj[s.bus_index(s.lines[li].from)].push_back(li);
        adj[s.bus_index(s.lines[li].to)].push_back(li);
    }

    std::vector<int> comp(nb, -1);
    out.converged = true;
    out.mismatch = 0.0;

    for (int root = 0; root < nb; ++root) {
        if (comp[root] >= 0 || slack_gen[root] < 0) continue;

        // BFS tree of the component hanging off this substation.
        std::vector<int> order;
        std::vector<int> parent_line(nb, -1), parent_bus(nb, -1);
        std::queue<int> q;
        q.push(root);
        comp[root] = root;
        while (!q.empty()) {
            int b = q.front();
            q.pop();
            order.push_back(b);
            for (int li : adj[b]) {
                if (li == parent_line[b]) continue;
                const Line& l = s.lines[li];
                int other = s.bus_index(l.from) == b ? s.bus_index(l.to)
                                                     : s.bus_index(l.from);
                if (comp[other] >= 0)
                    throw ModelError(
                        "power flow: non-radial configuration (loop through "
                        "bus '" + s.buses[other].id + "')");
                if (slack_gen[other] >= 0)
                    throw ModelError(
                        "power flow: two substations share one energized "
                        "component ('" + s.buses[root].id + "', '" +
                        s.buses[other].id + "')");
                comp[other] = root;
                parent_line[other] = li;
                parent_bus[other] = b;
                q.push(other);
            }
        }

        double vset = slack_v[slack_gen[root]] > 0 ? slack_v[slack_gen[root]] : 1.0;
        std::vector<cplx> V(nb, cplx(vset, 0.0));
        std::vector<cplx> Ibr(nl, 0.0);

        int sweep = 0;
        for (; sweep < kMaxSweeps; ++sweep) {
            // Nodal shunt currents from loads and fixed injections.
            std::vector<cplx> Ibus(order.size(), 0.0);
            for (size_t k = 0; k < order.size(); ++k) {
                int b = order[k];
                cplx S = cplx(load_p[b], load_q[b]) - fixed_inj[b];
                Ibus[k] = std::conj(S / V[b]);
            }
            // Backward: accumulate branch currents from the leaves.
            for (size_t k = order.size(); k-- > 0;) {
                int b = order[k];
                cplx I = Ibus[k];
                for (int li : adj[b])
                    if (parent_line[b] != li && comp[b] == root) {
                        const Line& l = s.lines[li];
                        int other = s.bus_index(l.from) == b ? s.bus_index(l.to)
                                                             : s.bus_index(l.from);
                        if (parent_line[other] == li) I += Ibr[li];
                    }
                if (parent_line[b] >= 0) Ibr[parent_line[b]] = I;
            }
            // Forward: push voltages from the root.
            double dv = 0.0;
            for (size_t k = 1; k < order.size(); ++k) {
                int b = order[k];
                const Line& l = s.lines[parent_line[b]];
                cplx z(l.r, l.x);
                cplx nv = V[parent_bus[b]] - z * Ibr[parent_line[b]];
                dv = std::max(dv, std::abs(nv - V[b]));
                V[b] = nv;
            }
            if (dv < kVoltIterTol && sweep > 0) break;
        }
        out.sweeps = std::max(out.sweeps, sweep + 1);

        // Exact mismatch audit at the solved point.
        for (size_t k = 0; k < order.size(); ++k) {
            int b = order[k];
            cplx acc = fixed_inj[b] - cplx(load_p[b], load_q[b]);
            for (int li : adj[b]) {
                const Line& l = s.lines[li];
                int from = s.bus_index(l.from), to = s.bus_index(l.to);
                int other = from == b ? to : from;
                cplx z(l.r, l.x);
                // Current flows toward the child side of the tree.
                cplx I = Ibr[li];
                bool into_b = parent_line[b] == li;
                bool into_other = parent_line[other] == li;
                if (!into_b && !into_other) continue;
                if (into_b)
                    acc += V[b] * std::conj(I);
                else
                    acc -= V[b] * std::conj(I);
                (void)z;
            }
            if (slack_gen[b] >= 0) {
                out.slack_p[slack_gen[b]] = -acc.real();
                out.slack_q[slack_gen[b]] = -acc.imag();
            } else {
                out.mismatch = std::max(out.mismatch, std::abs(acc));
            }
        }
        for (size_t k = 0; k < order.size(); ++k) {
            int b = order[k];
            out.v_mag[b] = std::abs(V[b]);
            if (parent_line[b] >= 0) out.i_mag[parent_line[b]] = std::abs(Ibr[parent_line[b]]);
        }
        if (sweep >= kMaxSweeps) out.converged = false;
    }
    if (out.mismatch > 1e-8) out.converged = false;
    if (out.converged && out.mismatch == 0.0 && out.sweeps == 0) out.sweeps = 1;

    // Sanity: a closed line between an energized and a dead bus cannot exist.
    for (int li = 0; li < nl; ++li) {
        if (!closed_lines[li]) continue;
        int a = s.bus_index(s.lines[li].from), b = s.bus_index(s.lines[li].to);
        bool ea = comp[a] >= 0, eb = comp[b] >= 0;
        if (ea != eb)
            throw ModelError("power flow: closed line '" + s.lines[li].id +
                             "' bridges an energized and a dead bus");
    }
    return out;
}

LimitReport check_operational_limits(const PFResult& pf, const Scenario& s) {
    LimitReport rep;
    for (size_t t = 0; t < pf.slices.size(); ++t) {
        const PFSlice& sl = pf.slices[t];
        for (size_t b = 0; b < s.buses.size(); ++b) {
            double v = sl.v_mag[b];
            if (v <= 0.0) continue; // de-energized
            if (v < rep.min_voltage) {
                rep.min_voltage = v;
                rep.min_voltage_at = s.buses[b].id;
                rep.min_voltage_slot = static_cast<int>(t);
            }
            if (v > rep.max_voltage) {
                rep.max_voltage = v;
                rep.max_voltage_at = s.buses[b].id;
                rep.max_voltage_slot = static_cast<int>(t);
            }
            if (v < s.v_min - 1e-9)
                rep.violations.push_back({s.buses[b].id, static_cast<int>(t),
                                          "undervoltage", v, s.v_min});
            if (v > s.v_max + 1e-9)
                rep.violations.push_back({s.buses[b].id, static_cast<int>(t),
                                          "overvoltage", v, s.v_max});
        }
        for (size_t li = 0; li < s.lines.size(); ++li) {
            if (!sl.closed[li]) continue;
            double imag = sl.i_mag[li];
            double margin = s.lines[li].ampacity - imag;
            if (margin < rep.min_current_margin) {
                rep.min_current_margin = margin;
                rep.min_margin_line = s.lines[li].id;
                rep.min_margin_slot = static_cast<int>(t);
            }
            if (imag > s.lines[li].ampacity + 1e-9)
                rep.violations.push_back({s.lines[li].id, static_cast<int>(t),
                                          "overcurrent", imag,
                                          s.lines[li].ampacity});
        }
    }
    return rep;
}

SocGap soc_gap(const MISOCPModel& m, const std::vector<double>& x) {
    SocGap g;
    for (int li : m.alive_lines) {
        int from = m.scenario.bus_index(m.scenario.lines[li].from);
        for (int t = 0; t < m.slots; ++t) {
            if (!m.idx.has(Var::current_sq, li, t)) continue;
            double F = x[m.idx.col(Var::current_sq, li, t)];
            double V = x[m.idx.col(Var::volt_sq, from, t)];
            double p = x[m.idx.col(Var::flow_p, li, t)];
            double q = x[m.idx.col(Var::flow_q, li, t)];
            double gap = std::abs(F * V - (p * p + q * q));
            if (gap > g.gap) {
                g.gap = gap;
                g.line = li;
                g.slot = t;
            }
        }
    }
    return g;
}

} // namespace restore
