#include "restore/radiality.hpp"

#include <algorithm>

namespace restore {

namespace {

// Direction encoding for edge orientation/flow variables: slot = 2*edge + d.
// d == 0 points into edge.b (a -> b); for virtual source edges d == 0 points
// from the source into the area zone edge.a.
int into_zone_dir(const RestorationGraph::Edge& e, int zone) {
    if (e.source_edge()) return zone == e.a ? 0 : -1;
    if (zone == e.b) return 0;
    if (zone == e.a) return 1;
    return -1;
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) {
        for (int i = 0; i < n; ++i) parent[i] = i;
    }
    int find(int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[b] = a;
        return true;
    }
};

} // namespace

void add_topology_variables(const RestorationGraph& rg, int steps,
                            VariableIndex& idx, std::vector<double>& lo,
                            std::vector<double>& up) {
    auto bound = [&](int col, double l, double u) {
        if (static_cast<int>(lo.size()) <= col) {
            lo.resize(col + 1, -kInf);
            up.resize(col + 1, kInf);
        }
        lo[col] = l;
        up[col] = u;
    };
    const int ne = static_cast<int>(rg.edges.size());
    for (int s = 0; s < steps; ++s)
        for (int e = 0; e < ne; ++e) bound(idx.add(Var::switch_on, e, s), 0, 1);
    for (int s = 0; s < steps; ++s)
        for (int e = 0; e < ne; ++e)
            for (int d = 0; d < 2; ++d)
                bound(idx.add(Var::orient, 2 * e + d, s), 0, 1);
    for (int s = 0; s < steps; ++s)
        for (int e = 0; e < ne; ++e)
            for (int d = 0; d < 2; ++d)
                bound(idx.add(Var::flow_unit, 2 * e + d, s), 0, kInf);
    for (int s = 0; s < steps; ++s)
        for (int k = 0; k < rg.num_zones; ++k)
            bound(idx.add(Var::zone_on, k, s), 0, 1);
    for (int s = 0; s < steps; ++s)
        for (int e = 0; e < ne; ++e)
            if (!rg.edges[e].source_edge() && !rg.edges[e].tie())
                bound(idx.add(Var::sec_open, e, s), 0, 1);
}

ConstraintBlock emit_radiality_constraints(const RestorationGraph& rg, int steps,
                                           const VariableIndex& idx) {
    if (rg.num_zones > 0 && rg.source_count() == 0)
        throw ModelError(
            "no available tie reaches the off-outage area: no restoration path");

    ConstraintBlock cb;
    const int ne = static_cast<int>(rg.edges.size());
    const double m_flow = rg.num_zones + 1;

    for (int s = 0; s < steps; ++s) {
        for (int e = 0; e < ne; ++e) {
            const auto& ed = rg.edges[e];
            int y = idx.col(Var::switch_on, e, s);
            int z0 = idx.col(Var::orient, 2 * e + 0, s);
            int z1 = idx.col(Var::orient, 2 * e + 1, s);
            int f0 = idx.col(Var::flow_unit, 2 * e + 0, s);
            int f1 = idx.col(Var::flow_unit, 2 * e + 1, s);

            if (ed.source_edge()) {
                // Available ties orient from the healthy feeder into the area.
                cb.add("tie-orientation", 0, 0).coef = {{z0, 1.0}, {y, -1.0}};
                cb.add("tie-orientation", 0, 0).coef = {{z1, 1.0}};
            }
            cb.add("orient-sum", 0, 0).coef = {{z0, 1.0}, {z1, 1.0}, {y, -1.0}};

            auto& carry = cb.add("closed-carries-flow", -kInf, 0);
            carry.coef = {{y, 1.0}, {f0, -m_flow}, {f1, -m_flow}};
            carry.big_m = true;

            auto& g0 = cb.add("flow-gate", -kInf, 0);
            g0.coef = {{f0, 1.0}, {z0, -m_flow}};
            g0.big_m = true;
            auto& g1 = cb.add("flow-gate", -kInf, 0);
            g1.coef = {{f1, 1.0}, {z1, -m_flow}};
            g1.big_m = true;
        }

        for (int k = 0; k < rg.num_zones; ++k) {
            // Zone energization equals the orientation mass pointed at it
            // (at most one parent via the [0,1] bound on zone_on).
            auto& parent = cb.add("one-parent", 0, 0);
            parent.coef.emplace_back(idx.col(Var::zone_on, k, s), 1.0);
            // Unit-consumption flow balance: inflow - outflow = energized.
            auto& bal = cb.add("zone-flow-balance", 0, 0);
            bal.coef.emplace_back(idx.col(Var::zone_on, k, s), 1.0);
            for (int e = 0; e < ne; ++e) {
                int din = into_zone_dir(rg.edges[e], k);
                if (din < 0) continue;
                parent.coef.emplace_back(idx.col(Var::orient, 2 * e + din, s), -1.0);
                bal.coef.emplace_back(idx.col(Var::flow_unit, 2 * e + din, s), -1.0);
                bal.coef.emplace_back(idx.col(Var::flow_unit, 2 * e + (1 - din), s),
                                      1.0);
            }
        }

        // Total source outflow equals the number of energized zones.
        auto& total = cb.add("source-flow-total", 0, 0);
        for (int e = 0; e < ne; ++e)
            if (rg.edges[e].source_edge())
                total.coef.emplace_back(idx.col(Var::flow_unit, 2 * e + 0, s), 1.0);
        for (int k = 0; k < rg.num_zones; ++k)
            total.coef.emplace_back(idx.col(Var::zone_on, k, s), -1.0);
    }
    return cb;
}

ConstraintBlock emit_sectionalizer_constraints(const RestorationGraph& rg,
                                               int steps,
                                               const VariableIndex& idx) {
    ConstraintBlock cb;
    const int ne = static_cast<int>(rg.edges.size());
    for (int s = 0; s < steps; ++s) {
        for (int e = 0; e < ne; ++e) {
            const auto& ed = rg.edges[e];
            if (ed.source_edge() || ed.tie()) continue;
            int op = idx.col(Var::sec_open, e, s);
            int y = idx.col(Var::switch_on, e, s);
            // Must be operated open when de-energized with an energized end.
            auto& fa = cb.add("sec-open-force", 0, kInf);
            fa.coef = {{op, 1.0}, {idx.col(Var::zone_on, ed.a, s), -1.0}, {y, 1.0}};
            auto& fb = cb.add("sec-open-force", 0, kInf);
            fb.coef = {{op, 1.0}, {idx.col(Var::zone_on, ed.b, s), -1.0}, {y, 1.0}};
        }
    }
    return cb;
}

bool is_radial_no_island(const RestorationGraph& rg,
                         const std::set<int>& closed_edges,
                         const std::set<int>& energized_zones) {
    const int src = rg.num_zones; // shared super-source vertex
    UnionFind uf(rg.num_zones + 1);
    for (int e : closed_edges) {
        const auto& ed = rg.edges[e];
        int a = ed.a, b = ed.source_edge() ? src : ed.b;
        if (!uf.unite(a, b)) return false; // cycle (incl. two sources per component)
    }
    int root = uf.find(src);
    std::vector<bool> touched(rg.num_zones, false);
    for (int e : closed_edges) {
        const auto& ed = rg.edges[e];
        if (uf.find(ed.a) != root) return false; // component without a source
        touched[ed.a] = true;
        if (!ed.source_edge()) touched[ed.b] = true;
    }
    for (int k = 0; k < rg.num_zones; ++k) {
        bool en = energized_zones.count(k) > 0;
        if (en != touched[k]) return false;
    }
    return true;
}

std::set<FeasibleConfig> enumerate_feasible_configs(const RestorationGraph& rg) {
    const int ne = static_cast<int>(rg.edges.size());
    if (ne > 20)
        throw ModelError("enumerate_feasible_configs: edge count " +
                         std::to_string(ne) + " exceeds the 20-edge guard");
    std::set<FeasibleConfig> out;
    const int src = rg.num_zones;
    for (std::uint32_t mask = 0; mask < (1u << ne); ++mask) {
        UnionFind uf(rg.num_zones + 1);
        bool ok = true;
        for (int e = 0; e < ne && ok; ++e) {
            if (!(mask >> e & 1)) continue;
            const auto& ed = rg.edges[e];
            ok = uf.unite(ed.a, ed.source_edge() ? src : ed.b);
        }
        if (!ok) continue;
        int root = uf.find(src);
        std::uint32_t energized = 0;
        for (int e = 0; e < ne && ok; ++e) {
            if (!(mask >> e & 1)) continue;
            const auto& ed = rg.edges[e];
            if (uf.find(ed.a) != root) {
                ok = false;
                break;
            }
            energized |= 1u << ed.a;
            if (!ed.source_edge()) energized |= 1u << ed.b;
        }
        if (ok) out.insert({mask, energized});
    }
    return out;
}

} // namespace restore
