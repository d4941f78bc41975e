#include "restore/zones.hpp"

#include <algorithm>
#include <queue>

namespace restore {

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) {
        for (int i = 0; i < n; ++i) parent[i] = i;
    }
    int find(int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    void unite(int a, int b) { parent[find(b)] = find(a); }
};

bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

} // namespace

ZoneGraph partition_zones(const Scenario& s) {
    const int nb = static_cast<int>(s.buses.size());
    UnionFind uf(nb);
    for (const Line& l : s.lines)
        if (!l.switch_spec) uf.unite(s.bus_index(l.from), s.bus_index(l.to));

    // Zone ids ordered by smallest member bus index for determinism.
    ZoneGraph zg;
    zg.zone_of_bus.assign(nb, -1);
    for (int b = 0; b < nb; ++b) {
        int root = uf.find(b);
        if (zg.zone_of_bus[root] == -1) {
            Zone z;
            z.id = static_cast<int>(zg.zones.size());
            zg.zone_of_bus[root] = z.id;
            zg.zones.push_back(z);
        }
        zg.zone_of_bus[b] = zg.zone_of_bus[root];
        zg.zones[zg.zone_of_bus[b]].buses.push_back(b);
    }

    zg.zone_of_line.assign(s.lines.size(), -1);
    for (size_t li = 0; li < s.lines.size(); ++li) {
        const Line& l = s.lines[li];
        int za = zg.zone_of_bus[s.bus_index(l.from)];
        int zb = zg.zone_of_bus[s.bus_index(l.to)];
        if (!l.switch_spec) {
            // A switchless line lies wholly inside one zone.
            zg.zone_of_line[li] = za;
            zg.zones[za].internal_lines.push_back(static_cast<int>(li));
        } else {
            if (za == zb)
                throw InvariantError("line '" + l.id +
                                     "': switch-equipped line joins a zone to itself");
            zg.edges.push_back({static_cast<int>(li), za, zb});
        }
    }

    for (const Generator& g : s.generators) {
        int z = zg.zone_of_bus[s.bus_index(g.node)];
        if (g.kind == GeneratorKind::substation) zg.zones[z].has_substation = true;
        if (g.kind == GeneratorKind::dispatchable_dg) zg.zones[z].has_dg = true;
    }
    return zg;
}

OffOutageArea locate_off_outage(const Scenario& s, const ZoneGraph& zg) {
    OffOutageArea area;
    if (s.faulted_elements.empty()) return area;

    const int nz = static_cast<int>(zg.zones.size());

    // Fault pocket: zones containing a faulted bus or faulted switchless
    // line. The zone boundary switches are the isolators; they are opened,
    // which removes every edge incident to a pocket zone. Faulted switched
    // lines are isolated by their own switch.
    std::vector<bool> pocket(nz, false);
    std::vector<bool> edge_removed(zg.edges.size(), false);
    for (const auto& el : s.faulted_elements) {
        int bi = s.bus_index(el);
        if (bi >= 0) pocket[zg.zone_of_bus[bi]] = true;
        int li = s.line_index(el);
        if (li >= 0) {
            if (zg.zone_of_line[li] >= 0)
                pocket[zg.zone_of_line[li]] = true;
            else
                for (size_t e = 0; e < zg.edges.size(); ++e)
                    if (zg.edges[e].line == li) edge_removed[e] = true;
        }
    }
    for (size_t e = 0; e < zg.edges.size(); ++e)
        if (pocket[zg.edges[e].zone_a] || pocket[zg.edges[e].zone_b])
            edge_removed[e] = true;

    // Energized zones: reachable from a non-pocket substation zone through
    // closed (sectionalizing, non-removed) edges. Ties stay open post-fault.
    std::vector<bool> energized(nz, false);
    std::queue<int> bfs;
    for (int z = 0; z < nz; ++z)
        if (zg.zones[z].has_substation && !pocket[z]) {
            energized[z] = true;
            bfs.push(z);
        }
    while (!bfs.empty()) {
        int z = bfs.front();
        bfs.pop();
        for (size_t e = 0; e < zg.edges.size(); ++e) {
            if (edge_removed[e]) continue;
            if (!s.lines[zg.edges[e].line].is_sectionalizing()) continue;
            int za = zg.edges[e].zone_a, zb = zg.edges[e].zone_b;
            int other = (za == z) ? zb : (zb == z ? za : -1);
            if (other >= 0 && !energized[other] && !pocket[other]) {
                energized[other] = true;
                bfs.push(other);
            }
        }
    }

    for (int z = 0; z < nz; ++z) {
        if (pocket[z]) {
            area.quarantined_zones.push_back(z);
        } else if (!energized[z]) {
            area.zones.push_back(z);
            for (int b : zg.zones[z].buses) area.buses.push_back(b);
            for (int li : zg.zones[z].internal_lines) area.lines.push_back(li);
        }
    }
    if (area.zones.empty())
        throw ModelError("fault isolates nothing: no de-energized area to restore");

    std::vector<bool> dead(nz, false);
    for (int z : area.zones) dead[z] = true;

    for (size_t e = 0; e < zg.edges.size(); ++e) {
        if (edge_removed[e]) continue;
        int za = zg.edges[e].zone_a, zb = zg.edges[e].zone_b;
        bool a_dead = dead[za], b_dead = dead[zb];
        if (a_dead && b_dead) {
            area.lines.push_back(zg.edges[e].line);
        } else if (a_dead != b_dead) {
            const Line& l = s.lines[zg.edges[e].line];
            if (l.is_tie()) {
                // Exactly one endpoint inside N*: an available tie.
                area.available_ties.push_back(zg.edges[e].line);
                area.lines.push_back(zg.edges[e].line);
            }
            // A closed sectionalizer between live and dead zones cannot
            // exist: the live side would have energized the dead side.
            // A sectionalizer here means it borders the pocket (removed).
        }
    }

    // Healthy feeders behind the available ties, identified by substation.
    std::sort(area.available_ties.begin(), area.available_ties.end());
    for (int li : area.available_ties) {
        const Line& l = s.lines[li];
        int za = zg.zone_of_bus[s.bus_index(l.from)];
        int zb = zg.zone_of_bus[s.bus_index(l.to)];
        int live = dead[za] ? zb : za;
        // Walk to the substation of the live zone's component.
        std::vector<bool> seen(nz, false);
        std::queue<int> q;
        q.push(live);
        seen[live] = true;
        std::string sub;
        while (!q.empty() && sub.empty()) {
            int z = q.front();
            q.pop();
            if (zg.zones[z].has_substation) {
                for (const Generator& g : s.generators)
                    if (g.kind == GeneratorKind::substation &&
                        zg.zone_of_bus[s.bus_index(g.node)] == z)
                        sub = g.node;
                break;
            }
            for (size_t e = 0; e < zg.edges.size(); ++e) {
                if (edge_removed[e]) continue;
                if (!s.lines[zg.edges[e].line].is_sectionalizing()) continue;
                int za2 = zg.edges[e].zone_a, zb2 = zg.edges[e].zone_b;
                int other = (za2 == z) ? zb2 : (zb2 == z ? za2 : -1);
                if (other >= 0 && !seen[other] && energized[other]) {
                    seen[other] = true;
                    q.push(other);
                }
            }
        }
        if (!sub.empty() && !contains(area.available_feeders, sub))
            area.available_feeders.push_back(sub);
    }

    std::sort(area.buses.begin(), area.buses.end());
    std::sort(area.lines.begin(), area.lines.end());
    area.lines.erase(std::unique(area.lines.begin(), area.lines.end()),
                     area.lines.end());
    std::sort(area.zones.begin(), area.zones.end());
    return area;
}

RestorationGraph restoration_graph(const Scenario& s, const ZoneGraph& zg,
                                   const OffOutageArea& area,
                                   std::vector<int>* zone_pos) {
    RestorationGraph rg;
    std::vector<int> pos(zg.zones.size(), -1);
    for (size_t k = 0; k < area.zones.size(); ++k)
        pos[area.zones[k]] = static_cast<int>(k);
    rg.num_zones = static_cast<int>(area.zones.size());
    rg.zone_has_dg.assign(rg.num_zones, false);
    for (int z : area.zones)
        if (zg.zones[z].has_dg) rg.zone_has_dg[pos[z]] = true;

    std::vector<bool> dead(zg.zones.size(), false);
    for (int z : area.zones) dead[z] = true;
    auto is_available = [&](int line) {
        for (int t : area.available_ties)
            if (t == line) return true;
        return false;
    };

    for (const ZoneEdge& e : zg.edges) {
        const Line& l = s.lines[e.line];
        bool a_dead = dead[e.zone_a], b_dead = dead[e.zone_b];
        RestorationGraph::Edge edge;
        edge.line = e.line;
        edge.kind = l.switch_spec ? l.switch_spec->kind : SwitchKind::sectionalizing;
        edge.op_time_min = l.switch_spec ? l.switch_spec->op_time_min : 0.5;
        if (a_dead && b_dead) {
            edge.a = pos[e.zone_a];
            edge.b = pos[e.zone_b];
            rg.edges.push_back(edge);
        } else if ((a_dead != b_dead) && is_available(e.line)) {
            edge.a = pos[a_dead ? e.zone_a : e.zone_b];
            edge.b = -1; // virtual source on the healthy side
            rg.edges.push_back(edge);
        }
    }
    std::sort(rg.edges.begin(), rg.edges.end(),
              [](const RestorationGraph::Edge& x, const RestorationGraph::Edge& y) {
                  return x.line < y.line;
              });
    if (zone_pos) *zone_pos = pos;
    return rg;
}

} // namespace restore
