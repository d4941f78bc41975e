#pragma once

#include "restore/scenario.hpp"

#include <set>
#include <string>
#include <vector>

namespace restore {

struct Zone {
    int id = 0;
    std::vector<int> buses;           // indices into Scenario::buses
    std::vector<int> internal_lines;  // switchless member lines
    bool has_substation = false;
    bool has_dg = false;
};

struct ZoneEdge {
    int line = 0; // index into Scenario::lines (switch-equipped)
    int zone_a = 0, zone_b = 0;
};

/// Zones are the connected components left after removing every
/// switch-equipped line; switchable lines become the edges between them.
struct ZoneGraph {
    std::vector<Zone> zones;
    std::vector<ZoneEdge> edges;
    std::vector<int> zone_of_bus;  // bus index -> zone id
    std::vector<int> zone_of_line; // line index -> zone id, -1 for switched

    int zone_of(const std::string& bus_id, const Scenario& s) const {
        return zone_of_bus[s.bus_index(bus_id)];
    }
};

struct OffOutageArea {
    std::vector<int> buses;       // N*
    std::vector<int> lines;       // W* (internal switchless + switched edges)
    std::vector<int> zones;       // Z*
    std::vector<int> quarantined_zones; // fault pocket, not restorable
    std::vector<int> available_ties;    // line indices, one endpoint in N*
    std::vector<std::string> available_feeders; // substation bus ids

    bool in_area(int bus) const {
        for (int b : buses)
            if (b == bus) return true;
        return false;
    }
};

ZoneGraph partition_zones(const Scenario& s);

/// Isolate the fault (faulted elements plus their surrounding switches, at
/// zone granularity) and collect everything left without a substation path.
/// Errors if a fault is declared but nothing is de-energized. An empty fault
/// list yields an empty area (no restoration problem, trivially feasible).
OffOutageArea locate_off_outage(const Scenario& s, const ZoneGraph& zg);

/// The radiality model works on the off-outage zones plus one virtual source
/// vertex per available tie. This view is also buildable directly in tests.
struct RestorationGraph {
    int num_zones = 0;                  // real (off-outage) zones: 0..num_zones-1
    struct Edge {
        int a = 0, b = 0;               // b == -1 means a virtual source edge into `a`
        int line = -1;                  // scenario line, -1 for synthetic graphs
        SwitchKind kind = SwitchKind::sectionalizing;
        double op_time_min = 0.5;

        bool source_edge() const { return b < 0; }
        bool tie() const { return kind == SwitchKind::tie; }
    };
    std::vector<Edge> edges;
    std::vector<bool> zone_has_dg;

    int source_count() const {
        int n = 0;
        for (const auto& e : edges) n += e.source_edge() ? 1 : 0;
        return n;
    }
};

/// Project the scenario's off-outage area onto the radiality view.
/// `zone_pos[z]` maps scenario zone ids to graph vertex positions.
RestorationGraph restoration_graph(const Scenario& s, const ZoneGraph& zg,
                                   const OffOutageArea& area,
                                   std::vector<int>* zone_pos = nullptr);

} // namespace restore
