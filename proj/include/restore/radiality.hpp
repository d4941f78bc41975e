#pragma once

#include "restore/constraint.hpp"
#include "restore/zones.hpp"

#include <cstdint>
#include <set>
#include <utility>

namespace restore {

/// Register the per-step topology variables (switch energization, edge
/// orientation, unit flows, zone energization, sectionalizer operation)
/// for `steps` reconfiguration steps. Bounds are returned through the two
/// vectors, indexed by column.
void add_topology_variables(const RestorationGraph& rg, int steps,
                            VariableIndex& idx, std::vector<double>& lo,
                            std::vector<double>& up);

/// Flow-based radiality rows over the zone graph: orientation bounds and
/// coupling, available ties oriented into the area, at-most-one-parent,
/// closed-switch-must-carry-flow, flow gating, unit-consumption balance and
/// the source-flow total. Errors if the area is nonempty but has no
/// available tie.
ConstraintBlock emit_radiality_constraints(const RestorationGraph& rg, int steps,
                                           const VariableIndex& idx);

/// Sectionalizer operation forcing: an open, de-energized switch adjacent to
/// an energized zone must be operated.
ConstraintBlock emit_sectionalizer_constraints(const RestorationGraph& rg,
                                               int steps,
                                               const VariableIndex& idx);

/// Combinatorial certificate that a configuration is radial, fully sourced
/// and free of DG-supplied islands: closed edges (ties lean on a shared
/// super-source) must form a forest, every closed edge must be connected to
/// a source, and the energized set must be exactly the zones touched by
/// closed edges.
bool is_radial_no_island(const RestorationGraph& rg,
                         const std::set<int>& closed_edges,
                         const std::set<int>& energized_zones);

struct FeasibleConfig {
    std::uint32_t closed_edges = 0;    // bitmask over rg.edges
    std::uint32_t energized_zones = 0; // bitmask over zones

    bool operator<(const FeasibleConfig& o) const {
        return std::tie(closed_edges, energized_zones) <
               std::tie(o.closed_edges, o.energized_zones);
    }
    bool operator==(const FeasibleConfig& o) const {
        return closed_edges == o.closed_edges && energized_zones == o.energized_zones;
    }
};

/// Brute-force oracle: every (closed edge set, energized zone set) accepted
/// by is_radial_no_island, including partial restorations. Guarded against
/// explosion at 20 edges.
std::set<FeasibleConfig> enumerate_feasible_configs(const RestorationGraph& rg);

} // namespace restore
