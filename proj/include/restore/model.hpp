#pragma once

#include "restore/conic.hpp"
#include "restore/constraint.hpp"
#include "restore/radiality.hpp"
#include "restore/zones.hpp"

#include <array>
#include <string>
#include <vector>

namespace restore {

enum class VoltageDrop { full, as_printed };
enum class RestartClock { energization, step };

struct ModelOptions {
    VoltageDrop voltage_drop = VoltageDrop::full;
    RestartClock restart_clock = RestartClock::energization;
    int steps_override = 0;     // 0: use scenario max_steps
    double big_m_inflate = 1.0; // test hook: feasible sets must not depend on it
};

/// One priority level of the hierarchical objective. Values are reported
/// both raw and normalized; the solver minimizes the normalized form.
struct ObjectiveTier {
    std::string name;
    std::vector<std::pair<int, double>> coef; // raw coefficients
    double constant = 0.0;                    // raw additive constant
    double normalization = 1.0;

    double raw(const std::vector<double>& x) const {
        double v = constant;
        for (auto [c, w] : coef) v += w * x[c];
        return v;
    }
    double normalized(const std::vector<double>& x) const {
        return raw(x) / normalization;
    }
};

/// The assembled multi-step restoration program: one variable index, linear
/// rows, cone blocks, the binary set and three objective tiers, plus the
/// scenario context needed to interpret solutions. Immutable once built.
struct MISOCPModel {
    VariableIndex idx;
    std::vector<double> lo, up;
    std::vector<LinRow> rows;
    std::vector<ConeBlock> cones;
    std::vector<int> binaries;
    std::array<ObjectiveTier, 3> tiers; // restored-energy, switching, losses
    int steps = 1;
    int slots = 1;

    Scenario scenario;
    ZoneGraph zg;
    OffOutageArea area;
    RestorationGraph rg;
    ModelOptions options;
    std::vector<int> zone_pos;      // zone id -> rg vertex, -1 if not in area
    std::vector<int> area_bus_pos;  // bus -> position among N* buses, -1 outside
    std::vector<int> area_line_pos; // line -> position among W* lines, -1 outside
    std::vector<int> alive_lines;   // lines kept after fault isolation
    std::vector<int> resources;     // generator indices with injection variables
    std::vector<int> dg_list;       // dispatchable DG generator indices

    int col(Var f, int a, int b) const { return idx.col(f, a, b); }
    double horizon_minutes() const { return scenario.horizon_minutes(); }
    /// Slot-to-time coordinate used by the step windows (end of slot t).
    double slot_coordinate(int t) const {
        return (t + 1) * scenario.slot_minutes;
    }
};

/// Assemble the full program over one variable index. `zg`/`area` must come
/// from partition_zones / locate_off_outage on the same scenario.
MISOCPModel assemble(const Scenario& s, const ZoneGraph& zg,
                     const OffOutageArea& area, const ModelOptions& opt = {});

/// Convenience pipeline: validate, partition, locate, assemble.
MISOCPModel build_model(const Scenario& s, const ModelOptions& opt = {});

enum class CountMode { multi_step, dynamic };

/// Switching-binary count: per reconfiguration step for the multi-step
/// formulation, per reconfiguration instant (one per two slots) for the
/// dynamic one.
int count_binaries(const MISOCPModel& m, CountMode mode);

struct BinaryBreakdown {
    int switching = 0;
    int time_mapping = 0;
    int load_pickup = 0;
    int total() const { return switching + time_mapping + load_pickup; }
};
BinaryBreakdown binary_breakdown(const MISOCPModel& m, CountMode mode);

/// Deterministic text dump of rows and cones sorted by tag, for golden tests.
std::string dump_model(const MISOCPModel& m);

struct SolutionAudit {
    double max_row_violation = 0.0;
    double max_bound_violation = 0.0;
    double max_cone_violation = 0.0;
    double max_integrality_gap = 0.0;
    bool feasible(double tol = 1e-6) const {
        return max_row_violation <= tol && max_bound_violation <= tol &&
               max_cone_violation <= tol && max_integrality_gap <= tol;
    }
};

/// Independent row/cone/bound/integrality evaluator; shares no code with the
/// solver pipeline.
SolutionAudit evaluate_solution(const MISOCPModel& m,
                                const std::vector<double>& x);

struct LoweredProgram {
    ConicProgram prog;
    int model_cols = 0; // prefix of prog variables that map 1:1 to the index
};

/// Lower the model to solver standard form: inequality rows get slack
/// variables, affine cone members get auxiliary variables. `objective` is a
/// raw coefficient vector (divided by `obj_scale`), `fixings` pin columns.
/// A model-space warm vector, when given, is extended over slacks and
/// auxiliaries by evaluation.
LoweredProgram model_to_conic(const MISOCPModel& m,
                              const std::vector<std::pair<int, double>>& objective,
                              double obj_scale,
                              const std::vector<LinRow>& extra_rows,
                              const std::vector<std::pair<int, double>>& fixings,
                              const std::vector<double>* warm_model = nullptr);

} // namespace restore
