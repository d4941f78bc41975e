#pragma once

#include "restore/model.hpp"
#include "restore/scenario.hpp"

#include <string>
#include <vector>

namespace restore {

/// Exact power-flow state of one time slot. De-energized buses carry zero
/// voltage; lines that are open or dead carry zero current.
struct PFSlice {
    bool converged = false;
    double mismatch = kInf; // max nodal power mismatch (p.u.)
    int sweeps = 0;
    std::vector<double> v_mag; // per bus
    std::vector<double> i_mag; // per line
    std::vector<bool> closed;  // per line, electrical state used
    std::vector<double> slack_p, slack_q; // per generator (substations only)
};

struct PFResult {
    std::vector<PFSlice> slices; // one per slot
    bool all_converged() const {
        for (const auto& s : slices)
            if (!s.converged) return false;
        return true;
    }
};

/// Backward/forward sweep on each energized component. Components must be
/// trees with exactly one substation; anything else is rejected. Injections
/// are fixed (grid-feeding) for every non-substation resource; substations
/// hold their slack voltage.
PFSlice radial_power_flow(const Scenario& s, const std::vector<bool>& closed_lines,
                          const std::vector<double>& load_p,
                          const std::vector<double>& load_q,
                          const std::vector<double>& gen_p,
                          const std::vector<double>& gen_q,
                          const std::vector<double>& slack_v);

struct Violation {
    std::string element;
    int slot = 0;
    std::string kind; // undervoltage | overvoltage | overcurrent | ...
    double value = 0.0, limit = 0.0;
};

struct LimitReport {
    std::vector<Violation> violations;
    double min_voltage = kInf, max_voltage = 0.0;
    std::string min_voltage_at, max_voltage_at;
    int min_voltage_slot = -1, max_voltage_slot = -1;
    double min_current_margin = kInf;
    std::string min_margin_line;
    int min_margin_slot = -1;
};

LimitReport check_operational_limits(const PFResult& pf, const Scenario& s);

struct SocGap {
    double gap = 0.0;
    int line = -1, slot = -1;
};

/// Largest |F*V_from - (p^2 + q^2)| over line-slots: the tightness of the
/// conic current relaxation at a solution.
SocGap soc_gap(const MISOCPModel& m, const std::vector<double>& x);

} // namespace restore
