#pragma once

#include "restore/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace restore {

enum class SwitchKind { tie, sectionalizing };
enum class GeneratorKind { substation, dispatchable_dg, intermittent };

struct SwitchSpec {
    SwitchKind kind = SwitchKind::sectionalizing;
    double op_time_min = 0.5; // remote 0.5, manual 30 by default
    bool remote = true;
};

struct Bus {
    std::string id;
    std::vector<double> demand_p; // p.u., one entry per time slot
    std::vector<double> demand_q;
    double importance = 1.0;
    bool has_load_breaker = true;
    bool is_critical = false;
};

struct Line {
    std::string id; // defaults to "<from>-<to>"
    std::string from, to;
    double r = 0.0, x = 0.0;
    double ampacity = 0.0; // max |I| (p.u.)
    std::optional<SwitchSpec> switch_spec;

    bool is_tie() const {
        return switch_spec && switch_spec->kind == SwitchKind::tie;
    }
    bool is_sectionalizing() const {
        return switch_spec && switch_spec->kind == SwitchKind::sectionalizing;
    }
};

struct Generator {
    std::string id;
    std::string node;
    GeneratorKind kind = GeneratorKind::substation;
    double p_max = 0.0;
    double q_min = 0.0, q_max = 0.0;
    double s_max = 0.0;
    int startup_slots = 0;           // dispatchable DGs only
    double initial_energy = 0.0;     // p.u.-hours, dispatchable DGs only
    std::vector<double> forecast_p;  // intermittent units only
};

struct Weights {
    double w_re = 1.0, w_sw = 1.0, w_op = 1e-3;
};

struct Scenario {
    std::vector<Bus> buses;
    std::vector<Line> lines;
    std::vector<Generator> generators;
    std::vector<std::string> faulted_elements; // bus or line ids
    int horizon_slots = 1;
    double slot_minutes = 15.0;
    double v_min = 0.917, v_max = 1.05;
    Weights weights;
    int max_steps = 1;
    double big_m_voltage_margin = 0.10; // fractional margin on the voltage window

    int bus_index(const std::string& id) const;
    int line_index(const std::string& id) const;
    const Bus& bus(int i) const { return buses[i]; }
    double slot_hours() const { return slot_minutes / 60.0; }
    double horizon_minutes() const { return horizon_slots * slot_minutes; }
};

struct Diagnostic {
    std::string code;    // stable machine-readable key
    std::string message; // human-readable detail
};

/// Parse a scenario JSON document. Profiles are length-normalized to the
/// horizon (scalars broadcast). Throws ParseError / InvariantError.
Scenario parse_scenario(const std::string& text);

/// Structural diagnostics: radial and connected pre-fault topology per
/// feeder, profile consistency, step budget vs DG count. Empty means valid.
std::vector<Diagnostic> validate_scenario(const Scenario& s);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

} // namespace restore
