#pragma once

#include "restore/model.hpp"

#include <array>
#include <optional>

namespace restore {

struct BnbConfig {
    double gap = 1e-6;     // absolute, on the normalized stage objective
    double int_tol = 1e-6;
    double feas_tol = 1e-6;
    long node_limit = 2000000;
    double time_limit_sec = 0.0; // 0: unlimited
    int threads = 1;
    bool deterministic = true; // forces serial node processing
    double solver_tol = 1e-8;
    int solver_iters = 200;
    bool keep_log = false;
};

enum class MipStatus { optimal, infeasible, limit };

const char* to_string(MipStatus s);

struct NodeLog {
    long seq = 0;
    int depth = 0;
    double bound = 0.0;
    char status = '?'; // B branched, I incumbent, P pruned, X infeasible, F failed
};

struct Incumbent {
    MipStatus status = MipStatus::infeasible;
    std::vector<double> x; // model-space solution
    double objective = kInf; // normalized value of the stage objective
    std::array<double, 3> tier_norm{kInf, kInf, kInf};
    std::array<double, 3> tier_raw{kInf, kInf, kInf};
    double bound_gap = kInf;
    long nodes = 0;
    double wall_ms = 0.0;
    std::vector<NodeLog> log;
};

/// Branch-and-bound over the model's binaries for one (raw) linear objective
/// scaled by `obj_scale`. `extra_rows` are appended to the model rows (the
/// lexicographic level constraints); `warm` seeds the incumbent when it is
/// feasible for this stage.
Incumbent solve_misocp(const MISOCPModel& m,
                       const std::vector<std::pair<int, double>>& objective,
                       double obj_constant, double obj_scale,
                       const std::vector<LinRow>& extra_rows,
                       const BnbConfig& cfg,
                       const std::vector<double>* warm = nullptr);

inline Incumbent solve_misocp(const MISOCPModel& m, int tier,
                              const BnbConfig& cfg = {},
                              const std::vector<LinRow>& extra_rows = {},
                              const std::vector<double>* warm = nullptr) {
    const auto& t = m.tiers[tier];
    return solve_misocp(m, t.coef, t.constant, t.normalization, extra_rows, cfg,
                        warm);
}

/// Most-fractional binary, ties broken by family precedence (switching
/// before slot-step assignment before load pickup) and then lowest column.
/// Precondition: at least one binary is fractional beyond `int_tol`.
int select_branch_variable(const std::vector<double>& relaxation,
                           const MISOCPModel& m, double int_tol = 1e-6);

struct LexConfig {
    BnbConfig bnb;
    std::array<double, 3> eps{1e-6, 1e-6, 1e-6}; // per-tier slack, normalized
};

struct LexResult {
    Incumbent incumbent; // from the last stage
    std::array<MipStatus, 3> stage_status{MipStatus::infeasible,
                                          MipStatus::infeasible,
                                          MipStatus::infeasible};
    long total_nodes = 0;
};

/// Hierarchical solve: minimize restored-energy, freeze it within eps, then
/// switching time, then losses. Each stage warm-starts from the previous
/// incumbent.
LexResult lexicographic_solve(const MISOCPModel& m, const LexConfig& cfg = {});

} // namespace restore
