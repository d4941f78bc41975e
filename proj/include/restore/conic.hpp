#pragma once

#include "restore/common.hpp"

#include <Eigen/SparseCore>

#include <optional>
#include <string>
#include <vector>

namespace restore {

/// A continuous second-order-cone program:
///
///   minimize    c'v
///   subject to  A v = b
///               lo <= v <= up          (entrywise, +-inf allowed)
///               || (v[u_1], ..., v[u_k]) ||_2 <= v[t]   per cone
///
/// Cones are index tuples over the variable vector; the first index is the
/// bound variable t, the rest are the norm arguments.
struct ConicProgram {
    int num_vars = 0;
    Eigen::VectorXd c;
    Eigen::SparseMatrix<double> A; // row-major assembly via triplets
    Eigen::VectorXd b;
    Eigen::VectorXd lo, up;
    std::vector<std::vector<int>> cones;
    std::optional<Eigen::VectorXd> warm_start;

    void resize(int n) {
        num_vars = n;
        c = Eigen::VectorXd::Zero(n);
        lo = Eigen::VectorXd::Constant(n, -kInf);
        up = Eigen::VectorXd::Constant(n, kInf);
    }
};

enum class SolveStatus { optimal, infeasible, unbounded, max_iters };

const char* to_string(SolveStatus s);

struct Residuals {
    double primal = 0.0;
    double dual = 0.0;
    double gap = 0.0;
};

struct SolverResult {
    SolveStatus status = SolveStatus::max_iters;
    Eigen::VectorXd primal;      // length num_vars; certificate ray if infeasible/unbounded
    Eigen::VectorXd dual_eq;     // multipliers for A v = b
    Eigen::VectorXd dual_ineq;   // multipliers for the canonical inequality system
    double objective = 0.0;
    Residuals residuals;
    int iterations = 0;
};

struct SolverSettings {
    double tol = 1e-7;
    int max_iters = 200;
    double static_reg = 1e-8;
};

/// Solve a conic program with a primal-dual interior-point method
/// (Nesterov-Todd scaling, Mehrotra predictor-corrector) on the homogeneous
/// self-dual embedding, so infeasibility is certified rather than guessed.
/// Deterministic: identical inputs produce identical results.
SolverResult solve(const ConicProgram& p, const SolverSettings& settings = {});

inline SolverResult solve(const ConicProgram& p, double tol, int max_iters) {
    SolverSettings s;
    s.tol = tol;
    s.max_iters = max_iters;
    return solve(p, s);
}

/// Standalone KKT residual audit, sharing no state with the iteration loop.
/// `dual_eq`/`dual_ineq` use the same canonical layout the solver reports:
/// inequality multipliers ordered as [upper bounds, lower bounds, cones] by
/// ascending variable index.
Residuals kkt_residuals(const ConicProgram& p, const Eigen::VectorXd& primal,
                        const Eigen::VectorXd& dual_eq,
                        const Eigen::VectorXd& dual_ineq);

/// Dump a program in a sparse triplet text format for offline debugging.
std::string dump_program(const ConicProgram& p);

} // namespace restore
