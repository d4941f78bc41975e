#include "restore/conic.hpp"

#include "restore/common.hpp"
#include "restore/ldl.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace restore {

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::unbounded: return "unbounded";
        case SolveStatus::max_iters: return "max_iters";
    }
    return "?";
}

namespace {

// ---------------------------------------------------------------------------
// Internal standard form
//
//   min c'x   s.t.  A x = b,   G x + s = h,   s in K = R+^l x Q_d1 x ...
//
// Bounds become rows of the LP cone, variable cones become SOC slack blocks.
// Fixed variables (lo == up) are substituted out before the solve.
// ---------------------------------------------------------------------------

struct Standard {
    int n = 0, p = 0, m = 0, lp = 0;
    Eigen::VectorXd c;
    Eigen::SparseMatrix<double> A, G; // column-major
    Eigen::VectorXd b, h;
    std::vector<int> soc_start, soc_dim;
    double obj_offset = 0.0;

    std::vector<int> to_reduced;   // original var -> reduced index or -1
    std::vector<int> to_original;  // reduced -> original
    Eigen::VectorXd fixed_value;   // original-indexed, valid where to_reduced == -1

    bool presolved_infeasible = false;
    bool trivial = false; // nothing left to solve
};

bool build_standard(const ConicProgram& prog, Standard& S) {
    const int n0 = prog.num_vars;
    S.to_reduced.assign(n0, -1);
    S.fixed_value = Eigen::VectorXd::Zero(n0);
    for (int i = 0; i < n0; ++i) {
        if (prog.lo[i] > prog.up[i] + 1e-12) {
            S.presolved_infeasible = true;
            return true;
        }
        if (prog.lo[i] == prog.up[i]) {
            S.fixed_value[i] = prog.lo[i];
        } else {
            S.to_reduced[i] = static_cast<int>(S.to_original.size());
            S.to_original.push_back(i);
        }
    }
    S.n = static_cast<int>(S.to_original.size());

    S.c = Eigen::VectorXd::Zero(S.n);
    for (int i = 0; i < n0; ++i) {
        if (S.to_reduced[i] >= 0)
            S.c[S.to_reduced[i]] = prog.c[i];
        else
            S.obj_offset += prog.c[i] * S.fixed_value[i];
    }

    // Equalities: substitute fixed variables into b; drop constant rows.
    const int p0 = static_cast<int>(prog.A.rows());
    Eigen::VectorXd b_adj = prog.b;
    std::vector<bool> row_nonconst(p0, false);
    std::vector<Eigen::Triplet<double>> atrips;
    for (int j = 0; j < prog.A.outerSize(); ++j) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(prog.A, j); it; ++it) {
            if (S.to_reduced[j] >= 0) {
                row_nonconst[it.row()] = true;
            } else {
                b_adj[it.row()] -= it.value() * S.fixed_value[j];
            }
        }
    }
    std::vector<int> row_map(p0, -1);
    int p = 0;
    for (int r = 0; r < p0; ++r) {
        if (row_nonconst[r]) {
            row_map[r] = p++;
        } else if (std::abs(b_adj[r]) > 1e-9 * std::max(1.0, std::abs(prog.b[r]))) {
            S.presolved_infeasible = true;
            return true;
        }
    }
    S.p = p;
    S.b.resize(p);
    for (int r = 0; r < p0; ++r)
        if (row_map[r] >= 0) S.b[row_map[r]] = b_adj[r];
    for (int j = 0; j < prog.A.outerSize(); ++j) {
        if (S.to_reduced[j] < 0) continue;
        for (Eigen::SparseMatrix<double>::InnerIterator it(prog.A, j); it; ++it) {
            if (row_map[it.row()] >= 0)
                atrips.emplace_back(row_map[it.row()], S.to_reduced[j], it.value());
        }
    }
    S.A.resize(S.p, S.n);
    S.A.setFromTriplets(atrips.begin(), atrips.end());

    // Inequality system: upper bounds, then lower bounds, then cones.
    std::vector<Eigen::Triplet<double>> gtrips;
    std::vector<double> hvals;
    for (int i = 0; i < n0; ++i) {
        if (S.to_reduced[i] < 0 || !std::isfinite(prog.up[i])) continue;
        gtrips.emplace_back(static_cast<int>(hvals.size()), S.to_reduced[i], 1.0);
        hvals.push_back(prog.up[i]);
    }
    for (int i = 0; i < n0; ++i) {
        if (S.to_reduced[i] < 0 || !std::isfinite(prog.lo[i])) continue;
        gtrips.emplace_back(static_cast<int>(hvals.size()), S.to_reduced[i], -1.0);
        hvals.push_back(-prog.lo[i]);
    }
    S.lp = static_cast<int>(hvals.size());
    for (const auto& cone : prog.cones) {
        // A cone whose members are all fixed reduces to a constant check.
        bool any_free = false;
        for (int v : cone)
            if (S.to_reduced[v] >= 0) any_free = true;
        if (!any_free) {
            double t = S.fixed_value[cone[0]];
            double nrm = 0;
            for (size_t k = 1; k < cone.size(); ++k)
                nrm += S.fixed_value[cone[k]] * S.fixed_value[cone[k]];
            if (std::sqrt(nrm) > t + 1e-9) {
                S.presolved_infeasible = true;
                return true;
            }
            continue;
        }
        S.soc_start.push_back(static_cast<int>(hvals.size()));
        S.soc_dim.push_back(static_cast<int>(cone.size()));
        for (int v : cone) {
            int row = static_cast<int>(hvals.size());
            if (S.to_reduced[v] >= 0) {
                gtrips.emplace_back(row, S.to_reduced[v], -1.0);
                hvals.push_back(0.0);
            } else {
                hvals.push_back(S.fixed_value[v]); // s_row = const
            }
        }
    }
    S.m = static_cast<int>(hvals.size());
    S.G.resize(S.m, S.n);
    S.G.setFromTriplets(gtrips.begin(), gtrips.end());
    S.h = Eigen::Map<Eigen::VectorXd>(hvals.data(), S.m);

    S.trivial = (S.n == 0);
    return true;
}

// ---------------------------------------------------------------------------
// Cone arithmetic over the slack vector layout of `Standard`
// ---------------------------------------------------------------------------

struct Scaling {
    Eigen::VectorXd lp_w2;             // s_i / z_i per LP row
    std::vector<Eigen::VectorXd> wbar; // NT point per SOC
    std::vector<double> eta2;          // eta^2 per SOC
    std::vector<Eigen::MatrixXd> w2;   // dense eta^2 * H^2 per SOC
    Eigen::VectorXd lambda;            // scaled point, full m-vector
};

double cone_min_margin(const Standard& S, const Eigen::VectorXd& v) {
    double mn = kInf;
    for (int i = 0; i < S.lp; ++i) mn = std::min(mn, v[i]);
    for (size_t k = 0; k < S.soc_start.size(); ++k) {
        int st = S.soc_start[k], d = S.soc_dim[k];
        mn = std::min(mn, v[st] - v.segment(st + 1, d - 1).norm());
    }
    return mn;
}

void cone_unit(const Standard& S, Eigen::VectorXd& e) {
    e = Eigen::VectorXd::Zero(S.m);
    for (int i = 0; i < S.lp; ++i) e[i] = 1.0;
    for (size_t k = 0; k < S.soc_start.size(); ++k) e[S.soc_start[k]] = 1.0;
}

// Returns false if either point left the cone interior.
bool update_scaling(const Standard& S, const Eigen::VectorXd& s,
                    const Eigen::VectorXd& z, Scaling& W) {
    W.lp_w2.resize(S.lp);
    for (int i = 0; i < S.lp; ++i) {
        if (s[i] <= 0 || z[i] <= 0) return false;
        W.lp_w2[i] = s[i] / z[i];
    }
    const size_t nc = S.soc_start.size();
    W.wbar.resize(nc);
    W.eta2.resize(nc);
    W.w2.resize(nc);
    W.lambda.resize(S.m);
    W.lambda.head(S.lp) = (s.head(S.lp).array() * z.head(S.lp).array()).sqrt();
    for (size_t k = 0; k < nc; ++k) {
        int st = S.soc_start[k], d = S.soc_dim[k];
        auto sk = s.segment(st, d);
        auto zk = z.segment(st, d);
        double sres = sk[0] * sk[0] - sk.tail(d - 1).squaredNorm();
        double zres = zk[0] * zk[0] - zk.tail(d - 1).squaredNorm();
        if (sres <= 0 || zres <= 0) return false;
        double snorm = std::sqrt(sres), znorm = std::sqrt(zres);
        Eigen::VectorXd sb = sk / snorm, zb = zk / znorm;
        double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
        Eigen::VectorXd wb(d);
        wb[0] = (sb[0] + zb[0]) / (2.0 * gamma);
        wb.tail(d - 1) =
            (sb.tail(d - 1) - zb.tail(d - 1)) / (2.0 * gamma);
        W.wbar[k] = wb;
        W.eta2[k] = snorm / znorm;

        // The scaling block is Wbar = [a q'; q  I + qq'/(1+a)] with
        // wbar = (a; q); it satisfies Wbar^2 = 2 wbar wbar' - J, so the
        // KKT system only needs the Householder form.
        Eigen::MatrixXd J = -Eigen::MatrixXd::Identity(d, d);
        J(0, 0) = 1.0;
        W.w2[k] = W.eta2[k] * (2.0 * wb * wb.transpose() - J);

        // lambda = W z = eta * Wbar z
        double eta = std::sqrt(W.eta2[k]);
        double a = wb[0];
        auto q = wb.tail(d - 1);
        double zeta = q.dot(zk.tail(d - 1));
        W.lambda[st] = eta * (a * zk[0] + zeta);
        W.lambda.segment(st + 1, d - 1) =
            eta * (zk.tail(d - 1) + (zk[0] + zeta / (1.0 + a)) * q);
    }
    return true;
}

Eigen::VectorXd scale_W(const Standard& S, const Scaling& W,
                        const Eigen::VectorXd& v) {
    Eigen::VectorXd r(S.m);
    r.head(S.lp) = W.lp_w2.array().sqrt() * v.head(S.lp).array();
    for (size_t k = 0; k < S.soc_start.size(); ++k) {
        int st = S.soc_start[k], d = S.soc_dim[k];
        double a = W.wbar[k][0];
        auto q = W.wbar[k].tail(d - 1);
        auto vk = v.segment(st, d);
        double eta = std::sqrt(W.eta2[k]);
        double zeta = q.dot(vk.tail(d - 1));
        r[st] = eta * (a * vk[0] + zeta);
        r.segment(st + 1, d - 1) =
            eta * (vk.tail(d - 1) + (vk[0] + zeta / (1.0 + a)) * q);
    }
    return r;
}

// Wbar^{-1} is Wbar with q negated, so W^{-1} follows the same closed form.
Eigen::VectorXd scale_Winv(const Standard& S, const Scaling& W,
                           const Eigen::VectorXd& v) {
    Eigen::VectorXd r(S.m);
    r.head(S.lp) = v.head(S.lp).array() / W.lp_w2.array().sqrt();
    for (size_t k = 0; k < S.soc_start.size(); ++k) {
        int st = S.soc_start[k], d = S.soc_dim[k];
        double a = W.wbar[k][0];
        auto q = W.wbar[k].tail(d - 1);
        auto vk = v.segment(st, d);
        double eta = std::sqrt(W.eta2[k]);
        double zeta = q.dot(vk.tail(d - 1));
        r[st] = (a * vk[0] - zeta) / eta;
        r.segment(st + 1, d - 1) =
            (vk.tail(d - 1) - (vk[0] - zeta / (1.0 + a)) * q) / eta;
    }
    return r;
}

// Jordan product u o v blockwise.
Eigen::VectorXd jordan_circ(const Standard& S, const Eigen::VectorXd& u,
                            const Eigen::VectorXd& v) {
    Eigen::VectorXd r(S.m);
    r.head(S.lp) = u.head(S.lp).array() * v.head(S.lp).array();
    for (size_t k = 0; k < S.soc_start.size(); ++k) {
        int st = S.soc_start[k], d = S.soc_dim[k];
        auto uk = u.segment(st, d);
        auto vk = v.segment(st, d);
        r[st] = uk.dot(vk);
        r.segment(st + 1, d - 1) =
            uk[0] * vk.tail(d - 1) + vk[0] * uk.tail(d - 1);
    }
    return r;
}

// Solve lambda o x = w blockwise.
Eigen::VectorXd jordan_solve(const Standard& S, const Eigen::VectorXd& lambda,
                             const Eigen::VectorXd& w) {
    Eigen::VectorXd r(S.m);
    r.head(S.lp) = w.head(S.lp).array() / lambda.head(S.lp).array();
    for (size_t k = 0; k < S.soc_start.size(); ++k) {
        int st = S.soc_start[k], d = S.soc_dim[k];
        auto lk = lambda.segment(st, d);
        auto wk = w.segment(st, d);
        double det = lk[0] * lk[0] - lk.tail(d - 1).squaredNorm();
        double x0 = (lk[0] * wk[0] - lk.tail(d - 1).dot(wk.tail(d - 1))) / det;
        r[st] = x0;
        r.segment(st + 1, d - 1) =
            (wk.tail(d - 1) - x0 * lk.tail(d - 1)) / lk[0];
    }
    return r;
}

// Largest step a in [0, cap] keeping u + a*d in the cone.
double max_step(const Standard& S, const Eigen::VectorXd& u,
                const Eigen::VectorXd& d, double cap) {
    double a = cap;
    for (int i = 0; i < S.lp; ++i)
        if (d[i] < 0) a = std::min(a, -u[i] / d[i]);
    for (size_t k = 0; k < S.soc_start.size(); ++k) {
        int st = S.soc_start[k], dim = S.soc_dim[k];
        auto uk = u.segment(st, dim);
        auto dk = d.segment(st, dim);
        double qa = dk[0] * dk[0] - dk.tail(dim - 1).squaredNorm();
        double qb = 2.0 * (uk[0] * dk[0] - uk.tail(dim - 1).dot(dk.tail(dim - 1)));
        double qc = uk[0] * uk[0] - uk.tail(dim - 1).squaredNorm();
        double root = kInf;
        if (std::abs(qa) < 1e-14) {
            if (qb < -1e-14) root = -qc / qb;
        } else {
            double disc = qb * qb - 4.0 * qa * qc;
            if (disc >= 0) {
                double sq = std::sqrt(disc);
                double qq = -0.5 * (qb + (qb >= 0 ? sq : -sq));
                double r1 = qq / qa;
                double r2 = (qq != 0.0) ? qc / qq : kInf;
                if (r1 > 1e-14) root = std::min(root, r1);
                if (r2 > 1e-14) root = std::min(root, r2);
            }
        }
        a = std::min(a, root);
    }
    return a;
}

// ---------------------------------------------------------------------------
// KKT system assembly and factorization wrapper
// ---------------------------------------------------------------------------

struct KktSolver {
    const Standard* S = nullptr;
    int dim = 0;
    double reg = 1e-8;
    Eigen::SparseMatrix<double> K;
    std::vector<int> sign;
    std::vector<int> scaling_pos; // value positions of the -W^2 block entries
    QdLdl ldl;

    // The pattern is fixed: A/G blocks once, the scaling block updated in
    // place between factorizations.
    void build_structure() {
        const auto& st = *S;
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(st.A.nonZeros() * 2 + st.G.nonZeros() * 2 + st.m * 4 + st.n);
        for (int j = 0; j < st.A.outerSize(); ++j)
            for (Eigen::SparseMatrix<double>::InnerIterator it(st.A, j); it; ++it) {
                t.emplace_back(st.n + it.row(), j, it.value());
                t.emplace_back(j, st.n + it.row(), it.value());
            }
        for (int j = 0; j < st.G.outerSize(); ++j)
            for (Eigen::SparseMatrix<double>::InnerIterator it(st.G, j); it; ++it) {
                t.emplace_back(st.n + st.p + it.row(), j, it.value());
                t.emplace_back(j, st.n + st.p + it.row(), it.value());
            }
        for (int i = 0; i < st.lp; ++i)
            t.emplace_back(st.n + st.p + i, st.n + st.p + i, -1.0);
        for (size_t k = 0; k < st.soc_start.size(); ++k) {
            int s0 = st.soc_start[k], d = st.soc_dim[k];
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    t.emplace_back(st.n + st.p + s0 + a, st.n + st.p + s0 + b,
                                   -(a == b ? 1.0 : 0.0));
        }
        K.resize(dim, dim);
        K.setFromTriplets(t.begin(), t.end());
        K.makeCompressed();

        auto value_pos = [&](int row, int col) {
            for (int ptr = K.outerIndexPtr()[col]; ptr < K.outerIndexPtr()[col + 1];
                 ++ptr)
                if (K.innerIndexPtr()[ptr] == row) return ptr;
            throw ModelError("kkt: missing structural entry");
        };
        scaling_pos.clear();
        for (int i = 0; i < st.lp; ++i)
            scaling_pos.push_back(value_pos(st.n + st.p + i, st.n + st.p + i));
        for (size_t k = 0; k < st.soc_start.size(); ++k) {
            int s0 = st.soc_start[k], d = st.soc_dim[k];
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    scaling_pos.push_back(
                        value_pos(st.n + st.p + s0 + a, st.n + st.p + s0 + b));
        }
        sign.assign(dim, 1);
        for (int i = st.n; i < dim; ++i) sign[i] = -1;
        ldl.analyze(K);
    }

    void update_scaling_block(const Scaling& W, bool identity_scaling) {
        const auto& st = *S;
        size_t pos = 0;
        double* vals = K.valuePtr();
        for (int i = 0; i < st.lp; ++i)
            vals[scaling_pos[pos++]] = identity_scaling ? -1.0 : -W.lp_w2[i];
        for (size_t k = 0; k < st.soc_start.size(); ++k) {
            int d = st.soc_dim[k];
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    vals[scaling_pos[pos++]] =
                        identity_scaling ? -(a == b ? 1.0 : 0.0) : -W.w2[k](a, b);
        }
    }

    bool factor() { return ldl.factorize(K, sign, reg); }

    // Solve K u = rhs, refining against the unregularized matrix until the
    // backward residual is small relative to the right-hand side.
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
        Eigen::VectorXd u = rhs;
        ldl.solve(u);
        const double target = 1e-14 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
        for (int round = 0; round < 2; ++round) {
            Eigen::VectorXd res = rhs - K * u;
            if (res.lpNorm<Eigen::Infinity>() <= target) break;
            Eigen::VectorXd cor = res;
            ldl.solve(cor);
            u += cor;
        }
        return u;
    }

    Eigen::VectorXd solve3(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2,
                           const Eigen::VectorXd& r3) const {
        Eigen::VectorXd rhs(dim);
        rhs << r1, r2, r3;
        return solve(rhs);
    }
};

SolverResult finish_trivial(const ConicProgram& prog, const Standard& S) {
    // All variables fixed: verify the remaining constant constraints.
    SolverResult res;
    res.primal = S.fixed_value;
    res.dual_eq = Eigen::VectorXd::Zero(prog.A.rows());
    int ineq_rows = 0;
    for (int i = 0; i < prog.num_vars; ++i) {
        if (prog.lo[i] == prog.up[i]) continue;
        if (std::isfinite(prog.up[i])) ++ineq_rows;
        if (std::isfinite(prog.lo[i])) ++ineq_rows;
    }
    for (const auto& c : prog.cones) ineq_rows += static_cast<int>(c.size());
    res.dual_ineq = Eigen::VectorXd::Zero(ineq_rows);
    res.objective = S.obj_offset;
    res.status = SolveStatus::optimal;
    return res;
}

// Pure equality-constrained problem (no bounds or cones survive reduction).
SolverResult solve_equality_only(const ConicProgram& prog, const Standard& S,
                                 const SolverSettings& cfg) {
    SolverResult res;
    const int dim = S.n + S.p;
    Eigen::SparseMatrix<double> K(dim, dim);
    std::vector<Eigen::Triplet<double>> t;
    for (int j = 0; j < S.A.outerSize(); ++j)
        for (Eigen::SparseMatrix<double>::InnerIterator it(S.A, j); it; ++it) {
            t.emplace_back(S.n + it.row(), j, it.value());
            t.emplace_back(j, S.n + it.row(), it.value());
        }
    K.setFromTriplets(t.begin(), t.end());
    std::vector<int> sign(dim, 1);
    for (int i = S.n; i < dim; ++i) sign[i] = -1;
    QdLdl ldl;
    ldl.analyze(K);
    ldl.factorize(K, sign, cfg.static_reg);
    Eigen::VectorXd rhs(dim);
    rhs.head(S.n) = -S.c;
    rhs.tail(S.p) = S.b;
    Eigen::VectorXd u = rhs;
    ldl.solve(u);
    for (int round = 0; round < 2; ++round) {
        Eigen::VectorXd r = rhs - K * u;
        Eigen::VectorXd cor = r;
        ldl.solve(cor);
        u += cor;
    }
    Eigen::VectorXd x = u.head(S.n), y = u.tail(S.p);
    double pres = S.p ? (S.A * x - S.b).lpNorm<Eigen::Infinity>() : 0.0;
    double dres = (S.c + S.A.transpose() * y).lpNorm<Eigen::Infinity>();
    res.primal = S.fixed_value;
    for (int i = 0; i < S.n; ++i) res.primal[S.to_original[i]] = x[i];
    res.dual_eq = Eigen::VectorXd::Zero(prog.A.rows());
    // Rows dropped during presolve keep zero multipliers.
    res.dual_ineq = Eigen::VectorXd::Zero(0);
    res.objective = S.c.dot(x) + S.obj_offset;
    res.residuals = {pres, dres, 0.0};
    if (pres > 1e-6)
        res.status = SolveStatus::infeasible;
    else if (dres > 1e-6)
        res.status = SolveStatus::unbounded;
    else
        res.status = SolveStatus::optimal;
    return res;
}

} // namespace

SolverResult solve(const ConicProgram& prog, const SolverSettings& cfg) {
    if (prog.num_vars != prog.c.size() || prog.A.cols() != prog.num_vars ||
        prog.A.rows() != prog.b.size())
        throw ModelError("conic solve: dimension mismatch");
    for (const auto& cone : prog.cones)
        for (int v : cone)
            if (v < 0 || v >= prog.num_vars)
                throw ModelError("conic solve: cone references unknown variable");

    Standard S;
    build_standard(prog, S);
    SolverResult out;
    if (S.presolved_infeasible) {
        out.status = SolveStatus::infeasible;
        out.primal = Eigen::VectorXd::Zero(prog.num_vars);
        out.dual_eq = Eigen::VectorXd::Zero(prog.A.rows());
        out.dual_ineq = Eigen::VectorXd::Zero(0);
        return out;
    }
    if (S.trivial) return finish_trivial(prog, S);
    if (S.m == 0) return solve_equality_only(prog, S, cfg);

    const int n = S.n, p = S.p, m = S.m;
    const double nu = S.lp + static_cast<double>(S.soc_start.size());

    KktSolver kkt;
    kkt.S = &S;
    kkt.dim = n + p + m;
    kkt.reg = cfg.static_reg;

    // Initial point: solve two systems with identity scaling and shift the
    // slack candidates into the cone interior.
    Scaling W;
    kkt.build_structure();
    if (!kkt.factor()) {
        kkt.reg *= 100;
        kkt.factor();
    }
    Eigen::VectorXd e;
    cone_unit(S, e);

    Eigen::VectorXd init_p = kkt.solve3(Eigen::VectorXd::Zero(n), S.b, S.h);
    Eigen::VectorXd x = init_p.head(n);
    Eigen::VectorXd s = -init_p.tail(m);
    double margin = cone_min_margin(S, s);
    if (margin <= 0) s += (1.0 - margin) * e;
    if (prog.warm_start && prog.warm_start->size() == prog.num_vars) {
        // A warm point seeds the primal variables; slacks are recomputed and
        // pushed interior.
        for (int i = 0; i < n; ++i) x[i] = (*prog.warm_start)[S.to_original[i]];
        Eigen::VectorXd sw = S.h - S.G * x;
        double mg = cone_min_margin(S, sw);
        s = (mg <= 1e-3) ? (sw + (1.0 - mg) * e) : sw;
    }

    Eigen::VectorXd init_d =
        kkt.solve3(-S.c, Eigen::VectorXd::Zero(p), Eigen::VectorXd::Zero(m));
    Eigen::VectorXd y = init_d.segment(n, p);
    Eigen::VectorXd z = init_d.tail(m);
    margin = cone_min_margin(S, z);
    if (margin <= 0) z += (1.0 - margin) * e;

    double tau = 1.0, kap = 1.0;

    const double resx0 = std::max(1.0, S.c.norm());
    const double resy0 = std::max(1.0, S.b.norm());
    const double resz0 = std::max(1.0, S.h.norm());

    auto expand_result = [&](SolveStatus st, const Eigen::VectorXd& xr,
                             const Eigen::VectorXd& yr, const Eigen::VectorXd& zr,
                             double obj, Residuals rr, int iters) {
        SolverResult r;
        r.status = st;
        r.primal = S.fixed_value;
        for (int i = 0; i < n; ++i) r.primal[S.to_original[i]] = xr[i];
        r.dual_eq = Eigen::VectorXd::Zero(prog.A.rows());
        {
            // Scatter reduced equality duals back onto original rows.
            int p0 = static_cast<int>(prog.A.rows());
            std::vector<bool> nonconst(p0, false);
            for (int j = 0; j < prog.A.outerSize(); ++j)
                for (Eigen::SparseMatrix<double>::InnerIterator it(prog.A, j); it;
                     ++it)
                    if (S.to_reduced[j] >= 0) nonconst[it.row()] = true;
            int rr2 = 0;
            for (int rower = 0; rower < p0; ++rower)
                if (nonconst[rower]) r.dual_eq[rower] = yr[rr2++];
        }
        r.dual_ineq = zr;
        r.objective = obj;
        r.residuals = rr;
        r.iterations = iters;
        return r;
    };

    double best_score = kInf;
    Eigen::VectorXd bx = x, by_ = y, bz = z;
    Residuals bres;

    int iter = 0;
    int slow_steps = 0;
    for (; iter < cfg.max_iters; ++iter) {
        // Residuals of the homogeneous embedding.
        Eigen::VectorXd rx = -S.A.transpose() * y - S.G.transpose() * z - S.c * tau;
        Eigen::VectorXd ry = S.A * x - S.b * tau;
        Eigen::VectorXd rz = s + S.G * x - S.h * tau;
        double cx = S.c.dot(x), by = S.b.dot(y), hz = S.h.dot(z);
        double rtau = kap + cx + by + hz;
        double gap = s.dot(z);
        double mu = (gap + tau * kap) / (nu + 1.0);

        double pres = std::max(ry.norm() / resy0, rz.norm() / resz0) / tau;
        double dres = rx.norm() / resx0 / tau;
        double pcost = cx / tau;
        double agap = gap / (tau * tau);
        double relgap = kInf;
        double dcost = -(by + hz) / tau;
        if (pcost < -1e-10)
            relgap = agap / (-pcost);
        else if (dcost > 1e-10)
            relgap = agap / dcost;

        Residuals rr{pres, dres, agap};
        double score = std::max({pres, dres, std::min(agap, relgap)});
        if (score < best_score) {
            best_score = score;
            bx = x / tau;
            by_ = y / tau;
            bz = z / tau;
            bres = rr;
        }

        if (pres <= cfg.tol && dres <= cfg.tol &&
            (agap <= cfg.tol || relgap <= cfg.tol)) {
            return expand_result(SolveStatus::optimal, x / tau, y / tau, z / tau,
                                 pcost + S.obj_offset, rr, iter);
        }
        // Infeasibility certificates.
        if (by + hz < -1e-12) {
            double scale = -1.0 / (by + hz);
            double certres =
                (S.A.transpose() * y + S.G.transpose() * z).norm() * scale / resx0;
            if (certres <= cfg.tol) {
                Residuals cr{0, 0, certres};
                return expand_result(SolveStatus::infeasible, x * 0.0, y * scale,
                                     z * scale, 0.0, cr, iter);
            }
        }
        if (cx < -1e-12) {
            double scale = -1.0 / cx;
            double certres = std::max((S.A * x).norm() / resy0,
                                      (S.G * x + s).norm() / resz0) *
                             scale;
            if (certres <= cfg.tol) {
                Residuals cr{certres, 0, 0};
                return expand_result(SolveStatus::unbounded, x * scale, y * 0.0,
                                     z * 0.0, 0.0, cr, iter);
            }
        }

        if (!update_scaling(S, s, z, W)) break;
        kkt.update_scaling_block(W, false);
        if (!kkt.factor()) {
            kkt.reg *= 100;
            if (!kkt.factor()) break;
        }

        Eigen::VectorXd v = kkt.solve3(-S.c, S.b, S.h);
        double cbh_v = S.c.dot(v.head(n)) + S.b.dot(v.segment(n, p)) +
                       S.h.dot(v.tail(m));

        auto direction = [&](double sigma, const Eigen::VectorXd& ds_rhs,
                             double dk_rhs, Eigen::VectorXd& dx,
                             Eigen::VectorXd& dy, Eigen::VectorXd& dz,
                             Eigen::VectorXd& ds, double& dtau, double& dkap) {
            double f = 1.0 - sigma;
            Eigen::VectorXd tx = -f * rx;
            Eigen::VectorXd ty = -f * ry;
            Eigen::VectorXd tz = -f * rz;
            double ttau = -f * rtau;
            Eigen::VectorXd wls = scale_W(S, W, jordan_solve(S, W.lambda, ds_rhs));
            Eigen::VectorXd tz2 = tz - wls;
            Eigen::VectorXd u = kkt.solve3(-tx, ty, tz2);
            double num = ttau - dk_rhs / tau -
                         (S.c.dot(u.head(n)) + S.b.dot(u.segment(n, p)) +
                          S.h.dot(u.tail(m)));
            double den = cbh_v - kap / tau;
            dtau = (std::abs(den) > 1e-14) ? num / den : 0.0;
            dx = u.head(n) + dtau * v.head(n);
            dy = u.segment(n, p) + dtau * v.segment(n, p);
            dz = u.tail(m) + dtau * v.tail(m);
            Eigen::VectorXd w2dz(m);
            w2dz.head(S.lp) = W.lp_w2.array() * dz.head(S.lp).array();
            for (size_t k = 0; k < S.soc_start.size(); ++k) {
                int st = S.soc_start[k], d = S.soc_dim[k];
                w2dz.segment(st, d) = W.w2[k] * dz.segment(st, d);
            }
            ds = wls - w2dz;
            dkap = (dk_rhs - kap * dtau) / tau;
        };

        // Predictor (affine) direction.
        Eigen::VectorXd ds_aff_rhs = -jordan_circ(S, W.lambda, W.lambda);
        Eigen::VectorXd dxa, dya, dza, dsa;
        double dtaua, dkapa;
        direction(0.0, ds_aff_rhs, -tau * kap, dxa, dya, dza, dsa, dtaua, dkapa);

        double alpha = max_step(S, s, dsa, 1.0);
        alpha = std::min(alpha, max_step(S, z, dza, 1.0));
        if (dtaua < 0) alpha = std::min(alpha, -tau / dtaua);
        if (dkapa < 0) alpha = std::min(alpha, -kap / dkapa);
        double mu_aff = ((s + alpha * dsa).dot(z + alpha * dza) +
                         (tau + alpha * dtaua) * (kap + alpha * dkapa)) /
                        (nu + 1.0);
        double sigma = std::pow(std::max(0.0, mu_aff / mu), 3.0);
        sigma = std::min(sigma, 0.999);

        // Corrector: Mehrotra second-order term computed in the scaled space.
        Eigen::VectorXd corr =
            jordan_circ(S, scale_Winv(S, W, dsa), scale_W(S, W, dza));
        Eigen::VectorXd ds_rhs =
            -jordan_circ(S, W.lambda, W.lambda) - corr + sigma * mu * e;
        double dk_rhs = -tau * kap - dtaua * dkapa + sigma * mu;
        Eigen::VectorXd dx, dy, dz, ds;
        double dtau, dkap;
        direction(sigma, ds_rhs, dk_rhs, dx, dy, dz, ds, dtau, dkap);

        double a = max_step(S, s, ds, 1.0 / 0.98);
        a = std::min(a, max_step(S, z, dz, a));
        if (dtau < 0) a = std::min(a, -tau / dtau);
        if (dkap < 0) a = std::min(a, -kap / dkap);
        a *= 0.98;
        a = std::min(a, 1.0);

        // Keep strictly interior in the face of roundoff.
        for (int guard = 0; guard < 30; ++guard) {
            Eigen::VectorXd sn = s + a * ds, zn = z + a * dz;
            if (cone_min_margin(S, sn) > 0 && cone_min_margin(S, zn) > 0 &&
                tau + a * dtau > 0 && kap + a * dkap > 0)
                break;
            a *= 0.5;
        }
        if (a < 1e-8) {
            if (++slow_steps >= 2) break;
        } else {
            slow_steps = 0;
        }

        x += a * dx;
        y += a * dy;
        z += a * dz;
        s += a * ds;
        tau += a * dtau;
        kap += a * dkap;
    }

    // The loop ended on an iteration cap, a stalled step or a scaling
    // breakdown. Accept the best iterate at reduced accuracy if it is still
    // a high-quality optimum; report the honest residuals either way.
    const double reduced = std::max(100.0 * cfg.tol, 1e-6);
    if (best_score <= reduced)
        return expand_result(SolveStatus::optimal, bx, by_, bz,
                             S.c.dot(bx) + S.obj_offset, bres, iter);
    return expand_result(SolveStatus::max_iters, bx, by_, bz,
                         S.c.dot(bx) + S.obj_offset, bres, iter);
}

Residuals kkt_residuals(const ConicProgram& p, const Eigen::VectorXd& primal,
                        const Eigen::VectorXd& dual_eq,
                        const Eigen::VectorXd& dual_ineq) {
    if (primal.size() != p.num_vars || dual_eq.size() != p.A.rows())
        throw ModelError("kkt_residuals: dimension mismatch");

    const double bn = std::max(1.0, p.b.size() ? p.b.lpNorm<Eigen::Infinity>() : 0.0);
    const double cn = std::max(1.0, p.c.lpNorm<Eigen::Infinity>());

    double pres = 0.0;
    if (p.A.rows() > 0)
        pres = (p.A * primal - p.b).lpNorm<Eigen::Infinity>() / bn;
    for (int i = 0; i < p.num_vars; ++i) {
        double scale = 1.0;
        if (std::isfinite(p.up[i]))
            pres = std::max(pres, (primal[i] - p.up[i]) / std::max(scale, std::abs(p.up[i])));
        if (std::isfinite(p.lo[i]))
            pres = std::max(pres, (p.lo[i] - primal[i]) / std::max(scale, std::abs(p.lo[i])));
    }
    for (const auto& cone : p.cones) {
        double t = primal[cone[0]];
        double nrm = 0;
        for (size_t k = 1; k < cone.size(); ++k) nrm += primal[cone[k]] * primal[cone[k]];
        pres = std::max(pres, (std::sqrt(nrm) - t) / std::max(1.0, std::abs(t)));
    }
    pres = std::max(pres, 0.0);

    // Stationarity: c + A'y + G'z over the canonical inequality layout.
    // Fixed variables (lo == up) carry an implicit multiplier and are skipped.
    Eigen::VectorXd g = p.c;
    if (p.A.rows() > 0) g += p.A.transpose() * dual_eq;
    int r = 0;
    double dviol = 0.0;
    double hz = 0.0;
    auto take = [&](double coef, int var, double hval) {
        double zi = (r < dual_ineq.size()) ? dual_ineq[r] : 0.0;
        g[var] += coef * zi;
        hz += hval * zi;
        ++r;
        return zi;
    };
    for (int i = 0; i < p.num_vars; ++i) {
        if (p.lo[i] == p.up[i] || !std::isfinite(p.up[i])) continue;
        double zi = take(1.0, i, p.up[i]);
        dviol = std::max(dviol, -zi);
    }
    for (int i = 0; i < p.num_vars; ++i) {
        if (p.lo[i] == p.up[i] || !std::isfinite(p.lo[i])) continue;
        double zi = take(-1.0, i, -p.lo[i]);
        dviol = std::max(dviol, -zi);
    }
    for (const auto& cone : p.cones) {
        bool all_fixed = true;
        for (int v : cone)
            if (p.lo[v] != p.up[v]) all_fixed = false;
        if (all_fixed) continue;
        int base = r;
        double znorm = 0.0;
        for (size_t k = 0; k < cone.size(); ++k) {
            take(-1.0, cone[k], 0.0);
            if (k > 0 && base + static_cast<int>(k) < dual_ineq.size())
                znorm += dual_ineq[base + k] * dual_ineq[base + k];
        }
        double z0 = (base < dual_ineq.size()) ? dual_ineq[base] : 0.0;
        dviol = std::max(dviol, std::sqrt(znorm) - z0);
    }
    double dres = 0.0;
    for (int i = 0; i < p.num_vars; ++i)
        if (p.lo[i] != p.up[i]) dres = std::max(dres, std::abs(g[i]));
    dres = std::max(dres / cn, dviol);

    double cx = p.c.dot(primal);
    double by = p.b.size() ? p.b.dot(dual_eq) : 0.0;
    double gap = std::abs(cx + by + hz) / std::max(1.0, std::abs(cx));
    return {pres, dres, gap};
}

std::string dump_program(const ConicProgram& p) {
    std::ostringstream os;
    os << "vars " << p.num_vars << "\n";
    for (int i = 0; i < p.num_vars; ++i) {
        os << "v " << i << " c " << p.c[i];
        if (std::isfinite(p.lo[i])) os << " lo " << p.lo[i];
        if (std::isfinite(p.up[i])) os << " up " << p.up[i];
        os << "\n";
    }
    os << "rows " << p.A.rows() << "\n";
    for (int j = 0; j < p.A.outerSize(); ++j)
        for (Eigen::SparseMatrix<double>::InnerIterator it(p.A, j); it; ++it)
            os << "a " << it.row() << " " << it.col() << " " << it.value() << "\n";
    for (int r = 0; r < p.b.size(); ++r) os << "b " << r << " " << p.b[r] << "\n";
    for (const auto& cone : p.cones) {
        os << "cone";
        for (int v : cone) os << " " << v;
        os << "\n";
    }
    return os.str();
}

} // namespace restore
