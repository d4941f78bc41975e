#include "restore/bnb.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <queue>
#include <thread>

namespace restore {

const char* to_string(MipStatus s) {
    switch (s) {
        case MipStatus::optimal: return "optimal";
        case MipStatus::infeasible: return "infeasible";
        case MipStatus::limit: return "limit";
    }
    return "?";
}

namespace {

int family_rank(Var f) {
    switch (f) {
        case Var::switch_on: return 0;
        case Var::step_at: return 1;
        case Var::served: return 2;
        default: return 3;
    }
}

struct Node {
    std::vector<std::pair<int, double>> fixings;
    double bound = -kInf;
    int depth = 0;
    long seq = 0;
};

struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
        if (a.bound != b.bound) return a.bound > b.bound; // min-heap on bound
        return a.seq > b.seq;                             // FIFO tie-break
    }
};

struct SearchState {
    std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
    std::mutex mu;
    std::condition_variable cv;
    int busy = 0;
    bool abort = false;

    double incumbent_obj = kInf;
    std::vector<double> incumbent_x;
    bool have_incumbent = false;

    long nodes = 0;
    long seq = 0;
    std::vector<NodeLog> log;
    bool keep_log = false;
};

} // namespace

int select_branch_variable(const std::vector<double>& relaxation,
                           const MISOCPModel& m, double int_tol) {
    int best = -1;
    double best_frac = -1.0;
    int best_rank = 1 << 30;
    for (int c : m.binaries) {
        double v = relaxation[c];
        double dist = std::min(std::abs(v), std::abs(v - 1.0));
        if (dist <= int_tol) continue;
        double frac = 0.5 - std::abs(v - 0.5); // larger = more fractional
        int rank = family_rank(m.idx.family(c));
        if (frac > best_frac + 1e-12 ||
            (std::abs(frac - best_frac) <= 1e-12 &&
             (rank < best_rank || (rank == best_rank && c < best)))) {
            best = c;
            best_frac = frac;
            best_rank = rank;
        }
    }
    if (best < 0) throw ModelError("select_branch_variable: no fractional binary");
    return best;
}

Incumbent solve_misocp(const MISOCPModel& m,
                       const std::vector<std::pair<int, double>>& objective,
                       double obj_constant, double obj_scale,
                       const std::vector<LinRow>& extra_rows,
                       const BnbConfig& cfg, const std::vector<double>* warm) {
    const auto t_start = std::chrono::steady_clock::now();
    const double const_norm = obj_constant / obj_scale;

    auto tier_value = [&](const std::vector<double>& x) {
        double v = obj_constant;
        for (auto [c, w] : objective) v += w * x[c];
        return v / obj_scale;
    };

    auto audit_ok = [&](const std::vector<double>& x) {
        auto a = evaluate_solution(m, x);
        if (!a.feasible(cfg.feas_tol)) return false;
        for (const auto& r : extra_rows) {
            double act = 0.0;
            for (auto [c, w] : r.coef) act += w * x[c];
            if (std::isfinite(r.lo) && act < r.lo - cfg.feas_tol) return false;
            if (std::isfinite(r.up) && act > r.up + cfg.feas_tol) return false;
        }
        return true;
    };

    SearchState st;
    st.keep_log = cfg.keep_log;
    if (warm && !warm->empty() && audit_ok(*warm)) {
        st.incumbent_x = *warm;
        st.incumbent_obj = tier_value(*warm);
        st.have_incumbent = true;
    }
    st.open.push(Node{{}, -kInf, 0, st.seq++});

    auto elapsed_sec = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             t_start)
            .count();
    };

    bool hit_limit = false;

    // Relaxation solve and node expansion, run outside the state lock; the
    // incumbent snapshot is taken by the caller.
    auto process = [&](const Node& node, double inc_snapshot,
                       const std::vector<double>* warm_hint,
                       std::vector<Node>& children,
                       std::optional<std::pair<std::vector<double>, double>>&
                           candidate) -> char {
        SolverSettings ss;
        ss.tol = cfg.solver_tol;
        ss.max_iters = cfg.solver_iters;
        auto lowered = model_to_conic(m, objective, obj_scale, extra_rows,
                                      node.fixings, warm_hint);
        auto res = solve(lowered.prog, ss);
        if (res.status == SolveStatus::infeasible) return 'X';

        auto branch_on = [&](int col, double bound) {
            for (double side : {0.0, 1.0}) {
                Node child;
                child.fixings = node.fixings;
                child.fixings.emplace_back(col, side);
                child.bound = bound;
                child.depth = node.depth + 1;
                children.push_back(std::move(child));
            }
        };
        auto first_unfixed = [&]() {
            for (int c : m.binaries) {
                bool fixed = false;
                for (auto [fc, fv] : node.fixings) fixed |= fc == c;
                if (!fixed) return c;
            }
            return -1;
        };

        if (res.status != SolveStatus::optimal) {
            // Numerical breakdown: keep the search exact by splitting on an
            // unfixed binary with the inherited bound. A fully fixed node
            // that cannot be decided is abandoned (counted in the log).
            int col = first_unfixed();
            if (col < 0) return 'F';
            branch_on(col, node.bound);
            return 'B';
        }

        std::vector<double> x(res.primal.data(), res.primal.data() + m.idx.size());
        double bound = std::max(node.bound, res.objective + const_norm);
        if (bound >= inc_snapshot - cfg.gap) return 'P';

        double worst = 0.0;
        for (int c : m.binaries)
            worst = std::max(worst,
                             std::min(std::abs(x[c]), std::abs(x[c] - 1.0)));
        if (worst <= cfg.int_tol) {
            std::vector<double> xr = x;
            for (int c : m.binaries) xr[c] = std::round(xr[c]);
            double val = tier_value(xr);
            if (audit_ok(xr) && val < inc_snapshot - 1e-12) {
                candidate = {std::move(xr), val};
                return 'I';
            }
            return 'P';
        }
        branch_on(select_branch_variable(x, m, cfg.int_tol), bound);
        return 'B';
    };

    // Worker loop; with cfg.deterministic or one thread this runs serially.
    auto worker = [&] {
        std::unique_lock<std::mutex> lk(st.mu);
        for (;;) {
            st.cv.wait(lk, [&] {
                return st.abort || !st.open.empty() || st.busy == 0;
            });
            if (st.abort) return;
            if (st.open.empty()) {
                if (st.busy == 0) {
                    st.cv.notify_all();
                    return;
                }
                continue;
            }
            Node node = st.open.top();
            st.open.pop();
            if (st.have_incumbent && node.bound >= st.incumbent_obj - cfg.gap) {
                if (st.keep_log)
                    st.log.push_back({node.seq, node.depth, node.bound, 'P'});
                ++st.nodes;
                continue;
            }
            ++st.busy;
            ++st.nodes;
            if (st.nodes > cfg.node_limit ||
                (cfg.time_limit_sec > 0 && elapsed_sec() > cfg.time_limit_sec)) {
                hit_limit = true;
                st.abort = true;
                --st.busy;
                st.cv.notify_all();
                return;
            }
            double inc_snapshot = st.incumbent_obj;
            std::vector<double> warm_copy;
            if (st.have_incumbent && node.depth == 0) warm_copy = st.incumbent_x;
            std::vector<Node> children;
            std::optional<std::pair<std::vector<double>, double>> candidate;
            lk.unlock();
            char status = process(node, inc_snapshot,
                                  warm_copy.empty() ? nullptr : &warm_copy,
                                  children, candidate);
            lk.lock();
            if (candidate && candidate->second < st.incumbent_obj - 1e-12) {
                st.incumbent_x = std::move(candidate->first);
                st.incumbent_obj = candidate->second;
                st.have_incumbent = true;
            }
            for (auto& c : children) {
                c.seq = st.seq++;
                st.open.push(std::move(c));
            }
            if (st.keep_log)
                st.log.push_back({node.seq, node.depth, node.bound, status});
            --st.busy;
            st.cv.notify_all();
        }
    };

    int nthreads = cfg.deterministic ? 1 : std::max(1, cfg.threads);
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    Incumbent out;
    out.nodes = st.nodes;
    out.wall_ms = elapsed_sec() * 1000.0;
    out.log = std::move(st.log);
    if (st.have_incumbent) {
        out.status = hit_limit ? MipStatus::limit : MipStatus::optimal;
        out.x = st.incumbent_x;
        out.objective = st.incumbent_obj;
        for (int k = 0; k < 3; ++k) {
            out.tier_raw[k] = m.tiers[k].raw(out.x);
            out.tier_norm[k] = m.tiers[k].normalized(out.x);
        }
        double best_open = st.open.empty() ? st.incumbent_obj : st.open.top().bound;
        out.bound_gap = std::max(0.0, st.incumbent_obj - best_open);
    } else {
        out.status = hit_limit ? MipStatus::limit : MipStatus::infeasible;
    }
    return out;
}

LexResult lexicographic_solve(const MISOCPModel& m, const LexConfig& cfg) {
    LexResult out;
    std::vector<LinRow> level_rows;
    const std::vector<double>* warm = nullptr;
    Incumbent stage;
    for (int tier = 0; tier < 3; ++tier) {
        const auto& t = m.tiers[tier];
        stage = solve_misocp(m, t.coef, t.constant, t.normalization, level_rows,
                             cfg.bnb, warm);
        out.stage_status[tier] = stage.status;
        out.total_nodes += stage.nodes;
        if (stage.status == MipStatus::infeasible ||
            (stage.status == MipStatus::limit && stage.x.empty())) {
            out.incumbent = std::move(stage);
            return out;
        }
        if (stage.status == MipStatus::limit) {
            // Keep the best plan found so far; later stages would only
            // refine within a level that is not proven optimal.
            out.incumbent = std::move(stage);
            return out;
        }
        if (tier < 2) {
            // Freeze this level: raw value <= (optimum + eps) * normalization.
            LinRow freeze;
            freeze.tag = "level-" + std::to_string(tier + 1) + "-freeze";
            freeze.coef = t.coef;
            freeze.lo = -kInf;
            freeze.up = (stage.objective + cfg.eps[tier]) * t.normalization -
                        t.constant;
            level_rows.push_back(std::move(freeze));
        }
        out.incumbent = stage;
        warm = &out.incumbent.x;
    }
    return out;
}

} // namespace restore
