#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "restore/conic.hpp"

#include <random>

using namespace restore;

namespace {

ConicProgram norm34_program() {
    // minimize t  s.t.  u = (3,4),  ||u|| <= t
    ConicProgram p;
    p.resize(3);
    p.c[0] = 1.0;
    std::vector<Eigen::Triplet<double>> t{{0, 1, 1.0}, {1, 2, 1.0}};
    p.A.resize(2, 3);
    p.A.setFromTriplets(t.begin(), t.end());
    p.b = Eigen::VectorXd(2);
    p.b << 3.0, 4.0;
    p.cones = {{0, 1, 2}};
    return p;
}

} // namespace

TEST_CASE("euclidean norm bound") {
    auto p = norm34_program();
    auto r = solve(p, 1e-9, 200);
    REQUIRE(r.status == SolveStatus::optimal);
    CHECK(r.objective == doctest::Approx(5.0).epsilon(1e-8));
    CHECK(std::abs(r.primal[0] - 5.0) < 1e-8);
}

TEST_CASE("pure lp lower bound") {
    // min x s.t. x >= 2
    ConicProgram p;
    p.resize(1);
    p.c[0] = 1.0;
    p.lo[0] = 2.0;
    p.A.resize(0, 1);
    p.b = Eigen::VectorXd(0);
    auto r = solve(p);
    REQUIRE(r.status == SolveStatus::optimal);
    CHECK(r.objective == doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("two variable lp") {
    // min -x - y s.t. x + y <= 4 (as x + y + slackless row via bounds), 0<=x<=3, 0<=y<=3
    ConicProgram p;
    p.resize(3); // x, y, s with x + y + s = 4, s >= 0
    p.c[0] = -1.0;
    p.c[1] = -1.0;
    p.lo[0] = 0.0;
    p.up[0] = 3.0;
    p.lo[1] = 0.0;
    p.up[1] = 3.0;
    p.lo[2] = 0.0;
    std::vector<Eigen::Triplet<double>> t{{0, 0, 1.0}, {0, 1, 1.0}, {0, 2, 1.0}};
    p.A.resize(1, 3);
    p.A.setFromTriplets(t.begin(), t.end());
    p.b = Eigen::VectorXd(1);
    p.b << 4.0;
    auto r = solve(p);
    REQUIRE(r.status == SolveStatus::optimal);
    CHECK(r.objective == doctest::Approx(-4.0).epsilon(1e-6));
}

TEST_CASE("infeasible bounds certified") {
    // x >= 2 and x <= 1 (via two variables and an equality)
    ConicProgram p;
    p.resize(2);
    p.lo[0] = 2.0;
    p.up[1] = 1.0;
    std::vector<Eigen::Triplet<double>> t{{0, 0, 1.0}, {0, 1, -1.0}};
    p.A.resize(1, 2);
    p.A.setFromTriplets(t.begin(), t.end());
    p.b = Eigen::VectorXd(1);
    p.b << 0.0;
    auto r = solve(p);
    CHECK(r.status == SolveStatus::infeasible);
}

TEST_CASE("unbounded detected") {
    ConicProgram p;
    p.resize(1);
    p.c[0] = 1.0;
    p.up[0] = 5.0; // min x, x <= 5, no lower bound
    p.A.resize(0, 1);
    p.b = Eigen::VectorXd(0);
    auto r = solve(p);
    CHECK(r.status == SolveStatus::unbounded);
}

TEST_CASE("fixed variables substituted through cones") {
    // cone members pinned by bounds: ||(3,4)|| <= t via lo=up
    ConicProgram p;
    p.resize(3);
    p.c[0] = 1.0;
    p.lo[1] = p.up[1] = 3.0;
    p.lo[2] = p.up[2] = 4.0;
    p.A.resize(0, 3);
    p.b = Eigen::VectorXd(0);
    p.cones = {{0, 1, 2}};
    auto r = solve(p, 1e-9, 200);
    REQUIRE(r.status == SolveStatus::optimal);
    CHECK(r.objective == doctest::Approx(5.0).epsilon(1e-8));
}

TEST_CASE("determinism: identical inputs give identical iterates") {
    auto p = norm34_program();
    auto r1 = solve(p);
    auto r2 = solve(p);
    CHECK(r1.objective == r2.objective);
    CHECK(r1.iterations == r2.iterations);
    CHECK((r1.primal - r2.primal).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("scaling robustness: positive rescale of c keeps argmin") {
    auto p = norm34_program();
    auto r1 = solve(p);
    ConicProgram p2 = p;
    p2.c *= 1000.0;
    auto r2 = solve(p2);
    REQUIRE(r1.status == SolveStatus::optimal);
    REQUIRE(r2.status == SolveStatus::optimal);
    CHECK((r1.primal - r2.primal).lpNorm<Eigen::Infinity>() < 1e-5);
    CHECK(r2.objective == doctest::Approx(1000.0 * r1.objective).epsilon(1e-6));
}

namespace {

// Builds a random program around a sampled strictly-complementary KKT point,
// so the optimal objective is known by construction.
struct BuiltProgram {
    ConicProgram prog;
    double opt = 0.0;
};

BuiltProgram random_kkt_program(std::mt19937& rng) {
    std::uniform_int_distribution<int> nvars(6, 24);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::uniform_real_distribution<double> pos(0.2, 1.5);

    const int n = nvars(rng);
    ConicProgram p;
    p.resize(n);
    Eigen::VectorXd xstar(n);
    for (int i = 0; i < n; ++i) xstar[i] = unif(rng);

    // Gradient accumulator: c = -(A'y + sum of bound/cone contributions).
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);
    double hz = 0.0;

    // Cones first, over a reserved prefix of disjoint variable tuples,
    // alternating active and inactive, with strictly-complementary duals.
    std::uniform_int_distribution<int> ncones(0, 2);
    int want = ncones(rng);
    int next = 0;
    for (int k = 0; k < want && next + 3 <= n; ++k) {
        int t = next, u1 = next + 1, u2 = next + 2;
        next += 3;
        double nrm = std::hypot(xstar[u1], xstar[u2]);
        bool active = (k % 2 == 0);
        if (active) {
            if (nrm < 1e-3) {
                xstar[u1] += 0.5;
                nrm = std::hypot(xstar[u1], xstar[u2]);
            }
            xstar[t] = nrm;
            double beta = pos(rng);
            // z = beta*(1, -u/||u||): boundary of the dual cone, s+z interior.
            grad[t] -= beta;
            grad[u1] -= -beta * xstar[u1] / nrm;
            grad[u2] -= -beta * xstar[u2] / nrm;
        } else {
            xstar[t] = nrm + pos(rng);
        }
        p.cones.push_back({t, u1, u2});
    }

    // Bounds on the remaining variables: a mix of active (dual>0) and
    // inactive (dual=0) sides.
    std::uniform_int_distribution<int> coin(0, 3);
    for (int i = next; i < n; ++i) {
        int c = coin(rng);
        if (c == 0) { // active lower bound
            p.lo[i] = xstar[i];
            double zl = pos(rng);
            grad[i] -= zl;
            hz += -p.lo[i] * zl;
        } else if (c == 1) { // inactive box
            p.lo[i] = xstar[i] - pos(rng);
            p.up[i] = xstar[i] + pos(rng);
        } else if (c == 2) { // active upper bound
            p.up[i] = xstar[i];
            double zu = pos(rng);
            grad[i] += zu;
            hz += p.up[i] * zu;
        } // c == 3: free
    }

    // Random equalities consistent with xstar.
    std::uniform_int_distribution<int> neq(1, std::max(1, n / 3));
    const int m = neq(rng);
    std::vector<Eigen::Triplet<double>> trips;
    Eigen::VectorXd y(m);
    for (int r = 0; r < m; ++r) {
        y[r] = unif(rng);
        for (int i = 0; i < n; ++i)
            if (coin(rng) == 0) trips.emplace_back(r, i, unif(rng));
    }
    p.A.resize(m, n);
    p.A.setFromTriplets(trips.begin(), trips.end());
    p.b = p.A * xstar;

    p.c = -(p.A.transpose() * y) - grad;

    BuiltProgram out;
    out.prog = p;
    out.opt = p.c.dot(xstar);
    // Strong duality check on the construction itself.
    double by = p.b.dot(y);
    REQUIRE(std::abs(out.opt + by + hz -
                     0.0 * out.opt) <= 1e-9 * std::max(1.0, std::abs(out.opt)) + 1e-9);
    return out;
}

} // namespace

TEST_CASE("random kkt-constructed programs recover their optimum") {
    std::mt19937 rng(20240817);
    for (int trial = 0; trial < 12; ++trial) {
        auto built = random_kkt_program(rng);
        auto r = solve(built.prog, 1e-8, 200);
        REQUIRE(r.status == SolveStatus::optimal);
        CHECK(std::abs(r.objective - built.opt) <
              1e-6 * std::max(1.0, std::abs(built.opt)));
        auto res = kkt_residuals(built.prog, r.primal, r.dual_eq, r.dual_ineq);
        CHECK(res.primal <= 1e-6);
        CHECK(res.dual <= 1e-6);
        CHECK(res.gap <= 1e-6);
    }
}

TEST_CASE("kkt residual audit behaves like a norm") {
    auto p = norm34_program();
    auto r = solve(p, 1e-9, 200);
    auto base = kkt_residuals(p, r.primal, r.dual_eq, r.dual_ineq);
    CHECK(base.primal <= 1e-8);
    CHECK(base.dual <= 1e-7);

    // Zero vectors on a program with b != 0: primal residual is the scaled ||b||.
    Eigen::VectorXd zp = Eigen::VectorXd::Zero(3);
    Eigen::VectorXd zy = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd zz = Eigen::VectorXd::Zero(3);
    auto z = kkt_residuals(p, zp, zy, zz);
    CHECK(z.primal == doctest::Approx(4.0 / 4.0)); // ||b||_inf / max(1,||b||_inf)

    // Perturbing the primal along a feasible direction grows the residual
    // proportionally to ||A delta||.
    Eigen::VectorXd delta(3);
    delta << 0.0, 0.01, 0.0;
    auto pert = kkt_residuals(p, r.primal + delta, r.dual_eq, r.dual_ineq);
    CHECK(pert.primal == doctest::Approx(0.01 / 4.0).epsilon(1e-3));
}

TEST_CASE("warm start does not disturb the solution") {
    auto p = norm34_program();
    auto cold = solve(p);
    p.warm_start = cold.primal;
    auto warm = solve(p);
    REQUIRE(warm.status == SolveStatus::optimal);
    CHECK(warm.objective == doctest::Approx(cold.objective).epsilon(1e-7));
}

TEST_CASE("program dump carries every structural element") {
    auto p = norm34_program();
    std::string text = dump_program(p);
    CHECK(text.find("vars 3") != std::string::npos);
    CHECK(text.find("cone 0 1 2") != std::string::npos);
    CHECK(text.find("b 0 3") != std::string::npos);
    CHECK(dump_program(p) == text);
}
