#include "jsoq/errors.hpp"
#include "jsoq/oracle.hpp"

#include "support.hpp"

#include <doctest.h>

#include <Eigen/SparseLU>

#include <cmath>
#include <map>

using namespace jsoq;

namespace {

std::map<int, double> out_rates(const Generator& g, int row) {
    std::map<int, double> out;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(g.rates, row); it; ++it) {
        if (it.col() != row) out[static_cast<int>(it.col())] = it.value();
    }
    return out;
}

// Global balance at an interior state, written out from the model rules
// without the generator.
double direct_balance(const TruncatedSolution& s, const ModelParams& p, int i, int j, int k) {
    const double l = p.lambda(), mu = p.mu(), a = p.alpha();
    auto arrival_to = [&](int fi, int fj, int ti, int tj) {
        // rate at which a busy-server arrival moves (fi, fj) to (ti, tj)
        if (fi < fj) return (ti == fi + 1 && tj == fj) ? l : 0.0;
        if (fj < fi) return (ti == fi && tj == fj + 1) ? l : 0.0;
        return 0.5 * l;
    };
    if (k == 0) {
        const double outflow = (l + a * ((i > 0) + (j > 0))) * s(i, j, 0);
        return mu * s(i, j, 1) - outflow;
    }
    double in = l * s(i, j, 0) + a * s(i + 1, j, 0) + a * s(i, j + 1, 0);
    if (i > 0) in += arrival_to(i - 1, j, i, j) * s(i - 1, j, 1);
    if (j > 0) in += arrival_to(i, j - 1, i, j) * s(i, j - 1, 1);
    return in - (l + mu) * s(i, j, 1);
}

}  // namespace

TEST_CASE("generator transitions") {
    const ModelParams p(2, 10, 3);
    const Generator g = build_generator(p, 6);
    CHECK(g.size() == 2 * 7 * 7);

    const auto origin = out_rates(g, g.index(0, 0, 0));
    CHECK(origin.size() == 1);
    CHECK(origin.at(g.index(0, 0, 1)) == 2.0);

    const auto tie = out_rates(g, g.index(2, 2, 1));
    CHECK(tie.size() == 3);
    CHECK(tie.at(g.index(2, 2, 0)) == 10.0);
    CHECK(tie.at(g.index(3, 2, 1)) == 1.0);
    CHECK(tie.at(g.index(2, 3, 1)) == 1.0);

    const auto shorter = out_rates(g, g.index(1, 3, 1));
    CHECK(shorter.size() == 2);
    CHECK(shorter.at(g.index(2, 3, 1)) == 2.0);

    const auto idle = out_rates(g, g.index(1, 3, 0));
    CHECK(idle.at(g.index(0, 3, 1)) == 3.0);
    CHECK(idle.at(g.index(1, 2, 1)) == 3.0);

    // only the full tie drops arrivals
    CHECK(out_rates(g, g.index(6, 6, 1)).size() == 1);
    CHECK(out_rates(g, g.index(5, 6, 1)).at(g.index(6, 6, 1)) == 2.0);

    const Eigen::VectorXd rows = g.rates * Eigen::VectorXd::Ones(g.size());
    CHECK(rows.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK_THROWS_AS(build_generator(p, 1), DomainError);
}

TEST_CASE("stationary vector basics") {
    const ModelParams p(2, 10, 3);
    const TruncatedSolution s = solve_stationary(build_generator(p, 60));
    CHECK(s.residual < 1e-12);
    double busy = 0.0, total = 0.0, empty1 = 0.0;
    for (int i = 0; i <= 60; ++i) {
        for (int j = 0; j <= 60; ++j) {
            busy += s(i, j, 1);
            total += s(i, j, 0) + s(i, j, 1);
            CHECK(s(i, j, 0) == doctest::Approx(s(j, i, 0)).epsilon(1e-12));
            CHECK(s(i, j, 1) == doctest::Approx(s(j, i, 1)).epsilon(1e-12));
        }
        empty1 += s(0, i, 0);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(busy - 0.2) < 1e-6);
    CHECK(std::abs(empty1 - 11.0 / 15.0) < 1e-6);
    CHECK(s.mass_deficit_bound >= 0.0);
    CHECK(s.mass_deficit_bound < 1e-30);

    double worst = 0.0;
    for (int i = 0; i < 59; ++i) {
        for (int j = 0; j < 59; ++j) {
            for (int k = 0; k < 2; ++k) worst = std::max(worst, std::abs(direct_balance(s, p, i, j, k)));
        }
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("state reduction agrees with a sparse LU solve") {
    for (const ModelParams& p : {ModelParams(2, 10, 3), ModelParams(5, 8, 6)}) {
        const Generator g = build_generator(p, 12);
        const TruncatedSolution gth = solve_stationary(g);

        // pi Q = 0 with the last balance equation replaced by sum(pi) = 1
        Eigen::SparseMatrix<double> a = Eigen::SparseMatrix<double>(g.rates.transpose());
        const int n = g.size();
        for (int c = 0; c < n; ++c) a.coeffRef(n - 1, c) = 0.0;
        a.prune(0.0);
        for (int c = 0; c < n; ++c) a.coeffRef(n - 1, c) = 1.0;
        a.makeCompressed();
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
        rhs[n - 1] = 1.0;
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(a);
        REQUIRE(lu.info() == Eigen::Success);
        const Eigen::VectorXd pi = lu.solve(rhs);
        for (int s = 0; s < n; ++s) CHECK(std::abs(pi[s] - gth.probs[s]) < 1e-13);
    }
}

TEST_CASE("growing the box moves probabilities by less than the deficit bound") {
    const ModelParams p(6, 10, 5);  // rho = 0.96, so truncation is visible
    const TruncatedSolution small = solve_stationary(build_generator(p, 40));
    const TruncatedSolution large = solve_stationary(build_generator(p, 80));
    CHECK(small.mass_deficit_bound > 1e-6);
    for (int i = 0; i <= 20; ++i) {
        for (int j = 0; j <= 20; ++j) {
            for (int k = 0; k < 2; ++k) CHECK(std::abs(small(i, j, k) - large(i, j, k)) <= small.mass_deficit_bound);
        }
    }
}

TEST_CASE("transformed coordinates") {
    const ModelParams p(2, 10, 3);
    const TruncatedSolution s = solve_stationary(build_generator(p, 40));
    const StationaryField f = to_transformed(s);
    for (int k = 0; k < 2; ++k) {
        CHECK(f(0, 0, k) == s(0, 0, k));
        CHECK(f(1, 2, k) == s(1, 3, k) + s(3, 1, k));
        CHECK(f(1, 2, k) == doctest::Approx(2.0 * s(1, 3, k)).epsilon(1e-12));
        CHECK(f(4, 0, k) == s(4, 4, k));
    }
    CHECK(f.supports(20, 20));
    CHECK_FALSE(f.supports(21, 20));
    CHECK_THROWS_AS(f(30, 30, 0), EvaluationError);
    CHECK(balance_residual(f, p, 15, 15) < 1e-8);
}

TEST_CASE("default truncation") {
    CHECK(default_truncation(ModelParams(2, 10, 3)) == 10);
    const ModelParams heavy(6, 10, 5);
    const int n = default_truncation(heavy);
    CHECK(std::pow(heavy.rho(), 2 * n) < 1e-10);
    CHECK(std::pow(heavy.rho(), 2 * (n - 1)) >= 1e-10);
    CHECK_THROWS_AS(default_truncation(ModelParams(10, 1, 1)), Unstable);
}

TEST_CASE("decay estimates") {
    const ModelParams p(2, 10, 3);
    const StationaryField f = to_transformed(solve_stationary(build_generator(p, 80)));
    const double rho2 = p.rho() * p.rho();
    CHECK(rho2 == doctest::Approx(16.0 / 225.0));
    CHECK(std::abs(estimate_decay(f, 0, 1, 10, 25) - rho2) < 1e-3);

    const ModelParams p3(3, 10, 3);
    const StationaryField f3 = to_transformed(solve_stationary(build_generator(p3, 80)));
    CHECK(p3.rho() == doctest::Approx(0.45));
    CHECK(std::abs(estimate_decay(f3, 1, 0, 10, 25) - 0.45 * 0.45) < 1e-3);

    const StationaryField geometric(Provenance::oracle,
                                    [&](int m, int, int) { return 0.3 * std::pow(rho2, m); });
    CHECK(estimate_decay(geometric, 0, 0, 0, 30) == doctest::Approx(rho2).epsilon(1e-12));

    const StationaryField tiny(Provenance::oracle, [](int m, int, int) { return m > 5 ? 0.0 : 1.0; });
    CHECK_THROWS_AS(estimate_decay(tiny, 0, 0, 0, 10), DomainError);
    CHECK_THROWS_AS(estimate_decay(f, 0, 0, 5, 5), DomainError);
    CHECK_THROWS_AS(estimate_decay(f, 0, 0, 70, 90), DomainError);
}

TEST_CASE("null vector and drift of the interior chain") {
    const AppendixCheck a = verify_appendix(ModelParams(2, 10, 3));
    CHECK(a.v[0] == 1.0);
    CHECK(a.v[1] == doctest::Approx(20.0 / 9.0).epsilon(1e-14));
    CHECK(a.residual_block0 < 1e-12);
    CHECK(a.residual_interior < 1e-12);
    CHECK(a.residual_interior_alt > 1e-3);
    CHECK(a.drift < 0.0);

    const AppendixCheck b = verify_appendix(ModelParams(4, 10, 3));
    CHECK(b.residual_block0 < 1e-12);
    CHECK(b.residual_interior < 1e-12);
    CHECK(b.drift < 0.0);

    for (const ModelParams& p : testing::random_stable(50, 31)) {
        const AppendixCheck c = verify_appendix(p);
        CHECK(c.v[0] > 0.0);
        CHECK(c.v[1] > 0.0);
        CHECK(c.residual_block0 < 1e-12);
        CHECK(c.residual_interior < 1e-12);
        CHECK(c.drift < 0.0);
    }
    CHECK_THROWS_AS(verify_appendix(ModelParams(10, 1, 1)), Unstable);
}
