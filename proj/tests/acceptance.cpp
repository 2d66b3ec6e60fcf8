// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line with
// the measured quantities; the exit status is nonzero if any criterion fails.

#include "jsoq/cli.hpp"
#include "jsoq/compensation.hpp"
#include "jsoq/kernel.hpp"
#include "jsoq/oracle.hpp"
#include "jsoq/simulator.hpp"

#include "support.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace jsoq;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(double x) { return cli::format_number(x); }

const ModelParams kTriples[] = {ModelParams(2, 10, 3), ModelParams(3, 10, 3), ModelParams(4, 10, 3)};

Outcome reference_table() {
    struct Row {
        double lambda;
        double printed[4];
    };
    const Row rows[] = {{2.0, {0.5639, 0.0063, 0.1235, 0.2496}},
                        {3.0, {0.5437, 0.0125, 0.0986, 0.1992}},
                        {4.0, {0.5056, 0.0193, 0.0895, 0.1658}}};
    double worst_oracle = 0.0;
    int matched = 0, contradicted = 0, unexplained = 0;
    std::ostringstream cells;
    for (const Row& row : rows) {
        const ModelParams p(row.lambda, 10, 3);
        const StationaryField comp = compensation_field(build_series(p));
        const StationaryField orc = to_transformed(solve_stationary(build_generator(p, 80)));
        for (int n = 0; n < 4; ++n) {
            const double c = comp(0, n, 0) + comp(0, n, 1);
            const double o = orc(0, n, 0) + orc(0, n, 1);
            worst_oracle = std::max(worst_oracle, std::abs(c - o));
            if (std::abs(c - row.printed[n]) <= 1e-3) {
                ++matched;
            } else if (std::abs(o - row.printed[n]) > 1e-3) {
                ++contradicted;
                cells << " [lambda=" << row.lambda << " n=" << n << ": computed " << fmt(c) << ", oracle " << fmt(o)
                      << ", printed " << row.printed[n] << "]";
            } else {
                ++unexplained;
            }
        }
    }
    std::ostringstream os;
    os << "max |compensation - oracle(N=80)| = " << fmt(worst_oracle) << " (need < 1e-8); printed cells within 1e-3: "
       << matched << "/12; cells where the oracle also contradicts the printed value: " << contradicted
       << "; unexplained: " << unexplained << ";" << cells.str();
    return {worst_oracle < 1e-8 && unexplained == 0, os.str()};
}

Outcome utilization() {
    double worst = 0.0;
    for (const ModelParams& p : testing::random_stable(20, 101)) {
        worst = std::max(worst, std::abs(measures(build_series(p)).p_busy - p.lambda() / p.mu()));
    }
    return {worst < 1e-9, "20 random triples, max |P(busy) - lambda/mu| = " + fmt(worst) + " (need < 1e-9)"};
}

Outcome boundary_mass() {
    double worst = 0.0;
    for (const ModelParams& p : kTriples) {
        const TruncatedSolution s = solve_stationary(build_generator(p, 80));
        double mass = 0.0;
        for (int j = 0; j <= 80; ++j) mass += s(0, j, 0);
        worst = std::max(worst, std::abs(mass - (1.0 - p.rho())));
    }
    return {worst < 1e-6, "N=80, max |sum_j p(0,j,0) - (1 - rho)| = " + fmt(worst) + " (need < 1e-6)"};
}

Outcome decay_rate() {
    double worst = 0.0;
    for (const ModelParams& p : {ModelParams(2, 10, 3), ModelParams(3, 10, 3)}) {
        const StationaryField f = to_transformed(solve_stationary(build_generator(p, 80)));
        for (int n = 0; n <= 2; ++n) {
            for (int k = 0; k < 2; ++k) {
                worst = std::max(worst, std::abs(estimate_decay(f, n, k, 10, 25) - p.rho() * p.rho()));
            }
        }
    }
    return {worst < 1e-3, "m in [10,25], N=80, max |estimate - rho^2| = " + fmt(worst) + " (need < 1e-3)"};
}

Outcome balance() {
    double worst = 0.0;
    for (const ModelParams& p : kTriples) {
        worst = std::max(worst, balance_residual(compensation_field(build_series(p)), p, 30, 30));
    }
    return {worst < 1e-10, "30x30 box, max balance residual = " + fmt(worst) + " (need < 1e-10)"};
}

Outcome ladder() {
    int order_fail = 0, bound_fail = 0;
    double kernel_worst = 0.0, limit_worst = 0.0;
    auto kernel_rel = [](const ModelParams& p, double g, double d) {
        const double rho = p.rho();
        const double scale =
            std::max({2.0 * (rho + 1.0) * g * d, 2.0 * rho * d * d, g * g, g * d * d});
        return std::abs(kernel_value(p, g, d)) / scale;
    };
    for (const ModelParams& p : testing::random_stable(100, 202)) {
        SeriesOptions opt;
        opt.min_terms = 26;
        opt.max_terms = 80;
        const CompensationSeries s = build_series(p, opt);
        const double rho2 = p.rho() * p.rho();
        for (std::size_t i = 0; i < s.deltas.size(); ++i) {
            const double g = s.gammas[i], d = s.deltas[i], gn = s.gammas[i + 1];
            if (!(g > d && d > gn && gn > 0.0)) ++order_fail;
            const double cap = std::pow(3.0, -static_cast<double>(i)) * rho2;
            if (!(g <= cap * (1.0 + 1e-12) && d <= 0.5 * cap)) ++bound_fail;
            kernel_worst = std::max({kernel_worst, kernel_rel(p, g, d), kernel_rel(p, gn, d)});
        }
        const KernelRoots r = asymptotic_roots(p);
        const double lr = p.lambda() / (p.lambda() + p.alpha()) / (2.0 * p.rho());
        const std::size_t i = 25;
        limit_worst = std::max({limit_worst, std::abs(s.deltas[i] / s.gammas[i] - r.w_minus),
                                std::abs(s.gammas[i + 1] / s.deltas[i] - 1.0 / r.w_plus),
                                std::abs(s.c[i + 1] / s.h[i] - (lr - r.w_minus) / (r.w_plus - lr)),
                                std::abs(s.h[i] / s.c[i] + r.w_plus / r.w_minus)});
    }
    std::ostringstream os;
    os << "100 random triples: ordering violations " << order_fail << ", geometric-bound violations " << bound_fail
       << ", max relative kernel residual " << fmt(kernel_worst) << " (need < 1e-12), max ratio-limit error at index 25 "
       << fmt(limit_worst) << " (need < 1e-6)";
    return {order_fail == 0 && bound_fail == 0 && kernel_worst < 1e-12 && limit_worst < 1e-6, os.str()};
}

Outcome appendix() {
    double worst = 0.0, max_drift = -1e300;
    for (const ModelParams& p : testing::random_stable(50, 303)) {
        const AppendixCheck a = verify_appendix(p);
        worst = std::max({worst, a.residual_block0, a.residual_interior});
        max_drift = std::max(max_drift, a.drift);
    }
    return {worst < 1e-12 && max_drift < 0.0,
            "50 random triples, max residual " + fmt(worst) + " (need < 1e-12), largest drift " + fmt(max_drift) +
                " (need < 0)"};
}

Outcome simulation() {
    constexpr double z99 = 2.5758293035489004;
    const ModelParams p(2, 10, 3);
    SimConfig cfg{p};
    cfg.horizon = 1e6;
    cfg.warmup = 1e4;
    cfg.replications = 10;
    cfg.seed = 20240601;
    const SimEstimate e = simulate(cfg, 4, 4);
    const CompensationSeries s = build_series(p);
    int covered = 0;
    for (int m = 0; m < 5; ++m) {
        for (int n = 0; n < 5; ++n) {
            for (int k = 0; k < 2; ++k) covered += e.at(m, n, k).contains(evaluate(s, m, n, k), z99);
        }
    }
    const bool busy_ok = e.p_busy.contains(0.2, z99);
    std::ostringstream os;
    os << "10 x 1e6 time units: " << covered << "/50 states inside 99% intervals (need >= 23); P(busy) = "
       << fmt(e.p_busy.mean) << " +/- " << fmt(e.p_busy.half_width_at(z99)) << " (must contain 0.2)";
    return {covered >= 23 && busy_ok, os.str()};
}

Outcome sweep() {
    std::ostringstream out, err;
    const int code = cli::run({"sweep", "--mu", "10", "--alphas", "5", "8", "10"}, out, err);
    const nlohmann::json j = nlohmann::json::parse(out.str());
    int solved = 0;
    for (const auto& pt : j["points"]) solved += pt["status"] == "ok";
    const bool dec = j["strictly_decreasing_in_lambda"].get<bool>();
    const bool inc = j["increasing_in_alpha"].get<bool>();
    std::ostringstream os;
    os << solved << " solved points; strictly decreasing in lambda: " << (dec ? "yes" : "no")
       << "; increasing in alpha: " << (inc ? "yes" : "no") << "; exit status " << code;
    return {code == 0 && dec && inc && solved > 0, os.str()};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "reference table and oracle agreement", 5.0, reference_table},
        {2, "server utilization equals lambda/mu", 60.0, utilization},
        {3, "idle mass with orbit 1 empty equals 1 - rho", 60.0, boundary_mass},
        {4, "geometric decay rate rho^2", 10.0, decay_rate},
        {5, "balance residuals", 60.0, balance},
        {6, "kernel ladder properties", 30.0, ladder},
        {7, "interior null vector and drift", 1.0, appendix},
        {8, "simulation coverage", 120.0, simulation},
        {9, "sweep monotonicity", 30.0, sweep},
    };
    int failures = 0;
    for (const Criterion& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.budget_s;
        const bool pass = o.pass && in_time;
        failures += !pass;
        std::printf("criterion %d: %s: %s (%.2f s, budget %.0f s%s). %s\n", c.id, pass ? "PASS" : "FAIL", c.name, secs,
                    c.budget_s, in_time ? "" : ", over budget", o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
