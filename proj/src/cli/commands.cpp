#include "jsoq/cli.hpp"

#include "jsoq/compensation.hpp"
#include "jsoq/errors.hpp"
#include "jsoq/kernel.hpp"
#include "jsoq/oracle.hpp"
#include "jsoq/simulator.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>
#include <variant>

namespace jsoq::cli {

using json = nlohmann::ordered_json;

namespace {

class BadFlags : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

constexpr double kCompareGate = 1e-6;
constexpr double kZ99 = 2.5758293035489004;

struct RunSpec {
    std::string command;
    std::optional<double> lambda;
    std::optional<double> mu;
    std::optional<double> alpha;
    double tol = 1e-10;
    int max_terms = 200;
    std::string box;  // "MxN"; empty means the command's default
    std::string format = "json";
    std::string output;
    int n_trunc = 0;  // 0 means the command's default
    double horizon = 1e6;
    double warmup = 1e4;
    int replications = 10;
    std::uint64_t seed = 1;
    bool simulate = false;
    int m_lo = 10;
    int m_hi = 25;
    double lambda_min = 0.5;
    int points = 40;
    std::vector<double> alphas{5.0, 8.0, 10.0};
    std::vector<double> lambdas;
};

// ---------------------------------------------------------------------------
// Report: one set of values, rendered as JSON or CSV.

using Cell = std::variant<long long, double, std::string>;

struct Report {
    json doc = json::object();
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;
    int status = kOk;
};

json num(double x) {
    if (!std::isfinite(x)) return nullptr;
    return round10(x);
}

std::string render_cell(const Cell& c) {
    if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
    if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
    return std::get<std::string>(c);
}

void write_report(const Report& r, const std::string& format, std::ostream& os) {
    if (format == "json") {
        os << r.doc.dump(2) << '\n';
        return;
    }
    for (std::size_t i = 0; i < r.header.size(); ++i) os << (i ? "," : "") << r.header[i];
    os << '\n';
    for (const auto& row : r.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << render_cell(row[i]);
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// Argument helpers.

struct Box {
    int m;
    int n;
};

Box parse_box(const std::string& text, Box fallback) {
    if (text.empty()) return fallback;
    int m = 0, n = 0;
    char x = 0, extra = 0;
    std::istringstream is(text);
    if (!(is >> m >> x >> n) || (x != 'x' && x != 'X') || (is >> extra) || m < 1 || n < 1) {
        throw BadFlags("--box expects MxN with M, N >= 1, got '" + text + "'");
    }
    return {m, n};
}

ModelParams require_params(const RunSpec& s) {
    if (!s.lambda || !s.mu || !s.alpha) throw BadFlags(s.command + ": --lambda, --mu and --alpha are required");
    return ModelParams(*s.lambda, *s.mu, *s.alpha);
}

json params_json(const ModelParams& p) {
    return {{"lambda", num(p.lambda())}, {"mu", num(p.mu())}, {"alpha", num(p.alpha())}, {"rho", num(p.rho())}};
}

void add_probability_rows(Report& r, const StationaryField& f, Box box, const char* key) {
    json probs = json::array();
    r.header = {"m", "n", "k", "probability"};
    for (int m = 0; m < box.m; ++m) {
        for (int n = 0; n < box.n; ++n) {
            for (int k = 0; k < 2; ++k) {
                const double p = f(m, n, k);
                probs.push_back({{"m", m}, {"n", n}, {"k", k}, {"probability", num(p)}});
                r.rows.push_back({static_cast<long long>(m), static_cast<long long>(n), static_cast<long long>(k), p});
            }
        }
    }
    r.doc[key] = std::move(probs);
}

json aggregates_json(const StationaryField& f, Box box) {
    json agg = json::array();
    for (int m = 0; m < box.m; ++m) {
        for (int n = 0; n < box.n; ++n) {
            agg.push_back({{"m", m}, {"n", n}, {"probability", num(f(m, n, 0) + f(m, n, 1))}});
        }
    }
    return agg;
}

json measures_json(const Measures& ms) {
    json q0 = json::array();
    for (double x : ms.q0_row) q0.push_back(num(x));
    return {{"total_mass", num(ms.total_mass)},   {"p_busy", num(ms.p_busy)},
            {"mean_min", num(ms.mean_min)},       {"mean_diff", num(ms.mean_diff)},
            {"mean_total_orbit", num(ms.mean_total_orbit)}, {"q0_row", q0}};
}

json interval_json(const Interval& iv) {
    return {{"mean", num(iv.mean)}, {"std_error", num(iv.std_error)}, {"half_width_95", num(iv.half_width)}};
}

SimConfig sim_config(const RunSpec& s, const ModelParams& p) {
    SimConfig c{p};
    c.horizon = s.horizon;
    c.warmup = s.warmup;
    c.replications = s.replications;
    c.seed = s.seed;
    return c;
}

void check_box_inside(Box box, int n_trunc) {
    if (box.m - 1 + box.n - 1 > n_trunc) {
        throw BadFlags("box does not fit the oracle truncation: need (M-1)+(N-1) <= N_trunc = " +
                       std::to_string(n_trunc));
    }
}

// ---------------------------------------------------------------------------
// Commands.

Report cmd_solve(const RunSpec& s) {
    const ModelParams p = require_params(s);
    p.require_stable("solve");
    const Box box = parse_box(s.box, {4, 4});
    const CompensationSeries series = build_series(p, s.tol, static_cast<std::size_t>(s.max_terms));
    const KernelRoots roots = asymptotic_roots(p);
    const StationaryField f = compensation_field(series);

    Report r;
    r.doc["command"] = "solve";
    r.doc["params"] = params_json(p);
    r.doc["series"] = {{"terms", series.term_count},
                       {"tolerance", num(s.tol)},
                       {"tail_bound", num(series.tolerance_achieved)},
                       {"normalization", num(series.norm_const)},
                       {"w_minus", num(roots.w_minus)},
                       {"w_plus", num(roots.w_plus)},
                       {"s_minus", num(roots.s_minus)},
                       {"s_plus", num(roots.s_plus)}};
    r.doc["box"] = {box.m, box.n};
    add_probability_rows(r, f, box, "probabilities");
    r.doc["aggregates"] = aggregates_json(f, box);
    r.doc["measures"] = measures_json(measures(series));
    return r;
}

Report cmd_oracle(const RunSpec& s) {
    const ModelParams p = require_params(s);
    p.require_stable("oracle");
    const Box box = parse_box(s.box, {4, 4});
    const int N = s.n_trunc > 0 ? s.n_trunc : default_truncation(p);
    check_box_inside(box, N);
    const TruncatedSolution sol = solve_stationary(build_generator(p, N));
    const StationaryField f = to_transformed(sol);

    double idle_orbit1_empty = 0.0;
    for (int j = 0; j <= N; ++j) idle_orbit1_empty += sol(0, j, 0);

    Report r;
    r.doc["command"] = "oracle";
    r.doc["params"] = params_json(p);
    r.doc["truncation"] = {{"N", N},
                           {"residual", num(sol.residual)},
                           {"mass_deficit_bound", num(sol.mass_deficit_bound)},
                           {"idle_orbit1_empty", num(idle_orbit1_empty)},
                           {"one_minus_rho", num(1.0 - p.rho())}};
    r.doc["box"] = {box.m, box.n};
    add_probability_rows(r, f, box, "probabilities");
    r.doc["aggregates"] = aggregates_json(f, box);
    return r;
}

Report cmd_simulate(const RunSpec& s) {
    const ModelParams p = require_params(s);
    const Box box = parse_box(s.box, {5, 5});
    const SimEstimate est = simulate(sim_config(s, p), box.m - 1, box.n - 1);

    Report r;
    r.doc["command"] = "simulate";
    r.doc["params"] = params_json(p);
    r.doc["config"] = {{"horizon", num(s.horizon)},
                       {"warmup", num(s.warmup)},
                       {"replications", s.replications},
                       {"seed", s.seed}};
    r.doc["box"] = {box.m, box.n};
    json probs = json::array();
    r.header = {"m", "n", "k", "probability", "std_error", "half_width_95"};
    for (int m = 0; m < box.m; ++m) {
        for (int n = 0; n < box.n; ++n) {
            for (int k = 0; k < 2; ++k) {
                const Interval& iv = est.at(m, n, k);
                probs.push_back({{"m", m},
                                 {"n", n},
                                 {"k", k},
                                 {"probability", num(iv.mean)},
                                 {"std_error", num(iv.std_error)},
                                 {"half_width_95", num(iv.half_width)}});
                r.rows.push_back({static_cast<long long>(m), static_cast<long long>(n), static_cast<long long>(k),
                                  iv.mean, iv.std_error, iv.half_width});
            }
        }
    }
    r.doc["probabilities"] = std::move(probs);
    r.doc["diagnostics"] = {{"stable", p.stable()},
                            {"p_busy", interval_json(est.p_busy)},
                            {"util", num(p.lambda() / p.mu())},
                            {"mean_q1", interval_json(est.mean_q1)},
                            {"mean_q2", interval_json(est.mean_q2)},
                            {"mean_total_orbit", interval_json(est.mean_total_orbit)},
                            {"orbit_join_rate", interval_json(est.orbit_join_rate)},
                            {"retrial_success_rate", interval_json(est.retrial_success_rate)},
                            {"flow_ratio", interval_json(est.flow_ratio)},
                            {"p_q1_longer", interval_json(est.p_q1_longer)},
                            {"p_q2_longer", interval_json(est.p_q2_longer)},
                            {"mean_final_total_orbit", num(est.mean_final_total_orbit)},
                            {"events", est.events}};
    return r;
}

Report cmd_compare(const RunSpec& s) {
    const ModelParams p = require_params(s);
    p.require_stable("compare");
    const Box box = parse_box(s.box, {10, 10});
    const int N = s.n_trunc > 0 ? s.n_trunc : 80;
    check_box_inside(box, N);

    const CompensationSeries series = build_series(p, s.tol, static_cast<std::size_t>(s.max_terms));
    const StationaryField comp = compensation_field(series);
    const StationaryField orc = to_transformed(solve_stationary(build_generator(p, N)));
    std::optional<SimEstimate> est;
    if (s.simulate) est = simulate(sim_config(s, p), box.m - 1, box.n - 1);

    Report r;
    r.header = {"m", "n", "k", "probability", "oracle", "abs_diff"};
    if (est) {
        r.header.insert(r.header.end(), {"sim_mean", "sim_std_error", "in_ci95", "in_ci99"});
    }
    double max_diff = 0.0;
    json worst = nullptr;
    int covered95 = 0, covered99 = 0, states = 0;
    json rows = json::array();
    for (int m = 0; m < box.m; ++m) {
        for (int n = 0; n < box.n; ++n) {
            for (int k = 0; k < 2; ++k) {
                const double a = comp(m, n, k);
                const double b = orc(m, n, k);
                const double d = std::abs(a - b);
                ++states;
                if (d > max_diff || worst.is_null()) {
                    max_diff = std::max(max_diff, d);
                    worst = {{"m", m}, {"n", n}, {"k", k}};
                }
                json row = {{"m", m}, {"n", n}, {"k", k}, {"probability", num(a)}, {"oracle", num(b)},
                            {"abs_diff", num(d)}};
                std::vector<Cell> cells{static_cast<long long>(m), static_cast<long long>(n),
                                        static_cast<long long>(k), a, b, d};
                if (est) {
                    const Interval& iv = est->at(m, n, k);
                    const bool in95 = iv.contains(a, 1.959963984540054);
                    const bool in99 = iv.contains(a, kZ99);
                    covered95 += in95;
                    covered99 += in99;
                    row["sim_mean"] = num(iv.mean);
                    row["sim_std_error"] = num(iv.std_error);
                    row["in_ci95"] = in95;
                    row["in_ci99"] = in99;
                    cells.insert(cells.end(), {iv.mean, iv.std_error, static_cast<long long>(in95),
                                               static_cast<long long>(in99)});
                }
                rows.push_back(std::move(row));
                r.rows.push_back(std::move(cells));
            }
        }
    }

    r.doc["command"] = "compare";
    r.doc["params"] = params_json(p);
    r.doc["box"] = {box.m, box.n};
    r.doc["oracle_N"] = N;
    r.doc["series_terms"] = series.term_count;
    r.doc["max_abs_diff"] = num(max_diff);
    r.doc["worst_state"] = worst;
    r.doc["threshold"] = num(kCompareGate);
    r.doc["agree"] = max_diff <= kCompareGate;
    if (est) {
        r.doc["simulation"] = {{"states", states},
                               {"covered_95", covered95},
                               {"covered_99", covered99},
                               {"p_busy", interval_json(est->p_busy)},
                               {"p_busy_in_ci99", est->p_busy.contains(p.lambda() / p.mu(), kZ99)},
                               {"flow_ratio", interval_json(est->flow_ratio)}};
    }
    r.doc["states"] = std::move(rows);
    if (max_diff > kCompareGate) r.status = kComparisonFailed;
    return r;
}

Report cmd_decay(const RunSpec& s) {
    const ModelParams p = require_params(s);
    p.require_stable("decay");
    if (s.m_lo < 0 || s.m_hi <= s.m_lo) throw BadFlags("decay: need 0 <= --m-lo < --m-hi");
    const int N = s.n_trunc > 0 ? s.n_trunc : std::max(60, default_truncation(p));
    if (s.m_hi + 2 > N) throw BadFlags("decay: --m-hi + 2 must not exceed the truncation N");
    const StationaryField orc = to_transformed(solve_stationary(build_generator(p, N)));
    const double rho2 = p.rho() * p.rho();

    Report r;
    r.header = {"n", "k", "estimate", "rho_squared", "abs_error"};
    json est = json::array();
    double worst = 0.0;
    for (int n = 0; n <= 2; ++n) {
        for (int k = 0; k < 2; ++k) {
            const double e = estimate_decay(orc, n, k, s.m_lo, s.m_hi);
            worst = std::max(worst, std::abs(e - rho2));
            est.push_back({{"n", n}, {"k", k}, {"estimate", num(e)}, {"abs_error", num(std::abs(e - rho2))}});
            r.rows.push_back({static_cast<long long>(n), static_cast<long long>(k), e, rho2, std::abs(e - rho2)});
        }
    }
    const AppendixCheck app = verify_appendix(p);

    r.doc["command"] = "decay";
    r.doc["params"] = params_json(p);
    r.doc["N"] = N;
    r.doc["m_range"] = {s.m_lo, s.m_hi};
    r.doc["rho_squared"] = num(rho2);
    r.doc["estimates"] = std::move(est);
    r.doc["max_abs_error"] = num(worst);
    r.doc["appendix"] = {{"v", {num(app.v[0]), num(app.v[1])}},
                         {"residual_block0", num(app.residual_block0)},
                         {"residual_interior", num(app.residual_interior)},
                         {"residual_interior_alt", num(app.residual_interior_alt)},
                         {"drift", num(app.drift)}};
    return r;
}

struct Table1Row {
    double lambda;
    double value[4];
    int terms[4];
};

// Printed reference values (q_{0,n} summed over the server state) and the
// per-probability term counts that accompany them.
constexpr Table1Row kTable1[] = {
    {2.0, {0.5639, 0.0063, 0.1235, 0.2496}, {159, 159, 8, 4}},
    {3.0, {0.5437, 0.0125, 0.0986, 0.1992}, {79, 79, 10, 5}},
    {4.0, {0.5056, 0.0193, 0.0895, 0.1658}, {51, 51, 11, 6}},
};

Report cmd_table1(const RunSpec& s) {
    const double mu = 10.0, alpha = 3.0;
    const int N = s.n_trunc > 0 ? s.n_trunc : 80;
    Report r;
    r.header = {"lambda", "n", "compensation", "oracle", "reference", "deviation", "flagged", "terms",
                "reference_terms"};
    json rows = json::array();
    double max_oracle_diff = 0.0;
    int flagged_cells = 0;
    for (const Table1Row& ref : kTable1) {
        const ModelParams p(ref.lambda, mu, alpha);
        const CompensationSeries series = build_series(p, s.tol, static_cast<std::size_t>(s.max_terms));
        const StationaryField comp = compensation_field(series);
        const StationaryField orc = to_transformed(solve_stationary(build_generator(p, N)));
        json cells = json::array();
        double partial = 0.0;
        for (int n = 0; n < 4; ++n) {
            const double c = comp(0, n, 0) + comp(0, n, 1);
            const double o = orc(0, n, 0) + orc(0, n, 1);
            const double dev = c - ref.value[n];
            const bool flagged = std::abs(dev) > 1e-3;
            partial += c;
            flagged_cells += flagged;
            max_oracle_diff = std::max(max_oracle_diff, std::abs(c - o));
            cells.push_back({{"n", n},
                             {"compensation", num(c)},
                             {"oracle", num(o)},
                             {"reference", num(ref.value[n])},
                             {"deviation", num(dev)},
                             {"flagged", flagged},
                             {"reference_terms", ref.terms[n]}});
            r.rows.push_back({ref.lambda, static_cast<long long>(n), c, o, ref.value[n], dev,
                              static_cast<long long>(flagged), static_cast<long long>(series.term_count),
                              static_cast<long long>(ref.terms[n])});
        }
        rows.push_back({{"lambda", num(ref.lambda)},
                        {"rho", num(p.rho())},
                        {"terms", series.term_count},
                        {"partial_mass", num(partial)},
                        {"cells", std::move(cells)}});
    }
    r.doc["command"] = "table1";
    r.doc["mu"] = num(mu);
    r.doc["alpha"] = num(alpha);
    r.doc["oracle_N"] = N;
    r.doc["rows"] = std::move(rows);
    r.doc["flagged_cells"] = flagged_cells;
    r.doc["max_oracle_diff"] = num(max_oracle_diff);
    if (max_oracle_diff > kCompareGate) r.status = kComparisonFailed;
    return r;
}

double stability_boundary(double mu, double alpha) {
    // rho = 1  <=>  lambda^2 + 2 alpha lambda - 2 alpha mu = 0
    return -alpha + std::sqrt(alpha * alpha + 2.0 * alpha * mu);
}

struct SweepPoint {
    double lambda = 0.0;
    double alpha = 0.0;
    std::string status;  // "ok", "unstable" or "no_convergence"
    double q000 = std::numeric_limits<double>::quiet_NaN();
};

Report cmd_sweep(const RunSpec& s) {
    const double mu = s.mu.value_or(10.0);
    if (s.alphas.empty()) throw BadFlags("sweep: --alphas must be non-empty");
    std::vector<double> grid = s.lambdas;
    if (grid.empty()) {
        if (s.points < 2) throw BadFlags("sweep: --points must be >= 2");
        double top = 0.0;
        for (double a : s.alphas) top = std::max(top, stability_boundary(mu, a));
        if (!(top > s.lambda_min)) throw BadFlags("sweep: --lambda-min is beyond every stability boundary");
        for (int j = 0; j < s.points; ++j) grid.push_back(s.lambda_min + j * (top - s.lambda_min) / s.points);
    }

    std::vector<SweepPoint> pts;
    for (double a : s.alphas) {
        for (double l : grid) pts.push_back({l, a, "", std::numeric_limits<double>::quiet_NaN()});
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < pts.size(); i = next++) {
            SweepPoint& pt = pts[i];
            const ModelParams p(pt.lambda, mu, pt.alpha);
            if (!p.stable()) {
                pt.status = "unstable";
                continue;
            }
            try {
                const CompensationSeries series = build_series(p, s.tol, static_cast<std::size_t>(s.max_terms));
                pt.q000 = evaluate(series, 0, 0, 0);
                pt.status = "ok";
            } catch (const TruncationError&) {
                pt.status = "no_convergence";
            }
        }
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), 8u));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // Monotone checks: strictly decreasing in lambda per alpha, increasing in
    // alpha at every lambda where both curves are solved.
    const std::size_t G = grid.size();
    auto point = [&](std::size_t ai, std::size_t li) -> const SweepPoint& { return pts[ai * G + li]; };
    json lambda_checks = json::array();
    bool decreasing_all = true;
    for (std::size_t ai = 0; ai < s.alphas.size(); ++ai) {
        bool ok = true;
        const SweepPoint* prev = nullptr;
        for (std::size_t li = 0; li < G; ++li) {
            const SweepPoint& pt = point(ai, li);
            if (pt.status != "ok") continue;
            if (prev && !(pt.q000 < prev->q000)) ok = false;
            prev = &pt;
        }
        decreasing_all = decreasing_all && ok;
        lambda_checks.push_back({{"alpha", num(s.alphas[ai])}, {"strictly_decreasing_in_lambda", ok}});
    }
    bool increasing_alpha = true;
    int alpha_violations = 0;
    for (std::size_t li = 0; li < G; ++li) {
        for (std::size_t a1 = 0; a1 < s.alphas.size(); ++a1) {
            for (std::size_t a2 = 0; a2 < s.alphas.size(); ++a2) {
                if (!(s.alphas[a1] < s.alphas[a2])) continue;
                const SweepPoint& lo = point(a1, li);
                const SweepPoint& hi = point(a2, li);
                if (lo.status != "ok" || hi.status != "ok") continue;
                if (!(hi.q000 > lo.q000)) {
                    increasing_alpha = false;
                    ++alpha_violations;
                }
            }
        }
    }

    Report r;
    r.header = {"lambda", "alpha", "q000"};
    json out = json::array();
    for (const SweepPoint& pt : pts) {
        out.push_back({{"lambda", num(pt.lambda)}, {"alpha", num(pt.alpha)}, {"status", pt.status},
                       {"q000", num(pt.q000)}});
        r.rows.push_back({pt.lambda, pt.alpha, pt.status == "ok" ? Cell{pt.q000} : Cell{pt.status}});
    }
    json bounds = json::array();
    for (double a : s.alphas) bounds.push_back({{"alpha", num(a)}, {"lambda_max", num(stability_boundary(mu, a))}});
    r.doc["command"] = "sweep";
    r.doc["mu"] = num(mu);
    r.doc["stability_boundaries"] = std::move(bounds);
    r.doc["points"] = std::move(out);
    r.doc["monotone_in_lambda"] = std::move(lambda_checks);
    r.doc["strictly_decreasing_in_lambda"] = decreasing_all;
    r.doc["increasing_in_alpha"] = increasing_alpha;
    r.doc["alpha_violations"] = alpha_violations;
    if (!decreasing_all || !increasing_alpha) r.status = kComparisonFailed;
    return r;
}

// ---------------------------------------------------------------------------
// Config file and flag plumbing.

template <typename T>
T config_value(const json& v, const std::string& key) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw BadFlags("config: bad value for '" + key + "'");
    }
}

void apply_config(const json& j, RunSpec& s) {
    if (!j.is_object()) throw BadFlags("config: top level must be an object");
    for (const auto& [key, v] : j.items()) {
        if (key == "command") s.command = config_value<std::string>(v, key);
        else if (key == "params") {
            if (!v.is_object()) throw BadFlags("config: 'params' must be an object");
            apply_config(v, s);
        } else if (key == "lambda") s.lambda = config_value<double>(v, key);
        else if (key == "mu") s.mu = config_value<double>(v, key);
        else if (key == "alpha") s.alpha = config_value<double>(v, key);
        else if (key == "tol") s.tol = config_value<double>(v, key);
        else if (key == "max_terms") s.max_terms = config_value<int>(v, key);
        else if (key == "box") {
            if (v.is_array() && v.size() == 2) {
                s.box = std::to_string(config_value<int>(v[0], key)) + "x" + std::to_string(config_value<int>(v[1], key));
            } else {
                s.box = config_value<std::string>(v, key);
            }
        } else if (key == "format") s.format = config_value<std::string>(v, key);
        else if (key == "output") s.output = config_value<std::string>(v, key);
        else if (key == "N") s.n_trunc = config_value<int>(v, key);
        else if (key == "horizon") s.horizon = config_value<double>(v, key);
        else if (key == "warmup") s.warmup = config_value<double>(v, key);
        else if (key == "replications") s.replications = config_value<int>(v, key);
        else if (key == "seed") s.seed = config_value<std::uint64_t>(v, key);
        else if (key == "simulate") s.simulate = config_value<bool>(v, key);
        else if (key == "m_lo") s.m_lo = config_value<int>(v, key);
        else if (key == "m_hi") s.m_hi = config_value<int>(v, key);
        else if (key == "lambda_min") s.lambda_min = config_value<double>(v, key);
        else if (key == "points") s.points = config_value<int>(v, key);
        else if (key == "alphas") s.alphas = config_value<std::vector<double>>(v, key);
        else if (key == "lambdas") s.lambdas = config_value<std::vector<double>>(v, key);
        else throw BadFlags("config: unknown key '" + key + "'");
    }
}

void load_config(const std::string& path, RunSpec& s) {
    std::ifstream in(path);
    if (!in) throw BadFlags("config: cannot open '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw BadFlags(std::string("config: ") + e.what());
    }
    apply_config(j, s);
}

// Each flag writes into its own slot; slots that were actually given on the
// command line are copied over the config-derived spec afterwards.
class Flags {
public:
    template <typename Field, typename Store = Field>
    CLI::Option* add(CLI::App* app, const std::string& name, Field RunSpec::*field, const std::string& help) {
        auto slot = std::make_shared<Store>();
        CLI::Option* opt = app->add_option(name, *slot, help);
        overlays_.push_back([opt, slot, field](RunSpec& s) {
            if (opt->count() > 0) s.*field = *slot;
        });
        return opt;
    }

    void flag(CLI::App* app, const std::string& name, bool RunSpec::*field, const std::string& help) {
        CLI::Option* opt = app->add_flag(name, help);
        overlays_.push_back([opt, field](RunSpec& s) {
            if (opt->count() > 0) s.*field = true;
        });
    }

    void apply(RunSpec& s) const {
        for (const auto& f : overlays_) f(s);
    }

private:
    std::vector<std::function<void(RunSpec&)>> overlays_;
};

void add_params(CLI::App* app, Flags& f) {
    f.add<std::optional<double>, double>(app, "--lambda", &RunSpec::lambda, "arrival rate");
    f.add<std::optional<double>, double>(app, "--mu", &RunSpec::mu, "service rate");
    f.add<std::optional<double>, double>(app, "--alpha", &RunSpec::alpha, "retrial rate per orbit");
}

void add_output(CLI::App* app, Flags& f, std::string& config) {
    f.add(app, "--format", &RunSpec::format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    f.add(app, "--output,-o", &RunSpec::output, "write the report here instead of stdout");
    app->add_option("--config", config, "JSON file with the same keys as the flags");
}

void add_series(CLI::App* app, Flags& f) {
    f.add(app, "--tol", &RunSpec::tol, "relative tail bound of the series");
    f.add(app, "--max-terms", &RunSpec::max_terms, "maximum number of compensation pairs");
}

void add_sim(CLI::App* app, Flags& f) {
    f.add(app, "--horizon", &RunSpec::horizon, "simulated time per replication");
    f.add(app, "--warmup", &RunSpec::warmup, "discarded initial time");
    f.add(app, "--replications", &RunSpec::replications, "independent replications");
    f.add(app, "--seed", &RunSpec::seed, "base seed");
}

}  // namespace

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

double round10(double x) {
    if (!std::isfinite(x)) return x;
    return std::stod(format_number(x));
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Stationary distribution of a two-orbit retrial queue with join-the-shortest-orbit routing"};
    app.require_subcommand(0, 1);
    Flags flags;
    std::string config_top;
    app.add_option("--config", config_top, "JSON run spec naming the command");

    struct Sub {
        const char* name;
        const char* help;
        CLI::App* app = nullptr;
        std::string config;
    };
    std::vector<Sub> subs = {
        {"solve", "compensation-method solution on a box"},
        {"oracle", "truncated-chain solution on a box"},
        {"simulate", "discrete-event simulation estimates"},
        {"compare", "compensation vs oracle (and optionally simulation)"},
        {"decay", "geometric decay estimates and the drift check"},
        {"table1", "q(0,n), n = 0..3, for lambda in {2,3,4}, mu = 10, alpha = 3"},
        {"sweep", "q(0,0,0) over a lambda grid for several alpha"},
    };
    for (Sub& sub : subs) {
        sub.app = app.add_subcommand(sub.name, sub.help);
        add_output(sub.app, flags, sub.config);
        const std::string n = sub.name;
        if (n != "table1") add_params(sub.app, flags);
        if (n == "solve" || n == "compare" || n == "table1" || n == "sweep") add_series(sub.app, flags);
        if (n == "solve" || n == "oracle" || n == "simulate" || n == "compare") {
            flags.add(sub.app, "--box", &RunSpec::box, "MxN: m < M, n < N");
        }
        if (n == "oracle" || n == "compare" || n == "decay" || n == "table1") {
            flags.add(sub.app, "--N", &RunSpec::n_trunc, "oracle truncation: orbits 0..N");
        }
        if (n == "simulate" || n == "compare") add_sim(sub.app, flags);
        if (n == "compare") flags.flag(sub.app, "--simulate", &RunSpec::simulate, "also run the simulator");
        if (n == "decay") {
            flags.add(sub.app, "--m-lo", &RunSpec::m_lo, "first m of the regression");
            flags.add(sub.app, "--m-hi", &RunSpec::m_hi, "last m of the regression");
        }
        if (n == "sweep") {
            flags.add(sub.app, "--lambda-min", &RunSpec::lambda_min, "smallest lambda of the default grid");
            flags.add(sub.app, "--points", &RunSpec::points, "number of lambda values");
            flags.add(sub.app, "--alphas", &RunSpec::alphas, "retrial rates, one curve each");
            flags.add(sub.app, "--lambdas", &RunSpec::lambdas, "explicit lambda grid");
        }
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kBadFlags;
    }

    RunSpec spec;
    try {
        std::string config = config_top;
        for (const Sub& sub : subs) {
            if (sub.app->parsed()) {
                spec.command = sub.name;
                if (!sub.config.empty()) config = sub.config;
            }
        }
        if (!config.empty()) {
            const std::string chosen = spec.command;
            load_config(config, spec);
            if (!chosen.empty()) spec.command = chosen;
        }
        flags.apply(spec);
        if (spec.command.empty()) throw BadFlags("no command given (try --help)");
        if (spec.format != "json" && spec.format != "csv") throw BadFlags("--format must be json or csv");

        Report report;
        if (spec.command == "solve") report = cmd_solve(spec);
        else if (spec.command == "oracle") report = cmd_oracle(spec);
        else if (spec.command == "simulate") report = cmd_simulate(spec);
        else if (spec.command == "compare") report = cmd_compare(spec);
        else if (spec.command == "decay") report = cmd_decay(spec);
        else if (spec.command == "table1") report = cmd_table1(spec);
        else if (spec.command == "sweep") report = cmd_sweep(spec);
        else throw BadFlags("unknown command '" + spec.command + "'");

        if (spec.output.empty()) {
            write_report(report, spec.format, out);
        } else {
            std::ofstream file(spec.output);
            if (!file) throw BadFlags("cannot write '" + spec.output + "'");
            write_report(report, spec.format, file);
        }
        if (report.status == kComparisonFailed) err << "error: comparison failed\n";
        return report.status;
    } catch (const BadFlags& e) {
        err << "error: " << e.what() << '\n';
        return kBadFlags;
    } catch (const InvalidParameter& e) {
        err << "error: " << e.what() << '\n';
        return kBadFlags;
    } catch (const Unstable& e) {
        err << "error: " << e.what() << " (rho = " << format_number(e.rho()) << ")\n";
        return kUnstable;
    } catch (const TruncationError& e) {
        err << "error: " << e.what() << '\n';
        return kNoConvergence;
    } catch (const SolverError& e) {
        err << "error: " << e.what() << '\n';
        return kNoConvergence;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
}

}  // namespace jsoq::cli
