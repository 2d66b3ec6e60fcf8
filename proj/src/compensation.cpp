#include "jsoq/compensation.hpp"

#include "jsoq/errors.hpp"
#include "jsoq/kernel.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace jsoq {

namespace {

void require_nonzero(double denom, double scale, const char* what) {
    if (!std::isfinite(denom) || std::abs(denom) <= 1e-15 * scale) {
        std::ostringstream os;
        os << what << ": vanishing denominator " << denom;
        throw DegenerateParameter(os.str());
    }
}

// sum_{m>=1} x^m and sum_{m>=1} m x^m
double geom0(double x) { return x / (1.0 - x); }
double geom1(double x) { return x / ((1.0 - x) * (1.0 - x)); }

// One product-form term coef * gamma^m * delta^n of the n >= 1 region.
struct Term {
    double coef;
    double gamma;
    double delta;
};

template <typename Fn>
void for_each_term(const CompensationSeries& s, Fn&& fn) {
    for (std::size_t i = 0; i < s.deltas.size(); ++i) {
        fn(Term{s.h[i], s.gammas[i], s.deltas[i]});
        fn(Term{s.c[i + 1], s.gammas[i + 1], s.deltas[i]});
    }
}

// Unnormalized q(0, 1), the input of the origin equation.
Vec2 vertical_first(const CompensationSeries& s) {
    double busy = 0.0;
    for_each_term(s, [&](const Term& t) { busy += t.coef * t.delta; });
    busy *= s.theta[1];
    return {s.vertical_idle_ratio * busy, busy};
}

}  // namespace

StartingPair starting_pair(const ModelParams& params) {
    params.require_stable("starting_pair");
    const double rho = params.rho();
    return {rho * rho, rho * rho / (2.0 + rho)};
}

Vec2 theta_vector(const ModelParams& params, double theta0) {
    return {theta0, theta0 * (params.lambda() + 2.0 * params.alpha()) / params.mu()};
}

double coefficient_c(const ModelParams& params, double gamma_i, double gamma_ip1, double delta_i, double h_i) {
    const double l = params.lambda();
    const double a = params.alpha();
    const double kappa = delta_i * (l + a * delta_i) / (l + a);
    const double denom = gamma_i - kappa;
    require_nonzero(denom, std::max(std::abs(gamma_i), std::abs(kappa)), "coefficient_c");
    return -(gamma_ip1 - kappa) / denom * h_i;
}

double coefficient_h(const ModelParams& params, double gamma_ip1, double delta_i, double delta_ip1, double c_ip1) {
    if (delta_i == 0.0 || delta_ip1 == 0.0) throw DegenerateParameter("coefficient_h: zero delta");
    const double rho = params.rho();
    const double num = (rho + gamma_ip1) / delta_ip1 - (1.0 + rho);
    const double denom = (rho + gamma_ip1) / delta_i - (1.0 + rho);
    require_nonzero(denom, std::abs((rho + gamma_ip1) / delta_i), "coefficient_h");
    return -num / denom * c_ip1;
}

Vec2 xi_step(const ModelParams& params, double gamma_i, double delta_im1, double delta_i, double c_i, double h_i,
             const Vec2& theta) {
    if (gamma_i == 0.0) throw DegenerateParameter("xi_step: gamma_i = 0");
    const LevelMatrices b = level_matrices(params);
    const Eigen::PartialPivLU<Mat2> lu(b.C00);
    if (lu.determinant() == 0.0) throw DegenerateParameter("xi_step: singular C00");
    const Vec2 rhs = (b.A1m1 + gamma_i * b.A0m1) * ((c_i * delta_im1 + h_i * delta_i) * theta);
    return -lu.solve(rhs) / gamma_i;
}

Vec2 xi_initial(const ModelParams& params, double h0, double gamma0, double delta0, const Vec2& theta) {
    return xi_step(params, gamma0, 0.0, delta0, 0.0, h0, theta);
}

CompensationSeries build_series(const ModelParams& params, double tol, std::size_t max_terms) {
    SeriesOptions opt;
    opt.tol = tol;
    opt.max_terms = max_terms;
    return build_series(params, opt);
}

CompensationSeries build_series(const ModelParams& params, const SeriesOptions& opt) {
    params.require_stable("build_series");
    if (!(opt.tol >= 0.0) || opt.max_terms < 1) throw DomainError("build_series: need tol >= 0, max_terms >= 1");

    const LevelMatrices blocks = level_matrices(params);
    CompensationSeries s{.params = params};
    s.theta = theta_vector(params, opt.theta0 > 0.0 ? opt.theta0 : params.mu());
    s.vertical_idle_ratio = params.mu() / (params.lambda() + params.alpha());
    s.origin_map = -blocks.A00.partialPivLu().solve(blocks.A0m1);

    const auto [gamma0, delta0] = starting_pair(params);
    s.gammas = {gamma0};
    s.deltas = {delta0};
    s.h = {opt.h0};
    s.c = {0.0};
    s.xi = {xi_initial(params, opt.h0, gamma0, delta0, s.theta)};

    // Per-pair contribution to the absolute normalization sum; the corner
    // state is linear in q(0,1) so it is folded in through origin_gain.
    const double weight = std::max(s.theta.sum(), (1.0 + s.vertical_idle_ratio) * s.theta[1]);
    const double origin_gain = s.origin_map.cwiseAbs().sum() * (1.0 + s.vertical_idle_ratio) * s.theta[1];
    std::vector<double> contrib;
    double mass = 0.0;

    for (std::size_t i = 0;; ++i) {
        const double g = s.gammas[i];
        const double d = s.deltas[i];
        const double g_next = gamma_given_delta(params, d);
        const double c_next = coefficient_c(params, g, g_next, d, s.h[i]);
        const double d_next = delta_given_gamma(params, g_next);
        const double h_next = coefficient_h(params, g_next, d, d_next, c_next);

        if (!(g > d && d > g_next && g_next > d_next && d_next > 0.0)) {
            std::ostringstream os;
            os << "build_series: interleaving violated at pair " << i;
            throw InternalError(os.str());
        }

        s.gammas.push_back(g_next);
        s.c.push_back(c_next);

        const Vec2 xi_full = xi_step(params, g_next, d, d_next, c_next, h_next, s.theta);
        const double t = weight * (std::abs(s.h[i]) / (1.0 - g) + std::abs(c_next) / (1.0 - g_next)) * geom0(d) +
                         xi_full.cwiseAbs().sum() * geom0(g_next) +
                         origin_gain * (std::abs(s.h[i]) + std::abs(c_next)) * d;
        contrib.push_back(t);
        mass += t;

        // Geometric extrapolation of the remaining contributions.
        double bound = std::numeric_limits<double>::infinity();
        if (t == 0.0) {
            bound = 0.0;
        } else if (contrib.size() >= 3) {
            const std::size_t k = contrib.size() - 1;
            const double r = std::max(contrib[k] / contrib[k - 1], contrib[k - 1] / contrib[k - 2]);
            if (r < 1.0) bound = t * r / (1.0 - r);
        }
        const double rel_bound = bound / mass;
        const std::size_t pairs = i + 1;
        s.tolerance_achieved = rel_bound;

        const bool done = pairs >= opt.min_terms && rel_bound <= opt.tol;
        if (done || pairs >= opt.max_terms) {
            // Truncate consistently: gamma_{T+1} keeps only its c_{T+1} delta_T part.
            s.xi.push_back(xi_step(params, g_next, d, d_next, c_next, 0.0, s.theta));
            s.term_count = pairs;
            if (!done) {
                std::ostringstream os;
                os << "build_series: tail bound " << rel_bound << " above tolerance " << opt.tol << " after "
                   << pairs << " pairs";
                throw TruncationError(os.str(), rel_bound);
            }
            break;
        }

        s.deltas.push_back(d_next);
        s.h.push_back(h_next);
        s.xi.push_back(xi_full);
    }

    s.norm_const = normalization(s);
    return s;
}

double normalization(const CompensationSeries& s) {
    const double w = s.vertical_idle_ratio;
    double interior = 0.0;
    double vertical = 0.0;
    for_each_term(s, [&](const Term& t) {
        interior += t.coef * geom0(t.gamma) * geom0(t.delta);
        vertical += t.coef * geom0(t.delta);
    });
    double horizontal = 0.0;
    for (std::size_t i = 0; i < s.xi.size(); ++i) horizontal += s.xi[i].sum() * geom0(s.gammas[i]);
    const double origin = (s.origin_map * vertical_first(s)).sum();

    const double total = s.theta.sum() * interior + (1.0 + w) * s.theta[1] * vertical + horizontal + origin;
    if (!(total > 0.0) || !std::isfinite(total)) {
        std::ostringstream os;
        os << "normalization: non-positive total mass " << total;
        throw InternalError(os.str());
    }
    return total;
}

Vec2 evaluate_unnormalized(const CompensationSeries& s, int m, int n) {
    if (m < 0 || n < 0) throw EvaluationError("evaluate: negative state index");
    if (n >= 1) {
        double sum = 0.0;
        for_each_term(s, [&](const Term& t) { sum += t.coef * std::pow(t.gamma, m) * std::pow(t.delta, n); });
        if (m >= 1) return sum * s.theta;
        const double busy = sum * s.theta[1];
        return {s.vertical_idle_ratio * busy, busy};
    }
    if (m >= 1) {
        Vec2 acc = Vec2::Zero();
        for (std::size_t i = 0; i < s.xi.size(); ++i) acc += std::pow(s.gammas[i], m) * s.xi[i];
        return acc;
    }
    return s.origin_map * vertical_first(s);
}

double evaluate(const CompensationSeries& s, int m, int n, int k) {
    if (k != 0 && k != 1) throw EvaluationError("evaluate: server state must be 0 or 1");
    const double p = evaluate_unnormalized(s, m, n)[k] / s.norm_const;
    if (p < -kNegativeTolerance) {
        std::ostringstream os;
        os << "evaluate: q(" << m << "," << n << "," << k << ") = " << p << " below truncation noise";
        throw TruncationError(os.str(), p);
    }
    return p;
}

StationaryField compensation_field(CompensationSeries series) {
    return StationaryField(Provenance::compensation,
                           [s = std::move(series)](int m, int n, int k) { return evaluate(s, m, n, k); });
}

Measures measures(const CompensationSeries& s) {
    const double w = s.vertical_idle_ratio;
    const Vec2& th = s.theta;

    // interior (m >= 1, n >= 1) and vertical (m = 0, n >= 1) moments
    double i_mass = 0.0, i_m = 0.0, i_n = 0.0;
    double v_mass = 0.0, v_n = 0.0;
    for_each_term(s, [&](const Term& t) {
        i_mass += t.coef * geom0(t.gamma) * geom0(t.delta);
        i_m += t.coef * geom1(t.gamma) * geom0(t.delta);
        i_n += t.coef * geom0(t.gamma) * geom1(t.delta);
        v_mass += t.coef * geom0(t.delta);
        v_n += t.coef * geom1(t.delta);
    });
    // horizontal (m >= 1, n = 0)
    Vec2 h_mass = Vec2::Zero();
    Vec2 h_m = Vec2::Zero();
    for (std::size_t i = 0; i < s.xi.size(); ++i) {
        h_mass += geom0(s.gammas[i]) * s.xi[i];
        h_m += geom1(s.gammas[i]) * s.xi[i];
    }
    const Vec2 origin = s.origin_map * vertical_first(s);

    const double C = s.norm_const;
    Measures out;
    out.total_mass = (th.sum() * i_mass + (1.0 + w) * th[1] * v_mass + h_mass.sum() + origin.sum()) / C;
    out.p_busy = (th[1] * i_mass + th[1] * v_mass + h_mass[1] + origin[1]) / C;
    out.mean_min = (th.sum() * i_m + h_m.sum()) / C;
    out.mean_diff = (th.sum() * i_n + (1.0 + w) * th[1] * v_n) / C;
    out.mean_total_orbit = 2.0 * out.mean_min + out.mean_diff;
    for (int n = 0; n < 4; ++n) out.q0_row[n] = evaluate_unnormalized(s, 0, n).sum() / C;
    return out;
}

}  // namespace jsoq
