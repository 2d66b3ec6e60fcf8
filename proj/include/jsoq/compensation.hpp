#pragma once

#include "jsoq/model.hpp"

#include <array>
#include <cstddef>
#include <vector>

namespace jsoq {

/// Evaluations below -kNegativeTolerance are reported as a truncation error;
/// values in [-kNegativeTolerance, 0) are returned unclamped.
inline constexpr double kNegativeTolerance = 1e-12;

struct StartingPair {
    double gamma;
    double delta;
};

/// gamma_0 = rho^2, delta_0 = rho^2 / (2 + rho): the product form that solves
/// the interior together with the horizontal boundary.
StartingPair starting_pair(const ModelParams& params);

/// theta = theta0 * (1, (lambda + 2 alpha) / mu), the kernel null vector shared
/// by every product form (theta0 = mu by default).
Vec2 theta_vector(const ModelParams& params, double theta0);

/// Vertical compensation: weight of gamma_{i+1}^m delta_i^n that cancels the
/// vertical-boundary error of h_i gamma_i^m delta_i^n.
///
///   c_{i+1} = -(gamma_{i+1} - kappa) / (gamma_i - kappa) * h_i,
///   kappa   = delta_i (lambda + alpha delta_i) / (lambda + alpha).
double coefficient_c(const ModelParams& params, double gamma_i, double gamma_ip1, double delta_i, double h_i);

/// Horizontal compensation: weight of gamma_{i+1}^m delta_{i+1}^n.
///
///   h_{i+1} = -[(rho + gamma_{i+1}) / delta_{i+1} - (1 + rho)]
///              / [(rho + gamma_{i+1}) / delta_i - (1 + rho)] * c_{i+1}
double coefficient_h(const ModelParams& params, double gamma_ip1, double delta_i, double delta_ip1, double c_ip1);

/// Horizontal-boundary vector for the starting term:
///   xi_0 = -(h_0 / gamma_0) C00^{-1} [A1m1 + gamma_0 A0m1] delta_0 theta.
Vec2 xi_initial(const ModelParams& params, double h0, double gamma0, double delta0, const Vec2& theta);

/// Horizontal-boundary vector attached to gamma_i^m, i >= 1:
///   xi_i = -(1 / gamma_i) C00^{-1} [A1m1 + gamma_i A0m1] (c_i delta_{i-1} + h_i delta_i) theta.
Vec2 xi_step(const ModelParams& params, double gamma_i, double delta_im1, double delta_i, double c_i, double h_i,
             const Vec2& theta);

struct SeriesOptions {
    double tol = 1e-10;
    std::size_t max_terms = 200;
    /// Keep generating pairs until at least this many are retained, even if
    /// the tail bound is already below tol.
    std::size_t min_terms = 1;
    double h0 = 1.0;
    double theta0 = -1.0;  // <= 0 means mu
};

/// The compensation series
///
///   q(m, n) ~ sum_i (h_i gamma_i^m + c_{i+1} gamma_{i+1}^m) delta_i^n theta,   m >= 1, n >= 1
///   q(m, 0) ~ sum_i gamma_i^m xi_i,                                              m >= 1
///
/// with the m = 0 column carrying the busy component of the same sum and an
/// idle component mu / (lambda + alpha) times it, and q(0, 0) obtained from
/// the origin balance equation.
///
/// Index layout for T + 1 retained pairs: gammas, c and xi have T + 2 entries
/// (c[0] = 0 is a placeholder so that c[i] is c_i); deltas and h have T + 1.
struct CompensationSeries {
    ModelParams params;
    std::vector<double> gammas{};
    std::vector<double> deltas{};
    std::vector<double> h{};
    std::vector<double> c{};
    std::vector<Vec2> xi{};
    Vec2 theta = Vec2::Zero();
    Mat2 origin_map = Mat2::Zero();   // q(0,0) = origin_map * q(0,1)
    double vertical_idle_ratio = 0.0;  // q_{0,n}(0) / q_{0,n}(1) for n >= 1
    double norm_const = 0.0;
    std::size_t term_count = 0;
    double tolerance_achieved = 0.0;
};

/// Alternates vertical and horizontal compensation until the geometric tail
/// bound on the remaining normalization mass drops below tol (relative to the
/// mass accumulated so far). Throws Unstable for rho >= 1 and TruncationError
/// when max_terms pairs are not enough.
CompensationSeries build_series(const ModelParams& params, const SeriesOptions& options = {});
CompensationSeries build_series(const ModelParams& params, double tol, std::size_t max_terms);

/// Total unnormalized mass, summed in closed form over the four regions.
double normalization(const CompensationSeries& series);

/// Unnormalized q(m, n) as a 2-vector.
Vec2 evaluate_unnormalized(const CompensationSeries& series, int m, int n);

/// Normalized probability of state (m, n, k).
double evaluate(const CompensationSeries& series, int m, int n, int k);

StationaryField compensation_field(CompensationSeries series);

struct Measures {
    double total_mass;        // 1 up to rounding
    double p_busy;            // = lambda / mu
    double mean_min;          // E[min(Q1, Q2)]
    double mean_diff;         // E[|Q1 - Q2|]
    double mean_total_orbit;  // E[Q1 + Q2]
    std::array<double, 4> q0_row;  // q_{0,n}(0) + q_{0,n}(1), n = 0..3
};

/// Closed-form moments (no truncation in m or n).
Measures measures(const CompensationSeries& series);

}  // namespace jsoq
