#pragma once

#include <Eigen/Core>

#include <functional>
#include <string_view>

namespace jsoq {

using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;

/// Rates of the two-orbit retrial queue with join-the-shortest-orbit routing.
///
/// Jobs arrive at rate lambda; a job finding the server idle is served at
/// rate mu, otherwise it joins the shorter orbit (fair coin on ties). Each
/// nonempty orbit retries at constant rate alpha. The load is
/// rho = lambda (lambda + 2 alpha) / (2 alpha mu); the chain is positive
/// recurrent iff rho < 1.
class ModelParams {
public:
    /// Throws InvalidParameter for non-positive or non-finite rates.
    ModelParams(double lambda, double mu, double alpha);

    double lambda() const noexcept { return lambda_; }
    double mu() const noexcept { return mu_; }
    double alpha() const noexcept { return alpha_; }
    double rho() const noexcept { return rho_; }
    bool stable() const noexcept { return rho_ < 1.0; }

    /// Throws Unstable unless rho < 1.
    void require_stable(std::string_view context) const;

private:
    double lambda_;
    double mu_;
    double alpha_;
    double rho_;
};

struct StabilityReport {
    double rho;
    bool stable;
    double util;                    // P(server busy) = lambda / mu
    double empty_orbit1_idle_mass;  // 1 - rho, meaningful only when stable
};

StabilityReport stability(const ModelParams& params);

/// The 2x2 blocks of the balance equations in (min orbit, orbit difference)
/// coordinates. Row/column index is the server state k (0 idle, 1 busy);
/// the vector q(m, n) = (q_{m,n}(0), q_{m,n}(1)).
struct LevelMatrices {
    Mat2 A00;
    Mat2 A01;
    Mat2 A0m1;
    Mat2 Am11;
    Mat2 A1m1;
    Mat2 H;
    Mat2 B00;  // A00 - H
    Mat2 C00;  // A00 - 2H
};

LevelMatrices level_matrices(const ModelParams& params);

enum class Provenance { compensation, oracle, simulation };

std::string_view to_string(Provenance p);

/// A stationary distribution over states (m, n, k), m = min orbit length,
/// n = orbit difference, k = server state. Evaluation outside the support
/// throws EvaluationError.
class StationaryField {
public:
    using Evaluator = std::function<double(int m, int n, int k)>;
    using Support = std::function<bool(int m, int n)>;

    StationaryField(Provenance provenance, Evaluator evaluator, Support support = {});

    double operator()(int m, int n, int k) const;
    Vec2 at(int m, int n) const { return {(*this)(m, n, 0), (*this)(m, n, 1)}; }
    bool supports(int m, int n) const;
    Provenance provenance() const noexcept { return provenance_; }

    /// The zero field; satisfies every balance equation trivially.
    static StationaryField zero();

private:
    Provenance provenance_;
    Evaluator evaluator_;
    Support support_;
};

/// Which balance-equation family applies at (m, n).
enum class BalanceRegion { origin, vertical_n1, vertical, horizontal, horizontal_n1, interior };

BalanceRegion balance_region(int m, int n);

/// Left-hand side of the balance equation at (m, n) (a 2-vector that is zero
/// for a stationary field).
Vec2 balance_lhs(const StationaryField& field, const LevelMatrices& blocks, int m, int n);

/// Maximum absolute balance residual over 0 <= m <= m_max, 0 <= n <= n_max.
/// The field must be evaluable on every neighbour the equations reference.
double balance_residual(const StationaryField& field, const ModelParams& params, int m_max, int n_max);

}  // namespace jsoq
