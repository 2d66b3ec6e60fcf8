#pragma once

#include "jsoq/model.hpp"

#include <Eigen/SparseCore>

#include <vector>

namespace jsoq {

/// Generator of the original chain (Q1, Q2, C) restricted to {0..N}^2 x {0,1}.
/// Arrivals that would leave the box are dropped; under join-the-shortest
/// routing this only happens at the tie (N, N).
struct Generator {
    ModelParams params;
    int n_trunc;
    Eigen::SparseMatrix<double, Eigen::RowMajor> rates;  // rows sum to zero

    int size() const { return static_cast<int>(rates.rows()); }
    int index(int i, int j, int k) const { return (i * (n_trunc + 1) + j) * 2 + k; }
};

Generator build_generator(const ModelParams& params, int n_trunc);

/// Smallest N >= 10 with rho^(2N) below target.
int default_truncation(const ModelParams& params, double target = 1e-10);

struct TruncatedSolution {
    ModelParams params;
    int n_trunc;
    std::vector<double> probs;  // indexed like Generator::index
    double mass_deficit_bound;
    double residual;  // max |pi Q|

    double operator()(int i, int j, int k) const { return probs[(i * (n_trunc + 1) + j) * 2 + k]; }
};

/// Stationary vector by GTH state reduction on the band of the generator.
/// Subtraction-free, so tiny tail probabilities keep their relative accuracy.
/// Throws SolverError if the chain is reducible or |pi Q| exceeds 1e-12.
TruncatedSolution solve_stationary(const Generator& generator);

/// q(m, n, k) = p(m, m+n, k) + p(m+n, m, k) for n >= 1, p(m, m, k) for n = 0;
/// supported on m + n <= N.
StationaryField to_transformed(const TruncatedSolution& solution);

/// exp of the least-squares slope of log q(m, n, k) over m in [m_lo, m_hi].
/// Throws DomainError if the range is empty or any value is <= 1e-300.
double estimate_decay(const StationaryField& field, int n, int k, int m_lo, int m_hi);

struct AppendixCheck {
    Vec2 v;
    double residual_block0;       // |(K0 + K1bar / rho) v|
    double residual_interior;     // |(rho K_{-1} + K0 + K1 / rho) v|
    double residual_interior_alt; // |(rho K_{-1} + K0 + rho K1) v|, nonzero in general
    double drift;                 // mean drift of the twisted interior chain, < 0
};

/// Checks the right null vector y = {rho^{-n} v} of
/// K = rho^2 T_{-1} + T_0 + rho^{-2} T_1 and the drift of the twisted chain.
AppendixCheck verify_appendix(const ModelParams& params);

}  // namespace jsoq
