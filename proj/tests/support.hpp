#pragma once

#include "jsoq/model.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace jsoq::testing {

/// Stable triples with rho spread over [rho_lo, rho_hi]: mu and alpha are
/// drawn first, lambda is then solved from the load equation.
inline std::vector<ModelParams> random_stable(int count, std::uint64_t seed, double rho_lo = 0.05,
                                              double rho_hi = 0.95) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mu_d(1.0, 20.0), alpha_d(0.5, 10.0), rho_d(rho_lo, rho_hi);
    std::vector<ModelParams> out;
    while (static_cast<int>(out.size()) < count) {
        const double mu = mu_d(rng), alpha = alpha_d(rng), rho = rho_d(rng);
        const double lambda = -alpha + std::sqrt(alpha * alpha + 2.0 * alpha * mu * rho);
        out.emplace_back(lambda, mu, alpha);
    }
    return out;
}

}  // namespace jsoq::testing
