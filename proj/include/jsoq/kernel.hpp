#pragma once

#include "jsoq/model.hpp"

namespace jsoq {

/// Roots of 2 rho w^2 - 2 (1 + rho) w + 1 = 0, which govern the limiting
/// ratios delta_i / gamma_i -> w_minus and gamma_{i+1} / delta_i -> 1 / w_plus.
struct KernelRoots {
    double w_minus;
    double w_plus;
    double s_minus;  // 2 rho w_minus = 1 + rho - sqrt(1 + rho^2)
    double s_plus;   // 2 rho w_plus  = 1 + rho + sqrt(1 + rho^2)
};

/// 2 (rho + 1) gamma delta - 2 rho delta^2 - gamma^2 - gamma delta^2.
///
/// A product form gamma^m delta^n theta solves the interior balance
/// equations iff this vanishes.
double kernel_value(const ModelParams& params, double gamma, double delta);

/// The unique root delta of the kernel with 0 < |delta| < |gamma|.
/// Requires 0 < |gamma| < 1 and rho < 1.
double delta_given_gamma(const ModelParams& params, double gamma);

/// The unique root gamma of the kernel with 0 < |gamma| < |delta|.
/// Requires 0 < |delta| < 1 and rho < 1.
double gamma_given_delta(const ModelParams& params, double delta);

KernelRoots asymptotic_roots(const ModelParams& params);

}  // namespace jsoq
