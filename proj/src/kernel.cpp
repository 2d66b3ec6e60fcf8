#include "jsoq/kernel.hpp"

#include "jsoq/errors.hpp"

#include <cmath>
#include <sstream>

namespace jsoq {

namespace {

void require_subcritical(const ModelParams& params, const char* what) {
    if (!params.stable()) {
        std::ostringstream os;
        os << what << ": requires rho < 1, got " << params.rho();
        throw DomainError(os.str());
    }
}

void require_unit_open(double x, const char* what) {
    if (!std::isfinite(x) || x == 0.0 || std::abs(x) >= 1.0) {
        std::ostringstream os;
        os << what << ": argument must satisfy 0 < |x| < 1, got " << x;
        throw DomainError(os.str());
    }
}

double checked_sqrt(double disc, const char* what) {
    if (!(disc > 0.0)) {
        std::ostringstream os;
        os << what << ": non-positive discriminant " << disc;
        throw NumericalDomainError(os.str());
    }
    return std::sqrt(disc);
}

}  // namespace

double kernel_value(const ModelParams& params, double gamma, double delta) {
    const double rho = params.rho();
    return 2.0 * (rho + 1.0) * gamma * delta - 2.0 * rho * delta * delta - gamma * gamma -
           gamma * delta * delta;
}

// (2 rho + gamma) delta^2 - 2 (1 + rho) gamma delta + gamma^2 = 0. The
// small root is the product of roots over the large one, which simplifies to
// gamma / (1 + rho + sqrt(1 + rho^2 - gamma)) without cancellation.
double delta_given_gamma(const ModelParams& params, double gamma) {
    require_subcritical(params, "delta_given_gamma");
    require_unit_open(gamma, "delta_given_gamma");
    const double rho = params.rho();
    const double root = checked_sqrt(1.0 + rho * rho - gamma, "delta_given_gamma");
    return gamma / (1.0 + rho + root);
}

// gamma^2 - delta (2 (1 + rho) - delta) gamma + 2 rho delta^2 = 0; same trick.
double gamma_given_delta(const ModelParams& params, double delta) {
    require_subcritical(params, "gamma_given_delta");
    require_unit_open(delta, "gamma_given_delta");
    const double rho = params.rho();
    const double b = 2.0 * (1.0 + rho) - delta;
    const double root = checked_sqrt(b * b - 8.0 * rho, "gamma_given_delta");
    return 4.0 * rho * delta / (b + root);
}

KernelRoots asymptotic_roots(const ModelParams& params) {
    require_subcritical(params, "asymptotic_roots");
    const double rho = params.rho();
    const double root = std::sqrt(1.0 + rho * rho);
    KernelRoots r;
    r.s_plus = 1.0 + rho + root;
    r.w_plus = r.s_plus / (2.0 * rho);
    // w_minus * w_plus = 1 / (2 rho)
    r.w_minus = 1.0 / (2.0 * rho * r.w_plus);
    r.s_minus = 2.0 * rho * r.w_minus;
    return r;
}

}  // namespace jsoq
