#include "jsoq/model.hpp"

#include "jsoq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace jsoq {

namespace {

void check_rate(const char* name, double value) {
    if (!std::isfinite(value) || value <= 0.0) {
        std::ostringstream os;
        os << name << " must be positive and finite, got " << value;
        throw InvalidParameter(os.str());
    }
}

}  // namespace

ModelParams::ModelParams(double lambda, double mu, double alpha)
    : lambda_(lambda), mu_(mu), alpha_(alpha) {
    check_rate("lambda", lambda);
    check_rate("mu", mu);
    check_rate("alpha", alpha);
    rho_ = lambda * (lambda + 2.0 * alpha) / (2.0 * alpha * mu);
}

void ModelParams::require_stable(std::string_view context) const {
    if (!stable()) {
        std::ostringstream os;
        os << context << ": unstable parameters, rho = " << rho_ << " >= 1";
        throw Unstable(os.str(), rho_);
    }
}

StabilityReport stability(const ModelParams& params) {
    return {params.rho(), params.stable(), params.lambda() / params.mu(), 1.0 - params.rho()};
}

LevelMatrices level_matrices(const ModelParams& params) {
    const double l = params.lambda();
    const double mu = params.mu();
    const double a = params.alpha();

    LevelMatrices b;
    b.A00 << -l, mu, l, -(l + mu);
    b.A01 << 0.0, 0.0, 0.0, l;
    b.A1m1 = b.A01;
    b.A0m1 << 0.0, 0.0, a, 0.0;
    b.Am11 = b.A0m1;
    b.H << a, 0.0, 0.0, 0.0;
    b.B00 = b.A00 - b.H;
    b.C00 = b.A00 - 2.0 * b.H;
    return b;
}

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::compensation: return "compensation";
        case Provenance::oracle: return "oracle";
        case Provenance::simulation: return "simulation";
    }
    return "unknown";
}

StationaryField::StationaryField(Provenance provenance, Evaluator evaluator, Support support)
    : provenance_(provenance), evaluator_(std::move(evaluator)), support_(std::move(support)) {}

bool StationaryField::supports(int m, int n) const {
    if (m < 0 || n < 0) return false;
    return !support_ || support_(m, n);
}

double StationaryField::operator()(int m, int n, int k) const {
    if (k != 0 && k != 1) throw EvaluationError("server state must be 0 or 1");
    if (!supports(m, n)) {
        throw EvaluationError("state (" + std::to_string(m) + ", " + std::to_string(n) +
                              ") outside the field's support");
    }
    return evaluator_(m, n, k);
}

StationaryField StationaryField::zero() {
    return StationaryField(Provenance::compensation, [](int, int, int) { return 0.0; });
}

BalanceRegion balance_region(int m, int n) {
    if (m == 0) {
        if (n == 0) return BalanceRegion::origin;
        if (n == 1) return BalanceRegion::vertical_n1;
        return BalanceRegion::vertical;
    }
    if (n == 0) return BalanceRegion::horizontal;
    if (n == 1) return BalanceRegion::horizontal_n1;
    return BalanceRegion::interior;
}

Vec2 balance_lhs(const StationaryField& q, const LevelMatrices& b, int m, int n) {
    switch (balance_region(m, n)) {
        case BalanceRegion::origin:
            return b.A00 * q.at(0, 0) + b.A0m1 * q.at(0, 1);
        case BalanceRegion::vertical_n1:
            return b.B00 * q.at(0, 1) + b.A0m1 * q.at(0, 2) + 2.0 * b.Am11 * q.at(1, 0) +
                   b.A01 * q.at(0, 0);
        case BalanceRegion::vertical:
            return b.B00 * q.at(0, n) + b.A0m1 * q.at(0, n + 1) + b.Am11 * q.at(1, n - 1);
        case BalanceRegion::horizontal:
            return b.C00 * q.at(m, 0) + b.A0m1 * q.at(m, 1) + b.A1m1 * q.at(m - 1, 1);
        case BalanceRegion::horizontal_n1:
            return b.C00 * q.at(m, 1) + b.A0m1 * q.at(m, 2) + 2.0 * b.Am11 * q.at(m + 1, 0) +
                   b.A1m1 * q.at(m - 1, 2) + b.A01 * q.at(m, 0);
        case BalanceRegion::interior:
            return b.C00 * q.at(m, n) + b.A0m1 * q.at(m, n + 1) + b.A1m1 * q.at(m - 1, n + 1) +
                   b.Am11 * q.at(m + 1, n - 1);
    }
    return Vec2::Zero();
}

double balance_residual(const StationaryField& field, const ModelParams& params, int m_max, int n_max) {
    const LevelMatrices blocks = level_matrices(params);
    double worst = 0.0;
    for (int m = 0; m <= m_max; ++m) {
        for (int n = 0; n <= n_max; ++n) {
            worst = std::max(worst, balance_lhs(field, blocks, m, n).cwiseAbs().maxCoeff());
        }
    }
    return worst;
}

}  // namespace jsoq
