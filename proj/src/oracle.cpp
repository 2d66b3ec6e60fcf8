#include "jsoq/oracle.hpp"

#include "jsoq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace jsoq {

Generator build_generator(const ModelParams& params, int n_trunc) {
    if (n_trunc < 2) throw DomainError("build_generator: box size must be >= 2");
    Generator g{params, n_trunc, {}};
    const int n = 2 * (n_trunc + 1) * (n_trunc + 1);
    const double l = params.lambda();
    const double mu = params.mu();
    const double a = params.alpha();

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(n) * 4);
    std::vector<double> out(n, 0.0);
    auto add = [&](int from, int to, double rate) {
        trips.emplace_back(from, to, rate);
        out[from] += rate;
    };

    for (int i = 0; i <= n_trunc; ++i) {
        for (int j = 0; j <= n_trunc; ++j) {
            const int idle = g.index(i, j, 0);
            add(idle, g.index(i, j, 1), l);
            if (i > 0) add(idle, g.index(i - 1, j, 1), a);
            if (j > 0) add(idle, g.index(i, j - 1, 1), a);

            const int busy = g.index(i, j, 1);
            add(busy, g.index(i, j, 0), mu);
            if (i < j) {
                add(busy, g.index(i + 1, j, 1), l);
            } else if (j < i) {
                add(busy, g.index(i, j + 1, 1), l);
            } else if (i < n_trunc) {
                add(busy, g.index(i + 1, j, 1), 0.5 * l);
                add(busy, g.index(i, j + 1, 1), 0.5 * l);
            }
        }
    }
    for (int s = 0; s < n; ++s) trips.emplace_back(s, s, -out[s]);

    g.rates.resize(n, n);
    g.rates.setFromTriplets(trips.begin(), trips.end());
    g.rates.makeCompressed();
    return g;
}

int default_truncation(const ModelParams& params, double target) {
    params.require_stable("default_truncation");
    const double r2 = params.rho() * params.rho();
    const int n = static_cast<int>(std::ceil(std::log(target) / std::log(r2)));
    return std::max(10, n);
}

TruncatedSolution solve_stationary(const Generator& g) {
    const int n = g.size();
    const int band = 2 * g.n_trunc + 3;  // max |index difference| of a transition
    const int width = 2 * band + 1;
    std::vector<double> a(static_cast<std::size_t>(n) * width, 0.0);
    auto at = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * width + (j - i + band)]; };

    for (int r = 0; r < n; ++r) {
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(g.rates, r); it; ++it) {
            if (it.col() != r) at(r, static_cast<int>(it.col())) = it.value();
        }
    }

    // Censor states n-1, ..., 1 in turn. Only off-diagonal rates are used, so
    // no subtraction ever happens.
    std::vector<double> exit(n, 0.0);
    for (int s = n - 1; s >= 1; --s) {
        const int lo = std::max(0, s - band);
        double total = 0.0;
        for (int j = lo; j < s; ++j) total += at(s, j);
        if (!(total > 0.0)) throw SolverError("solve_stationary: reducible truncated chain", 0.0);
        exit[s] = total;
        for (int i = lo; i < s; ++i) {
            const double f = at(i, s);
            if (f == 0.0) continue;
            const double scale = f / total;
            // row[j] aliases at(i, j): band offset i*width + (j - i + band)
            double* row = a.data() + static_cast<std::size_t>(i) * (width - 1) + band;
            const double* src = a.data() + static_cast<std::size_t>(s) * (width - 1) + band;
            for (int j = lo; j < s; ++j) {
                if (j != i) row[j] += scale * src[j];
            }
        }
    }

    std::vector<double> pi(n, 0.0);
    pi[0] = 1.0;
    for (int j = 1; j < n; ++j) {
        const int lo = std::max(0, j - band);
        double acc = 0.0;
        for (int i = lo; i < j; ++i) acc += pi[i] * at(i, j);
        pi[j] = acc / exit[j];
    }
    double sum = 0.0;
    for (double p : pi) sum += p;
    for (double& p : pi) p /= sum;

    std::vector<double> r(n, 0.0);
    for (int row = 0; row < n; ++row) {
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(g.rates, row); it; ++it) {
            r[it.col()] += pi[row] * it.value();
        }
    }
    double residual = 0.0;
    for (double x : r) residual = std::max(residual, std::abs(x));
    if (!(residual < 1e-12)) {
        std::ostringstream os;
        os << "solve_stationary: residual " << residual << " exceeds 1e-12";
        throw SolverError(os.str(), residual);
    }

    TruncatedSolution sol{g.params, g.n_trunc, std::move(pi), 0.0, residual};
    const int N = g.n_trunc;
    double shell = 0.0;
    for (int i = 0; i <= N; ++i) {
        for (int k = 0; k < 2; ++k) {
            shell += sol(i, N, k);
            if (i < N) shell += sol(N, i, k);
        }
    }
    const double r2 = std::min(g.params.rho() * g.params.rho(), 1.0 - 1e-12);
    sol.mass_deficit_bound = shell * r2 / (1.0 - r2);
    return sol;
}

StationaryField to_transformed(const TruncatedSolution& solution) {
    const int N = solution.n_trunc;
    auto table = std::make_shared<std::vector<double>>(static_cast<std::size_t>(N + 1) * (N + 1) * 2, 0.0);
    auto slot = [N](int m, int n, int k) { return (static_cast<std::size_t>(m) * (N + 1) + n) * 2 + k; };
    for (int m = 0; m <= N; ++m) {
        for (int n = 0; m + n <= N; ++n) {
            for (int k = 0; k < 2; ++k) {
                (*table)[slot(m, n, k)] =
                    n == 0 ? solution(m, m, k) : solution(m, m + n, k) + solution(m + n, m, k);
            }
        }
    }
    return StationaryField(
        Provenance::oracle, [table, slot](int m, int n, int k) { return (*table)[slot(m, n, k)]; },
        [N](int m, int n) { return m + n <= N; });
}

double estimate_decay(const StationaryField& field, int n, int k, int m_lo, int m_hi) {
    if (m_lo < 0 || m_hi <= m_lo) throw DomainError("estimate_decay: need 0 <= m_lo < m_hi");
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const int count = m_hi - m_lo + 1;
    for (int m = m_lo; m <= m_hi; ++m) {
        if (!field.supports(m, n)) throw DomainError("estimate_decay: range outside the field's support");
        const double q = field(m, n, k);
        if (!(q > 1e-300)) {
            std::ostringstream os;
            os << "estimate_decay: q(" << m << "," << n << "," << k << ") = " << q << " underflows";
            throw DomainError(os.str());
        }
        const double x = m;
        const double y = std::log(q);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
    return std::exp(slope);
}

AppendixCheck verify_appendix(const ModelParams& params) {
    params.require_stable("verify_appendix");
    const LevelMatrices b = level_matrices(params);
    const double rho = params.rho();
    const double l = params.lambda();
    const double mu = params.mu();
    const double a = params.alpha();

    const Mat2 K0 = b.C00.transpose();
    const Mat2 K1bar = 2.0 * rho * rho * b.Am11.transpose() + b.A01.transpose();
    const Mat2 K1 = rho * rho * b.Am11.transpose();
    const Mat2 Km1 = b.A1m1.transpose() / (rho * rho) + b.A0m1.transpose();

    AppendixCheck out;
    out.v = Vec2(1.0, mu * (l + 2.0 * a) / (l * (l + mu + 2.0 * a)));
    out.residual_block0 = ((K0 + K1bar / rho) * out.v).cwiseAbs().maxCoeff();
    const Mat2 interior = rho * Km1 + K0 + K1 / rho;
    out.residual_interior = (interior * out.v).cwiseAbs().maxCoeff();
    out.residual_interior_alt = ((rho * Km1 + K0 + rho * K1) * out.v).cwiseAbs().maxCoeff();

    const Mat2 dv = out.v.asDiagonal();
    const Mat2 dv_inv = out.v.cwiseInverse().asDiagonal();
    const Mat2 phase = dv_inv * interior * dv;
    Vec2 u(phase(1, 0), phase(0, 1));
    u /= u.sum();
    const Mat2 net = dv_inv * (K1 / rho - rho * Km1) * dv;
    out.drift = u.dot(net * Vec2::Ones());
    return out;
}

}  // namespace jsoq
