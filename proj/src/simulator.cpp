#include "jsoq/simulator.hpp"

#include "jsoq/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <thread>

namespace jsoq {

namespace {

constexpr double kZ95 = 1.959963984540054;

struct Replication {
    std::vector<double> q;
    double busy = 0.0;
    double q1 = 0.0;
    double q2 = 0.0;
    double min = 0.0;
    double diff = 0.0;
    double joins = 0.0;
    double retrials = 0.0;
    double q1_longer = 0.0;
    double q2_longer = 0.0;
    double final_total = 0.0;
    std::uint64_t events = 0;
};

Replication run_one(const SimConfig& cfg, int m_max, int n_max, int index) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(index)};
    std::mt19937_64 rng(seq);
    std::exponential_distribution<double> expo(1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    const double lambda = cfg.params.lambda();
    const double mu = cfg.params.mu();
    const double alpha = cfg.params.alpha();
    const double window = cfg.horizon - cfg.warmup;

    Replication rep;
    rep.q.assign(static_cast<std::size_t>(m_max + 1) * (n_max + 1) * 2, 0.0);

    long q1 = 0, q2 = 0;
    int busy = 0;
    double t = 0.0;
    while (true) {
        const int nonempty = (q1 > 0) + (q2 > 0);
        const double rate = lambda + (busy ? mu : alpha * nonempty);
        const double dt = expo(rng) / rate;
        if (!std::isfinite(dt)) throw InternalError("simulate: non-finite clock draw");
        const double t_next = t + dt;

        const double overlap = std::min(t_next, cfg.horizon) - std::max(t, cfg.warmup);
        if (overlap > 0.0) {
            const long m = std::min(q1, q2);
            const long n = std::abs(q1 - q2);
            if (m <= m_max && n <= n_max) rep.q[(static_cast<std::size_t>(m) * (n_max + 1) + n) * 2 + busy] += overlap;
            rep.busy += busy * overlap;
            rep.q1 += q1 * overlap;
            rep.q2 += q2 * overlap;
            rep.min += m * overlap;
            rep.diff += n * overlap;
            if (q1 > q2) rep.q1_longer += overlap;
            if (q2 > q1) rep.q2_longer += overlap;
        }
        if (t_next >= cfg.horizon) break;
        t = t_next;
        ++rep.events;

        const bool counted = t >= cfg.warmup;
        const double u = unif(rng) * rate;
        if (u < lambda) {
            if (!busy) {
                busy = 1;
            } else {
                if (counted) rep.joins += 1.0;
                if (q1 < q2) {
                    ++q1;
                } else if (q2 < q1) {
                    ++q2;
                } else if (unif(rng) < 0.5) {
                    ++q1;
                } else {
                    ++q2;
                }
            }
        } else if (busy) {
            busy = 0;
        } else {
            if (counted) rep.retrials += 1.0;
            if (q1 > 0 && (u - lambda < alpha || q2 == 0)) {
                --q1;
            } else {
                --q2;
            }
            busy = 1;
        }
    }

    for (double& x : rep.q) x /= window;
    rep.busy /= window;
    rep.q1 /= window;
    rep.q2 /= window;
    rep.min /= window;
    rep.diff /= window;
    rep.joins /= window;
    rep.retrials /= window;
    rep.q1_longer /= window;
    rep.q2_longer /= window;
    rep.final_total = static_cast<double>(q1 + q2);
    return rep;
}

template <typename Get>
Interval summarize(const std::vector<Replication>& reps, Get get) {
    const double r = static_cast<double>(reps.size());
    double mean = 0.0;
    for (const auto& rep : reps) mean += get(rep);
    mean /= r;
    Interval out;
    out.mean = mean;
    if (reps.size() < 2) {
        out.std_error = std::numeric_limits<double>::infinity();
    } else {
        double ss = 0.0;
        for (const auto& rep : reps) ss += (get(rep) - mean) * (get(rep) - mean);
        out.std_error = std::sqrt(ss / (r - 1.0) / r);
    }
    out.half_width = kZ95 * out.std_error;
    return out;
}

}  // namespace

StationaryField SimEstimate::field() const {
    auto self = std::make_shared<const SimEstimate>(*this);
    return StationaryField(
        Provenance::simulation, [self](int m, int n, int k) { return self->at(m, n, k).mean; },
        [mm = m_max, nn = n_max](int m, int n) { return m <= mm && n <= nn; });
}

SimEstimate simulate(const SimConfig& cfg, int m_max, int n_max) {
    if (!(cfg.horizon > cfg.warmup) || !(cfg.warmup >= 0.0) || !std::isfinite(cfg.horizon)) {
        throw InvalidParameter("simulate: need horizon > warmup >= 0");
    }
    if (cfg.replications < 1) throw InvalidParameter("simulate: need at least one replication");
    if (m_max < 0 || n_max < 0) throw InvalidParameter("simulate: box must be non-negative");

    std::vector<Replication> reps(cfg.replications);
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next++; i < cfg.replications; i = next++) reps[i] = run_one(cfg, m_max, n_max, i);
    };
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const int workers = static_cast<int>(std::min<unsigned>(hw, static_cast<unsigned>(cfg.replications)));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    SimEstimate est;
    est.m_max = m_max;
    est.n_max = n_max;
    est.replications = cfg.replications;
    est.q.resize(reps.front().q.size());
    for (std::size_t s = 0; s < est.q.size(); ++s) {
        est.q[s] = summarize(reps, [s](const Replication& r) { return r.q[s]; });
    }
    est.p_busy = summarize(reps, [](const Replication& r) { return r.busy; });
    est.mean_q1 = summarize(reps, [](const Replication& r) { return r.q1; });
    est.mean_q2 = summarize(reps, [](const Replication& r) { return r.q2; });
    est.mean_min = summarize(reps, [](const Replication& r) { return r.min; });
    est.mean_diff = summarize(reps, [](const Replication& r) { return r.diff; });
    est.mean_total_orbit = summarize(reps, [](const Replication& r) { return r.q1 + r.q2; });
    est.orbit_join_rate = summarize(reps, [](const Replication& r) { return r.joins; });
    est.retrial_success_rate = summarize(reps, [](const Replication& r) { return r.retrials; });
    est.flow_ratio = summarize(reps, [](const Replication& r) { return r.retrials > 0 ? r.joins / r.retrials : 0.0; });
    est.p_q1_longer = summarize(reps, [](const Replication& r) { return r.q1_longer; });
    est.p_q2_longer = summarize(reps, [](const Replication& r) { return r.q2_longer; });
    for (const auto& r : reps) {
        est.mean_final_total_orbit += r.final_total / cfg.replications;
        est.events += r.events;
    }
    return est;
}

}  // namespace jsoq
