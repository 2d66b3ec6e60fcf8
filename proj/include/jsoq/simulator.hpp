#pragma once

#include "jsoq/model.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace jsoq {

struct SimConfig {
    ModelParams params;
    double horizon = 1e6;
    double warmup = 1e4;
    int replications = 10;
    std::uint64_t seed = 1;
};

/// Replication mean with a normal-approximation interval.
struct Interval {
    double mean = 0.0;
    double std_error = 0.0;   // sample sd / sqrt(replications); inf for one replication
    double half_width = 0.0;  // 95%: 1.96 * std_error

    double half_width_at(double z) const { return z * std_error; }
    bool contains(double x, double z) const { return std::abs(x - mean) <= z * std_error; }
};

struct SimEstimate {
    int m_max = 0;
    int n_max = 0;
    int replications = 0;
    std::vector<Interval> q;  // time fraction in (m, n, k), m <= m_max, n <= n_max
    Interval p_busy;
    Interval mean_q1;
    Interval mean_q2;
    Interval mean_min;
    Interval mean_diff;
    Interval mean_total_orbit;
    Interval orbit_join_rate;        // blocked arrivals per unit time
    Interval retrial_success_rate;   // successful retrials per unit time
    Interval flow_ratio;             // join rate / retrial rate, -> 1 in steady state
    Interval p_q1_longer;            // time fraction with Q1 > Q2
    Interval p_q2_longer;            // time fraction with Q2 > Q1
    double mean_final_total_orbit = 0.0;  // grows with the horizon when rho >= 1
    std::uint64_t events = 0;

    const Interval& at(int m, int n, int k) const { return q[(static_cast<std::size_t>(m) * (n_max + 1) + n) * 2 + k]; }

    /// Point estimates as a field supported on the box.
    StationaryField field() const;
};

/// Event-driven simulation of the original chain. Each replication uses its
/// own mt19937_64 stream seeded from (seed, replication index); within a
/// stream every event draws the holding time, then the event selector, then
/// (only for a busy-server arrival at a tie) the routing coin.
/// Replications may run on several threads; results depend only on the seed.
SimEstimate simulate(const SimConfig& config, int m_max, int n_max);

}  // namespace jsoq
