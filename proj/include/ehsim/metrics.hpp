#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ehsim/env.hpp"

namespace ehsim {

/// Running per-node sums over a trajectory. Single writer; merging across
/// replications is plain addition.
class MetricAccumulator {
public:
    explicit MetricAccumulator(int n_nodes)
        : arrivals_(n_nodes, 0), served_(n_nodes, 0), queue_sum_(n_nodes, 0),
          battery_sum_(n_nodes, 0), dropped_sensing_(n_nodes, 0), dropped_overflow_(n_nodes, 0) {}

    /// Records one slot: `pre` is the pre-decision state, `out` the outcome.
    void record(int node, const NodeState& pre, const SlotOutcome& out) {
        arrivals_[node] += out.arrivals;
        served_[node] += out.served;
        queue_sum_[node] += pre.q;
        battery_sum_[node] += pre.b;
        dropped_sensing_[node] += out.dropped_sensing;
        dropped_overflow_[node] += out.dropped_overflow;
        if (node == 0) ++slots_;
    }

    void merge(const MetricAccumulator& other) {
        slots_ += other.slots_;
        for (std::size_t n = 0; n < arrivals_.size(); ++n) {
            arrivals_[n] += other.arrivals_[n];
            served_[n] += other.served_[n];
            queue_sum_[n] += other.queue_sum_[n];
            battery_sum_[n] += other.battery_sum_[n];
            dropped_sensing_[n] += other.dropped_sensing_[n];
            dropped_overflow_[n] += other.dropped_overflow_[n];
        }
    }

    long long slots() const { return slots_; }
    long long arrivals(int n) const { return arrivals_[n]; }
    long long served(int n) const { return served_[n]; }
    long long dropped_sensing(int n) const { return dropped_sensing_[n]; }
    long long dropped_overflow(int n) const { return dropped_overflow_[n]; }

    real throughput(int n) const {
        if (slots_ < 1) throw std::invalid_argument("throughput: no slots recorded");
        return static_cast<real>(served_[n]) / static_cast<real>(slots_);
    }

    real avg_queue(int n) const {
        if (slots_ < 1) throw std::invalid_argument("avg_queue: no slots recorded");
        return static_cast<real>(queue_sum_[n]) / static_cast<real>(slots_);
    }

    real avg_battery(int n) const {
        if (slots_ < 1) throw std::invalid_argument("avg_battery: no slots recorded");
        return static_cast<real>(battery_sum_[n]) / static_cast<real>(slots_);
    }

    /// Ratio drop-rate estimator, clamped to [0,1] against sampling noise.
    real drop_rate(int n, real lambda_a) const {
        if (!(lambda_a > 0.0)) throw std::invalid_argument("drop_rate: lambda_a must be positive");
        return std::clamp(1.0 - throughput(n) / lambda_a, 0.0, 1.0);
    }

    /// Direct counting estimator: dropped / arrived.
    real drop_rate_counted(int n) const {
        if (arrivals_[n] == 0) return 0.0;
        return static_cast<real>(dropped_sensing_[n] + dropped_overflow_[n]) /
               static_cast<real>(arrivals_[n]);
    }

    /// Little's-law delay; unbounded (infinity) when nothing was served.
    real average_delay(int n) const {
        const real r = throughput(n);
        if (r <= 0.0) return std::numeric_limits<real>::infinity();
        return avg_queue(n) / r;
    }

private:
    long long slots_ = 0;
    std::vector<long long> arrivals_, served_, queue_sum_, battery_sum_;
    std::vector<long long> dropped_sensing_, dropped_overflow_;
};

/// Packet loss combining channel BER and drops.
inline real loss_rate(real drop, real epsilon, real packet_bits) {
    if (drop < 0.0 || drop > 1.0) throw std::invalid_argument("loss_rate: drop must be in [0,1]");
    if (epsilon < 0.0 || epsilon >= 1.0) throw std::invalid_argument("loss_rate: epsilon must be in [0,1)");
    return 1.0 - std::pow(1.0 - epsilon, packet_bits) * (1.0 - drop);
}

inline const char* metrics_csv_header() {
    return "run_id,n,slots,throughput,drop_rate,loss_rate,avg_delay,avg_queue,avg_battery,lm_eta";
}

inline std::string format_real(real v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

/// One CSV row per node for a finished run.
inline void write_metrics_rows(std::ostream& os, const std::string& run_id,
                               const MetricAccumulator& acc, const EnvConfig& cfg,
                               const std::vector<real>& lm_eta) {
    for (int n = 0; n < cfg.n_nodes; ++n) {
        const real d = acc.drop_rate(n, cfg.arrivals.lambda_a);
        os << run_id << ',' << n << ',' << acc.slots() << ',' << format_real(acc.throughput(n))
           << ',' << format_real(d) << ',' << format_real(loss_rate(d, cfg.epsilon, cfg.packet_bits))
           << ',' << format_real(acc.average_delay(n)) << ',' << format_real(acc.avg_queue(n))
           << ',' << format_real(acc.avg_battery(n)) << ','
           << format_real(n < static_cast<int>(lm_eta.size()) ? lm_eta[n] : 0.0) << '\n';
    }
}

}  // namespace ehsim
