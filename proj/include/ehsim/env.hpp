#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ehsim/common.hpp"
#include "ehsim/config.hpp"
#include "ehsim/rng.hpp"

namespace ehsim {

/// Local state of one node: channel index, queue length, battery level.
struct NodeState {
    int h = 0;
    int q = 0;
    int b = 0;
};

/// Joint action for one slot: per-node transmission energy, at most one of
/// them positive. The scheduling indicator is implied by p > 0.
struct Action {
    std::vector<int> p;

    static Action idle(int n_nodes) { return Action{std::vector<int>(n_nodes, 0)}; }

    static Action single(int n_nodes, int node, int power) {
        Action a = idle(n_nodes);
        if (node >= 0) a.p[node] = power;
        return a;
    }

    int scheduled_node() const {
        for (std::size_t n = 0; n < p.size(); ++n)
            if (p[n] > 0) return static_cast<int>(n);
        return -1;
    }

    void validate() const {
        int scheduled = 0;
        for (int v : p) {
            if (v < 0) throw std::invalid_argument("action: negative transmission energy");
            if (v > 0) ++scheduled;
        }
        if (scheduled > 1) throw std::invalid_argument("action: more than one node scheduled");
    }
};

/// What happened to one node during one slot, split out for the metrics.
struct SlotOutcome {
    int served = 0;
    int sensed = 0;
    int dropped_sensing = 0;
    int dropped_overflow = 0;
    int arrivals = 0;
    int harvested = 0;
    int consumed_tx = 0;
    int consumed_sense = 0;
};

/// Continuous achievable rate in packets per slot for channel state h and
/// transmission energy p.
inline real transmit_rate_continuous(int h, real p, const EnvConfig& cfg) {
    const real snr = cfg.xi * cfg.effective_gain(h) * p / (cfg.noise_psd * cfg.bandwidth * cfg.tau);
    return cfg.tau * cfg.bandwidth / cfg.packet_bits * std::log2(1.0 + snr);
}

/// Whole packets deliverable in one slot; queues count integer packets.
inline int transmit_rate(int h, int p, const EnvConfig& cfg) {
    if (p < 0) throw std::invalid_argument("transmit_rate: p must be nonnegative");
    return floor_int(transmit_rate_continuous(h, static_cast<real>(p), cfg));
}

inline int max_rate_packets(const EnvConfig& cfg) {
    int best = 0;
    for (int h = 0; h < cfg.channel.size(); ++h)
        best = std::max(best, transmit_rate(h, cfg.b_max, cfg));
    return best;
}

/// Fills in the packet-arrival pmf (truncated Poisson) once the rate ceiling
/// is known; no-op when the pmf was specified explicitly.
inline void finish_arrivals(EnvConfig& cfg) {
    if (cfg.arrivals.packet_pmf.empty()) {
        const int a_max = cfg.q_max + std::max(1, max_rate_packets(cfg));
        cfg.arrivals.packet_pmf = ArrivalModel::truncated_poisson(cfg.arrivals.lambda_a, a_max);
    }
    if (cfg.arrivals.energy_pmf.empty())
        cfg.arrivals.energy_pmf = ArrivalModel::bernoulli_energy(cfg.arrivals.lambda_e);
}

/// Packets sensed with `budget` energy units available for sensing.
inline int sensed_packets(int arrivals, int budget, const EnvConfig& cfg) {
    if (budget <= 0) return 0;
    return std::min(arrivals, floor_int(cfg.gamma * budget));
}

/// Energy units charged for sensing `sensed` packets.
inline int sensing_energy(int sensed, const EnvConfig& cfg) {
    if (sensed <= 0) return 0;
    return ceil_int(static_cast<real>(sensed) / cfg.gamma);
}

/// One-slot queue/battery dynamics for a single node with known arrivals
/// `a` and harvest `e`. The next channel state is sampled separately.
inline std::pair<NodeState, SlotOutcome> step_node(const NodeState& s, int p_tx, int a, int e,
                                                   const EnvConfig& cfg) {
    if (p_tx < 0 || p_tx > s.b)
        throw std::invalid_argument("step_node: transmission energy exceeds battery");
    SlotOutcome out;
    out.arrivals = a;
    out.harvested = e;
    out.consumed_tx = p_tx;
    out.served = std::min(s.q, transmit_rate(s.h, p_tx, cfg));
    out.sensed = sensed_packets(a, s.b - p_tx, cfg);
    out.dropped_sensing = a - out.sensed;
    out.consumed_sense = sensing_energy(out.sensed, cfg);

    const int q_drained = s.q - out.served;
    out.dropped_overflow = std::max(0, q_drained + out.sensed - cfg.q_max);

    NodeState next = s;
    next.q = std::min(cfg.q_max, q_drained + out.sensed);
    next.b = std::min(cfg.b_max, std::max(0, s.b - p_tx - out.consumed_sense) + e);
    return {next, out};
}

/// Stochastic environment over N nodes. Channel states are sampled at slot
/// start and are part of the pre-decision state exposed to controllers;
/// arrivals and harvests realize during the slot.
class Environment {
public:
    Environment(EnvConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), rng_(seed) {
        finish_arrivals(cfg_);
        cfg_.validate();
        reset();
    }

    void reset() {
        states_.assign(cfg_.n_nodes, NodeState{});
        const auto pi = cfg_.channel.stationary();
        for (auto& s : states_) s.h = rng_.sample_pmf(pi);
    }

    const EnvConfig& config() const { return cfg_; }
    const std::vector<NodeState>& states() const { return states_; }

    int sample_channel_next(int h) { return rng_.sample_pmf(cfg_.channel.transition[h]); }

    /// Advances every node by one slot under `action`; returns per-node
    /// outcomes. Sampling order per node is (arrivals, harvest, channel).
    std::vector<SlotOutcome> step(const Action& action) {
        action.validate();
        if (static_cast<int>(action.p.size()) != cfg_.n_nodes)
            throw std::invalid_argument("step: action size != node count");
        std::vector<SlotOutcome> outs(cfg_.n_nodes);
        for (int n = 0; n < cfg_.n_nodes; ++n) {
            const int a = rng_.sample_pmf(cfg_.arrivals.packet_pmf);
            const int e = rng_.sample_pmf(cfg_.arrivals.energy_pmf);
            auto [next, out] = step_node(states_[n], action.p[n], a, e, cfg_);
            next.h = sample_channel_next(states_[n].h);
            states_[n] = next;
            outs[n] = out;
        }
        return outs;
    }

private:
    EnvConfig cfg_;
    RngStream rng_;
    std::vector<NodeState> states_;
};

}  // namespace ehsim
