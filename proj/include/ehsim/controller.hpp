#pragma once

#include <cmath>
#include <optional>
#include <variant>
#include <vector>

#include "ehsim/env.hpp"
#include "ehsim/value_table.hpp"

namespace ehsim {

/// Marginal cost weight on served packets: omega/lambda + eta*D_max.
inline real queue_price(real eta, int node, const EnvConfig& cfg) {
    return cfg.omega_n(node) / cfg.arrivals.lambda_a + eta * cfg.d_max;
}

/// Energy that makes the continuous rate exactly q packets: the node never
/// benefits from transmitting past its backlog.
inline real queue_cap_energy(int h, int q, const EnvConfig& cfg) {
    const real exponent = static_cast<real>(q) * cfg.packet_bits / (cfg.tau * cfg.bandwidth);
    return cfg.noise_psd * cfg.tau * cfg.bandwidth * (std::exp2(exponent) - 1.0) /
           (cfg.xi * cfg.effective_gain(h));
}


/// Linearized per-slot gain of transmitting with energy p from state s. The
/// per-node objective decreases by exactly this much to first order, so the
/// scheduler maximizes it across nodes.
inline real bid_value(const NodeState& s, real p, real price_q, real d_queue, real d_battery,
                      const EnvConfig& cfg) {
    return (price_q + d_queue) * transmit_rate_continuous(s.h, p, cfg) + p * d_battery;
}

struct PowerDecision {
    int p = 0;
    bool waterfill_degenerate = false;  // fell back to grid search (d_battery >= 0)
};

/// Transmission energy a node would use if scheduled: the water-filling
/// level capped by the battery and by the energy that exactly clears the
/// backlog, rounded onto the integer grid by evaluating the linearized gain
/// at the two neighbours. The gain is concave in p when the battery slope is
/// negative, so the two-point comparison equals the grid argmax; a
/// nonnegative battery slope is degenerate and falls back to grid search.
inline PowerDecision optimal_power(const NodeState& s, int node, const PerNodeValueTable& table,
                                   real eta, const EnvConfig& cfg) {
    const ValueDerivatives d = value_derivatives(table, s.q, s.b);
    const real price_q = queue_price(eta, node, cfg);
    const real cap_q = queue_cap_energy(s.h, s.q, cfg);
    const int p_grid_max = std::min(s.b, floor_int(std::min(cap_q, static_cast<real>(s.b))));

    PowerDecision out;
    if (s.q == 0 || p_grid_max <= 0) return out;

    const auto bid_at = [&](int p) {
        return bid_value(s, static_cast<real>(p), price_q, d.d_queue, d.d_battery, cfg);
    };

    if (d.d_battery >= -1e-12) {
        out.waterfill_degenerate = true;
        int best = 0;
        real best_v = 0.0;  // bid of p=0
        for (int p = 1; p <= p_grid_max; ++p) {
            const real v = bid_at(p);
            if (v > best_v + 1e-12) {
                best_v = v;
                best = p;
            }
        }
        out.p = best;
        return out;
    }

    const real waterfill = std::max(
        0.0, (price_q + d.d_queue) * cfg.tau * cfg.bandwidth /
                     (-cfg.packet_bits * d.d_battery * std::log(2.0)) -
                 cfg.noise_psd * cfg.bandwidth * cfg.tau / (cfg.xi * cfg.effective_gain(s.h)));
    const real p_cont = std::min({static_cast<real>(s.b), cap_q, waterfill});

    const int lo = std::clamp(floor_int(p_cont), 0, p_grid_max);
    const int hi = std::clamp(ceil_int(p_cont), 0, p_grid_max);
    out.p = lo;
    if (hi != lo && bid_at(hi) > bid_at(lo) + 1e-12) out.p = hi;
    return out;
}

/// Bid submitted to the fusion center (evaluated at the node's chosen p*).
inline real compute_bid(const NodeState& s, int node, const PerNodeValueTable& table, real eta,
                        int p_star, const EnvConfig& cfg) {
    const ValueDerivatives d = value_derivatives(table, s.q, s.b);
    return bid_value(s, static_cast<real>(p_star), queue_price(eta, node, cfg), d.d_queue,
                     d.d_battery, cfg);
}

/// Largest bid wins; ties go to the lowest node index. A slot where every
/// bid is zero still has a winner — it simply transmits nothing (p*=0).
inline int fc_schedule(const std::vector<real>& bids) {
    int best = 0;
    for (int n = 1; n < static_cast<int>(bids.size()); ++n)
        if (bids[n] > bids[best]) best = n;
    return best;
}

// --- fusion-center signaling -------------------------------------------------

struct BidMessage {
    int node;
    real value;
    int p_star;
};
struct EmptyFlagMessage {
    int node;
    bool empty;
};
struct ScheduleNotice {
    int node;
};
struct RsFlagMessage {
    int node;
    int q, b;  // the designated table entry (the node's own post-decision state)
};
using Message = std::variant<BidMessage, EmptyFlagMessage, ScheduleNotice, RsFlagMessage>;

/// Fusion-center bookkeeping: which nodes reported empty post-decision
/// buffers, updated only by EmptyFlag messages.
struct FcState {
    std::vector<bool> node_empty;
    int last_rs_node = -1;

    explicit FcState(int n_nodes) : node_empty(n_nodes, true) {}

    void apply(const EmptyFlagMessage& m) { node_empty[m.node] = m.empty; }
};

/// Representative-state check on the bitmap: a designation exists only when
/// exactly one node is non-empty. The all-empty case is the reference state
/// (its value entry is pinned, nothing to learn); two or more non-empty
/// nodes leave every table untouched.
inline std::optional<int> fc_representative_check(const FcState& fc) {
    int non_empty = -1;
    int count = 0;
    for (int n = 0; n < static_cast<int>(fc.node_empty.size()); ++n)
        if (!fc.node_empty[n]) {
            non_empty = n;
            ++count;
        }
    if (count == 1) return non_empty;
    return std::nullopt;
}

}  // namespace ehsim
