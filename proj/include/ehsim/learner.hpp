#pragma once

#include <optional>
#include <ostream>
#include <vector>

#include "ehsim/controller.hpp"
#include "ehsim/metrics.hpp"

namespace ehsim {

struct LearnerOptions {
    StepSizeSchedule schedule;
    std::vector<real> eta0;     // initial multipliers (broadcast if size 1)
    bool learn_lm = true;       // false freezes the multipliers (fixed-eta runs)
};

/// Sampled cost-to-go target for the designated entry (q,b): reconstruct the
/// pre-decision state it led to from the last slot's observed arrivals, then
/// charge the slot's cost and the post-decision continuation, anchored at
/// the entry reached from the node's last empty slot. The one-slot term is
/// minimized over the node's own energy grid (the fixed point the update
/// tracks has the minimization inside the expectation), using the observed
/// channel state. Out-of-grid indices clip and count.
inline real value_update_target(const PerNodeValueTable& table, int q, int b, int arrivals,
                                int harvest, int h_now, real eta, int node, int ref_harvest,
                                const EnvConfig& cfg, long long* clip_events = nullptr) {
    const auto clip = [&](int v, int hi) {
        if ((v < 0 || v > hi) && clip_events) ++*clip_events;
        return std::clamp(v, 0, hi);
    };
    const int sensed = sensed_packets(arrivals, b, cfg);
    const int pre_q = std::min(cfg.q_max, q + sensed);
    const int pre_b = std::min(cfg.b_max, std::max(0, b - sensing_energy(sensed, cfg)) + harvest);
    const int ref_b = clip(ref_harvest, cfg.b_max);

    const real price = queue_price(eta, node, cfg);
    real best = std::numeric_limits<real>::max();
    for (int p = 0; p <= pre_b; ++p) {
        const int served = std::min(pre_q, transmit_rate(h_now, p, cfg));
        const int post_q = clip(pre_q - served, cfg.q_max);
        const int post_b = clip(pre_b - p, cfg.b_max);
        const real v = -price * served + table.at(post_q, post_b);
        if (v < best - 1e-12) best = v;
    }
    return eta * pre_q + best - table.at(0, ref_b);
}

/// Multiplier step on the observed one-slot constraint slack, projected to
/// stay nonnegative.
inline real lm_update(real eta, int queue, int served, real step, real d_max) {
    return std::max(0.0, eta + step * (queue - d_max * served));
}

/// Message traffic of one slot, for the overhead accounting.
struct SlotMessageStats {
    int bids = 0;
    int notices = 0;
    int empty_flags = 0;
    int rs_flags = 0;
    int total() const { return bids + notices + empty_flags + rs_flags; }
};

/// Everything observable about one simulated slot. Buffers are reused
/// across slots; copy out what must be kept.
struct SlotRecord {
    long long t = 0;
    std::vector<NodeState> pre;      // pre-decision states (channel known at slot start)
    std::vector<int> p_star;         // per-node intended transmission energy
    std::vector<real> bids;
    int winner = -1;
    std::vector<SlotOutcome> outcomes;
    std::vector<int> post_q, post_b; // post-decision state of this slot
    int rs_node = -1;                // node designated at this slot's end, -1 if none
    SlotMessageStats messages;
};

/// One node's learning state.
struct NodeAgent {
    PerNodeValueTable table;
    real eta = 0.0;
    int prev_arrivals = 0;   // observed at the end of the previous slot
    int prev_harvest = 0;
    int ref_harvest = 0;     // harvest stored at the node's last empty post-decision slot
    bool was_empty = true;
    std::optional<std::pair<int, int>> pending_rs;  // designated entry awaiting update

    NodeAgent(int q_max, int b_max) : table(q_max, b_max) {}
};

/// Distributed auction controller plus two-timescale learning, executed in a
/// fixed deterministic order per slot: bids in node order, then the fusion
/// center, then the environment step, then the end-of-slot updates.
class OslSimulation {
public:
    OslSimulation(const EnvConfig& cfg, std::uint64_t seed, LearnerOptions opts = {})
        : env_(cfg, seed), opts_(std::move(opts)), fc_(env_.config().n_nodes) {
        opts_.schedule.validate();
        const auto& c = env_.config();
        for (int n = 0; n < c.n_nodes; ++n) {
            agents_.emplace_back(c.q_max, c.b_max);
            if (!opts_.eta0.empty())
                agents_.back().eta = opts_.eta0[static_cast<std::size_t>(n) % opts_.eta0.size()];
        }
        record_.pre.resize(c.n_nodes);
        record_.p_star.resize(c.n_nodes);
        record_.bids.resize(c.n_nodes);
        record_.post_q.resize(c.n_nodes);
        record_.post_b.resize(c.n_nodes);
    }

    const EnvConfig& config() const { return env_.config(); }
    const std::vector<NodeAgent>& agents() const { return agents_; }
    NodeAgent& agent(int n) { return agents_[n]; }
    long long slot() const { return t_; }
    long long clip_events() const { return clip_events_; }
    long long degenerate_waterfill_events() const { return degenerate_waterfill_; }

    std::vector<real> multipliers() const {
        std::vector<real> out;
        for (const auto& a : agents_) out.push_back(a.eta);
        return out;
    }

    real max_update_increment() const { return max_update_increment_; }
    void reset_increment_tracker() { max_update_increment_ = 0.0; }

    /// Advances one slot and returns a reference to the (reused) record.
    const SlotRecord& run_slot() {
        const auto& cfg = env_.config();
        const int n_nodes = cfg.n_nodes;
        record_.t = t_;
        record_.messages = {};
        record_.rs_node = -1;

        // Control action: every node bids from its local state.
        for (int n = 0; n < n_nodes; ++n) {
            const NodeState s = env_.states()[n];
            record_.pre[n] = s;
            const PowerDecision pd = optimal_power(s, n, agents_[n].table, agents_[n].eta, cfg);
            if (pd.waterfill_degenerate) ++degenerate_waterfill_;
            record_.p_star[n] = pd.p;
            record_.bids[n] = compute_bid(s, n, agents_[n].table, agents_[n].eta, pd.p, cfg);
            ++record_.messages.bids;
        }
        record_.winner = fc_schedule(record_.bids);
        ++record_.messages.notices;

        const Action action =
            Action::single(n_nodes, record_.winner, record_.p_star[record_.winner]);
        record_.outcomes = env_.step(action);

        // End of slot: learning updates, then protocol bookkeeping.
        for (int n = 0; n < n_nodes; ++n) {
            NodeAgent& ag = agents_[n];
            const NodeState& pre = record_.pre[n];
            const SlotOutcome& out = record_.outcomes[n];
            const int p = action.p[n];

            if (ag.pending_rs) {
                apply_value_update(ag, n, *ag.pending_rs, pre.h, cfg);
                ag.pending_rs.reset();
            }

            record_.post_q[n] = pre.q - out.served;
            record_.post_b[n] = pre.b - p;
            const bool empty = record_.post_q[n] == 0 && record_.post_b[n] == 0;
            if (empty) ag.ref_harvest = ag.prev_harvest;
            if (empty != ag.was_empty) {
                fc_.apply(EmptyFlagMessage{n, empty});
                ag.was_empty = empty;
                ++record_.messages.empty_flags;
            }

            if (opts_.learn_lm)
                ag.eta = lm_update(ag.eta, pre.q, out.served, opts_.schedule.lm_step(t_), cfg.d_max);

            ag.prev_arrivals = out.arrivals;
            ag.prev_harvest = out.harvested;
        }

        if (auto rs = fc_representative_check(fc_)) {
            const int n = *rs;
            fc_.last_rs_node = n;
            agents_[n].pending_rs = {record_.post_q[n], record_.post_b[n]};
            record_.rs_node = n;
            ++record_.messages.rs_flags;
        }

        totals_.bids += record_.messages.bids;
        totals_.notices += record_.messages.notices;
        totals_.empty_flags += record_.messages.empty_flags;
        totals_.rs_flags += record_.messages.rs_flags;
        ++t_;
        return record_;
    }

    const SlotMessageStats& message_totals() const { return totals_; }

private:
    void apply_value_update(NodeAgent& ag, int node, std::pair<int, int> entry, int h_now,
                            const EnvConfig& cfg) {
        const auto [q, b] = entry;
        const real target =
            value_update_target(ag.table, q, b, ag.prev_arrivals, ag.prev_harvest, h_now, ag.eta,
                                node, ag.ref_harvest, cfg, &clip_events_);
        const real step = opts_.schedule.value_step(ag.table.visits(q, b));
        const real before = ag.table.at(q, b);
        ag.table.update(q, b, target, step);
        max_update_increment_ = std::max(max_update_increment_, std::abs(ag.table.at(q, b) - before));
    }

    Environment env_;
    LearnerOptions opts_;
    std::vector<NodeAgent> agents_;
    FcState fc_;
    SlotRecord record_;
    SlotMessageStats totals_;
    long long t_ = 0;
    long long clip_events_ = 0;
    long long degenerate_waterfill_ = 0;
    real max_update_increment_ = 0.0;
};

/// Trace line: t,node,h,q,b,p_star,bid,scheduled,served,eta,rs_flag
inline void write_trace_header(std::ostream& os) {
    os << "t,node,h,q,b,p_star,bid,scheduled,served,eta,rs_flag\n";
}

inline void write_trace_record(std::ostream& os, const SlotRecord& rec,
                               const std::vector<real>& etas) {
    for (std::size_t n = 0; n < rec.pre.size(); ++n) {
        os << rec.t << ',' << n << ',' << rec.pre[n].h << ',' << rec.pre[n].q << ','
           << rec.pre[n].b << ',' << rec.p_star[n] << ',' << format_real(rec.bids[n]) << ','
           << (static_cast<int>(n) == rec.winner ? 1 : 0) << ',' << rec.outcomes[n].served << ','
           << format_real(etas[n]) << ',' << (static_cast<int>(n) == rec.rs_node ? 1 : 0) << '\n';
    }
}

}  // namespace ehsim
