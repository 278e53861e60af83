#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ehsim/common.hpp"
#include "ehsim/config.hpp"
#include "ehsim/env.hpp"

namespace ehsim {

/// Joint queue/battery state over all nodes, no channel component.
struct ReducedState {
    std::vector<int> q, b;
    bool operator==(const ReducedState& o) const { return q == o.q && b == o.b; }
};

/// Queue/battery state immediately after the action, before arrivals.
struct PostDecisionState {
    std::vector<int> q, b;
    bool operator==(const PostDecisionState& o) const { return q == o.q && b == o.b; }
};

/// Deterministic index <-> state bijections for the full (H,Q,B) space and
/// the reduced (Q,B) space. Node 0 is most significant; within a node the
/// order is (h, q, b) with b fastest.
class StateSpace {
public:
    StateSpace(const EnvConfig& cfg, long long cap = 1'000'000)
        : n_(cfg.n_nodes), nh_(cfg.channel.size()), nq_(cfg.q_max + 1), nb_(cfg.b_max + 1) {
        const long long local = static_cast<long long>(nh_) * nq_ * nb_;
        long double total = 1.0L;
        for (int i = 0; i < n_; ++i) total *= static_cast<long double>(local);
        if (total > static_cast<long double>(cap))
            throw StateSpaceCapError("state space size " + std::to_string(static_cast<double>(total)) +
                                     " exceeds cap " + std::to_string(cap));
        full_count_ = static_cast<long long>(total);
        long long red = 1;
        for (int i = 0; i < n_; ++i) red *= static_cast<long long>(nq_) * nb_;
        reduced_count_ = red;
    }

    int nodes() const { return n_; }
    int channel_states() const { return nh_; }
    long long full_count() const { return full_count_; }
    long long reduced_count() const { return reduced_count_; }
    long long channel_combo_count() const {
        long long c = 1;
        for (int i = 0; i < n_; ++i) c *= nh_;
        return c;
    }

    long long full_index(const std::vector<NodeState>& s) const {
        long long idx = 0;
        for (int n = 0; n < n_; ++n)
            idx = idx * (static_cast<long long>(nh_) * nq_ * nb_) +
                  (static_cast<long long>(s[n].h) * nq_ + s[n].q) * nb_ + s[n].b;
        return idx;
    }

    std::vector<NodeState> full_state(long long idx) const {
        std::vector<NodeState> s(n_);
        const long long local = static_cast<long long>(nh_) * nq_ * nb_;
        for (int n = n_ - 1; n >= 0; --n) {
            long long l = idx % local;
            idx /= local;
            s[n].b = static_cast<int>(l % nb_);
            l /= nb_;
            s[n].q = static_cast<int>(l % nq_);
            s[n].h = static_cast<int>(l / nq_);
        }
        return s;
    }

    long long reduced_index(const std::vector<int>& q, const std::vector<int>& b) const {
        long long idx = 0;
        for (int n = 0; n < n_; ++n)
            idx = idx * (static_cast<long long>(nq_) * nb_) + static_cast<long long>(q[n]) * nb_ + b[n];
        return idx;
    }

    ReducedState reduced_state(long long idx) const {
        ReducedState s;
        s.q.resize(n_);
        s.b.resize(n_);
        const long long local = static_cast<long long>(nq_) * nb_;
        for (int n = n_ - 1; n >= 0; --n) {
            long long l = idx % local;
            idx /= local;
            s.b[n] = static_cast<int>(l % nb_);
            s.q[n] = static_cast<int>(l / nb_);
        }
        return s;
    }

    /// Channel realizations enumerated as base-|H| numbers, node 0 most
    /// significant.
    std::vector<int> channel_combo(long long idx) const {
        std::vector<int> h(n_);
        for (int n = n_ - 1; n >= 0; --n) {
            h[n] = static_cast<int>(idx % nh_);
            idx /= nh_;
        }
        return h;
    }

private:
    int n_, nh_, nq_, nb_;
    long long full_count_ = 0, reduced_count_ = 0;
};

/// Compact action id: 0 is idle, then (node, p) pairs with p in 1..b_max.
class ActionSpace {
public:
    ActionSpace(int n_nodes, int b_max) : n_(n_nodes), b_max_(b_max) {}

    int count() const { return 1 + n_ * b_max_; }

    Action decode(int id) const {
        if (id == 0) return Action::idle(n_);
        const int node = (id - 1) / b_max_;
        const int p = (id - 1) % b_max_ + 1;
        return Action::single(n_, node, p);
    }

    int encode(int node, int p) const { return p == 0 ? 0 : 1 + node * b_max_ + (p - 1); }

    /// Admissible iff the transmitting node can afford p from its battery.
    bool admissible(int id, const std::vector<NodeState>& s) const {
        if (id == 0) return true;
        const int node = (id - 1) / b_max_;
        const int p = (id - 1) % b_max_ + 1;
        return p <= s[node].b;
    }

private:
    int n_, b_max_;
};

}  // namespace ehsim
