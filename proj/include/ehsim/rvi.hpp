#pragma once

#include <limits>
#include <vector>

#include "ehsim/kernel.hpp"

namespace ehsim {

struct RviOptions {
    real tol = 1e-9;            // exit span threshold
    long max_sweeps = 100000;
    real aperiodicity = 0.5;    // self-loop damping; preserves theta and the greedy policy
    long long ref_state = 0;    // value pinned to 0 here
    real tie_eps = 1e-9;        // argmin tie tolerance (lowest action id wins)
};

struct RviResult {
    real theta = 0.0;
    std::vector<real> value;       // relative values, reference entry = 0
    std::vector<int> policy;       // ActionSpace id per full state
    long sweeps = 0;
    real final_span = 0.0;
    std::vector<real> span_history;
};

/// Per-(state, admissible-action) rewards aligned with the kernel rows.
inline std::vector<std::vector<real>> kernel_rewards(const TransitionKernel& kernel,
                                                     const StateSpace& space,
                                                     const ActionSpace& actions,
                                                     const LagrangeMultipliers& lm,
                                                     const EnvConfig& cfg) {
    std::vector<std::vector<real>> g(kernel.rows.size());
    for (std::size_t si = 0; si < kernel.rows.size(); ++si) {
        const auto s = space.full_state(static_cast<long long>(si));
        g[si].reserve(kernel.rows[si].size());
        for (const auto& row : kernel.rows[si])
            g[si].push_back(lagrangian_reward(s, actions.decode(row.action), lm, cfg));
    }
    return g;
}

/// Span-seminorm relative value iteration on the full-state average-cost
/// Bellman equation. Minimizes the per-slot cost; theta is read off the
/// reference-state backup each sweep.
inline RviResult relative_value_iteration(const TransitionKernel& kernel,
                                          const std::vector<std::vector<real>>& rewards,
                                          const RviOptions& opts,
                                          const std::vector<real>* init = nullptr) {
    const std::size_t n = kernel.rows.size();
    RviResult res;
    res.value.assign(n, 0.0);
    if (init && init->size() == n) res.value = *init;
    res.policy.assign(n, 0);
    std::vector<real> backup(n, 0.0);
    const real alpha = opts.aperiodicity;

    for (res.sweeps = 0; res.sweeps < opts.max_sweeps; ++res.sweeps) {
        real lo = std::numeric_limits<real>::infinity(), hi = -lo;
        for (std::size_t s = 0; s < n; ++s) {
            real best = std::numeric_limits<real>::infinity();
            int best_action = 0;
            for (std::size_t k = 0; k < kernel.rows[s].size(); ++k) {
                real ev = 0.0;
                for (const auto& e : kernel.rows[s][k].entries) ev += e.prob * res.value[e.next];
                const real v = rewards[s][k] + alpha * ev;
                if (v < best - opts.tie_eps) {
                    best = v;
                    best_action = kernel.rows[s][k].action;
                }
            }
            backup[s] = best + (1.0 - alpha) * res.value[s];
            res.policy[s] = best_action;
            const real diff = backup[s] - res.value[s];
            lo = std::min(lo, diff);
            hi = std::max(hi, diff);
        }
        res.final_span = hi - lo;
        res.span_history.push_back(res.final_span);
        res.theta = backup[opts.ref_state];
        const real shift = backup[opts.ref_state];
        for (std::size_t s = 0; s < n; ++s) res.value[s] = backup[s] - shift;
        if (res.final_span < opts.tol) {
            ++res.sweeps;
            return res;
        }
    }
    throw NonConvergenceError("relative_value_iteration: span " + std::to_string(res.final_span) +
                                  " after max sweeps",
                              res.final_span);
}

namespace detail {

/// Expectation of V over the joint next reduced state, where each node's
/// queue and battery coordinates move independently per the factored kernel.
inline real expect_reduced(const std::vector<const std::vector<real>*>& qpmf,
                           const std::vector<const std::vector<real>*>& bpmf,
                           const std::vector<real>& value, int node, long long idx, real prob) {
    if (node == static_cast<int>(qpmf.size()))
        return prob * value[idx];
    real acc = 0.0;
    const auto& pq = *qpmf[node];
    const auto& pb = *bpmf[node];
    const long long nb = static_cast<long long>(pb.size());
    for (std::size_t q = 0; q < pq.size(); ++q) {
        if (pq[q] <= 0.0) continue;
        for (std::size_t b = 0; b < pb.size(); ++b) {
            if (pb[b] <= 0.0) continue;
            acc += expect_reduced(qpmf, bpmf, value, node + 1,
                                  idx * (static_cast<long long>(pq.size()) * nb) +
                                      static_cast<long long>(q) * nb + static_cast<long long>(b),
                                  prob * pq[q] * pb[b]);
        }
    }
    return acc;
}

/// Probability weight of one joint channel realization under the stationary
/// channel distribution.
inline real channel_weight(const std::vector<int>& combo, const std::vector<real>& pi) {
    real w = 1.0;
    for (int h : combo) w *= pi[h];
    return w;
}

}  // namespace detail

/// Relative value iteration on the reduced-state equation: values indexed by
/// (Q,B) only, the channel entering through its stationary distribution and
/// the per-realization inner minimization. The returned policy is extracted
/// per full (H,Q,B) state.
inline RviResult reduced_rvi(const EnvConfig& cfg, const TransitionFactors& factors,
                             const StateSpace& space, const ActionSpace& actions,
                             const LagrangeMultipliers& lm, const RviOptions& opts) {
    const long long n_red = space.reduced_count();
    const auto pi_h = cfg.channel.stationary();
    const long long n_combo = space.channel_combo_count();
    const real alpha = opts.aperiodicity;

    std::vector<real> value(n_red, 0.0), backup(n_red, 0.0);
    std::vector<const std::vector<real>*> qpmf(cfg.n_nodes), bpmf(cfg.n_nodes);
    std::vector<NodeState> s(cfg.n_nodes);

    // Inner minimum for one (channel combo, reduced state); also reports the
    // chosen action id for policy extraction.
    const auto inner_min = [&](const std::vector<int>& combo, const ReducedState& rs,
                               int* chosen) -> real {
        for (int k = 0; k < cfg.n_nodes; ++k) s[k] = NodeState{combo[k], rs.q[k], rs.b[k]};
        real best = std::numeric_limits<real>::infinity();
        int best_action = 0;
        for (int aid = 0; aid < actions.count(); ++aid) {
            if (!actions.admissible(aid, s)) continue;
            const Action a = actions.decode(aid);
            for (int k = 0; k < cfg.n_nodes; ++k) {
                qpmf[k] = &factors.queue(s[k].h, s[k].q, s[k].b, a.p[k]);
                bpmf[k] = &factors.battery(s[k].b, a.p[k]);
            }
            const real ev = detail::expect_reduced(qpmf, bpmf, value, 0, 0, 1.0);
            const real v = lagrangian_reward(s, a, lm, cfg) + alpha * ev;
            if (v < best - opts.tie_eps) {
                best = v;
                best_action = aid;
            }
        }
        if (chosen) *chosen = best_action;
        return best;
    };

    RviResult res;
    for (res.sweeps = 0; res.sweeps < opts.max_sweeps; ++res.sweeps) {
        real lo = std::numeric_limits<real>::infinity(), hi = -lo;
        for (long long ri = 0; ri < n_red; ++ri) {
            const ReducedState rs = space.reduced_state(ri);
            real acc = 0.0;
            for (long long c = 0; c < n_combo; ++c) {
                const auto combo = space.channel_combo(c);
                const real w = detail::channel_weight(combo, pi_h);
                if (w <= 0.0) continue;
                acc += w * inner_min(combo, rs, nullptr);
            }
            backup[ri] = acc + (1.0 - alpha) * value[ri];
            const real diff = backup[ri] - value[ri];
            lo = std::min(lo, diff);
            hi = std::max(hi, diff);
        }
        res.final_span = hi - lo;
        res.span_history.push_back(res.final_span);
        res.theta = backup[opts.ref_state];
        const real shift = backup[opts.ref_state];
        for (long long ri = 0; ri < n_red; ++ri) value[ri] = backup[ri] - shift;
        if (res.final_span < opts.tol) break;
    }
    if (res.final_span >= opts.tol)
        throw NonConvergenceError("reduced_rvi: span after max sweeps", res.final_span);
    ++res.sweeps;

    res.value = value;
    res.policy.assign(space.full_count(), 0);
    for (long long si = 0; si < space.full_count(); ++si) {
        const auto fs = space.full_state(si);
        ReducedState rs;
        rs.q.resize(cfg.n_nodes);
        rs.b.resize(cfg.n_nodes);
        std::vector<int> combo(cfg.n_nodes);
        for (int k = 0; k < cfg.n_nodes; ++k) {
            combo[k] = fs[k].h;
            rs.q[k] = fs[k].q;
            rs.b[k] = fs[k].b;
        }
        int chosen = 0;
        inner_min(combo, rs, &chosen);
        res.policy[si] = chosen;
    }
    return res;
}

/// Relative value iteration on the post-decision equation: values indexed by
/// the post-decision (Q,B) grid; the action extraction needs only the
/// deterministic post-decision map, no arrival distributions.
inline RviResult postdecision_rvi(const EnvConfig& cfg, const TransitionFactors& factors,
                                  const StateSpace& space, const ActionSpace& actions,
                                  const LagrangeMultipliers& lm, const RviOptions& opts) {
    const long long n_red = space.reduced_count();
    const auto pi_h = cfg.channel.stationary();
    const long long n_combo = space.channel_combo_count();
    const real alpha = opts.aperiodicity;

    std::vector<real> value(n_red, 0.0), inner(n_red, 0.0), backup(n_red, 0.0);
    std::vector<NodeState> s(cfg.n_nodes);

    // min_a { g + alpha * V(post(S,a)) } for one (channel combo, pre state).
    const auto inner_min = [&](const std::vector<int>& combo, const ReducedState& rs,
                               int* chosen) -> real {
        for (int k = 0; k < cfg.n_nodes; ++k) s[k] = NodeState{combo[k], rs.q[k], rs.b[k]};
        real best = std::numeric_limits<real>::infinity();
        int best_action = 0;
        for (int aid = 0; aid < actions.count(); ++aid) {
            if (!actions.admissible(aid, s)) continue;
            const Action a = actions.decode(aid);
            const PostDecisionState post = post_decision_map(s, a, cfg);
            const real v = lagrangian_reward(s, a, lm, cfg) +
                           alpha * value[space.reduced_index(post.q, post.b)];
            if (v < best - opts.tie_eps) {
                best = v;
                best_action = aid;
            }
        }
        if (chosen) *chosen = best_action;
        return best;
    };

    std::vector<const std::vector<real>*> qpmf(cfg.n_nodes), bpmf(cfg.n_nodes);

    RviResult res;
    for (res.sweeps = 0; res.sweeps < opts.max_sweeps; ++res.sweeps) {
        // Inner expectation-of-min per pre-decision reduced state.
        for (long long ri = 0; ri < n_red; ++ri) {
            const ReducedState rs = space.reduced_state(ri);
            real acc = 0.0;
            for (long long c = 0; c < n_combo; ++c) {
                const auto combo = space.channel_combo(c);
                const real w = detail::channel_weight(combo, pi_h);
                if (w <= 0.0) continue;
                acc += w * inner_min(combo, rs, nullptr);
            }
            inner[ri] = acc;
        }
        // Outer averaging over the arrival-driven post -> pre transition.
        real lo = std::numeric_limits<real>::infinity(), hi = -lo;
        for (long long pi_idx = 0; pi_idx < n_red; ++pi_idx) {
            const ReducedState ps = space.reduced_state(pi_idx);
            for (int k = 0; k < cfg.n_nodes; ++k) {
                qpmf[k] = &factors.pre_queue(ps.q[k], ps.b[k]);
                bpmf[k] = &factors.pre_battery(ps.b[k]);
            }
            backup[pi_idx] = detail::expect_reduced(qpmf, bpmf, inner, 0, 0, 1.0) +
                             (1.0 - alpha) * value[pi_idx];
            const real diff = backup[pi_idx] - value[pi_idx];
            lo = std::min(lo, diff);
            hi = std::max(hi, diff);
        }
        res.final_span = hi - lo;
        res.span_history.push_back(res.final_span);
        res.theta = backup[opts.ref_state];
        const real shift = backup[opts.ref_state];
        for (long long ri = 0; ri < n_red; ++ri) value[ri] = backup[ri] - shift;
        if (res.final_span < opts.tol) break;
    }
    if (res.final_span >= opts.tol)
        throw NonConvergenceError("postdecision_rvi: span after max sweeps", res.final_span);
    ++res.sweeps;

    res.value = value;
    res.policy.assign(space.full_count(), 0);
    for (long long si = 0; si < space.full_count(); ++si) {
        const auto fs = space.full_state(si);
        ReducedState rs;
        rs.q.resize(cfg.n_nodes);
        rs.b.resize(cfg.n_nodes);
        std::vector<int> combo(cfg.n_nodes);
        for (int k = 0; k < cfg.n_nodes; ++k) {
            combo[k] = fs[k].h;
            rs.q[k] = fs[k].q;
            rs.b[k] = fs[k].b;
        }
        int chosen = 0;
        inner_min(combo, rs, &chosen);
        res.policy[si] = chosen;
    }
    return res;
}

}  // namespace ehsim
