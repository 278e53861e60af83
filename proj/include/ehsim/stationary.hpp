#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ehsim/rvi.hpp"

namespace ehsim {

/// Exact long-run averages of a fixed deterministic policy, from the unique
/// stationary distribution of its induced chain.
struct PolicyEval {
    std::vector<real> stationary;       // pi over full states
    std::vector<real> avg_queue;        // per node
    std::vector<real> avg_throughput;   // per node, packets/slot
    std::vector<real> drop_rate;        // per node
    std::vector<real> delay;            // per node, slots
    std::vector<real> constraint_slack; // Q_bar - D_max * R_bar per node
    real weighted_drop_objective = 0.0; // sum_n omega_n * drop_n
    real theta = 0.0;                   // average Lagrangian cost of the policy
};

/// Solves the balance equations pi P = pi, sum pi = 1 for the chain induced
/// by `policy` on the materialized kernel (dense solve; oracle instances are
/// desk scale by construction).
inline std::vector<real> stationary_distribution(const TransitionKernel& kernel,
                                                 const std::vector<int>& policy) {
    const int n = static_cast<int>(kernel.rows.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int s = 0; s < n; ++s) {
        const TransitionKernel::ActionRow* row = nullptr;
        for (const auto& r : kernel.rows[s])
            if (r.action == policy[s]) {
                row = &r;
                break;
            }
        if (!row) throw std::invalid_argument("stationary_distribution: policy action not admissible");
        for (const auto& e : row->entries) a(static_cast<int>(e.next), s) += e.prob;  // P^T
    }
    // (P^T - I) x = 0 with the last balance equation replaced by sum(x) = 1.
    a -= Eigen::MatrixXd::Identity(n, n);
    a.row(n - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(n - 1) = 1.0;
    Eigen::VectorXd pi = a.partialPivLu().solve(rhs);
    std::vector<real> out(n);
    real total = 0.0;
    for (int i = 0; i < n; ++i) {
        out[i] = std::max(0.0, pi(i));
        total += out[i];
    }
    for (real& v : out) v /= total;
    return out;
}

inline PolicyEval evaluate_policy(const TransitionKernel& kernel, const std::vector<int>& policy,
                                  const StateSpace& space, const ActionSpace& actions,
                                  const LagrangeMultipliers& lm, const EnvConfig& cfg) {
    PolicyEval ev;
    ev.stationary = stationary_distribution(kernel, policy);
    ev.avg_queue.assign(cfg.n_nodes, 0.0);
    ev.avg_throughput.assign(cfg.n_nodes, 0.0);
    for (long long si = 0; si < space.full_count(); ++si) {
        const real w = ev.stationary[si];
        if (w <= 0.0) continue;
        const auto s = space.full_state(si);
        const Action a = actions.decode(policy[si]);
        ev.theta += w * lagrangian_reward(s, a, lm, cfg);
        for (int n = 0; n < cfg.n_nodes; ++n) {
            ev.avg_queue[n] += w * s[n].q;
            ev.avg_throughput[n] += w * std::min(s[n].q, transmit_rate(s[n].h, a.p[n], cfg));
        }
    }
    ev.drop_rate.assign(cfg.n_nodes, 0.0);
    ev.delay.assign(cfg.n_nodes, 0.0);
    ev.constraint_slack.assign(cfg.n_nodes, 0.0);
    for (int n = 0; n < cfg.n_nodes; ++n) {
        ev.drop_rate[n] = std::clamp(1.0 - ev.avg_throughput[n] / cfg.arrivals.lambda_a, 0.0, 1.0);
        ev.delay[n] = ev.avg_throughput[n] > 0.0
                          ? ev.avg_queue[n] / ev.avg_throughput[n]
                          : std::numeric_limits<real>::infinity();
        ev.constraint_slack[n] = ev.avg_queue[n] - cfg.d_max * ev.avg_throughput[n];
        ev.weighted_drop_objective += cfg.omega_n(n) * ev.drop_rate[n];
    }
    return ev;
}

}  // namespace ehsim
