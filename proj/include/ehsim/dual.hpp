#pragma once

#include <cmath>
#include <vector>

#include "ehsim/stationary.hpp"

namespace ehsim {

struct DualOptions {
    real step_scale = 0.25;     // subgradient step c / (1+k)^exponent
    real step_exponent = 0.6;
    int outer_iters = 40;
    real feas_tol = 1e-9;       // slack <= feas_tol counts as feasible
    RviOptions rvi;
};

struct DualIterate {
    std::vector<real> eta;
    real theta = 0.0;
    std::vector<real> slack;
    real objective = 0.0;
    bool feasible = false;
};

struct DualResult {
    LagrangeMultipliers eta;
    std::vector<int> policy;
    real theta = 0.0;
    PolicyEval eval;
    int best_iter = -1;
    std::vector<DualIterate> history;
};

/// Projected subgradient ascent on the delay multipliers. The inner problem
/// is solved exactly by full-state RVI; the constraint expectation comes from
/// the stationary distribution of the inner greedy policy, so the outer loop
/// is noise-free. Returns the best feasible iterate by weighted drop
/// objective; throws if no probed multiplier is feasible.
inline DualResult dual_solve(const EnvConfig& cfg, const StateSpace& space,
                             const ActionSpace& actions, const TransitionKernel& kernel,
                             const LagrangeMultipliers& eta0, const DualOptions& opts) {
    LagrangeMultipliers eta = eta0;
    eta.eta.resize(cfg.n_nodes, 0.0);
    eta.project_nonnegative();

    DualResult res;
    real best_objective = std::numeric_limits<real>::infinity();
    std::vector<real> warm;

    for (int k = 0; k < opts.outer_iters; ++k) {
        const auto rewards = kernel_rewards(kernel, space, actions, eta, cfg);
        const RviResult inner =
            relative_value_iteration(kernel, rewards, opts.rvi, warm.empty() ? nullptr : &warm);
        warm = inner.value;
        const PolicyEval ev = evaluate_policy(kernel, inner.policy, space, actions, eta, cfg);

        DualIterate it;
        it.eta = eta.eta;
        it.theta = inner.theta;
        it.slack = ev.constraint_slack;
        it.objective = ev.weighted_drop_objective;
        it.feasible = true;
        for (real s : ev.constraint_slack) it.feasible = it.feasible && s <= opts.feas_tol;
        res.history.push_back(it);

        if (it.feasible && it.objective < best_objective) {
            best_objective = it.objective;
            res.best_iter = k;
            res.eta = eta;
            res.policy = inner.policy;
            res.theta = inner.theta;
            res.eval = ev;
        }

        const real step = opts.step_scale / std::pow(1.0 + k, opts.step_exponent);
        for (int n = 0; n < cfg.n_nodes; ++n) eta.eta[n] += step * ev.constraint_slack[n];
        eta.project_nonnegative();
    }

    if (res.best_iter < 0) {
        std::string diag = "dual_solve: no feasible multiplier found; slacks at last iterate:";
        for (real s : res.history.back().slack) diag += " " + std::to_string(s);
        throw std::runtime_error(diag);
    }
    return res;
}

/// Dual function G(eta) = inner optimal average cost; used by the concavity
/// probe and diagnostics.
inline real dual_value(const EnvConfig& cfg, const StateSpace& space, const ActionSpace& actions,
                       const TransitionKernel& kernel, const LagrangeMultipliers& eta,
                       const RviOptions& opts) {
    const auto rewards = kernel_rewards(kernel, space, actions, eta, cfg);
    return relative_value_iteration(kernel, rewards, opts).theta;
}

}  // namespace ehsim
