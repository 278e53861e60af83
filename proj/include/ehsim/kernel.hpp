#pragma once

#include <functional>
#include <ostream>
#include <vector>

#include "ehsim/state_space.hpp"

namespace ehsim {

/// Per-node Lagrange multipliers for the delay constraints.
struct LagrangeMultipliers {
    std::vector<real> eta;

    static LagrangeMultipliers zeros(int n) { return {std::vector<real>(n, 0.0)}; }

    void project_nonnegative() {
        for (real& e : eta) e = std::max(e, 0.0);
    }
};

/// Per-slot Lagrangian cost of a joint state/action pair:
///   sum_n omega_n + sum_n eta_n*Q_n - sum_n (omega_n/lambda_n + eta_n*D_max)*min(Q_n, r_n).
inline real lagrangian_reward(const std::vector<NodeState>& s, const Action& a,
                              const LagrangeMultipliers& lm, const EnvConfig& cfg) {
    real g = 0.0;
    for (int n = 0; n < cfg.n_nodes; ++n) {
        const int served = std::min(s[n].q, transmit_rate(s[n].h, a.p[n], cfg));
        g += cfg.omega_n(n) + lm.eta[n] * s[n].q -
             (cfg.omega_n(n) / cfg.arrivals.lambda_a + lm.eta[n] * cfg.d_max) * served;
    }
    return g;
}

/// Queue and battery state immediately after applying the action.
inline PostDecisionState post_decision_map(const std::vector<NodeState>& s, const Action& a,
                                           const EnvConfig& cfg) {
    PostDecisionState out;
    out.q.resize(cfg.n_nodes);
    out.b.resize(cfg.n_nodes);
    for (int n = 0; n < cfg.n_nodes; ++n) {
        out.q[n] = std::max(0, s[n].q - transmit_rate(s[n].h, a.p[n], cfg));
        out.b[n] = s[n].b - a.p[n];
    }
    return out;
}

/// Pre-decision state reached from a post-decision state once the slot's
/// arrivals and harvests are known. Uses the same sensing integrality as
/// step_node, so post∘pre composes to the one-shot slot dynamics.
inline ReducedState pre_decision_map(const PostDecisionState& s, const std::vector<int>& arrivals,
                                     const std::vector<int>& harvests, const EnvConfig& cfg) {
    ReducedState out;
    out.q.resize(cfg.n_nodes);
    out.b.resize(cfg.n_nodes);
    for (int n = 0; n < cfg.n_nodes; ++n) {
        const int sensed = sensed_packets(arrivals[n], s.b[n], cfg);
        out.q[n] = std::min(cfg.q_max, s.q[n] + sensed);
        out.b[n] = std::min(cfg.b_max, std::max(0, s.b[n] - sensing_energy(sensed, cfg)) + harvests[n]);
    }
    return out;
}

/// Marginal one-step distributions of the per-node queue and battery
/// coordinates, each obtained by pushing the arrival distributions through
/// the slot dynamics independently (the DTMC kernel is the product of these
/// factors and the channel row).
class TransitionFactors {
public:
    explicit TransitionFactors(const EnvConfig& cfg) : cfg_(cfg) {
        const int nq = cfg.q_max + 1, nb = cfg.b_max + 1, nh = cfg.channel.size();
        const auto& pa = cfg.arrivals.packet_pmf;
        const auto& pe = cfg.arrivals.energy_pmf;

        queue_.assign(static_cast<std::size_t>(nh) * nq * nb * nb, {});
        battery_.assign(static_cast<std::size_t>(nb) * nb, {});
        pre_queue_.assign(static_cast<std::size_t>(nq) * nb, {});
        pre_battery_.assign(nb, {});

        for (int bt = 0; bt < nb; ++bt) {  // post-decision battery
            auto& pb = pre_battery_[bt];
            pb.assign(nb, 0.0);
            for (std::size_t a = 0; a < pa.size(); ++a) {
                const int sensed = sensed_packets(static_cast<int>(a), bt, cfg_);
                const int residual = std::max(0, bt - sensing_energy(sensed, cfg_));
                for (std::size_t e = 0; e < pe.size(); ++e)
                    pb[std::min(cfg.b_max, residual + static_cast<int>(e))] += pa[a] * pe[e];
            }
            for (int qt = 0; qt < nq; ++qt) {  // post-decision queue
                auto& pq = pre_queue_[static_cast<std::size_t>(qt) * nb + bt];
                pq.assign(nq, 0.0);
                for (std::size_t a = 0; a < pa.size(); ++a) {
                    const int sensed = sensed_packets(static_cast<int>(a), bt, cfg_);
                    pq[std::min(cfg.q_max, qt + sensed)] += pa[a];
                }
            }
        }
        for (int b = 0; b < nb; ++b)
            for (int p = 0; p <= b; ++p)
                battery_[static_cast<std::size_t>(b) * nb + (b - p)] = pre_battery_[b - p];
        for (int h = 0; h < nh; ++h)
            for (int q = 0; q < nq; ++q)
                for (int b = 0; b < nb; ++b)
                    for (int p = 0; p <= b; ++p) {
                        const int qt = std::max(0, q - transmit_rate(h, p, cfg_));
                        queue_[((static_cast<std::size_t>(h) * nq + q) * nb + b) * nb + (b - p)] =
                            pre_queue_[static_cast<std::size_t>(qt) * nb + (b - p)];
                    }
    }

    // Pr[q' | h, q, b, p], marginal over packet arrivals.
    const std::vector<real>& queue(int h, int q, int b, int p) const {
        return queue_[((static_cast<std::size_t>(h) * (cfg_.q_max + 1) + q) * (cfg_.b_max + 1) + b) *
                          (cfg_.b_max + 1) + (b - p)];
    }
    // Pr[b' | b, p], marginal over arrivals and harvests.
    const std::vector<real>& battery(int b, int p) const {
        return battery_[static_cast<std::size_t>(b) * (cfg_.b_max + 1) + (b - p)];
    }
    // Pr[q_pre | q_post, b_post] and Pr[b_pre | b_post].
    const std::vector<real>& pre_queue(int q_post, int b_post) const {
        return pre_queue_[static_cast<std::size_t>(q_post) * (cfg_.b_max + 1) + b_post];
    }
    const std::vector<real>& pre_battery(int b_post) const { return pre_battery_[b_post]; }

    const EnvConfig& config() const { return cfg_; }

private:
    EnvConfig cfg_;
    std::vector<std::vector<real>> queue_, battery_, pre_queue_, pre_battery_;
};

/// Sparse joint transition kernel over the full (H,Q,B) state space.
struct TransitionKernel {
    struct Entry {
        long long next;
        real prob;
    };
    struct ActionRow {
        int action;                   // ActionSpace id
        std::vector<Entry> entries;   // probabilities sum to 1
    };

    std::vector<std::vector<ActionRow>> rows;  // [state idx] -> admissible actions

    void export_text(std::ostream& os) const {
        for (std::size_t s = 0; s < rows.size(); ++s)
            for (const auto& ar : rows[s])
                for (const auto& e : ar.entries)
                    os << s << ' ' << ar.action << ' ' << e.next << ' ' << format_kernel_prob(e.prob)
                       << '\n';
    }

    static std::string format_kernel_prob(real p) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.12g", p);
        return buf;
    }
};

/// Materializes the kernel: for every state and admissible action, the outer
/// product of per-node channel, queue, and battery factors.
inline TransitionKernel build_kernel(const EnvConfig& cfg, const StateSpace& space,
                                     const ActionSpace& actions, const TransitionFactors& factors) {
    TransitionKernel kernel;
    kernel.rows.resize(space.full_count());

    const int n = cfg.n_nodes;
    std::vector<const std::vector<real>*> qf(n), bf(n), hf(n);
    std::vector<NodeState> next(n);

    for (long long si = 0; si < space.full_count(); ++si) {
        const auto s = space.full_state(si);
        for (int aid = 0; aid < actions.count(); ++aid) {
            if (!actions.admissible(aid, s)) continue;
            const Action a = actions.decode(aid);
            for (int k = 0; k < n; ++k) {
                qf[k] = &factors.queue(s[k].h, s[k].q, s[k].b, a.p[k]);
                bf[k] = &factors.battery(s[k].b, a.p[k]);
                hf[k] = &cfg.channel.transition[s[k].h];
            }
            TransitionKernel::ActionRow row;
            row.action = aid;
            // Depth-first product over nodes, skipping zero-probability branches.
            struct Frame { int h, q, b; };
            std::vector<Frame> cursor(n, {0, 0, 0});
            const std::function<void(int, real)> recurse = [&](int k, real prob) {
                if (prob <= 0.0) return;
                if (k == n) {
                    for (int j = 0; j < n; ++j)
                        next[j] = NodeState{cursor[j].h, cursor[j].q, cursor[j].b};
                    row.entries.push_back({space.full_index(next), prob});
                    return;
                }
                for (int h = 0; h < cfg.channel.size(); ++h) {
                    const real ph = (*hf[k])[h];
                    if (ph <= 0.0) continue;
                    for (int q = 0; q <= cfg.q_max; ++q) {
                        const real pq = (*qf[k])[q];
                        if (pq <= 0.0) continue;
                        for (int b = 0; b <= cfg.b_max; ++b) {
                            const real pb = (*bf[k])[b];
                            if (pb <= 0.0) continue;
                            cursor[k] = {h, q, b};
                            recurse(k + 1, prob * ph * pq * pb);
                        }
                    }
                }
            };
            recurse(0, 1.0);
            kernel.rows[si].push_back(std::move(row));
        }
    }
    return kernel;
}

}  // namespace ehsim
