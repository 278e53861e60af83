#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "ehsim/common.hpp"

namespace ehsim {

inline constexpr real kPmfTol = 1e-12;

/// Finite-state Markov fading channel: per-state power gains plus a
/// row-stochastic transition matrix.
struct ChannelModel {
    std::vector<std::string> states;
    std::vector<real> gains;                        // dimensionless power gain per state
    std::vector<std::vector<real>> transition;      // row-stochastic

    int size() const { return static_cast<int>(states.size()); }

    void validate() const {
        if (states.empty() || gains.size() != states.size() || transition.size() != states.size())
            throw std::invalid_argument("channel: states/gains/transition sizes disagree");
        for (real g : gains)
            if (!(g > 0.0)) throw std::invalid_argument("channel: gains must be positive");
        for (const auto& row : transition) {
            if (row.size() != states.size())
                throw std::invalid_argument("channel: transition matrix must be square");
            real s = 0.0;
            for (real p : row) {
                if (p < -kPmfTol) throw std::invalid_argument("channel: negative transition probability");
                s += p;
            }
            if (std::abs(s - 1.0) > kPmfTol)
                throw std::invalid_argument("channel: transition row does not sum to 1");
        }
        if (!irreducible()) throw std::invalid_argument("channel: transition matrix is not irreducible");
    }

    /// Reachability check: every state reaches every other along positive entries.
    bool irreducible() const {
        const int n = size();
        for (int src = 0; src < n; ++src) {
            std::vector<bool> seen(n, false);
            std::vector<int> stack{src};
            seen[src] = true;
            while (!stack.empty()) {
                int u = stack.back();
                stack.pop_back();
                for (int v = 0; v < n; ++v)
                    if (!seen[v] && transition[u][v] > 0.0) {
                        seen[v] = true;
                        stack.push_back(v);
                    }
            }
            for (bool b : seen)
                if (!b) return false;
        }
        return true;
    }

    /// Stationary distribution by power iteration (matrices here are tiny).
    std::vector<real> stationary() const {
        const int n = size();
        std::vector<real> pi(n, 1.0 / n), nxt(n);
        for (int it = 0; it < 200000; ++it) {
            std::fill(nxt.begin(), nxt.end(), 0.0);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) nxt[j] += pi[i] * transition[i][j];
            real diff = 0.0;
            for (int j = 0; j < n; ++j) diff = std::max(diff, std::abs(nxt[j] - pi[j]));
            pi.swap(nxt);
            if (diff < 1e-15) break;
        }
        real s = std::accumulate(pi.begin(), pi.end(), 0.0);
        for (real& p : pi) p /= s;
        return pi;
    }
};

/// Per-slot packet and harvested-energy arrival distributions (integer
/// support, i.i.d. across slots and nodes).
struct ArrivalModel {
    std::vector<real> packet_pmf;   // index = packets per slot
    std::vector<real> energy_pmf;   // index = energy units per slot
    real lambda_a = 0.0;            // configured mean packet arrival rate
    real lambda_e = 0.0;            // configured mean energy arrival rate

    static void check_pmf(const std::vector<real>& pmf, const char* name) {
        if (pmf.empty()) throw std::invalid_argument(std::string(name) + ": empty pmf");
        real s = 0.0;
        for (real p : pmf) {
            if (p < -kPmfTol) throw std::invalid_argument(std::string(name) + ": negative mass");
            s += p;
        }
        if (std::abs(s - 1.0) > kPmfTol)
            throw std::invalid_argument(std::string(name) + ": pmf does not sum to 1");
    }

    void validate() const {
        check_pmf(packet_pmf, "packet_pmf");
        check_pmf(energy_pmf, "energy_pmf");
    }

    static real pmf_mean(const std::vector<real>& pmf) {
        real m = 0.0;
        for (std::size_t k = 0; k < pmf.size(); ++k) m += static_cast<real>(k) * pmf[k];
        return m;
    }

    /// Poisson(lambda) truncated at a_max, tail mass folded onto a_max.
    static std::vector<real> truncated_poisson(real lambda, int a_max) {
        if (lambda <= 0.0) throw std::invalid_argument("truncated_poisson: lambda must be positive");
        std::vector<real> pmf(a_max + 1, 0.0);
        real p = std::exp(-lambda);
        real cum = 0.0;
        for (int k = 0; k < a_max; ++k) {
            pmf[k] = p;
            cum += p;
            p *= lambda / (k + 1);
        }
        pmf[a_max] = 1.0 - cum;
        return pmf;
    }

    /// Harvest process: 2*lambda_e units or nothing, each with probability 1/2.
    /// A fractional 2*lambda_e is split between the adjacent integers so the
    /// mean stays exactly lambda_e on the integer energy grid.
    static std::vector<real> bernoulli_energy(real lambda_e) {
        if (lambda_e < 0.0) throw std::invalid_argument("bernoulli_energy: lambda_e must be nonnegative");
        const real burst = 2.0 * lambda_e;
        const int lo = floor_int(burst);
        const int hi = ceil_int(burst);
        std::vector<real> pmf(std::max(hi, 0) + 1, 0.0);
        pmf[0] += 0.5;
        if (lo == hi) {
            pmf[lo] += 0.5;
        } else {
            const real frac = burst - lo;
            pmf[lo] += 0.5 * (1.0 - frac);
            pmf[hi] += 0.5 * frac;
        }
        return pmf;
    }
};

/// Static scenario parameters shared by the simulator, the solvers, and the
/// online controller.
struct EnvConfig {
    int n_nodes = 1;
    int q_max = 5;          // data buffer size, packets
    int b_max = 10;         // battery capacity, energy units
    real tau = 1.0;         // slot duration, s
    real bandwidth = 3e5;   // W, Hz
    real packet_bits = 1e5; // K, bits per packet
    real noise_psd = 1e-16; // N0, W/Hz
    real xi = 0.283;        // SNR-gap constant
    real gamma = 1.0;       // sensing efficiency, packets per energy unit
    real epsilon = 1e-3;    // target BER
    real d_max = 3.0;       // delay bound, slots
    std::vector<real> omega = {1.0};  // per-node loss weights
    real gain_scale = 100.0;          // calibration multiplier on channel gains

    ChannelModel channel;
    ArrivalModel arrivals;

    real omega_n(int n) const { return omega[static_cast<std::size_t>(n) % omega.size()]; }

    void validate() const {
        if (n_nodes < 1) throw std::invalid_argument("config: N must be >= 1");
        if (q_max < 1) throw std::invalid_argument("config: Q_max must be >= 1");
        if (b_max < 1) throw std::invalid_argument("config: B_max must be >= 1");
        if (!(tau > 0.0)) throw std::invalid_argument("config: tau must be positive");
        if (!(bandwidth > 0.0)) throw std::invalid_argument("config: W must be positive");
        if (!(packet_bits > 0.0)) throw std::invalid_argument("config: K must be positive");
        if (!(noise_psd > 0.0)) throw std::invalid_argument("config: N0 must be positive");
        if (!(xi > 0.0)) throw std::invalid_argument("config: xi must be positive");
        if (!(gamma > 0.0)) throw std::invalid_argument("config: gamma must be positive");
        if (epsilon < 0.0 || epsilon >= 1.0) throw std::invalid_argument("config: epsilon must be in [0,1)");
        if (!(d_max > 0.0)) throw std::invalid_argument("config: D_max must be positive");
        if (!(gain_scale > 0.0)) throw std::invalid_argument("config: gain_scale must be positive");
        if (omega.empty()) throw std::invalid_argument("config: omega must be nonempty");
        for (real w : omega)
            if (!(w > 0.0)) throw std::invalid_argument("config: omega must be positive");
        channel.validate();
        arrivals.validate();
    }

    real effective_gain(int h) const { return channel.gains[h] * gain_scale; }
};

/// Benchmark channel: three states Bad/Normal/Good with the gains and
/// transition matrix used throughout the experiments.
inline ChannelModel default_channel() {
    ChannelModel ch;
    ch.states = {"B", "N", "G"};
    ch.gains = {2e-13, 4e-13, 6e-13};
    ch.transition = {{0.3, 0.7, 0.0}, {0.25, 0.5, 0.25}, {0.0, 0.7, 0.3}};
    return ch;
}

/// Single-node benchmark scenario (Q_max=5, B_max=10, 3-state channel).
inline EnvConfig default_config(real lambda_a = 1.0, real lambda_e = 1.2) {
    EnvConfig cfg;
    cfg.channel = default_channel();
    cfg.arrivals.lambda_a = lambda_a;
    cfg.arrivals.lambda_e = lambda_e;
    cfg.arrivals.energy_pmf = ArrivalModel::bernoulli_energy(lambda_e);
    // a_max is finalized by finish_arrivals() once rates are computable.
    return cfg;
}

/// Compact two-node scenario used by the solver-equivalence tests: 2-state
/// memoryless channel, Q_max=B_max=2, two-point arrival distributions.
inline EnvConfig tiny_config() {
    EnvConfig cfg;
    cfg.n_nodes = 2;
    cfg.q_max = 2;
    cfg.b_max = 2;
    cfg.bandwidth = 1e5;
    cfg.packet_bits = 1e5;
    cfg.gain_scale = 1.0;
    cfg.d_max = 4.0;
    cfg.omega = {1.0, 1.0};
    // Gains chosen so the unit-energy SNR is 1 (low state) and 3 (high
    // state): integer rates over p in {0,1,2} are (0,1,1) and (0,2,2).
    const real unit = cfg.noise_psd * cfg.bandwidth * cfg.tau / cfg.xi;
    cfg.channel.states = {"L", "H"};
    cfg.channel.gains = {1.0 * unit, 3.0 * unit};
    cfg.channel.transition = {{0.5, 0.5}, {0.5, 0.5}};
    cfg.arrivals.lambda_a = 0.5;
    cfg.arrivals.lambda_e = 1.0;
    cfg.arrivals.packet_pmf = {0.5, 0.5};        // 0 or 1 packet
    cfg.arrivals.energy_pmf = {0.5, 0.0, 0.5};   // 0 or 2 energy units
    return cfg;
}

}  // namespace ehsim
