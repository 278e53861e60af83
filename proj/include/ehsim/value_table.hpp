#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ehsim/common.hpp"

namespace ehsim {

/// Two-timescale step sizes: eps_v for value entries (indexed by per-entry
/// visit counts), eps_eta for multipliers (indexed by the slot counter).
/// Requires 0.5 < alpha_v < alpha_eta <= 1 so that the sums diverge, the
/// squared sums converge, and eps_eta/eps_v -> 0.
struct StepSizeSchedule {
    real alpha_v = 0.6;
    real alpha_eta = 0.9;
    real c_v = 1.0;
    real c_eta = 1.0;

    void validate() const {
        if (!(alpha_v > 0.5 && alpha_v < alpha_eta && alpha_eta <= 1.0))
            throw std::invalid_argument("step sizes: need 0.5 < alpha_v < alpha_eta <= 1");
        if (!(c_v > 0.0 && c_eta > 0.0))
            throw std::invalid_argument("step sizes: scales must be positive");
    }

    real value_step(long long visit_count) const {
        return c_v / std::pow(1.0 + static_cast<real>(visit_count), alpha_v);
    }
    real lm_step(long long t) const {
        return c_eta / std::pow(1.0 + static_cast<real>(t), alpha_eta);
    }
};

/// One node's learned value grid over (queue, battery), with the (0,0)
/// entry pinned to zero and per-entry occurrence counters.
class PerNodeValueTable {
public:
    PerNodeValueTable(int q_max, int b_max)
        : q_max_(q_max), b_max_(b_max),
          values_(static_cast<std::size_t>(q_max + 1) * (b_max + 1), 0.0),
          visits_(static_cast<std::size_t>(q_max + 1) * (b_max + 1), 0) {}

    int q_max() const { return q_max_; }
    int b_max() const { return b_max_; }

    real at(int q, int b) const { return values_[index(q, b)]; }
    long long visits(int q, int b) const { return visits_[index(q, b)]; }

    /// Direct assignment (seeding, tests): the entry counts as visited.
    void set(int q, int b, real v) {
        values_[index(q, b)] = v;
        visits_[index(q, b)] = std::max<long long>(visits_[index(q, b)], 1);
        pin_reference();
    }

    /// Smoothed update of one entry; increments its counter and re-pins the
    /// reference entry.
    void update(int q, int b, real target, real step) {
        auto& v = values_[index(q, b)];
        v = (1.0 - step) * v + step * target;
        ++visits_[index(q, b)];
        pin_reference();
    }

    void pin_reference() { values_[0] = 0.0; }

    const std::vector<real>& raw() const { return values_; }

    std::size_t index(int q, int b) const {
        if (q < 0 || q > q_max_ || b < 0 || b > b_max_)
            throw std::out_of_range("value table index out of grid");
        return static_cast<std::size_t>(q) * (b_max_ + 1) + b;
    }

private:
    int q_max_, b_max_;
    std::vector<real> values_;
    std::vector<long long> visits_;
};

/// Finite-difference gradient of the value grid at (q,b): central stencils
/// in the interior, one-sided at the grid edges.
struct ValueDerivatives {
    real d_queue = 0.0;
    real d_battery = 0.0;
};

inline ValueDerivatives value_derivatives(const PerNodeValueTable& t, int q, int b) {
    // An entry still at its zero initialization carries no information; treat
    // it like a grid edge and lean the stencil onto the visited side. Once
    // every neighbour has been visited this is exactly the central/one-sided
    // scheme.
    const auto known = [&](int qq, int bb) {
        return (qq == 0 && bb == 0) || t.visits(qq, bb) > 0;
    };
    ValueDerivatives d;
    const bool up_q = q < t.q_max() && known(q + 1, b);
    const bool down_q = q > 0 && known(q - 1, b);
    if (up_q && down_q)
        d.d_queue = 0.5 * (t.at(q + 1, b) - t.at(q - 1, b));
    else if (up_q)
        d.d_queue = t.at(q + 1, b) - t.at(q, b);
    else if (down_q)
        d.d_queue = t.at(q, b) - t.at(q - 1, b);
    const bool up_b = b < t.b_max() && known(q, b + 1);
    const bool down_b = b > 0 && known(q, b - 1);
    if (up_b && down_b)
        d.d_battery = 0.5 * (t.at(q, b + 1) - t.at(q, b - 1));
    else if (up_b)
        d.d_battery = t.at(q, b + 1) - t.at(q, b);
    else if (down_b)
        d.d_battery = t.at(q, b) - t.at(q, b - 1);
    return d;
}

}  // namespace ehsim
