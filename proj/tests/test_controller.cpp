#include <catch2/catch_amalgamated.hpp>

#include "ehsim/controller.hpp"
#include "ehsim/rng.hpp"

using namespace ehsim;

namespace {

EnvConfig benchmark_config() {
    EnvConfig cfg = default_config(1.0, 1.2);
    finish_arrivals(cfg);
    cfg.validate();
    return cfg;
}

/// Brute-force argmax of the linearized per-slot gain over the admissible
/// energy grid (battery cap plus the never-overshoot-the-queue cap), ties to
/// the lowest energy. Independent of the closed-form path.
int grid_oracle_power(const NodeState& s, const PerNodeValueTable& table, real eta,
                      const EnvConfig& cfg) {
    const ValueDerivatives d = value_derivatives(table, s.q, s.b);
    const real price = queue_price(eta, 0, cfg);
    int best = 0;
    real best_v = bid_value(s, 0.0, price, d.d_queue, d.d_battery, cfg);
    for (int p = 1; p <= s.b; ++p) {
        // the backlog cap of the per-node subproblem, on the continuous rate
        if (transmit_rate_continuous(s.h, static_cast<real>(p), cfg) > s.q + 1e-9) break;
        const real v = bid_value(s, static_cast<real>(p), price, d.d_queue, d.d_battery, cfg);
        if (v > best_v + 1e-12) {
            best_v = v;
            best = p;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("value table derivatives") {
    PerNodeValueTable t(5, 10);

    SECTION("zero table has zero derivatives") {
        for (int q = 0; q <= 5; ++q)
            for (int b = 0; b <= 10; ++b) {
                const auto d = value_derivatives(t, q, b);
                REQUIRE(d.d_queue == 0.0);
                REQUIRE(d.d_battery == 0.0);
            }
    }

    SECTION("linear-in-queue table") {
        for (int q = 0; q <= 5; ++q)
            for (int b = 0; b <= 10; ++b) t.set(q, b, static_cast<real>(q));
        // reference pinning keeps (0,0) at zero, so probe away from it
        const auto d = value_derivatives(t, 2, 3);
        REQUIRE(d.d_queue == Catch::Approx(1.0));
        REQUIRE(d.d_battery == Catch::Approx(0.0));
    }

    SECTION("one-sided stencil at the queue boundary") {
        t.set(1, 3, 3.0);
        const auto d = value_derivatives(t, 0, 3);
        REQUIRE(d.d_queue == Catch::Approx(3.0));
        const auto dmax = value_derivatives(t, 5, 3);
        REQUIRE(dmax.d_queue == Catch::Approx(t.at(5, 3) - t.at(4, 3)));
    }
}

TEST_CASE("table reference entry stays pinned") {
    PerNodeValueTable t(2, 2);
    t.update(1, 1, -3.0, 1.0);
    REQUIRE(t.at(0, 0) == 0.0);
    REQUIRE(t.at(1, 1) == -3.0);
    REQUIRE(t.visits(1, 1) == 1);
    t.set(2, 2, 5.0);
    REQUIRE(t.at(0, 0) == 0.0);
}

TEST_CASE("transmission energy choice") {
    const EnvConfig cfg = benchmark_config();

    SECTION("empty queue sends nothing") {
        PerNodeValueTable t(cfg.q_max, cfg.b_max);
        const auto pd = optimal_power(NodeState{2, 0, 9}, 0, t, 0.4, cfg);
        REQUIRE(pd.p == 0);
    }

    SECTION("flat table falls back to grid search and drains greedily") {
        PerNodeValueTable t(cfg.q_max, cfg.b_max);
        const NodeState s{2, 3, 8};
        const auto pd = optimal_power(s, 0, t, 0.0, cfg);
        REQUIRE(pd.waterfill_degenerate);
        REQUIRE(pd.p == grid_oracle_power(s, t, 0.0, cfg));
    }

    SECTION("closed form with rounding matches the grid oracle on random tables") {
        RngStream rng(2024);
        int checked = 0;
        while (checked < 100) {
            PerNodeValueTable t(cfg.q_max, cfg.b_max);
            const real qa = rng.uniform01() * 4.0 - 1.0;   // queue slope, may be negative
            const real bc = rng.uniform01() * 3.0 + 0.05;  // battery slope magnitude
            for (int q = 0; q <= cfg.q_max; ++q)
                for (int b = 0; b <= cfg.b_max; ++b)
                    t.set(q, b, qa * q - bc * b + 0.3 * (rng.uniform01() - 0.5));
            const NodeState s{static_cast<int>(rng.next_u64() % 3),
                              static_cast<int>(rng.next_u64() % (cfg.q_max + 1)),
                              static_cast<int>(rng.next_u64() % (cfg.b_max + 1))};
            const auto d = value_derivatives(t, s.q, s.b);
            if (d.d_battery >= -1e-6) continue;  // exercise the closed-form branch only
            const real eta = rng.uniform01();
            const auto pd = optimal_power(s, 0, t, eta, cfg);
            REQUIRE_FALSE(pd.waterfill_degenerate);
            REQUIRE(pd.p == grid_oracle_power(s, t, eta, cfg));
            ++checked;
        }
    }

    SECTION("never overshoots battery or backlog") {
        RngStream rng(5);
        for (int i = 0; i < 500; ++i) {
            PerNodeValueTable t(cfg.q_max, cfg.b_max);
            for (int q = 0; q <= cfg.q_max; ++q)
                for (int b = 0; b <= cfg.b_max; ++b)
                    t.set(q, b, 4.0 * (rng.uniform01() - 0.5) * q - 2.0 * rng.uniform01() * b);
            const NodeState s{static_cast<int>(rng.next_u64() % 3),
                              static_cast<int>(rng.next_u64() % (cfg.q_max + 1)),
                              static_cast<int>(rng.next_u64() % (cfg.b_max + 1))};
            const auto pd = optimal_power(s, 0, t, rng.uniform01(), cfg);
            REQUIRE(pd.p >= 0);
            REQUIRE(pd.p <= s.b);
            REQUIRE(transmit_rate(s.h, pd.p, cfg) <= s.q);
            REQUIRE(transmit_rate_continuous(s.h, static_cast<real>(pd.p), cfg) <= s.q + 1e-9);
        }
    }
}

TEST_CASE("bids") {
    const EnvConfig cfg = benchmark_config();
    PerNodeValueTable t(cfg.q_max, cfg.b_max);

    SECTION("no transmission bids zero") {
        REQUIRE(compute_bid(NodeState{1, 4, 6}, 0, t, 0.7, 0, cfg) == 0.0);
    }

    SECTION("flat table bid equals the weighted rate") {
        const NodeState s{2, 5, 9};
        const real bid = compute_bid(s, 0, t, 0.0, 3, cfg);
        REQUIRE(bid == Catch::Approx(transmit_rate_continuous(2, 3.0, cfg)));
    }

    SECTION("common positive scaling preserves the winner and the energy") {
        EnvConfig scaled = cfg;
        const real c = 3.7;
        for (real& w : scaled.omega) w *= c;
        RngStream rng(31);
        for (int trial = 0; trial < 50; ++trial) {
            PerNodeValueTable ta(cfg.q_max, cfg.b_max), tb(cfg.q_max, cfg.b_max);
            for (int q = 0; q <= cfg.q_max; ++q)
                for (int b = 0; b <= cfg.b_max; ++b) {
                    const real v = 3.0 * (rng.uniform01() - 0.3) * q - 2.5 * rng.uniform01() * b;
                    ta.set(q, b, v);
                    tb.set(q, b, c * v);
                }
            const real eta = rng.uniform01();
            std::vector<real> bids_a, bids_b;
            for (int n = 0; n < 3; ++n) {
                const NodeState s{static_cast<int>(rng.next_u64() % 3),
                                  static_cast<int>(1 + rng.next_u64() % cfg.q_max),
                                  static_cast<int>(rng.next_u64() % (cfg.b_max + 1))};
                const int pa = optimal_power(s, 0, ta, eta, cfg).p;
                const int pb = optimal_power(s, 0, tb, c * eta, scaled).p;
                REQUIRE(pa == pb);
                bids_a.push_back(compute_bid(s, 0, ta, eta, pa, cfg));
                bids_b.push_back(compute_bid(s, 0, tb, c * eta, pb, scaled));
                REQUIRE(bids_b.back() == Catch::Approx(c * bids_a.back()).margin(1e-9));
            }
            REQUIRE(fc_schedule(bids_a) == fc_schedule(bids_b));
        }
    }
}

TEST_CASE("auction winner selection") {
    REQUIRE(fc_schedule({1.0, 3.0, 2.0}) == 1);
    REQUIRE(fc_schedule({2.0, 2.0, 2.0}) == 0);
    REQUIRE(fc_schedule({0.0, 0.0, 0.0}) == 0);
    REQUIRE(fc_schedule({-1.0, -0.5, -2.0}) == 1);
}

TEST_CASE("representative-state designation from the bitmap") {
    FcState fc(3);

    SECTION("exactly one busy node is designated") {
        fc.node_empty = {false, true, true};
        REQUIRE(fc_representative_check(fc).value() == 0);
    }
    SECTION("all empty is the reference state") {
        fc.node_empty = {true, true, true};
        REQUIRE_FALSE(fc_representative_check(fc).has_value());
    }
    SECTION("two busy nodes designate nothing") {
        fc.node_empty = {false, false, true};
        REQUIRE_FALSE(fc_representative_check(fc).has_value());
    }
}
