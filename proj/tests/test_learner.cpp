#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "ehsim/learner.hpp"

using namespace ehsim;

namespace {

EnvConfig benchmark_config() {
    EnvConfig cfg = default_config(1.0, 1.2);
    finish_arrivals(cfg);
    cfg.validate();
    return cfg;
}

EnvConfig multi_config(int n) {
    EnvConfig cfg = default_config(0.8, 1.2);
    cfg.n_nodes = n;
    cfg.omega = std::vector<real>(n, 1.0);
    finish_arrivals(cfg);
    cfg.validate();
    return cfg;
}

}  // namespace

TEST_CASE("step size schedule") {
    StepSizeSchedule sch;
    REQUIRE_NOTHROW(sch.validate());

    SECTION("ordering constraint enforced") {
        StepSizeSchedule bad;
        bad.alpha_v = 0.95;  // >= alpha_eta
        REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = {};
        bad.alpha_v = 0.4;  // <= 0.5
        REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
    }

    SECTION("divergent sum, summable squares, vanishing timescale ratio") {
        real sum = 0.0, sum_sq = 0.0;
        for (long long t = 0; t < 1000000; ++t) {
            const real ev = sch.value_step(t);
            sum += ev;
            sum_sq += ev * ev + sch.lm_step(t) * sch.lm_step(t);
        }
        REQUIRE(sum > 100.0);    // diverging over the probed horizon
        REQUIRE(sum_sq < 10.0);  // partial sums bounded
        real prev_ratio = std::numeric_limits<real>::infinity();
        for (long long t = 0; t <= 5000000; t += 1000) {
            const real ratio = sch.lm_step(t) / sch.value_step(t);
            REQUIRE(ratio <= prev_ratio + 1e-12);
            prev_ratio = ratio;
        }
        // raw slot-indexed steps separate fully a little past 1e6 ...
        REQUIRE(sch.lm_step(5000000) / sch.value_step(5000000) < 0.01);
        // ... and the steps the update actually takes (per-entry counters lag
        // the slot count) are separated well before it
        REQUIRE(sch.lm_step(1000000) / sch.value_step(100000) < 0.01);
    }
}

TEST_CASE("single-entry update arithmetic") {
    // unit-SNR single-state channel: whole-packet rate(p) = floor(log2(1+p))
    EnvConfig cfg = benchmark_config();  // omega=lambda=1, D_max=3
    cfg.bandwidth = 1e5;                 // tau*W/K = 1
    const real unit = cfg.noise_psd * cfg.bandwidth * cfg.tau / cfg.xi;
    cfg.gain_scale = 1.0;
    cfg.channel.states = {"x"};
    cfg.channel.gains = {unit};
    cfg.channel.transition = {{1.0}};
    cfg.validate();
    REQUIRE(transmit_rate(0, 1, cfg) == 1);
    REQUIRE(transmit_rate(0, 2, cfg) == 1);

    SECTION("worked example lands at -1.5") {
        PerNodeValueTable t(cfg.q_max, cfg.b_max);
        // designated entry (1,2); one packet arrived, one unit harvested.
        // reconstructed pre-state (2,2); best one-slot move on a zero table
        // serves one packet: target = 0.5*2 - 2.5*1 + 0 - 0
        const real target = value_update_target(t, 1, 2, 1, 1, 0, 0.5, 0, 0, cfg);
        REQUIRE(target == Catch::Approx(-1.5));
        t.update(1, 2, target, 1.0);  // first visit at unit step
        REQUIRE(t.at(1, 2) == Catch::Approx(-1.5));
    }

    SECTION("zero step leaves the table unchanged") {
        PerNodeValueTable t(cfg.q_max, cfg.b_max);
        t.set(2, 2, -4.0);
        t.update(2, 2, 13.0, 0.0);
        REQUIRE(t.at(2, 2) == -4.0);
    }

    SECTION("idle is optimal when the queue is empty") {
        PerNodeValueTable t(cfg.q_max, cfg.b_max);
        // nothing arrived into an empty post state: target collapses to the
        // anchor difference, zero on a fresh table
        const real target = value_update_target(t, 0, 2, 0, 1, 0, 0.5, 0, 0, cfg);
        REQUIRE(target == Catch::Approx(0.0));
    }

    SECTION("oversized reference harvest clips and counts") {
        PerNodeValueTable t(cfg.q_max, cfg.b_max);
        long long clips = 0;
        value_update_target(t, 1, 1, 0, 0, 0, 0.1, 0, cfg.b_max + 7, cfg, &clips);
        REQUIRE(clips == 1);
    }
}

TEST_CASE("multiplier update") {
    REQUIRE(lm_update(0.5, 4, 2, 0.01, 3.0) == Catch::Approx(0.48));
    REQUIRE(lm_update(0.5, 6, 2, 0.01, 3.0) == Catch::Approx(0.5));  // zero slack
    REQUIRE(lm_update(0.01, 0, 5, 0.01, 3.0) == 0.0);                // projected at zero
}

TEST_CASE("slot protocol") {
    SECTION("single node self-schedules every slot") {
        OslSimulation sim(benchmark_config(), 3);
        for (int t = 0; t < 200; ++t) {
            const SlotRecord& rec = sim.run_slot();
            REQUIRE(rec.winner == 0);
            REQUIRE(rec.messages.bids == 1);
            REQUIRE(rec.messages.notices == 1);
            // a non-empty post-decision state designates the only node
            const bool busy = rec.post_q[0] > 0 || rec.post_b[0] > 0;
            REQUIRE((rec.rs_node == 0) == busy);
        }
    }

    SECTION("per-slot message budget holds with five nodes") {
        OslSimulation sim(multi_config(5), 17);
        for (int t = 0; t < 5000; ++t) {
            const SlotRecord& rec = sim.run_slot();
            REQUIRE(rec.messages.bids == 5);
            REQUIRE(rec.messages.notices == 1);
            REQUIRE(rec.messages.rs_flags <= 1);
            REQUIRE(rec.messages.total() <= 5 + 2 + rec.messages.empty_flags);
        }
        const auto& totals = sim.message_totals();
        REQUIRE(totals.bids == 5LL * 5000);
        REQUIRE(totals.notices == 5000);
    }

    SECTION("at most one table entry changes per slot and references stay pinned") {
        OslSimulation sim(multi_config(3), 23);
        std::vector<std::vector<real>> before;
        for (int t = 0; t < 3000; ++t) {
            before.clear();
            for (const auto& ag : sim.agents()) before.push_back(ag.table.raw());
            sim.run_slot();
            int changed = 0;
            for (std::size_t n = 0; n < before.size(); ++n) {
                const auto& after = sim.agents()[n].table.raw();
                REQUIRE(sim.agents()[n].table.at(0, 0) == 0.0);
                for (std::size_t i = 0; i < after.size(); ++i)
                    if (after[i] != before[n][i]) ++changed;
            }
            REQUIRE(changed <= 1);
        }
    }

    SECTION("intended energy respects battery and backlog every slot") {
        OslSimulation sim(multi_config(4), 29);
        for (int t = 0; t < 3000; ++t) {
            const SlotRecord& rec = sim.run_slot();
            for (int n = 0; n < 4; ++n) {
                REQUIRE(rec.p_star[n] <= rec.pre[n].b);
                REQUIRE(transmit_rate(rec.pre[n].h, rec.p_star[n], sim.config()) <= rec.pre[n].q);
            }
        }
    }

    SECTION("fixed seed reproduces the trace byte for byte") {
        std::ostringstream a, b;
        for (std::ostringstream* os : {&a, &b}) {
            OslSimulation sim(multi_config(2), 4242);
            write_trace_header(*os);
            for (int t = 0; t < 400; ++t)
                write_trace_record(*os, sim.run_slot(), sim.multipliers());
        }
        REQUIRE(a.str() == b.str());
        REQUIRE(a.str().substr(0, 52) == "t,node,h,q,b,p_star,bid,scheduled,served,eta,rs_flag");
    }
}

TEST_CASE("learning moves the multipliers only on their own timescale") {
    LearnerOptions opts;
    opts.learn_lm = false;
    opts.eta0 = {0.4};
    OslSimulation sim(benchmark_config(), 11, opts);
    for (int t = 0; t < 1000; ++t) sim.run_slot();
    REQUIRE(sim.multipliers()[0] == 0.4);

    LearnerOptions learn;
    learn.eta0 = {0.0};
    OslSimulation sim2(benchmark_config(), 11, learn);
    for (int t = 0; t < 20000; ++t) sim2.run_slot();
    REQUIRE(sim2.multipliers()[0] >= 0.0);
}

TEST_CASE("value updates quiet down as entries accumulate visits") {
    LearnerOptions opts;
    opts.learn_lm = false;
    opts.eta0 = {0.2};
    OslSimulation sim(benchmark_config(), 71, opts);

    const auto window_net = [&](int slots) {
        std::vector<real> snapshot = sim.agents()[0].table.raw();
        for (int t = 0; t < slots; ++t) sim.run_slot();
        const auto& now = sim.agents()[0].table.raw();
        real net = 0.0;
        for (std::size_t i = 0; i < now.size(); ++i)
            net = std::max(net, std::abs(now[i] - snapshot[i]));
        return net;
    };

    const real early = window_net(10000);  // the first 1e4 slots include the initial plunge
    for (int t = 0; t < 400000; ++t) sim.run_slot();
    const real late = window_net(10000);
    REQUIRE(late < 0.5 * early);
    REQUIRE(late < 1.0);
}
