#include <catch2/catch_amalgamated.hpp>

#include <deque>
#include <sstream>

#include "ehsim/harness.hpp"
#include "ehsim/metrics.hpp"

using namespace ehsim;

namespace {

MetricAccumulator accumulate_served(const std::vector<int>& served_per_slot, int queue_len) {
    MetricAccumulator acc(1);
    for (int sv : served_per_slot) {
        NodeState pre{0, queue_len, 0};
        SlotOutcome out;
        out.served = sv;
        acc.record(0, pre, out);
    }
    return acc;
}

}  // namespace

TEST_CASE("throughput estimator") {
    SECTION("constant service") {
        auto acc = accumulate_served(std::vector<int>(10, 2), 2);
        REQUIRE(acc.throughput(0) == Catch::Approx(2.0));
    }
    SECTION("no transmissions") {
        auto acc = accumulate_served(std::vector<int>(10, 0), 0);
        REQUIRE(acc.throughput(0) == 0.0);
    }
    SECTION("hand-built trace") {
        auto acc = accumulate_served({1, 0, 3, 2, 0}, 3);
        REQUIRE(acc.throughput(0) == Catch::Approx(1.2));
    }
    SECTION("zero slots rejected") {
        MetricAccumulator acc(1);
        REQUIRE_THROWS_AS(acc.throughput(0), std::invalid_argument);
    }
}

TEST_CASE("drop rate estimator") {
    auto acc = accumulate_served(std::vector<int>(10, 2), 2);
    SECTION("throughput equal to arrival rate") { REQUIRE(acc.drop_rate(0, 2.0) == 0.0); }
    SECTION("zero throughput") {
        auto idle = accumulate_served(std::vector<int>(10, 0), 0);
        REQUIRE(idle.drop_rate(0, 1.0) == 1.0);
    }
    SECTION("partial throughput") {
        auto acc2 = accumulate_served({1, 1, 1, 1, 0}, 1);  // throughput 0.8
        REQUIRE(acc2.drop_rate(0, 1.0) == Catch::Approx(0.2));
    }
    SECTION("nonpositive arrival rate rejected") {
        REQUIRE_THROWS_AS(acc.drop_rate(0, 0.0), std::invalid_argument);
    }
}

TEST_CASE("loss rate formula") {
    SECTION("error-free channel") { REQUIRE(loss_rate(0.2, 0.0, 1e5) == Catch::Approx(0.2)); }
    SECTION("full drop dominates") { REQUIRE(loss_rate(1.0, 0.5, 10) == Catch::Approx(1.0)); }
    SECTION("benchmark BER saturates at full packet length") {
        // (1-1e-3)^1e5 ~ 3.5e-44: the channel term alone drives loss to ~1
        REQUIRE(loss_rate(0.0, 1e-3, 1e5) == Catch::Approx(1.0).margin(1e-40));
        REQUIRE(std::pow(1.0 - 1e-3, 1e5) == Catch::Approx(3.5e-44).epsilon(0.05));
    }
}

TEST_CASE("delay estimator") {
    SECTION("constant queue and service") {
        auto acc = accumulate_served(std::vector<int>(10, 1), 2);
        REQUIRE(acc.average_delay(0) == Catch::Approx(2.0));
    }
    SECTION("always empty") {
        auto acc = accumulate_served(std::vector<int>(10, 0), 0);
        REQUIRE(std::isinf(acc.average_delay(0)));
        REQUIRE(acc.avg_queue(0) == 0.0);
    }
    SECTION("ratio of time averages") {
        MetricAccumulator acc(1);
        for (int t = 0; t < 10; ++t) {
            NodeState pre{0, (t % 2) ? 4 : 3, 0};  // mean queue 3.5
            SlotOutcome out;
            out.served = (t < 7) ? 1 : 0;  // throughput 0.7
            acc.record(0, pre, out);
        }
        REQUIRE(acc.average_delay(0) == Catch::Approx(5.0));
    }
}

TEST_CASE("drop estimators agree and packets are conserved over a long run") {
    Settings s = default_settings();
    finish_arrivals(s.env);
    s.env.validate();
    Environment env(s.env, 99);
    MetricAccumulator acc(1);
    long long initial_q = env.states()[0].q;
    const long long slots = 1000000;
    for (long long t = 0; t < slots; ++t) {
        const NodeState pre = env.states()[0];
        const int p = pre.q > 0 ? pre.b : 0;  // drain greedily whenever backlogged
        const auto outs = env.step(Action::single(1, 0, p));
        acc.record(0, pre, outs[0]);
    }
    const long long final_q = env.states()[0].q;

    // exact conservation on the finite trace
    REQUIRE(acc.arrivals(0) ==
            acc.served(0) + acc.dropped_sensing(0) + acc.dropped_overflow(0) + (final_q - initial_q));

    // ratio estimator vs direct counting
    const real d_ratio = acc.drop_rate(0, s.env.arrivals.lambda_a);
    const real d_count = acc.drop_rate_counted(0);
    REQUIRE(std::abs(d_ratio - d_count) < 0.01);
}

TEST_CASE("weighted loss objective matches the average-cost form when BER is zero") {
    auto acc = accumulate_served({1, 0, 3, 2, 0}, 3);
    const real lambda = 2.0, omega = 0.7;
    const real loss_sum = omega * loss_rate(acc.drop_rate(0, lambda), 0.0, 1e5);
    const real reward_form = (omega / lambda) * (lambda - acc.throughput(0));
    REQUIRE(loss_sum == Catch::Approx(reward_form).margin(1e-12));
}

TEST_CASE("little's law estimator tracks tagged packet sojourns") {
    Settings s = default_settings();
    finish_arrivals(s.env);
    s.env.validate();
    Environment env(s.env, 7);
    MetricAccumulator acc(1);

    std::deque<long long> fifo;  // entry slot per queued packet
    long long sojourn_sum = 0, exits = 0;
    const long long slots = 1000000;
    for (long long t = 0; t < slots; ++t) {
        const NodeState pre = env.states()[0];
        const int p = pre.q > 0 ? pre.b : 0;
        const auto outs = env.step(Action::single(1, 0, p));
        acc.record(0, pre, outs[0]);
        for (int k = 0; k < outs[0].served; ++k) {
            sojourn_sum += t - fifo.front();
            fifo.pop_front();
            ++exits;
        }
        const int entered = outs[0].sensed - outs[0].dropped_overflow;
        for (int k = 0; k < entered; ++k) fifo.push_back(t);
    }
    REQUIRE(exits > 0);
    const real tagged = static_cast<real>(sojourn_sum) / static_cast<real>(exits);
    const real littles = acc.average_delay(0);
    REQUIRE(littles == Catch::Approx(tagged).epsilon(0.05));
}

TEST_CASE("metrics CSV rows are deterministic and carry the pinned header") {
    REQUIRE(std::string(metrics_csv_header()) ==
            "run_id,n,slots,throughput,drop_rate,loss_rate,avg_delay,avg_queue,avg_battery,lm_eta");
    Settings s = default_settings();
    finish_arrivals(s.env);
    auto acc = accumulate_served({1, 0, 3, 2, 0}, 3);
    std::ostringstream a, b;
    write_metrics_rows(a, "rep=0", acc, s.env, {0.25});
    write_metrics_rows(b, "rep=0", acc, s.env, {0.25});
    REQUIRE(a.str() == b.str());
    REQUIRE(a.str().substr(0, 6) == "rep=0,");
}
