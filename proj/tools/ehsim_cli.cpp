// Command-line front end: simulate | solve | compare | sweep.
//
// Exit codes: 0 success, 2 configuration error, 3 solver non-convergence.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "ehsim/harness.hpp"

namespace {

ehsim::Settings load_or_default(const std::string& path) {
    if (path.empty()) {
        ehsim::Settings s = ehsim::default_settings();
        ehsim::finish_arrivals(s.env);
        s.dual.rvi = s.rvi;
        s.env.validate();
        return s;
    }
    return ehsim::load_config(path);
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open output file: " + path);
    return out;
}

int run_simulate(const std::string& config, std::uint64_t seed, long long horizon,
                 const std::string& out_path, const std::string& trace_path) {
    const ehsim::Settings s = load_or_default(config);
    auto csv = open_out(out_path);
    csv << ehsim::metrics_csv_header() << '\n';
    std::ofstream trace;
    if (!trace_path.empty()) trace = open_out(trace_path);

    ehsim::SlotMessageStats totals;
    for (int r = 0; r < s.run.replications; ++r) {
        const auto res = ehsim::run_learner_once(s, ehsim::derive_seed(seed, r), horizon,
                                                 (!trace_path.empty() && r == 0) ? &trace : nullptr);
        ehsim::write_metrics_rows(csv, "rep=" + std::to_string(r), res.acc, s.env, res.eta_final);
        totals.bids += res.messages.bids;
        totals.notices += res.messages.notices;
        totals.empty_flags += res.messages.empty_flags;
        totals.rs_flags += res.messages.rs_flags;
    }
    std::cout << "slots: " << horizon * s.run.replications << "\n"
              << "messages: bids=" << totals.bids << " notices=" << totals.notices
              << " empty_flags=" << totals.empty_flags << " rs_flags=" << totals.rs_flags << "\n";
    return 0;
}

int run_solve(const std::string& config, const std::string& out_prefix) {
    const ehsim::Settings s = load_or_default(config);
    const ehsim::StateSpace space(s.env, s.run.state_cap);
    const ehsim::ActionSpace actions(s.env.n_nodes, s.env.b_max);
    const ehsim::TransitionFactors factors(s.env);
    const auto kernel = ehsim::build_kernel(s.env, space, actions, factors);
    const auto res = ehsim::dual_solve(s.env, space, actions, kernel,
                                       ehsim::LagrangeMultipliers::zeros(s.env.n_nodes), s.dual);

    const auto rewards = ehsim::kernel_rewards(kernel, space, actions, res.eta, s.env);
    const auto inner = ehsim::relative_value_iteration(kernel, rewards, s.rvi);

    auto values = open_out(out_prefix + ".value.csv");
    values << "state_idx,value\n";
    for (std::size_t i = 0; i < inner.value.size(); ++i)
        values << i << ',' << ehsim::format_real(inner.value[i]) << '\n';
    auto policy = open_out(out_prefix + ".policy.csv");
    policy << "state_idx,action\n";
    for (std::size_t i = 0; i < res.policy.size(); ++i) policy << i << ',' << res.policy[i] << '\n';

    std::cout << "theta: " << ehsim::format_real(res.theta) << "\n";
    for (std::size_t n = 0; n < res.eta.eta.size(); ++n)
        std::cout << "eta_" << n << ": " << ehsim::format_real(res.eta.eta[n]) << "\n";
    std::cout << "drop_rate:";
    for (ehsim::real d : res.eval.drop_rate) std::cout << ' ' << ehsim::format_real(d);
    std::cout << "\ndelay:";
    for (ehsim::real d : res.eval.delay) std::cout << ' ' << ehsim::format_real(d);
    std::cout << "\n";
    return 0;
}

int run_compare_cmd(const std::string& config, std::uint64_t seed, long long horizon,
                    const std::string& out_path) {
    ehsim::Settings s = load_or_default(config);
    const auto rep = ehsim::run_compare(s, seed, horizon, s.run.replications);
    auto out = open_out(out_path);
    rep.write(out);
    std::cout << "drop_ratio: " << ehsim::format_real(rep.drop_ratio)
              << " (learner " << ehsim::format_real(rep.learner_drop) << " vs oracle "
              << ehsim::format_real(rep.oracle_drop_sim) << ")\n";
    return 0;
}

int run_sweep_cmd(const std::string& config, std::uint64_t seed, long long horizon,
                  const std::string& var, const std::string& grid_csv,
                  const std::string& out_path) {
    const ehsim::Settings s = load_or_default(config);
    std::vector<ehsim::real> grid;
    for (const auto& tok : ehsim::detail::split(grid_csv, ','))
        if (!tok.empty()) grid.push_back(ehsim::detail::parse_real(tok, "sweep-grid"));
    auto out = open_out(out_path);
    ehsim::run_sweep(s, var, grid, seed, horizon, out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Energy-harvesting sensor network scheduling: simulator and solvers"};
    app.require_subcommand(1);

    std::string config, out = "out.csv", trace, sweep_var, sweep_grid;
    std::uint64_t seed = 1;
    long long horizon = 1000000;

    auto* sim = app.add_subcommand("simulate", "Run the online-learning controller");
    sim->add_option("--config", config, "configuration file");
    sim->add_option("--seed", seed, "master seed");
    sim->add_option("--horizon", horizon, "slots per replication");
    sim->add_option("--out", out, "metrics CSV path");
    sim->add_option("--trace", trace, "per-slot trace path (first replication)");

    auto* solve = app.add_subcommand("solve", "Solve the exact constrained control problem");
    solve->add_option("--config", config, "configuration file");
    solve->add_option("--out", out, "output prefix for .value.csv/.policy.csv");

    auto* cmp = app.add_subcommand("compare", "Learner vs exact solver on identical seeds");
    cmp->add_option("--config", config, "configuration file");
    cmp->add_option("--seed", seed, "master seed");
    cmp->add_option("--horizon", horizon, "slots per replication");
    cmp->add_option("--out", out, "report path");

    auto* sweep = app.add_subcommand("sweep", "Parameter sweep over learner runs");
    sweep->add_option("--config", config, "configuration file");
    sweep->add_option("--seed", seed, "master seed");
    sweep->add_option("--horizon", horizon, "slots per grid point");
    sweep->add_option("--sweep-var", sweep_var, "gamma | lambda_A | lambda_E | N")->required();
    sweep->add_option("--sweep-grid", sweep_grid, "comma-separated values")->required();
    sweep->add_option("--out", out, "metrics CSV path");

    try {
        app.parse(argc, argv);
        if (sim->parsed()) return run_simulate(config, seed, horizon, out, trace);
        if (solve->parsed()) return run_solve(config, out);
        if (cmp->parsed()) return run_compare_cmd(config, seed, horizon, out);
        if (sweep->parsed()) return run_sweep_cmd(config, seed, horizon, sweep_var, sweep_grid, out);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ehsim::NonConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ehsim::StateSpaceCapError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
