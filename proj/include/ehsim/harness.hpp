#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ehsim/dual.hpp"
#include "ehsim/learner.hpp"

namespace ehsim {

struct RunSettings {
    int replications = 1;
    real warmup_fraction = 0.1;  // leading slots excluded from steady-state averages
    long long state_cap = 1'000'000;
};

struct Settings {
    EnvConfig env;
    RviOptions rvi;
    DualOptions dual;
    LearnerOptions learner;
    RunSettings run;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline real parse_real(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const real x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: invalid number for " + key + ": '" + v + "'");
    }
}

inline long long parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: invalid integer for " + key + ": '" + v + "'");
    }
}

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config: invalid boolean for " + key + ": '" + v + "'");
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    if (out.empty()) out.push_back("");
    return out;
}

inline std::vector<real> parse_real_list(const std::string& v, const std::string& key) {
    std::vector<real> out;
    for (const auto& tok : split(v, ','))
        if (!tok.empty()) out.push_back(parse_real(tok, key));
    if (out.empty()) throw std::invalid_argument("config: empty list for " + key);
    return out;
}

inline std::vector<std::vector<real>> parse_matrix(const std::string& v, const std::string& key) {
    std::vector<std::vector<real>> rows;
    for (const auto& row : split(v, ';')) {
        std::vector<real> r;
        std::stringstream ss(row);
        std::string tok;
        while (ss >> tok) r.push_back(parse_real(tok, key));
        if (!r.empty()) rows.push_back(std::move(r));
    }
    if (rows.empty()) throw std::invalid_argument("config: empty matrix for " + key);
    return rows;
}

/// `[section]` + `key = value` lines; '#' starts a comment.
inline std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open file: " + path);
    std::map<std::string, std::string> kv;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        " is not 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string full = section.empty() ? key : section + "." + key;
        if (kv.count(full)) throw std::invalid_argument("config: duplicate key " + full);
        kv[full] = value;
    }
    return kv;
}

}  // namespace detail

inline Settings default_settings() {
    Settings s;
    s.env = default_config();
    return s;
}

/// Loads and validates a run configuration. Every key is optional with the
/// defaults below; unknown keys are rejected by name.
inline Settings load_config(const std::string& path) {
    auto kv = detail::parse_kv_file(path);
    Settings s = default_settings();
    auto take = [&](const char* key) -> std::string {
        auto it = kv.find(key);
        if (it == kv.end()) return "";
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    using namespace detail;

    if (auto v = take("env.N"); !v.empty()) s.env.n_nodes = static_cast<int>(parse_int(v, "N"));
    if (auto v = take("env.Q_max"); !v.empty()) s.env.q_max = static_cast<int>(parse_int(v, "Q_max"));
    if (auto v = take("env.B_max"); !v.empty()) s.env.b_max = static_cast<int>(parse_int(v, "B_max"));
    if (auto v = take("env.tau"); !v.empty()) s.env.tau = parse_real(v, "tau");
    if (auto v = take("env.W"); !v.empty()) s.env.bandwidth = parse_real(v, "W");
    if (auto v = take("env.K"); !v.empty()) s.env.packet_bits = parse_real(v, "K");
    if (auto v = take("env.N0"); !v.empty()) s.env.noise_psd = parse_real(v, "N0");
    if (auto v = take("env.xi"); !v.empty()) s.env.xi = parse_real(v, "xi");
    if (auto v = take("env.gamma"); !v.empty()) s.env.gamma = parse_real(v, "gamma");
    if (auto v = take("env.epsilon"); !v.empty()) s.env.epsilon = parse_real(v, "epsilon");
    if (auto v = take("env.D_max"); !v.empty()) s.env.d_max = parse_real(v, "D_max");
    if (auto v = take("env.omega"); !v.empty()) s.env.omega = parse_real_list(v, "omega");
    if (auto v = take("env.gain_scale"); !v.empty()) s.env.gain_scale = parse_real(v, "gain_scale");
    if (auto v = take("env.lambda_A"); !v.empty()) {
        s.env.arrivals.lambda_a = parse_real(v, "lambda_A");
        s.env.arrivals.packet_pmf.clear();
    }
    if (auto v = take("env.lambda_E"); !v.empty()) {
        s.env.arrivals.lambda_e = parse_real(v, "lambda_E");
        s.env.arrivals.energy_pmf.clear();
    }

    if (auto v = take("channel.states"); !v.empty()) s.env.channel.states = split(v, ',');
    if (auto v = take("channel.gains"); !v.empty()) s.env.channel.gains = parse_real_list(v, "gains");
    if (auto v = take("channel.transition"); !v.empty())
        s.env.channel.transition = parse_matrix(v, "transition");

    if (auto v = take("solver.tol"); !v.empty()) s.rvi.tol = parse_real(v, "tol");
    if (auto v = take("solver.max_sweeps"); !v.empty())
        s.rvi.max_sweeps = parse_int(v, "max_sweeps");
    if (auto v = take("solver.aperiodicity"); !v.empty())
        s.rvi.aperiodicity = parse_real(v, "aperiodicity");
    if (auto v = take("solver.dual_iters"); !v.empty())
        s.dual.outer_iters = static_cast<int>(parse_int(v, "dual_iters"));
    if (auto v = take("solver.dual_step"); !v.empty()) s.dual.step_scale = parse_real(v, "dual_step");
    if (auto v = take("solver.dual_step_exponent"); !v.empty())
        s.dual.step_exponent = parse_real(v, "dual_step_exponent");

    if (auto v = take("learner.alpha_v"); !v.empty())
        s.learner.schedule.alpha_v = parse_real(v, "alpha_v");
    if (auto v = take("learner.alpha_eta"); !v.empty())
        s.learner.schedule.alpha_eta = parse_real(v, "alpha_eta");
    if (auto v = take("learner.c_v"); !v.empty()) s.learner.schedule.c_v = parse_real(v, "c_v");
    if (auto v = take("learner.c_eta"); !v.empty()) s.learner.schedule.c_eta = parse_real(v, "c_eta");
    if (auto v = take("learner.eta0"); !v.empty()) s.learner.eta0 = parse_real_list(v, "eta0");
    if (auto v = take("learner.learn_lm"); !v.empty())
        s.learner.learn_lm = parse_bool(v, "learn_lm");

    if (auto v = take("run.replications"); !v.empty())
        s.run.replications = static_cast<int>(parse_int(v, "replications"));
    if (auto v = take("run.warmup_fraction"); !v.empty())
        s.run.warmup_fraction = parse_real(v, "warmup_fraction");
    if (auto v = take("run.state_cap"); !v.empty()) s.run.state_cap = parse_int(v, "state_cap");

    if (!kv.empty()) throw std::invalid_argument("config: unknown key " + kv.begin()->first);
    if (s.run.replications < 1) throw std::invalid_argument("config: replications must be >= 1");
    if (s.run.warmup_fraction < 0.0 || s.run.warmup_fraction >= 1.0)
        throw std::invalid_argument("config: warmup_fraction must be in [0,1)");

    s.dual.rvi = s.rvi;
    s.learner.schedule.validate();
    finish_arrivals(s.env);
    s.env.validate();
    return s;
}

/// One learner replication: returns steady-state metrics (post warm-up) and
/// leaves protocol totals, multipliers, and traces with the caller.
struct SimRunResult {
    MetricAccumulator acc;
    std::vector<real> eta_final;
    SlotMessageStats messages;
    long long horizon = 0;
};

inline SimRunResult run_learner_once(const Settings& s, std::uint64_t seed, long long horizon,
                                     std::ostream* trace = nullptr) {
    OslSimulation sim(s.env, seed, s.learner);
    MetricAccumulator acc(s.env.n_nodes);
    const long long warmup = static_cast<long long>(s.run.warmup_fraction * horizon);
    if (trace) write_trace_header(*trace);
    for (long long t = 0; t < horizon; ++t) {
        const SlotRecord& rec = sim.run_slot();
        if (t >= warmup)
            for (int n = 0; n < s.env.n_nodes; ++n) acc.record(n, rec.pre[n], rec.outcomes[n]);
        if (trace) write_trace_record(*trace, rec, sim.multipliers());
    }
    return {std::move(acc), sim.multipliers(), sim.message_totals(), horizon};
}

/// Simulates a fixed full-state policy in the stochastic environment with
/// the same stream layout as the learner (paired comparisons share seeds).
inline MetricAccumulator simulate_policy(const Settings& s, const std::vector<int>& policy,
                                         const StateSpace& space, const ActionSpace& actions,
                                         std::uint64_t seed, long long horizon) {
    Environment env(s.env, seed);
    MetricAccumulator acc(s.env.n_nodes);
    const long long warmup = static_cast<long long>(s.run.warmup_fraction * horizon);
    for (long long t = 0; t < horizon; ++t) {
        const auto pre = env.states();
        const Action a = actions.decode(policy[space.full_index(pre)]);
        const auto outs = env.step(a);
        if (t >= warmup)
            for (int n = 0; n < s.env.n_nodes; ++n) acc.record(n, pre[n], outs[n]);
    }
    return acc;
}

struct CompareReport {
    int replications = 0;
    long long horizon = 0;
    real oracle_theta = 0.0;
    std::vector<real> oracle_eta;
    real oracle_drop_exact = 0.0;
    real oracle_drop_sim = 0.0;
    real oracle_delay_sim = 0.0;
    real learner_drop = 0.0;
    real learner_delay = 0.0;
    real drop_ratio = 1.0;
    real policy_agreement = 0.0;
    std::vector<real> learner_eta;

    void write(std::ostream& os) const {
        os << "replications = " << replications << '\n';
        os << "horizon = " << horizon << '\n';
        os << "oracle_theta = " << format_real(oracle_theta) << '\n';
        for (std::size_t n = 0; n < oracle_eta.size(); ++n)
            os << "oracle_eta_" << n << " = " << format_real(oracle_eta[n]) << '\n';
        os << "oracle_drop_exact = " << format_real(oracle_drop_exact) << '\n';
        os << "oracle_drop_sim = " << format_real(oracle_drop_sim) << '\n';
        os << "oracle_delay_sim = " << format_real(oracle_delay_sim) << '\n';
        os << "learner_drop = " << format_real(learner_drop) << '\n';
        os << "learner_delay = " << format_real(learner_delay) << '\n';
        os << "drop_ratio = " << format_real(drop_ratio) << '\n';
        os << "policy_agreement = " << format_real(policy_agreement) << '\n';
        for (std::size_t n = 0; n < learner_eta.size(); ++n)
            os << "learner_eta_" << n << " = " << format_real(learner_eta[n]) << '\n';
    }
};

/// Oracle-vs-learner comparison on identical seeds. Single-node only: the
/// exact oracle needs the enumerated joint state space.
inline CompareReport run_compare(const Settings& s, std::uint64_t seed, long long horizon,
                                 int replications) {
    if (s.env.n_nodes != 1)
        throw std::invalid_argument("compare: oracle comparison requires N = 1");

    const StateSpace space(s.env, s.run.state_cap);
    const ActionSpace actions(s.env.n_nodes, s.env.b_max);
    const TransitionFactors factors(s.env);
    const TransitionKernel kernel = build_kernel(s.env, space, actions, factors);
    const DualResult oracle =
        dual_solve(s.env, space, actions, kernel, LagrangeMultipliers::zeros(s.env.n_nodes), s.dual);

    CompareReport rep;
    rep.replications = replications;
    rep.horizon = horizon;
    rep.oracle_theta = oracle.theta;
    rep.oracle_eta = oracle.eta.eta;
    rep.oracle_drop_exact = oracle.eval.drop_rate[0];

    real oracle_drop = 0.0, oracle_delay = 0.0, learner_drop = 0.0, learner_delay = 0.0;
    long long agree = 0, visited = 0;
    const long long warmup = static_cast<long long>(s.run.warmup_fraction * horizon);

    for (int r = 0; r < replications; ++r) {
        const std::uint64_t rep_seed = derive_seed(seed, r);
        MetricAccumulator oracle_acc =
            simulate_policy(s, oracle.policy, space, actions, rep_seed, horizon);
        oracle_drop += oracle_acc.drop_rate(0, s.env.arrivals.lambda_a);
        oracle_delay += oracle_acc.average_delay(0);

        OslSimulation sim(s.env, rep_seed, s.learner);
        MetricAccumulator acc(1);
        for (long long t = 0; t < horizon; ++t) {
            const SlotRecord& rec = sim.run_slot();
            if (t >= warmup) {
                acc.record(0, rec.pre[0], rec.outcomes[0]);
                const int learner_action = actions.encode(rec.winner, rec.p_star[rec.winner]);
                if (learner_action == oracle.policy[space.full_index(rec.pre)]) ++agree;
                ++visited;
            }
        }
        learner_drop += acc.drop_rate(0, s.env.arrivals.lambda_a);
        learner_delay += acc.average_delay(0);
        rep.learner_eta = sim.multipliers();
    }
    rep.oracle_drop_sim = oracle_drop / replications;
    rep.oracle_delay_sim = oracle_delay / replications;
    rep.learner_drop = learner_drop / replications;
    rep.learner_delay = learner_delay / replications;
    rep.policy_agreement = visited > 0 ? static_cast<real>(agree) / visited : 0.0;
    rep.drop_ratio = (rep.learner_drop == 0.0 && rep.oracle_drop_sim == 0.0)
                         ? 1.0
                         : rep.learner_drop / rep.oracle_drop_sim;
    return rep;
}

/// Applies one sweep-variable setting to a copy of the settings.
inline Settings apply_sweep_value(const Settings& base, const std::string& var, real value) {
    Settings s = base;
    if (var == "gamma") {
        s.env.gamma = value;
    } else if (var == "lambda_A") {
        s.env.arrivals.lambda_a = value;
        s.env.arrivals.packet_pmf.clear();
    } else if (var == "lambda_E") {
        s.env.arrivals.lambda_e = value;
        s.env.arrivals.energy_pmf.clear();
    } else if (var == "N") {
        s.env.n_nodes = static_cast<int>(value);
        if (s.env.n_nodes < 1) throw std::invalid_argument("sweep: N must be >= 1");
    } else {
        throw std::invalid_argument("sweep: unknown sweep variable " + var);
    }
    finish_arrivals(s.env);
    s.env.validate();
    return s;
}

/// One learner run per (grid point, replication); CSV rows ordered by grid
/// point, then replication, then node. Rows for failed points carry nan
/// metrics so the sweep itself keeps going.
inline void run_sweep(const Settings& base, const std::string& var, const std::vector<real>& grid,
                      std::uint64_t seed, long long horizon, std::ostream& csv) {
    if (grid.empty()) throw std::invalid_argument("sweep: empty grid");
    if (var != "gamma" && var != "lambda_A" && var != "lambda_E" && var != "N")
        throw std::invalid_argument("sweep: unknown sweep variable " + var);
    csv << metrics_csv_header() << '\n';
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        for (int r = 0; r < base.run.replications; ++r) {
            const std::string run_id =
                var + "=" + format_real(grid[gi]) + ";rep=" + std::to_string(r);
            try {
                const Settings s = apply_sweep_value(base, var, grid[gi]);
                const auto res = run_learner_once(
                    s, derive_seed(seed, gi * 1000003ULL + static_cast<std::uint64_t>(r)), horizon);
                write_metrics_rows(csv, run_id, res.acc, s.env, res.eta_final);
            } catch (const std::exception&) {
                const real nan = std::numeric_limits<real>::quiet_NaN();
                const int nodes = var == "N" ? static_cast<int>(grid[gi]) : base.env.n_nodes;
                for (int n = 0; n < nodes; ++n)
                    csv << run_id << ',' << n << ",0," << format_real(nan) << ',' << format_real(nan)
                        << ',' << format_real(nan) << ',' << format_real(nan) << ','
                        << format_real(nan) << ',' << format_real(nan) << ',' << format_real(nan)
                        << '\n';
            }
        }
    }
}

}  // namespace ehsim
