// cmdpx: run learning experiments, solve instances exactly, emit instances.

#include "cmdpx/envs.hpp"
#include "cmdpx/errors.hpp"
#include "cmdpx/harness.hpp"
#include "cmdpx/planner.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitReplicaFailure = 3;

struct RunOptions {
    std::string config_path;
    std::string instance_path;
    std::optional<std::string> algorithm;
    std::optional<std::size_t> episodes;
    std::optional<double> delta;
    std::optional<std::string> rho;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replicas;
    std::optional<std::size_t> threads;
    std::optional<std::string> out;
};

cmdpx::ExperimentConfig resolve_config(const RunOptions& opts) {
    cmdpx::ExperimentConfig config;
    if (!opts.config_path.empty()) config = cmdpx::load_config(opts.config_path);
    if (!opts.instance_path.empty()) config.instance = cmdpx::InstanceFile{opts.instance_path};
    if (opts.algorithm) {
        auto algorithm = cmdpx::parse_algorithm(*opts.algorithm);
        if (!algorithm) throw cmdpx::ConfigError("unknown algorithm '" + *opts.algorithm + "'");
        config.algorithm = *algorithm;
    }
    if (opts.episodes) config.episodes = *opts.episodes;
    if (opts.delta) config.delta = *opts.delta;
    if (opts.rho) {
        if (*opts.rho == "oracle") {
            config.rho.reset();
        } else {
            try {
                std::size_t used = 0;
                config.rho = std::stod(*opts.rho, &used);
                if (used != opts.rho->size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                throw cmdpx::ConfigError("--rho expects a number or 'oracle'");
            }
        }
    }
    if (opts.seed) config.seed = *opts.seed;
    if (opts.replicas) config.replicas = *opts.replicas;
    if (opts.threads) config.threads = *opts.threads;
    if (opts.out) config.out_dir = *opts.out;
    config.validate();
    return config;
}

int run_command(const RunOptions& opts) {
    const cmdpx::ExperimentConfig config = resolve_config(opts);
    const cmdpx::ExperimentResults results = cmdpx::run_experiment(config);
    cmdpx::write_outputs(config, results);
    for (const auto& replica : results.replicas) {
        if (replica.failure) {
            std::cerr << "replica " << replica.replica << " failed at episode "
                      << replica.failed_episode << ": " << *replica.failure << '\n';
        }
    }
    std::cout << "wrote " << (config.out_dir / "regret.csv").string() << '\n';
    return results.any_failure() ? kExitReplicaFailure : 0;
}

int plan_command(const std::string& instance_path, const std::string& dump_path) {
    const cmdpx::Cmdp cmdp = cmdpx::load_cmdp(instance_path);
    if (!dump_path.empty()) {
        std::ofstream out(dump_path);
        cmdpx::lp::dump(cmdpx::build_occupancy_lp(cmdp.transitions, cmdp.mean_costs,
                                                  cmdp.constraint_costs, cmdp.thresholds,
                                                  cmdp.initial_dist),
                        out);
    }
    const cmdpx::PlanResult plan = cmdpx::solve_cmdp_exact(cmdp);
    nlohmann::json policy = nlohmann::json::array();
    for (std::size_t h = 0; h < cmdp.horizon; ++h) {
        nlohmann::json layer = nlohmann::json::array();
        for (std::size_t s = 0; s < cmdp.num_states; ++s) {
            auto row = plan.policy.row(h, s);
            layer.push_back(std::vector<double>(row.begin(), row.end()));
        }
        policy.push_back(std::move(layer));
    }
    nlohmann::json out{{"optimal_value", plan.optimistic_value},
                       {"constraint_values", plan.constraint_values},
                       {"thresholds", cmdp.thresholds},
                       {"policy", std::move(policy)}};
    std::cout << out.dump(2) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exploration-exploitation experiments for finite-horizon constrained MDPs"};
    app.require_subcommand(1);

    RunOptions run_opts;
    auto* run = app.add_subcommand("run", "run a learning experiment and write regret curves");
    run->add_option("--config", run_opts.config_path, "experiment config (JSON)");
    run->add_option("--instance", run_opts.instance_path, "instance file, overrides the config");
    run->add_option("--algo", run_opts.algorithm,
                    "optcmdp | optcmdp-bonus | optdual | optprimaldual");
    run->add_option("--episodes", run_opts.episodes, "number of episodes K");
    run->add_option("--delta", run_opts.delta, "confidence parameter");
    run->add_option("--rho", run_opts.rho, "Slater ratio, or 'oracle'");
    run->add_option("--seed", run_opts.seed, "sampling seed");
    run->add_option("--replicas", run_opts.replicas, "independent replicas");
    run->add_option("--threads", run_opts.threads, "worker threads for replicas");
    run->add_option("--out", run_opts.out, "output directory");

    std::string plan_instance, plan_dump;
    auto* plan = app.add_subcommand("plan", "solve an instance exactly with the CMDP LP");
    plan->add_option("--instance", plan_instance, "instance file")->required();
    plan->add_option("--dump-lp", plan_dump, "write the LP in row format to this file");

    std::string gen_kind = "random", gen_out;
    cmdpx::RandomCmdpParams random_params;
    cmdpx::HazardChainParams hazard_params;
    std::optional<double> margin;
    auto* gen = app.add_subcommand("gen", "emit an instance document");
    gen->add_option("--kind", gen_kind, "random | hazard_chain")
        ->check(CLI::IsMember({"random", "hazard_chain"}));
    gen->add_option("--states", random_params.states);
    gen->add_option("--actions", random_params.actions);
    gen->add_option("--horizon", random_params.horizon);
    gen->add_option("--constraints", random_params.constraints);
    gen->add_option("--branching", random_params.branching);
    gen->add_option("--slater-margin", margin);
    gen->add_option("--seed", random_params.seed);
    gen->add_option("--length", hazard_params.length, "hazard chain length");
    gen->add_option("--hazard-cost", hazard_params.hazard_cost, "hazard chain constraint cost");
    gen->add_option("--out", gen_out, "output file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfigError;
    }

    try {
        if (*run) return run_command(run_opts);
        if (*plan) return plan_command(plan_instance, plan_dump);
        if (*gen) {
            cmdpx::Cmdp cmdp;
            if (gen_kind == "random") {
                random_params.slater_margin = margin;
                cmdp = cmdpx::random_cmdp(random_params);
            } else {
                if (gen->count("--horizon") > 0) hazard_params.horizon = random_params.horizon;
                cmdp = cmdpx::hazard_chain(hazard_params);
            }
            if (gen_out.empty()) std::cout << cmdpx::cmdp_to_json(cmdp).dump(1) << '\n';
            else cmdpx::save_cmdp(cmdp, gen_out);
            return 0;
        }
    } catch (const cmdpx::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const cmdpx::StructuralError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const cmdpx::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
