#include "cmdpx/harness.hpp"

#include "cmdpx/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <thread>

namespace cmdpx {

Cmdp build_instance(const InstanceSource& source) {
    struct Visitor {
        Cmdp operator()(const RandomCmdpParams& p) const { return random_cmdp(p); }
        Cmdp operator()(const HazardChainParams& p) const { return hazard_chain(p); }
        Cmdp operator()(const InstanceFile& f) const { return load_cmdp(f.path); }
    };
    return std::visit(Visitor{}, source);
}

void ExperimentConfig::validate() const {
    if (episodes == 0) throw ConfigError("episodes must be at least 1");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
    if (replicas == 0) throw ConfigError("replicas must be at least 1");
    if (threads == 0) throw ConfigError("threads must be at least 1");
    if (rho && !(*rho > 0.0 && std::isfinite(*rho)))
        throw ConfigError("rho must be a finite positive number");
    if (out_dir.empty()) throw ConfigError("output directory must be set");
}

namespace {

template <typename T>
T field_or(const nlohmann::json& doc, const char* key, T fallback) {
    if (!doc.contains(key)) return fallback;
    return doc.at(key).get<T>();
}

InstanceSource instance_from_json(const nlohmann::json& doc, const std::filesystem::path& base) {
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "random") {
        RandomCmdpParams p;
        p.states = field_or(doc, "states", p.states);
        p.actions = field_or(doc, "actions", p.actions);
        p.horizon = field_or(doc, "horizon", p.horizon);
        p.constraints = field_or(doc, "constraints", p.constraints);
        p.branching = field_or(doc, "branching", p.branching);
        if (doc.contains("slater_margin")) p.slater_margin = doc.at("slater_margin").get<double>();
        p.seed = field_or(doc, "seed", p.seed);
        return p;
    }
    if (kind == "hazard_chain") {
        HazardChainParams p;
        p.length = field_or(doc, "length", p.length);
        p.horizon = field_or(doc, "horizon", p.horizon);
        p.hazard_cost = field_or(doc, "hazard_cost", p.hazard_cost);
        return p;
    }
    if (kind == "file") {
        std::filesystem::path path = doc.at("path").get<std::string>();
        if (path.is_relative() && !base.empty()) path = base / path;
        return InstanceFile{path};
    }
    throw ConfigError("unknown instance kind '" + kind + "'");
}

nlohmann::json instance_to_json(const InstanceSource& source) {
    struct Visitor {
        nlohmann::json operator()(const RandomCmdpParams& p) const {
            nlohmann::json out{{"kind", "random"},       {"states", p.states},
                               {"actions", p.actions},   {"horizon", p.horizon},
                               {"constraints", p.constraints}, {"branching", p.branching},
                               {"seed", p.seed}};
            if (p.slater_margin) out["slater_margin"] = *p.slater_margin;
            return out;
        }
        nlohmann::json operator()(const HazardChainParams& p) const {
            return {{"kind", "hazard_chain"}, {"length", p.length}, {"horizon", p.horizon},
                    {"hazard_cost", p.hazard_cost}};
        }
        nlohmann::json operator()(const InstanceFile& f) const {
            return {{"kind", "file"}, {"path", f.path.string()}};
        }
    };
    return std::visit(Visitor{}, source);
}

std::string format_real(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.12g", value);
    return buffer;
}

} // namespace

ExperimentConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
    try {
        ExperimentConfig config;
        if (doc.contains("instance")) config.instance = instance_from_json(doc.at("instance"), base_dir);
        if (doc.contains("algorithm")) {
            const auto name = doc.at("algorithm").get<std::string>();
            auto algorithm = parse_algorithm(name);
            if (!algorithm) throw ConfigError("unknown algorithm '" + name + "'");
            config.algorithm = *algorithm;
        }
        config.episodes = field_or(doc, "episodes", config.episodes);
        config.delta = field_or(doc, "delta", config.delta);
        if (doc.contains("rho")) {
            const auto& rho = doc.at("rho");
            if (rho.is_string()) {
                if (rho.get<std::string>() != "oracle")
                    throw ConfigError("rho must be a number or \"oracle\"");
                config.rho.reset();
            } else {
                config.rho = rho.get<double>();
            }
        }
        config.seed = field_or(doc, "seed", config.seed);
        config.replicas = field_or(doc, "replicas", config.replicas);
        config.threads = field_or(doc, "threads", config.threads);
        if (doc.contains("out")) config.out_dir = doc.at("out").get<std::string>();
        return config;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
}

nlohmann::json config_to_json(const ExperimentConfig& config) {
    nlohmann::json out{{"instance", instance_to_json(config.instance)},
                       {"algorithm", std::string(to_string(config.algorithm))},
                       {"episodes", config.episodes},
                       {"delta", config.delta},
                       {"seed", config.seed},
                       {"replicas", config.replicas},
                       {"threads", config.threads},
                       {"out", config.out_dir.string()}};
    if (config.rho) out["rho"] = *config.rho;
    else out["rho"] = "oracle";
    return out;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
    }
    return config_from_json(doc, path.parent_path());
}

RegretLedger::RegretLedger(double optimal_value, std::vector<double> thresholds)
    : optimal_value_(optimal_value), thresholds_(std::move(thresholds)),
      reg_plus_d_(thresholds_.size(), 0.0), reg_d_(thresholds_.size(), 0.0),
      values_d_(thresholds_.size()) {}

void RegretLedger::update(double value_c, std::span<const double> value_d) {
    if (value_d.size() != thresholds_.size())
        throw StructuralError("one constraint value per threshold is required");
    const double gap = value_c - optimal_value_;
    reg_plus_c_ += std::max(gap, 0.0);
    reg_c_ += gap;
    values_c_.push_back(value_c);
    for (std::size_t i = 0; i < thresholds_.size(); ++i) {
        const double violation = value_d[i] - thresholds_[i];
        reg_plus_d_[i] += std::max(violation, 0.0);
        reg_d_[i] += violation;
        values_d_[i].push_back(value_d[i]);
    }
}

double RegretLedger::reg_plus_d() const {
    return reg_plus_d_.empty() ? 0.0 : *std::max_element(reg_plus_d_.begin(), reg_plus_d_.end());
}

double RegretLedger::reg_d() const {
    return reg_d_.empty() ? 0.0 : *std::max_element(reg_d_.begin(), reg_d_.end());
}

bool ExperimentResults::any_failure() const {
    return std::any_of(replicas.begin(), replicas.end(),
                       [](const ReplicaResult& r) { return r.failure.has_value(); });
}

std::unique_ptr<Learner> default_learner(const Cmdp& cmdp, const LearnerConfig& config) {
    return make_learner(config, ProblemInfo::from(cmdp));
}

ReplicaResult run_replica(const Cmdp& cmdp, double optimal_value, const LearnerConfig& learner_config,
                          std::uint64_t seed, std::size_t replica, const LearnerFactory& factory) {
    ReplicaResult result;
    result.replica = replica;
    std::unique_ptr<Learner> learner = factory(cmdp, learner_config);
    RegretLedger ledger(optimal_value, cmdp.thresholds);
    const std::size_t I = cmdp.num_constraints();
    result.episodes.reserve(learner_config.total_episodes);

    for (std::size_t k = 1; k <= learner_config.total_episodes; ++k) {
        EpisodePlan plan;
        try {
            plan = learner->plan_episode();
        } catch (const Error& e) {
            result.failure = e.what();
            result.failed_episode = k;
            return result;
        }
        EpisodeRecord record;
        record.episode = k;
        record.value_c =
            policy_value(cmdp.mean_costs, cmdp.transitions, plan.policy).initial_value(cmdp.initial_dist);
        record.value_d.resize(I);
        for (std::size_t i = 0; i < I; ++i)
            record.value_d[i] = policy_value(cmdp.constraint_costs[i], cmdp.transitions, plan.policy)
                                    .initial_value(cmdp.initial_dist);
        ledger.update(record.value_c, record.value_d);
        record.opt_value = optimal_value;
        record.reg_plus_c = ledger.reg_plus_c();
        record.reg_c = ledger.reg_c();
        record.reg_plus_d = ledger.reg_plus_d();
        record.reg_d = ledger.reg_d();
        record.lambdas = plan.diagnostics.lambdas;
        record.planned_value = plan.diagnostics.optimistic_value;
        result.episodes.push_back(std::move(record));

        Rng rng(episode_seed(seed, replica, k));
        learner->observe(sample_trajectory(cmdp, plan.policy, rng));
    }
    return result;
}

ExperimentResults run_experiment(const ExperimentConfig& config, const LearnerFactory& factory) {
    config.validate();
    const Cmdp cmdp = build_instance(config.instance);
    ExperimentResults results;
    results.num_constraints = cmdp.num_constraints();
    results.replicas.resize(config.replicas);
    for (std::size_t r = 0; r < config.replicas; ++r) results.replicas[r].replica = r;

    auto fail_all = [&results](const std::string& why) {
        for (ReplicaResult& r : results.replicas) {
            r.failure = why;
            r.failed_episode = 0;
        }
        return results;
    };
    try {
        results.optimal_value = solve_cmdp_exact(cmdp).optimistic_value;
    } catch (const CmdpInfeasible& e) {
        return fail_all(e.what());
    }

    LearnerConfig learner{config.algorithm, config.episodes, config.delta, 0.0};
    if (config.rho) {
        results.rho = config.rho;
    } else if (is_dual(config.algorithm)) {
        try {
            results.rho = true_rho(cmdp);
        } catch (const NoSlaterPoint& e) {
            return fail_all(e.what());
        }
    }
    if (results.rho) learner.rho = *results.rho;
    if (is_dual(config.algorithm) && !(learner.rho > 0.0))
        return fail_all("Slater ratio is zero; dual algorithms need rho > 0");

    const std::size_t workers = std::min(config.threads, config.replicas);
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (std::size_t r = next++; r < config.replicas; r = next++)
            results.replicas[r] =
                run_replica(cmdp, results.optimal_value, learner, config.seed, r, factory);
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
    }
    return results;
}

void write_csv(const ExperimentResults& results, std::ostream& out) {
    const std::size_t I = results.num_constraints;
    out << "replica,episode,value_c";
    for (std::size_t i = 1; i <= I; ++i) out << ",value_d_" << i;
    out << ",opt_value,reg_plus_c,reg_c,reg_plus_d,reg_d";
    for (std::size_t i = 1; i <= I; ++i) out << ",lambda_" << i;
    out << ",planned_value\n";
    for (const ReplicaResult& replica : results.replicas)
        for (const EpisodeRecord& e : replica.episodes) {
            out << replica.replica << ',' << e.episode << ',' << format_real(e.value_c);
            for (double v : e.value_d) out << ',' << format_real(v);
            out << ',' << format_real(e.opt_value) << ',' << format_real(e.reg_plus_c) << ','
                << format_real(e.reg_c) << ',' << format_real(e.reg_plus_d) << ','
                << format_real(e.reg_d);
            for (std::size_t i = 0; i < I; ++i) {
                out << ',';
                if (i < e.lambdas.size()) out << format_real(e.lambdas[i]);
            }
            out << ',' << format_real(e.planned_value) << '\n';
        }
}

nlohmann::json summary_json(const ExperimentConfig& config, const ExperimentResults& results) {
    nlohmann::json replicas = nlohmann::json::array();
    for (const ReplicaResult& r : results.replicas) {
        nlohmann::json entry{{"replica", r.replica}, {"episodes", r.episodes.size()}};
        if (!r.episodes.empty()) {
            const EpisodeRecord& last = r.episodes.back();
            entry["reg_plus_c"] = last.reg_plus_c;
            entry["reg_c"] = last.reg_c;
            entry["reg_plus_d"] = last.reg_plus_d;
            entry["reg_d"] = last.reg_d;
        }
        if (r.failure) {
            entry["status"] = "failed";
            entry["failure"] = *r.failure;
            entry["failed_episode"] = r.failed_episode;
        } else {
            entry["status"] = "ok";
        }
        replicas.push_back(std::move(entry));
    }
    nlohmann::json out{{"config", config_to_json(config)},
                       {"opt_value", results.optimal_value},
                       {"num_constraints", results.num_constraints},
                       {"replicas", std::move(replicas)}};
    if (results.rho) out["rho"] = *results.rho;
    return out;
}

void write_outputs(const ExperimentConfig& config, const ExperimentResults& results) {
    std::filesystem::create_directories(config.out_dir);
    {
        std::ofstream csv(config.out_dir / "regret.csv");
        if (!csv) throw ConfigError("cannot write to " + config.out_dir.string());
        write_csv(results, csv);
    }
    {
        std::ofstream failures(config.out_dir / "failures.csv");
        failures << "replica,episode,error\n";
        for (const ReplicaResult& r : results.replicas)
            if (r.failure) {
                std::string message = *r.failure;
                std::replace(message.begin(), message.end(), ',', ';');
                failures << r.replica << ',' << r.failed_episode << ',' << message << '\n';
            }
    }
    std::ofstream summary(config.out_dir / "summary.json");
    summary << summary_json(config, results).dump(2) << '\n';
}

} // namespace cmdpx
