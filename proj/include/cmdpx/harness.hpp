#pragma once

// Experiment orchestration: instances, learners, exact regret accounting and
// result files.

#include "cmdpx/envs.hpp"
#include "cmdpx/learners.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace cmdpx {

struct InstanceFile {
    std::filesystem::path path;
};

using InstanceSource = std::variant<RandomCmdpParams, HazardChainParams, InstanceFile>;

Cmdp build_instance(const InstanceSource& source);

struct ExperimentConfig {
    InstanceSource instance = RandomCmdpParams{};
    Algorithm algorithm = Algorithm::OptCmdp;
    std::size_t episodes = 100;
    double delta = 0.1;
    /// Unset means: compute the Slater ratio of the true instance.
    std::optional<double> rho;
    std::uint64_t seed = 0;
    std::size_t replicas = 1;
    std::filesystem::path out_dir = "results";
    std::size_t threads = 1;

    /// Throws ConfigError.
    void validate() const;
};

/// Throws ConfigError on missing or mistyped fields. Relative instance file
/// paths are resolved against base_dir.
ExperimentConfig config_from_json(const nlohmann::json& doc,
                                  const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Cumulative regrets against the optimum and the thresholds.
class RegretLedger {
public:
    RegretLedger(double optimal_value, std::vector<double> thresholds);

    void update(double value_c, std::span<const double> value_d);

    double optimal_value() const { return optimal_value_; }
    std::size_t episodes() const { return values_c_.size(); }
    double reg_plus_c() const { return reg_plus_c_; }
    double reg_c() const { return reg_c_; }
    /// max over i of sum_k [V_{d_i} - alpha_i]_+
    double reg_plus_d() const;
    /// max over i of sum_k (V_{d_i} - alpha_i)
    double reg_d() const;

    const std::vector<double>& values_c() const { return values_c_; }
    const std::vector<std::vector<double>>& values_d() const { return values_d_; }

private:
    double optimal_value_;
    std::vector<double> thresholds_;
    double reg_plus_c_ = 0.0;
    double reg_c_ = 0.0;
    std::vector<double> reg_plus_d_;
    std::vector<double> reg_d_;
    std::vector<double> values_c_;
    std::vector<std::vector<double>> values_d_;
};

struct EpisodeRecord {
    std::size_t episode = 0; ///< 1-based
    double value_c = 0.0;
    std::vector<double> value_d;
    double opt_value = 0.0;
    double reg_plus_c = 0.0;
    double reg_c = 0.0;
    double reg_plus_d = 0.0;
    double reg_d = 0.0;
    std::vector<double> lambdas; ///< empty for LP learners
    double planned_value = 0.0;
};

struct ReplicaResult {
    std::size_t replica = 0;
    std::vector<EpisodeRecord> episodes;
    /// Set when the replica was aborted.
    std::optional<std::string> failure;
    std::size_t failed_episode = 0;
};

struct ExperimentResults {
    std::size_t num_constraints = 0;
    double optimal_value = 0.0;
    std::optional<double> rho;
    std::vector<ReplicaResult> replicas;

    bool any_failure() const;
};

using LearnerFactory =
    std::function<std::unique_ptr<Learner>(const Cmdp& cmdp, const LearnerConfig& config)>;

/// Factory used unless a test substitutes one.
std::unique_ptr<Learner> default_learner(const Cmdp& cmdp, const LearnerConfig& config);

/// One replica on a fixed instance with a known optimum.
ReplicaResult run_replica(const Cmdp& cmdp, double optimal_value, const LearnerConfig& learner,
                          std::uint64_t seed, std::size_t replica,
                          const LearnerFactory& factory = default_learner);

/// Builds the instance, computes V* (and rho when requested) and runs every
/// replica; results are ordered by replica index.
ExperimentResults run_experiment(const ExperimentConfig& config,
                                 const LearnerFactory& factory = default_learner);

void write_csv(const ExperimentResults& results, std::ostream& out);
nlohmann::json summary_json(const ExperimentConfig& config, const ExperimentResults& results);
/// Writes regret.csv, failures.csv and summary.json to config.out_dir.
void write_outputs(const ExperimentConfig& config, const ExperimentResults& results);

} // namespace cmdpx
