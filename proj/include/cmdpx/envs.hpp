#pragma once

// Instance generators, the episodic simulator and instance serialization.

#include "cmdpx/cmdp.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace cmdpx {

struct Step {
    std::size_t state = 0;
    std::size_t action = 0;
    double cost = 0.0;
    std::vector<double> constraint_costs;
};

/// One episode: H steps plus the state reached after the last step.
struct Trajectory {
    std::vector<Step> steps;
    std::size_t final_state = 0;
};

/// SplitMix64 mixing of a seed with a stream index.
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream);

/// Seed of the sampling stream for one (seed, replica, episode) triple.
std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t replica, std::uint64_t episode);

/// Seedable generator (xoshiro256**) with a portable uniform draw.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next();
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    /// Index drawn from a probability vector.
    std::size_t categorical(std::span<const double> probs);
    bool bernoulli(double p) { return uniform() < p; }

private:
    std::uint64_t state_[4];
};

Trajectory sample_trajectory(const Cmdp& cmdp, const Policy& policy, Rng& rng);

struct RandomCmdpParams {
    std::size_t states = 3;
    std::size_t actions = 2;
    std::size_t horizon = 3;
    std::size_t constraints = 1;
    std::size_t branching = 2;
    /// alpha_i = v_i + margin * (H - v_i) / H where v_i is the uniform policy's
    /// constraint value; must lie in (0, H). Unset means 0.25 * H.
    std::optional<double> slater_margin;
    std::uint64_t seed = 0;
};

/// Random instance for which the uniform policy is strictly feasible.
Cmdp random_cmdp(const RandomCmdpParams& params);

struct HazardChainParams {
    std::size_t length = 3;
    std::size_t horizon = 4;
    double hazard_cost = 1.0;
};

/// Chain 0 -> 1 -> ... -> L-1 with an absorbing, cost-free goal at L-1.
///
/// Action 0 ("safe") advances one state, costs 1 and has zero constraint cost.
/// Action 1 ("fast") jumps straight to the goal, costs 1/2 and incurs
/// constraint cost kappa. Both actions are free and self-looping at the goal.
/// The episode starts in state 0 and alpha = kappa / 2. Dynamics are
/// deterministic, so a deterministic policy has constraint value 0 or kappa;
/// the saving from jumping is largest at the start, which makes the unique
/// optimum "fast with probability 1/2 at (0, 0), safe elsewhere".
/// With m = min(L-1, H): V* = (m + 1/2) / 2, the Slater policy is all-safe
/// with value m and slack kappa/2, and rho = (m - 1/2) / kappa.
Cmdp hazard_chain(const HazardChainParams& params);

struct SlaterAnalysis {
    double rho = 0.0;
    double slack = 0.0;          ///< min_i (alpha_i - d_i.q) of the Slater policy
    double slater_value = 0.0;   ///< c.q of the Slater policy
    double optimal_value = 0.0;  ///< V*
    Policy slater_policy;
};

/// Max-slack Slater policy (ties broken toward lower cost) and the ratio
/// (c.q_slater - V*) / slack. Throws NoSlaterPoint if the maximal slack is 0.
SlaterAnalysis slater_analysis(const Cmdp& cmdp);
double true_rho(const Cmdp& cmdp);

nlohmann::json cmdp_to_json(const Cmdp& cmdp);
/// Throws StructuralError on malformed documents or invalid instances.
Cmdp cmdp_from_json(const nlohmann::json& doc);
void save_cmdp(const Cmdp& cmdp, const std::filesystem::path& path);
Cmdp load_cmdp(const std::filesystem::path& path);

} // namespace cmdpx
