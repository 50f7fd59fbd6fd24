#pragma once

// Episodic learners for unknown CMDPs. Each learner plans a policy for the
// current episode from the data of previous episodes and then ingests the
// trajectory the policy produced.

#include "cmdpx/cmdp.hpp"
#include "cmdpx/envs.hpp"
#include "cmdpx/estimation.hpp"
#include "cmdpx/planner.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace cmdpx {

enum class Algorithm { OptCmdp, OptCmdpBonus, OptDual, OptPrimalDual };

/// CLI spelling: optcmdp, optcmdp-bonus, optdual, optprimaldual.
std::string_view to_string(Algorithm algorithm);
std::optional<Algorithm> parse_algorithm(std::string_view name);
bool is_dual(Algorithm algorithm);

struct LearnerConfig {
    Algorithm algorithm = Algorithm::OptCmdp;
    std::size_t total_episodes = 1;
    double delta = 0.1;
    /// Slater ratio; required (> 0) by the dual algorithms.
    double rho = 0.0;

    /// Throws ConfigError on invalid values.
    void validate() const;
};

/// sqrt(H^2 I K / rho^2)
double dual_step_size(std::size_t horizon, std::size_t constraints, std::size_t episodes,
                      double rho);
/// sqrt(2 ln A / (H^2 (1 + I rho)^2 K))
double mirror_step_size(std::size_t actions, std::size_t horizon, std::size_t constraints,
                        std::size_t episodes, double rho);

/// What a learner knows about the environment before interacting with it.
struct ProblemInfo {
    std::size_t states = 0;
    std::size_t actions = 0;
    std::size_t horizon = 0;
    std::vector<double> thresholds;
    std::vector<double> initial_dist;

    static ProblemInfo from(const Cmdp& cmdp);
    std::size_t constraints() const { return thresholds.size(); }
};

/// Model and optimistic costs a planner consumes in one episode.
struct PlanningInputs {
    TransitionModel p_hat;
    SasTable beta_p;
    OptimisticCosts costs;
};

PlanningInputs make_planning_inputs(const EstimatorState& state, OptimismMode mode);

struct RobustBackup {
    double value = 0.0;
    std::vector<double> distribution;
};

/// min p.v over p in the simplex with |p - p_row| <= beta_row elementwise.
/// Throws ConfidenceSetEmpty if that set is empty.
RobustBackup robust_inner_min(std::span<const double> p_row, std::span<const double> beta_row,
                              std::span<const double> v_next);

struct OptDualPlan {
    Policy policy;
    TransitionModel chosen_model;
    OccupancyMeasure occupancy; ///< of the policy under chosen_model
    StageTable q_values;        ///< Lagrangian Q-values of the extended MDP
    double cost_value = 0.0;    ///< c~.q
    std::vector<double> constraint_values; ///< d~_i.q
    double lagrangian = 0.0;    ///< c~.q + sum_i lambda_i (d~_i.q - alpha_i)
};

/// Greedy (lowest action index on ties) optimal policy of the extended MDP
/// with per-step cost c~ + sum_i lambda_i d~_i, by robust backward induction.
OptDualPlan optdual_plan(const PlanningInputs& inputs, std::span<const double> lambdas,
                         std::span<const double> thresholds, std::span<const double> mu);

/// [lambda + g / step]_+, then min(., cap) if a cap is given.
std::vector<double> dual_update(std::span<const double> lambdas, std::span<const double> violations,
                                double step, std::optional<double> cap = std::nullopt);

/// Policy evaluation with Q clamped below at zero after every backup.
StageTable truncated_policy_evaluation(const StageTable& l_hat, const TransitionModel& p_hat,
                                       const Policy& policy);

/// pi'(a|s) proportional to pi(a|s) exp(-step Q(s,a)) at every (h,s).
Policy mirror_descent_update(const Policy& policy, const StageTable& q_values, double step);

struct MirrorDescentState {
    Policy policy;
    StageTable weighted_q;
};

struct DualState {
    std::vector<double> lambdas;
    std::optional<double> cap;
};

struct PrimalDualStep {
    Policy acting_policy; ///< pi_k, the policy that was evaluated
    MirrorDescentState primal;
    DualState dual;
    double planned_value = 0.0;            ///< c~.q under p_bar
    std::vector<double> planned_constraints; ///< d~_i.q under p_bar
};

/// One evaluation / mirror-descent / projected-dual step on bonus-mode inputs.
PrimalDualStep primal_dual_step(const MirrorDescentState& primal, const DualState& dual,
                                const PlanningInputs& inputs, std::span<const double> thresholds,
                                std::span<const double> mu, double mirror_step,
                                double dual_step);

struct PlanDiagnostics {
    double optimistic_value = 0.0;
    std::vector<double> planned_constraint_values;
    /// Multipliers used to plan this episode; empty for LP learners.
    std::vector<double> lambdas;
};

struct EpisodePlan {
    Policy policy;
    PlanDiagnostics diagnostics;
};

class Learner {
public:
    virtual ~Learner() = default;

    /// Policy for the current episode; call once per episode, before observe.
    virtual EpisodePlan plan_episode() = 0;
    virtual void observe(const Trajectory& trajectory) = 0;
    /// Number of completed episodes.
    virtual std::size_t episode() const = 0;
    /// Current multipliers (empty when the learner has none).
    virtual std::vector<double> lambdas() const { return {}; }
};

/// Shared machinery of the four algorithms: counters and the snapshot of
/// planning inputs.
class EstimatingLearner : public Learner {
public:
    using InputProvider = std::function<PlanningInputs(const EstimatorState&, OptimismMode)>;

    EstimatingLearner(LearnerConfig config, ProblemInfo problem);

    void observe(const Trajectory& trajectory) override;
    std::size_t episode() const override { return estimator_.episodes(); }
    const EstimatorState& estimator() const { return estimator_; }
    const LearnerConfig& config() const { return config_; }
    const ProblemInfo& problem() const { return problem_; }

    /// Replaces the estimator-derived planning inputs (used to inject known
    /// models in tests).
    void set_input_provider(InputProvider provider) { provider_ = std::move(provider); }

protected:
    PlanningInputs inputs(OptimismMode mode) const;

private:
    LearnerConfig config_;
    ProblemInfo problem_;
    EstimatorState estimator_;
    InputProvider provider_;
};

class OptCmdpLearner : public EstimatingLearner {
public:
    using EstimatingLearner::EstimatingLearner;
    EpisodePlan plan_episode() override;
};

class OptCmdpBonusLearner : public EstimatingLearner {
public:
    using EstimatingLearner::EstimatingLearner;
    EpisodePlan plan_episode() override;
};

class OptDualLearner : public EstimatingLearner {
public:
    OptDualLearner(LearnerConfig config, ProblemInfo problem);
    EpisodePlan plan_episode() override;
    std::vector<double> lambdas() const override { return lambdas_; }

private:
    double dual_step_;
    std::vector<double> lambdas_;
};

class OptPrimalDualLearner : public EstimatingLearner {
public:
    OptPrimalDualLearner(LearnerConfig config, ProblemInfo problem);
    EpisodePlan plan_episode() override;
    std::vector<double> lambdas() const override { return dual_.lambdas; }
    const MirrorDescentState& primal_state() const { return primal_; }

private:
    double dual_step_;
    double mirror_step_;
    MirrorDescentState primal_;
    DualState dual_;
};

std::unique_ptr<EstimatingLearner> make_learner(const LearnerConfig& config,
                                                const ProblemInfo& problem);

} // namespace cmdpx
