#include "cmdpx/learners.hpp"

#include "cmdpx/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace cmdpx {

std::string_view to_string(Algorithm algorithm) {
    switch (algorithm) {
    case Algorithm::OptCmdp: return "optcmdp";
    case Algorithm::OptCmdpBonus: return "optcmdp-bonus";
    case Algorithm::OptDual: return "optdual";
    case Algorithm::OptPrimalDual: return "optprimaldual";
    }
    return "unknown";
}

std::optional<Algorithm> parse_algorithm(std::string_view name) {
    for (Algorithm a : {Algorithm::OptCmdp, Algorithm::OptCmdpBonus, Algorithm::OptDual,
                        Algorithm::OptPrimalDual})
        if (to_string(a) == name) return a;
    return std::nullopt;
}

bool is_dual(Algorithm algorithm) {
    return algorithm == Algorithm::OptDual || algorithm == Algorithm::OptPrimalDual;
}

void LearnerConfig::validate() const {
    if (total_episodes == 0) throw ConfigError("total episodes must be at least 1");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
    if (is_dual(algorithm) && !(rho > 0.0 && std::isfinite(rho)))
        throw ConfigError("dual algorithms need a finite rho > 0");
}

double dual_step_size(std::size_t horizon, std::size_t constraints, std::size_t episodes,
                      double rho) {
    const double H = static_cast<double>(horizon);
    return std::sqrt(H * H * static_cast<double>(constraints) * static_cast<double>(episodes) /
                     (rho * rho));
}

double mirror_step_size(std::size_t actions, std::size_t horizon, std::size_t constraints,
                        std::size_t episodes, double rho) {
    const double H = static_cast<double>(horizon);
    const double scale = 1.0 + static_cast<double>(constraints) * rho;
    return std::sqrt(2.0 * std::log(static_cast<double>(actions)) /
                     (H * H * scale * scale * static_cast<double>(episodes)));
}

ProblemInfo ProblemInfo::from(const Cmdp& cmdp) {
    return {cmdp.num_states, cmdp.num_actions, cmdp.horizon, cmdp.thresholds, cmdp.initial_dist};
}

PlanningInputs make_planning_inputs(const EstimatorState& state, OptimismMode mode) {
    Widths widths = compute_widths(state);
    OptimisticCosts costs = optimistic_costs(state, widths, mode);
    return {state.empirical_transitions(), std::move(widths.beta_p), std::move(costs)};
}

RobustBackup robust_inner_min(std::span<const double> p_row, std::span<const double> beta_row,
                              std::span<const double> v_next) {
    const std::size_t S = p_row.size();
    if (beta_row.size() != S || v_next.size() != S)
        throw StructuralError("robust backup inputs must have equal length");
    RobustBackup out;
    out.distribution.resize(S);
    std::vector<double> upper(S);
    double lower_total = 0.0, upper_total = 0.0;
    for (std::size_t j = 0; j < S; ++j) {
        if (!(beta_row[j] >= 0.0)) throw StructuralError("widths must be nonnegative");
        out.distribution[j] = std::max(p_row[j] - beta_row[j], 0.0);
        upper[j] = std::min(p_row[j] + beta_row[j], 1.0);
        lower_total += out.distribution[j];
        upper_total += upper[j];
    }
    if (lower_total > 1.0 + 1e-12 || upper_total < 1.0 - 1e-12)
        throw ConfidenceSetEmpty("transition confidence box misses the simplex");

    std::vector<std::size_t> order(S);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&v_next](std::size_t x, std::size_t y) { return v_next[x] < v_next[y]; });
    double remaining = 1.0 - lower_total;
    for (std::size_t j : order) {
        if (remaining <= 0.0) break;
        const double add = std::min(upper[j] - out.distribution[j], remaining);
        out.distribution[j] += add;
        remaining -= add;
    }
    for (std::size_t j = 0; j < S; ++j) out.value += out.distribution[j] * v_next[j];
    return out;
}

OptDualPlan optdual_plan(const PlanningInputs& inputs, std::span<const double> lambdas,
                         std::span<const double> thresholds, std::span<const double> mu) {
    const StageTable& c = inputs.costs.c_tilde;
    const auto& d = inputs.costs.d_tilde;
    const std::size_t H = c.horizon(), S = c.states(), A = c.actions();
    if (lambdas.size() != d.size() || thresholds.size() != d.size())
        throw StructuralError("one multiplier and threshold per constraint is required");
    for (double l : lambdas)
        if (!(l >= 0.0)) throw StructuralError("multipliers must be nonnegative");

    OptDualPlan plan;
    plan.policy = Policy(H, S, A);
    plan.chosen_model = TransitionModel(H, S, A);
    plan.q_values = StageTable(H, S, A);
    std::vector<double> v_next(S, 0.0), v(S);
    for (std::size_t h = H; h-- > 0;) {
        for (std::size_t s = 0; s < S; ++s) {
            std::size_t best_action = 0;
            double best = 0.0;
            for (std::size_t a = 0; a < A; ++a) {
                double reward = c(h, s, a);
                for (std::size_t i = 0; i < d.size(); ++i) reward += lambdas[i] * d[i](h, s, a);
                RobustBackup backup = robust_inner_min(inputs.p_hat.row(h, s, a),
                                                       inputs.beta_p.row(h, s, a), v_next);
                const double q = reward + backup.value;
                plan.q_values(h, s, a) = q;
                auto model_row = plan.chosen_model.row(h, s, a);
                std::copy(backup.distribution.begin(), backup.distribution.end(), model_row.begin());
                if (a == 0 || q < best - 1e-12) {
                    best = q;
                    best_action = a;
                }
            }
            plan.policy(h, s, best_action) = 1.0;
            v[s] = best;
        }
        v_next.swap(v);
    }
    plan.occupancy = occupancy_from_policy(plan.policy, plan.chosen_model, mu);
    plan.cost_value = value_from_occupancy(plan.occupancy, c);
    plan.lagrangian = plan.cost_value;
    for (std::size_t i = 0; i < d.size(); ++i) {
        plan.constraint_values.push_back(value_from_occupancy(plan.occupancy, d[i]));
        plan.lagrangian += lambdas[i] * (plan.constraint_values[i] - thresholds[i]);
    }
    return plan;
}

std::vector<double> dual_update(std::span<const double> lambdas, std::span<const double> violations,
                                double step, std::optional<double> cap) {
    if (lambdas.size() != violations.size())
        throw StructuralError("one violation per multiplier is required");
    std::vector<double> out(lambdas.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::max(lambdas[i] + violations[i] / step, 0.0);
        if (cap) out[i] = std::min(out[i], *cap);
    }
    return out;
}

StageTable truncated_policy_evaluation(const StageTable& l_hat, const TransitionModel& p_hat,
                                       const Policy& policy) {
    const std::size_t H = l_hat.horizon(), S = l_hat.states(), A = l_hat.actions();
    if (!policy.same_shape(l_hat) || p_hat.horizon() != H || p_hat.states() != S ||
        p_hat.actions() != A)
        throw StructuralError("truncated evaluation shape mismatch");
    StageTable q(H, S, A);
    std::vector<double> v_next(S, 0.0), v(S);
    for (std::size_t h = H; h-- > 0;) {
        for (std::size_t s = 0; s < S; ++s) {
            double value = 0.0;
            for (std::size_t a = 0; a < A; ++a) {
                auto p = p_hat.row(h, s, a);
                double backup = l_hat(h, s, a);
                for (std::size_t n = 0; n < S; ++n) backup += p[n] * v_next[n];
                q(h, s, a) = std::max(backup, 0.0);
                value += policy(h, s, a) * q(h, s, a);
            }
            v[s] = value;
        }
        v_next.swap(v);
    }
    return q;
}

Policy mirror_descent_update(const Policy& policy, const StageTable& q_values, double step) {
    if (!policy.same_shape(q_values)) throw StructuralError("policy/Q shape mismatch");
    const std::size_t H = policy.horizon(), S = policy.states(), A = policy.actions();
    Policy out(H, S, A);
    std::vector<double> weights(A);
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t s = 0; s < S; ++s) {
            auto q = q_values.row(h, s);
            auto in = policy.row(h, s);
            const double q_min = *std::min_element(q.begin(), q.end());
            double total = 0.0;
            for (std::size_t a = 0; a < A; ++a) {
                weights[a] = in[a] * std::exp(-step * (q[a] - q_min));
                total += weights[a];
            }
            double floored_total = 0.0;
            for (std::size_t a = 0; a < A; ++a) {
                weights[a] = std::max(weights[a] / total, 1e-300);
                floored_total += weights[a];
            }
            auto row = out.row(h, s);
            for (std::size_t a = 0; a < A; ++a) row[a] = weights[a] / floored_total;
        }
    return out;
}

PrimalDualStep primal_dual_step(const MirrorDescentState& primal, const DualState& dual,
                                const PlanningInputs& inputs, std::span<const double> thresholds,
                                std::span<const double> mu, double mirror_step,
                                double dual_step) {
    const auto& d = inputs.costs.d_tilde;
    if (dual.lambdas.size() != d.size() || thresholds.size() != d.size())
        throw StructuralError("one multiplier and threshold per constraint is required");
    const Policy& pi = primal.policy;

    StageTable weighted = truncated_policy_evaluation(inputs.costs.c_tilde, inputs.p_hat, pi);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const StageTable qd = truncated_policy_evaluation(d[i], inputs.p_hat, pi);
        auto w = weighted.flat();
        auto x = qd.flat();
        for (std::size_t j = 0; j < w.size(); ++j) w[j] += dual.lambdas[i] * x[j];
    }

    PrimalDualStep out;
    out.acting_policy = pi;
    out.primal.policy = mirror_descent_update(pi, weighted, mirror_step);
    out.primal.weighted_q = std::move(weighted);

    const OccupancyMeasure q = occupancy_from_policy(pi, inputs.p_hat, mu);
    out.planned_value = value_from_occupancy(q, inputs.costs.c_tilde);
    std::vector<double> violations(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        out.planned_constraints.push_back(value_from_occupancy(q, d[i]));
        violations[i] = out.planned_constraints[i] - thresholds[i];
    }
    out.dual.cap = dual.cap;
    out.dual.lambdas = d.empty() ? std::vector<double>{}
                                 : dual_update(dual.lambdas, violations, dual_step, dual.cap);
    return out;
}

EstimatingLearner::EstimatingLearner(LearnerConfig config, ProblemInfo problem)
    : config_((config.validate(), config)), problem_(std::move(problem)),
      estimator_(problem_.states, problem_.actions, problem_.horizon, problem_.constraints(),
                 config_.total_episodes, config_.delta),
      provider_(make_planning_inputs) {
    if (problem_.initial_dist.size() != problem_.states)
        throw StructuralError("initial distribution size mismatch");
}

void EstimatingLearner::observe(const Trajectory& trajectory) { estimator_.update(trajectory); }

PlanningInputs EstimatingLearner::inputs(OptimismMode mode) const {
    return provider_(estimator_, mode);
}

EpisodePlan OptCmdpLearner::plan_episode() {
    const PlanningInputs in = inputs(OptimismMode::Width);
    PlanResult plan = solve_optcmdp_extended(in.p_hat, in.beta_p, in.costs.c_tilde,
                                             in.costs.d_tilde, problem().thresholds,
                                             problem().initial_dist);
    return {std::move(plan.policy), {plan.optimistic_value, plan.constraint_values, {}}};
}

EpisodePlan OptCmdpBonusLearner::plan_episode() {
    const PlanningInputs in = inputs(OptimismMode::Bonus);
    PlanResult plan = solve_bonus_cmdp(in.p_hat, in.costs.c_tilde, in.costs.d_tilde,
                                       problem().thresholds, problem().initial_dist);
    return {std::move(plan.policy), {plan.optimistic_value, plan.constraint_values, {}}};
}

OptDualLearner::OptDualLearner(LearnerConfig config, ProblemInfo problem)
    : EstimatingLearner(std::move(config), std::move(problem)),
      dual_step_(dual_step_size(this->problem().horizon, this->problem().constraints(),
                                this->config().total_episodes, this->config().rho)),
      lambdas_(this->problem().constraints(), 0.0) {}

EpisodePlan OptDualLearner::plan_episode() {
    const PlanningInputs in = inputs(OptimismMode::Width);
    OptDualPlan plan = optdual_plan(in, lambdas_, problem().thresholds, problem().initial_dist);
    EpisodePlan out{std::move(plan.policy),
                    {plan.cost_value, plan.constraint_values, lambdas_}};
    if (!lambdas_.empty()) {
        std::vector<double> violations(lambdas_.size());
        for (std::size_t i = 0; i < violations.size(); ++i)
            violations[i] = plan.constraint_values[i] - problem().thresholds[i];
        lambdas_ = dual_update(lambdas_, violations, dual_step_);
    }
    return out;
}

OptPrimalDualLearner::OptPrimalDualLearner(LearnerConfig config, ProblemInfo problem)
    : EstimatingLearner(std::move(config), std::move(problem)),
      dual_step_(dual_step_size(this->problem().horizon, this->problem().constraints(),
                                this->config().total_episodes, this->config().rho)),
      mirror_step_(mirror_step_size(this->problem().actions, this->problem().horizon,
                                    this->problem().constraints(),
                                    this->config().total_episodes, this->config().rho)) {
    const ProblemInfo& p = this->problem();
    primal_.policy = Policy::uniform(p.horizon, p.states, p.actions);
    primal_.weighted_q = StageTable(p.horizon, p.states, p.actions);
    dual_.lambdas.assign(p.constraints(), 0.0);
    dual_.cap = this->config().rho;
}

EpisodePlan OptPrimalDualLearner::plan_episode() {
    const PlanningInputs in = inputs(OptimismMode::Bonus);
    PrimalDualStep step = primal_dual_step(primal_, dual_, in, problem().thresholds,
                                           problem().initial_dist, mirror_step_, dual_step_);
    EpisodePlan out{std::move(step.acting_policy),
                    {step.planned_value, step.planned_constraints, dual_.lambdas}};
    primal_ = std::move(step.primal);
    dual_ = std::move(step.dual);
    return out;
}

std::unique_ptr<EstimatingLearner> make_learner(const LearnerConfig& config,
                                                const ProblemInfo& problem) {
    switch (config.algorithm) {
    case Algorithm::OptCmdp: return std::make_unique<OptCmdpLearner>(config, problem);
    case Algorithm::OptCmdpBonus: return std::make_unique<OptCmdpBonusLearner>(config, problem);
    case Algorithm::OptDual: return std::make_unique<OptDualLearner>(config, problem);
    case Algorithm::OptPrimalDual: return std::make_unique<OptPrimalDualLearner>(config, problem);
    }
    throw ConfigError("unknown algorithm");
}

} // namespace cmdpx
