#include "cmdpx/estimation.hpp"

#include "cmdpx/errors.hpp"

#include <algorithm>
#include <cmath>

namespace cmdpx {

EstimatorState::EstimatorState(std::size_t states, std::size_t actions, std::size_t horizon,
                               std::size_t constraints, std::size_t total_episodes,
                               double delta)
    : states_(states), actions_(actions), horizon_(horizon), constraints_(constraints),
      delta_(delta) {
    if (states == 0 || actions == 0 || horizon == 0)
        throw StructuralError("estimator dimensions must be positive");
    if (total_episodes == 0) throw StructuralError("total episodes must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw StructuralError("delta must lie in (0,1)");
    const double sah = static_cast<double>(states * actions * horizon);
    const double K = static_cast<double>(total_episodes);
    transition_log_ = std::log(6.0 * sah * K / delta);
    cost_log_ = 2.0 * std::log(6.0 * sah * static_cast<double>(constraints + 1) * K / delta);

    const std::size_t n_sa = horizon * states * actions;
    visits_.assign(n_sa, 0);
    next_counts_.assign(n_sa * states, 0);
    cost_sum_.assign(n_sa, 0.0);
    constraint_sum_.assign(constraints, std::vector<double>(n_sa, 0.0));
    mean_cost_ = StageTable(horizon, states, actions);
    mean_constraint_.assign(constraints, StageTable(horizon, states, actions));
    p_bar_ = TransitionModel::uniform(horizon, states, actions);
}

void EstimatorState::update(const Trajectory& trajectory) {
    if (trajectory.steps.size() != horizon_)
        throw StructuralError("trajectory length must equal the horizon");
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    for (const Step& step : trajectory.steps) {
        if (step.state >= states_ || step.action >= actions_)
            throw StructuralError("trajectory state or action out of range");
        if (!in_unit(step.cost)) throw StructuralError("cost sample outside [0,1]");
        if (step.constraint_costs.size() != constraints_)
            throw StructuralError("wrong number of constraint cost samples");
        for (double d : step.constraint_costs)
            if (!in_unit(d)) throw StructuralError("constraint cost sample outside [0,1]");
    }
    if (trajectory.final_state >= states_) throw StructuralError("final state out of range");

    for (std::size_t h = 0; h < horizon_; ++h) {
        const Step& step = trajectory.steps[h];
        const std::size_t next =
            h + 1 < horizon_ ? trajectory.steps[h + 1].state : trajectory.final_state;
        const std::size_t j = mean_cost_.index(h, step.state, step.action);
        const std::size_t n = ++visits_[j];
        ++next_counts_[j * states_ + next];
        cost_sum_[j] += step.cost;
        mean_cost_.flat()[j] = cost_sum_[j] / static_cast<double>(n);
        for (std::size_t i = 0; i < constraints_; ++i) {
            constraint_sum_[i][j] += step.constraint_costs[i];
            mean_constraint_[i].flat()[j] = constraint_sum_[i][j] / static_cast<double>(n);
        }
        auto row = p_bar_.row(h, step.state, step.action);
        for (std::size_t y = 0; y < states_; ++y)
            row[y] = static_cast<double>(next_counts_[j * states_ + y]) / static_cast<double>(n);
    }
    ++episodes_;
}

double transition_width(double p_bar, std::size_t visits, double log_term) {
    const double n = static_cast<double>(std::max<std::size_t>(visits, 1));
    const double variance = p_bar * (1.0 - p_bar);
    return 2.0 * std::sqrt(variance * log_term / n) + (14.0 / 3.0) * log_term / n;
}

double cost_width(std::size_t visits, double log_term) {
    const double n = static_cast<double>(std::max<std::size_t>(visits, 1));
    return std::sqrt(log_term / n);
}

double transition_width(const EstimatorState& state, std::size_t h, std::size_t s,
                        std::size_t a, std::size_t next) {
    return transition_width(state.empirical_transitions()(h, s, a, next), state.visits(h, s, a),
                            state.transition_log_term());
}

double cost_width(const EstimatorState& state, std::size_t h, std::size_t s, std::size_t a) {
    return cost_width(state.visits(h, s, a), state.cost_log_term());
}

double exploration_bonus(const EstimatorState& state, std::size_t h, std::size_t s,
                         std::size_t a) {
    double transition_total = 0.0;
    for (std::size_t n = 0; n < state.states(); ++n)
        transition_total += transition_width(state, h, s, a, n);
    return cost_width(state, h, s, a) + static_cast<double>(state.horizon()) * transition_total;
}

Widths compute_widths(const EstimatorState& state) {
    const std::size_t H = state.horizon(), S = state.states(), A = state.actions();
    Widths w{SasTable(H, S, A), StageTable(H, S, A), StageTable(H, S, A)};
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t a = 0; a < A; ++a) {
                double transition_total = 0.0;
                for (std::size_t n = 0; n < S; ++n) {
                    w.beta_p(h, s, a, n) = transition_width(state, h, s, a, n);
                    transition_total += w.beta_p(h, s, a, n);
                }
                w.beta_c(h, s, a) = cost_width(state, h, s, a);
                w.bonus(h, s, a) = w.beta_c(h, s, a) + static_cast<double>(H) * transition_total;
            }
    return w;
}

OptimisticCosts optimistic_costs(const EstimatorState& state, const Widths& widths,
                                 OptimismMode mode) {
    const StageTable& shift = mode == OptimismMode::Width ? widths.beta_c : widths.bonus;
    auto lower = [&shift](const StageTable& mean) {
        StageTable out = mean;
        auto o = out.flat();
        auto w = shift.flat();
        for (std::size_t j = 0; j < o.size(); ++j) o[j] -= w[j];
        return out;
    };
    OptimisticCosts out;
    out.c_tilde = lower(state.mean_costs());
    for (std::size_t i = 0; i < state.constraints(); ++i)
        out.d_tilde.push_back(lower(state.mean_constraint_costs(i)));
    return out;
}

OptimisticCosts optimistic_costs(const EstimatorState& state, OptimismMode mode) {
    return optimistic_costs(state, compute_widths(state), mode);
}

} // namespace cmdpx
