#pragma once

// Visit counters, empirical model, confidence widths and optimistic costs.

#include "cmdpx/cmdp.hpp"
#include "cmdpx/envs.hpp"

#include <cstddef>
#include <vector>

namespace cmdpx {

class EstimatorState {
public:
    /// total_episodes and delta enter the logarithmic confidence terms.
    EstimatorState(std::size_t states, std::size_t actions, std::size_t horizon,
                   std::size_t constraints, std::size_t total_episodes, double delta);

    std::size_t states() const { return states_; }
    std::size_t actions() const { return actions_; }
    std::size_t horizon() const { return horizon_; }
    std::size_t constraints() const { return constraints_; }
    std::size_t episodes() const { return episodes_; }
    double delta() const { return delta_; }

    /// ln(6 S A H K / delta)
    double transition_log_term() const { return transition_log_; }
    /// 2 ln(6 S A H (I+1) K / delta)
    double cost_log_term() const { return cost_log_; }

    std::size_t visits(std::size_t h, std::size_t s, std::size_t a) const {
        return visits_[(h * states_ + s) * actions_ + a];
    }
    std::size_t transition_count(std::size_t h, std::size_t s, std::size_t a,
                                 std::size_t next) const {
        return next_counts_[((h * states_ + s) * actions_ + a) * states_ + next];
    }
    const StageTable& mean_costs() const { return mean_cost_; }
    const StageTable& mean_constraint_costs(std::size_t i) const { return mean_constraint_[i]; }
    /// Rows without visits are uniform.
    const TransitionModel& empirical_transitions() const { return p_bar_; }

    /// Ingests one episode. Throws StructuralError on out-of-range data.
    void update(const Trajectory& trajectory);

private:
    std::size_t states_, actions_, horizon_, constraints_;
    double delta_;
    double transition_log_;
    double cost_log_;
    std::size_t episodes_ = 0;
    std::vector<std::size_t> visits_;
    std::vector<std::size_t> next_counts_;
    std::vector<double> cost_sum_;
    std::vector<std::vector<double>> constraint_sum_;
    StageTable mean_cost_;
    std::vector<StageTable> mean_constraint_;
    TransitionModel p_bar_;
};

/// 2 sqrt(p(1-p) L / (n v 1)) + (14/3) L / (n v 1)
double transition_width(double p_bar, std::size_t visits, double log_term);
/// sqrt(L / (n v 1))
double cost_width(std::size_t visits, double log_term);

double transition_width(const EstimatorState& state, std::size_t h, std::size_t s,
                        std::size_t a, std::size_t next);
/// Width shared by the cost and every constraint cost.
double cost_width(const EstimatorState& state, std::size_t h, std::size_t s, std::size_t a);
/// beta^c + H * sum_{s'} beta^p
double exploration_bonus(const EstimatorState& state, std::size_t h, std::size_t s,
                         std::size_t a);

struct Widths {
    SasTable beta_p;
    StageTable beta_c; ///< also the width of every constraint cost
    StageTable bonus;
};

Widths compute_widths(const EstimatorState& state);

enum class OptimismMode { Width, Bonus };

struct OptimisticCosts {
    StageTable c_tilde;
    std::vector<StageTable> d_tilde;
};

/// Width mode subtracts beta^c, bonus mode subtracts the bonus. Results are
/// not clipped and may be negative.
OptimisticCosts optimistic_costs(const EstimatorState& state, OptimismMode mode);
OptimisticCosts optimistic_costs(const EstimatorState& state, const Widths& widths,
                                 OptimismMode mode);

} // namespace cmdpx
