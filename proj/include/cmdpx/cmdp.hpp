#pragma once

// Finite-horizon constrained MDP data model: dense per-step tables, the
// ground-truth model, Markov non-stationary policies and their occupancy
// measures. All step indices are zero based (h = 0 is the first step).

#include <cstddef>
#include <span>
#include <vector>

namespace cmdpx {

/// Dense H x S x A table of reals, stored step-major.
class StageTable {
public:
    StageTable() = default;
    StageTable(std::size_t horizon, std::size_t states, std::size_t actions, double fill = 0.0);

    std::size_t horizon() const { return horizon_; }
    std::size_t states() const { return states_; }
    std::size_t actions() const { return actions_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t h, std::size_t s, std::size_t a) {
        return data_[index(h, s, a)];
    }
    double operator()(std::size_t h, std::size_t s, std::size_t a) const {
        return data_[index(h, s, a)];
    }

    /// Values over actions at (h, s).
    std::span<double> row(std::size_t h, std::size_t s) {
        return {data_.data() + index(h, s, 0), actions_};
    }
    std::span<const double> row(std::size_t h, std::size_t s) const {
        return {data_.data() + index(h, s, 0), actions_};
    }

    std::span<double> flat() { return data_; }
    std::span<const double> flat() const { return data_; }

    bool same_shape(const StageTable& other) const {
        return horizon_ == other.horizon_ && states_ == other.states_ &&
               actions_ == other.actions_;
    }

    std::size_t index(std::size_t h, std::size_t s, std::size_t a) const {
        return (h * states_ + s) * actions_ + a;
    }

private:
    std::size_t horizon_ = 0;
    std::size_t states_ = 0;
    std::size_t actions_ = 0;
    std::vector<double> data_;
};

/// Dense H x S x A x S table of reals (transition models and their widths).
class SasTable {
public:
    SasTable() = default;
    SasTable(std::size_t horizon, std::size_t states, std::size_t actions, double fill = 0.0);

    std::size_t horizon() const { return horizon_; }
    std::size_t states() const { return states_; }
    std::size_t actions() const { return actions_; }

    double& operator()(std::size_t h, std::size_t s, std::size_t a, std::size_t next) {
        return data_[index(h, s, a) + next];
    }
    double operator()(std::size_t h, std::size_t s, std::size_t a, std::size_t next) const {
        return data_[index(h, s, a) + next];
    }

    /// Values over next states at (h, s, a).
    std::span<double> row(std::size_t h, std::size_t s, std::size_t a) {
        return {data_.data() + index(h, s, a), states_};
    }
    std::span<const double> row(std::size_t h, std::size_t s, std::size_t a) const {
        return {data_.data() + index(h, s, a), states_};
    }

    std::span<const double> flat() const { return data_; }

    bool same_shape(const SasTable& other) const {
        return horizon_ == other.horizon_ && states_ == other.states_ &&
               actions_ == other.actions_;
    }

private:
    std::size_t index(std::size_t h, std::size_t s, std::size_t a) const {
        return ((h * states_ + s) * actions_ + a) * states_;
    }

    std::size_t horizon_ = 0;
    std::size_t states_ = 0;
    std::size_t actions_ = 0;
    std::vector<double> data_;
};

/// p_h(s'|s,a); every row is a probability distribution over next states.
class TransitionModel : public SasTable {
public:
    using SasTable::SasTable;

    /// Model with every row equal to the uniform distribution 1/S.
    static TransitionModel uniform(std::size_t horizon, std::size_t states, std::size_t actions);

    /// Throws StructuralError unless every row is nonnegative and sums to 1.
    void validate(double tol = 1e-9) const;

    /// max over (h,s,a) of the number of next states with positive probability.
    std::size_t branching_factor() const;
};

/// Markov non-stationary randomized policy pi_h(a|s).
class Policy : public StageTable {
public:
    using StageTable::StageTable;

    static Policy uniform(std::size_t horizon, std::size_t states, std::size_t actions);

    void validate(double tol = 1e-9) const;
    bool is_deterministic(double tol = 1e-12) const;
};

/// Per-step state-action distribution q_h(s,a).
class OccupancyMeasure : public StageTable {
public:
    using StageTable::StageTable;

    /// Largest deviation of a layer's total mass from one.
    double max_layer_mass_error() const;
};

/// V_h(s) for h in [0, H] (V_H = 0) and Q_h(s,a) for h in [0, H).
struct ValueTable {
    std::vector<double> v;
    StageTable q_values;

    double value(std::size_t h, std::size_t s) const { return v[h * q_values.states() + s]; }
    /// sum_s mu(s) V_0(s).
    double initial_value(std::span<const double> mu) const;
};

/// Ground-truth constrained MDP.
struct Cmdp {
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    std::size_t horizon = 0;
    TransitionModel transitions;
    StageTable mean_costs;
    std::vector<StageTable> constraint_costs;
    std::vector<double> thresholds;
    std::vector<double> initial_dist;

    std::size_t num_constraints() const { return constraint_costs.size(); }
    std::size_t branching_factor() const { return transitions.branching_factor(); }

    /// Throws StructuralError on any dimension or range violation.
    void validate() const;
};

ValueTable policy_value(const StageTable& costs, const TransitionModel& transitions,
                        const Policy& policy);

OccupancyMeasure occupancy_from_policy(const Policy& policy, const TransitionModel& transitions,
                                       std::span<const double> initial_dist);

/// Normalizes q per (h,s); rows with mass <= 1e-12 become uniform.
Policy policy_from_occupancy(const OccupancyMeasure& q);

/// sum_{h,s,a} q_h(s,a) l_h(s,a).
double value_from_occupancy(const OccupancyMeasure& q, const StageTable& costs);

/// Largest violation of the flow equations and the initial-layer equation of
/// q with respect to the model and initial distribution.
double flow_residual(const OccupancyMeasure& q, const TransitionModel& transitions,
                     std::span<const double> initial_dist);

} // namespace cmdpx
