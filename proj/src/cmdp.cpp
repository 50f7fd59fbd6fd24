#include "cmdpx/cmdp.hpp"

#include "cmdpx/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cmdpx {

namespace {

void require(bool condition, const char* message) {
    if (!condition) throw StructuralError(message);
}

bool is_distribution(std::span<const double> row, double tol) {
    double total = 0.0;
    for (double value : row) {
        if (!(value >= 0.0)) return false;
        total += value;
    }
    return std::abs(total - 1.0) <= tol;
}

} // namespace

StageTable::StageTable(std::size_t horizon, std::size_t states, std::size_t actions, double fill)
    : horizon_(horizon), states_(states), actions_(actions),
      data_(horizon * states * actions, fill) {}

SasTable::SasTable(std::size_t horizon, std::size_t states, std::size_t actions, double fill)
    : horizon_(horizon), states_(states), actions_(actions),
      data_(horizon * states * actions * states, fill) {}

TransitionModel TransitionModel::uniform(std::size_t horizon, std::size_t states,
                                         std::size_t actions) {
    return TransitionModel(horizon, states, actions, 1.0 / static_cast<double>(states));
}

void TransitionModel::validate(double tol) const {
    for (std::size_t h = 0; h < horizon(); ++h)
        for (std::size_t s = 0; s < states(); ++s)
            for (std::size_t a = 0; a < actions(); ++a)
                if (!is_distribution(row(h, s, a), tol))
                    throw StructuralError("transition row (" + std::to_string(h) + "," +
                                          std::to_string(s) + "," + std::to_string(a) +
                                          ") is not a distribution");
}

std::size_t TransitionModel::branching_factor() const {
    std::size_t branching = 0;
    for (std::size_t h = 0; h < horizon(); ++h)
        for (std::size_t s = 0; s < states(); ++s)
            for (std::size_t a = 0; a < actions(); ++a) {
                auto r = row(h, s, a);
                auto support = static_cast<std::size_t>(
                    std::count_if(r.begin(), r.end(), [](double p) { return p > 0.0; }));
                branching = std::max(branching, support);
            }
    return branching;
}

Policy Policy::uniform(std::size_t horizon, std::size_t states, std::size_t actions) {
    return Policy(horizon, states, actions, 1.0 / static_cast<double>(actions));
}

void Policy::validate(double tol) const {
    for (std::size_t h = 0; h < horizon(); ++h)
        for (std::size_t s = 0; s < states(); ++s)
            if (!is_distribution(row(h, s), tol))
                throw StructuralError("policy row (" + std::to_string(h) + "," +
                                      std::to_string(s) + ") is not a distribution");
}

bool Policy::is_deterministic(double tol) const {
    for (std::size_t h = 0; h < horizon(); ++h)
        for (std::size_t s = 0; s < states(); ++s) {
            auto r = row(h, s);
            if (*std::max_element(r.begin(), r.end()) < 1.0 - tol) return false;
        }
    return true;
}

double OccupancyMeasure::max_layer_mass_error() const {
    double worst = 0.0;
    for (std::size_t h = 0; h < horizon(); ++h) {
        double mass = 0.0;
        for (std::size_t s = 0; s < states(); ++s)
            for (double value : row(h, s)) mass += value;
        worst = std::max(worst, std::abs(mass - 1.0));
    }
    return worst;
}

double ValueTable::initial_value(std::span<const double> mu) const {
    double total = 0.0;
    for (std::size_t s = 0; s < mu.size(); ++s) total += mu[s] * value(0, s);
    return total;
}

void Cmdp::validate() const {
    const std::size_t S = num_states, A = num_actions, H = horizon;
    require(S > 0 && A > 0 && H > 0, "cmdp dimensions must be positive");
    require(transitions.horizon() == H && transitions.states() == S &&
                transitions.actions() == A,
            "transition tensor shape mismatch");
    transitions.validate();
    require(mean_costs.horizon() == H && mean_costs.states() == S && mean_costs.actions() == A,
            "cost table shape mismatch");
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    for (double c : mean_costs.flat()) require(in_unit(c), "costs must lie in [0,1]");
    require(thresholds.size() == constraint_costs.size(),
            "one threshold per constraint is required");
    for (std::size_t i = 0; i < constraint_costs.size(); ++i) {
        require(constraint_costs[i].same_shape(mean_costs), "constraint cost shape mismatch");
        for (double d : constraint_costs[i].flat())
            require(in_unit(d), "constraint costs must lie in [0,1]");
        require(thresholds[i] >= 0.0 && thresholds[i] <= static_cast<double>(H),
                "thresholds must lie in [0,H]");
    }
    require(initial_dist.size() == S, "initial distribution size mismatch");
    require(is_distribution(initial_dist, 1e-9), "initial distribution must sum to one");
}

ValueTable policy_value(const StageTable& costs, const TransitionModel& transitions,
                        const Policy& policy) {
    const std::size_t H = costs.horizon(), S = costs.states(), A = costs.actions();
    require(policy.same_shape(costs), "policy/cost shape mismatch");
    require(transitions.horizon() == H && transitions.states() == S && transitions.actions() == A,
            "transition/cost shape mismatch");

    ValueTable out{std::vector<double>((H + 1) * S, 0.0), StageTable(H, S, A)};
    for (std::size_t h = H; h-- > 0;) {
        std::span<const double> next(out.v.data() + (h + 1) * S, S);
        for (std::size_t s = 0; s < S; ++s) {
            double v = 0.0;
            for (std::size_t a = 0; a < A; ++a) {
                auto p = transitions.row(h, s, a);
                double q = costs(h, s, a);
                for (std::size_t n = 0; n < S; ++n) q += p[n] * next[n];
                out.q_values(h, s, a) = q;
                v += policy(h, s, a) * q;
            }
            out.v[h * S + s] = v;
        }
    }
    return out;
}

OccupancyMeasure occupancy_from_policy(const Policy& policy, const TransitionModel& transitions,
                                       std::span<const double> initial_dist) {
    const std::size_t H = policy.horizon(), S = policy.states(), A = policy.actions();
    require(transitions.horizon() == H && transitions.states() == S && transitions.actions() == A,
            "transition/policy shape mismatch");
    require(initial_dist.size() == S, "initial distribution size mismatch");

    OccupancyMeasure q(H, S, A);
    std::vector<double> state_mass(initial_dist.begin(), initial_dist.end());
    std::vector<double> next_mass(S);
    for (std::size_t h = 0; h < H; ++h) {
        std::fill(next_mass.begin(), next_mass.end(), 0.0);
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t a = 0; a < A; ++a) {
                const double mass = state_mass[s] * policy(h, s, a);
                q(h, s, a) = mass;
                if (mass == 0.0) continue;
                auto p = transitions.row(h, s, a);
                for (std::size_t n = 0; n < S; ++n) next_mass[n] += p[n] * mass;
            }
        state_mass.swap(next_mass);
    }
    return q;
}

Policy policy_from_occupancy(const OccupancyMeasure& q) {
    const std::size_t H = q.horizon(), S = q.states(), A = q.actions();
    Policy policy(H, S, A);
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t s = 0; s < S; ++s) {
            auto in = q.row(h, s);
            auto out = policy.row(h, s);
            double total = 0.0;
            for (double value : in) {
                require(value >= 0.0, "occupancy entries must be nonnegative");
                total += value;
            }
            if (total > 1e-12) {
                for (std::size_t a = 0; a < A; ++a) out[a] = in[a] / total;
            } else {
                std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(A));
            }
        }
    return policy;
}

double value_from_occupancy(const OccupancyMeasure& q, const StageTable& costs) {
    require(q.same_shape(costs), "occupancy/cost shape mismatch");
    double total = 0.0;
    auto qs = q.flat();
    auto cs = costs.flat();
    for (std::size_t j = 0; j < qs.size(); ++j) total += qs[j] * cs[j];
    return total;
}

double flow_residual(const OccupancyMeasure& q, const TransitionModel& transitions,
                     std::span<const double> initial_dist) {
    const std::size_t H = q.horizon(), S = q.states(), A = q.actions();
    require(initial_dist.size() == S, "initial distribution size mismatch");
    double worst = 0.0;
    std::vector<double> inflow(initial_dist.begin(), initial_dist.end());
    for (std::size_t h = 0; h < H; ++h) {
        std::vector<double> next(S, 0.0);
        for (std::size_t s = 0; s < S; ++s) {
            double outflow = 0.0;
            for (std::size_t a = 0; a < A; ++a) {
                outflow += q(h, s, a);
                auto p = transitions.row(h, s, a);
                for (std::size_t n = 0; n < S; ++n) next[n] += p[n] * q(h, s, a);
            }
            worst = std::max(worst, std::abs(outflow - inflow[s]));
        }
        inflow.swap(next);
    }
    return worst;
}

} // namespace cmdpx
