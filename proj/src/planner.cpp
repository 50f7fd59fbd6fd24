#include "cmdpx/planner.hpp"

#include "cmdpx/errors.hpp"

#include <algorithm>
#include <string>

namespace cmdpx {

namespace {

void check_model_inputs(const TransitionModel& p, const StageTable& costs,
                        const std::vector<StageTable>& constraint_costs,
                        std::span<const double> alphas, std::span<const double> mu) {
    if (p.horizon() != costs.horizon() || p.states() != costs.states() ||
        p.actions() != costs.actions())
        throw StructuralError("model/cost shape mismatch");
    if (constraint_costs.size() != alphas.size())
        throw StructuralError("one threshold per constraint is required");
    for (const StageTable& d : constraint_costs)
        if (!d.same_shape(costs)) throw StructuralError("constraint cost shape mismatch");
    if (mu.size() != p.states()) throw StructuralError("initial distribution size mismatch");
}

std::vector<double> constraint_values(const OccupancyMeasure& q,
                                      const std::vector<StageTable>& constraint_costs) {
    std::vector<double> values;
    values.reserve(constraint_costs.size());
    for (const StageTable& d : constraint_costs) values.push_back(value_from_occupancy(q, d));
    return values;
}

OccupancyMeasure occupancy_from_solution(const std::vector<double>& x, std::size_t H,
                                         std::size_t S, std::size_t A) {
    OccupancyMeasure q(H, S, A);
    auto flat = q.flat();
    for (std::size_t j = 0; j < flat.size(); ++j) flat[j] = std::max(x[j], 0.0);
    return q;
}

} // namespace

lp::LinearProgram build_occupancy_lp(const TransitionModel& p, const StageTable& costs,
                                     const std::vector<StageTable>& constraint_costs,
                                     std::span<const double> alphas,
                                     std::span<const double> mu) {
    check_model_inputs(p, costs, constraint_costs, alphas, mu);
    const std::size_t H = costs.horizon(), S = costs.states(), A = costs.actions();
    lp::LinearProgram program(H * S * A);
    for (std::size_t j = 0; j < costs.size(); ++j) program.set_objective(j, costs.flat()[j]);

    for (std::size_t i = 0; i < constraint_costs.size(); ++i) {
        std::vector<lp::Term> terms;
        auto d = constraint_costs[i].flat();
        for (std::size_t j = 0; j < d.size(); ++j)
            if (d[j] != 0.0) terms.push_back({j, d[j]});
        program.add_le(std::move(terms), alphas[i]);
    }
    for (std::size_t s = 0; s < S; ++s) {
        std::vector<lp::Term> terms;
        for (std::size_t a = 0; a < A; ++a) terms.push_back({costs.index(0, s, a), 1.0});
        program.add_eq(std::move(terms), mu[s]);
    }
    for (std::size_t h = 1; h < H; ++h)
        for (std::size_t s = 0; s < S; ++s) {
            std::vector<lp::Term> terms;
            for (std::size_t a = 0; a < A; ++a) terms.push_back({costs.index(h, s, a), 1.0});
            for (std::size_t prev = 0; prev < S; ++prev)
                for (std::size_t a = 0; a < A; ++a) {
                    const double prob = p(h - 1, prev, a, s);
                    if (prob != 0.0) terms.push_back({costs.index(h - 1, prev, a), -prob});
                }
            program.add_eq(std::move(terms), 0.0);
        }
    return program;
}

namespace {

template <typename Infeasible>
PlanResult solve_occupancy_lp(const TransitionModel& p, const StageTable& costs,
                              const std::vector<StageTable>& constraint_costs,
                              std::span<const double> alphas, std::span<const double> mu,
                              const char* failure_message) {
    const lp::LinearProgram program = build_occupancy_lp(p, costs, constraint_costs, alphas, mu);
    const lp::Solution sol = lp::solve(program);
    if (sol.status == lp::Status::Infeasible) throw Infeasible(failure_message);
    if (sol.status != lp::Status::Optimal)
        throw SolverError("occupancy LP returned status " + std::string(lp::to_string(sol.status)));

    PlanResult plan;
    plan.occupancy = occupancy_from_solution(sol.x, costs.horizon(), costs.states(), costs.actions());
    plan.policy = policy_from_occupancy(plan.occupancy);
    plan.optimistic_value = value_from_occupancy(plan.occupancy, costs);
    plan.constraint_values = constraint_values(plan.occupancy, constraint_costs);
    return plan;
}

} // namespace

PlanResult solve_cmdp_exact(const Cmdp& cmdp) {
    cmdp.validate();
    return solve_occupancy_lp<CmdpInfeasible>(cmdp.transitions, cmdp.mean_costs,
                                              cmdp.constraint_costs, cmdp.thresholds,
                                              cmdp.initial_dist,
                                              "no policy satisfies the constraints");
}

PlanResult solve_bonus_cmdp(const TransitionModel& p_bar, const StageTable& c_tilde,
                            const std::vector<StageTable>& d_tilde,
                            std::span<const double> alphas, std::span<const double> mu) {
    return solve_occupancy_lp<OptimisticInfeasible>(p_bar, c_tilde, d_tilde, alphas, mu,
                                                    "optimistic CMDP LP is infeasible");
}

lp::LinearProgram build_extended_lp(const TransitionModel& p_hat, const SasTable& beta_p,
                                    const StageTable& c_tilde,
                                    const std::vector<StageTable>& d_tilde,
                                    std::span<const double> alphas,
                                    std::span<const double> mu) {
    check_model_inputs(p_hat, c_tilde, d_tilde, alphas, mu);
    if (!beta_p.same_shape(p_hat)) throw StructuralError("width tensor shape mismatch");
    const std::size_t H = c_tilde.horizon(), S = c_tilde.states(), A = c_tilde.actions();
    auto var = [S, A](std::size_t h, std::size_t s, std::size_t a, std::size_t n) {
        return ((h * S + s) * A + a) * S + n;
    };
    lp::LinearProgram program(H * S * A * S);
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t a = 0; a < A; ++a)
                for (std::size_t n = 0; n < S; ++n)
                    program.set_objective(var(h, s, a, n), c_tilde(h, s, a));

    for (std::size_t i = 0; i < d_tilde.size(); ++i) {
        std::vector<lp::Term> terms;
        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t s = 0; s < S; ++s)
                for (std::size_t a = 0; a < A; ++a) {
                    const double d = d_tilde[i](h, s, a);
                    if (d == 0.0) continue;
                    for (std::size_t n = 0; n < S; ++n) terms.push_back({var(h, s, a, n), d});
                }
        program.add_le(std::move(terms), alphas[i]);
    }
    for (std::size_t s = 0; s < S; ++s) {
        std::vector<lp::Term> terms;
        for (std::size_t a = 0; a < A; ++a)
            for (std::size_t n = 0; n < S; ++n) terms.push_back({var(0, s, a, n), 1.0});
        program.add_eq(std::move(terms), mu[s]);
    }
    for (std::size_t h = 1; h < H; ++h)
        for (std::size_t s = 0; s < S; ++s) {
            std::vector<lp::Term> terms;
            for (std::size_t a = 0; a < A; ++a)
                for (std::size_t n = 0; n < S; ++n) terms.push_back({var(h, s, a, n), 1.0});
            for (std::size_t prev = 0; prev < S; ++prev)
                for (std::size_t a = 0; a < A; ++a) terms.push_back({var(h - 1, prev, a, s), -1.0});
            program.add_eq(std::move(terms), 0.0);
        }
    // Box rows. An upper factor >= 1 or a lower factor <= 0 gives a row that
    // every z >= 0 satisfies; those rows are not emitted.
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t a = 0; a < A; ++a)
                for (std::size_t n = 0; n < S; ++n) {
                    const double upper = p_hat(h, s, a, n) + beta_p(h, s, a, n);
                    const double lower = p_hat(h, s, a, n) - beta_p(h, s, a, n);
                    if (upper < 1.0) {
                        std::vector<lp::Term> terms;
                        for (std::size_t y = 0; y < S; ++y)
                            terms.push_back({var(h, s, a, y), (y == n ? 1.0 : 0.0) - upper});
                        program.add_le(std::move(terms), 0.0);
                    }
                    if (lower > 0.0) {
                        std::vector<lp::Term> terms;
                        for (std::size_t y = 0; y < S; ++y)
                            terms.push_back({var(h, s, a, y), lower - (y == n ? 1.0 : 0.0)});
                        program.add_le(std::move(terms), 0.0);
                    }
                }
    return program;
}

PlanResult solve_optcmdp_extended(const TransitionModel& p_hat, const SasTable& beta_p,
                                  const StageTable& c_tilde,
                                  const std::vector<StageTable>& d_tilde,
                                  std::span<const double> alphas, std::span<const double> mu) {
    for (double w : beta_p.flat())
        if (!(w >= 0.0)) throw StructuralError("transition widths must be nonnegative");
    const lp::LinearProgram program = build_extended_lp(p_hat, beta_p, c_tilde, d_tilde, alphas, mu);
    const lp::Solution sol = lp::solve(program);
    if (sol.status == lp::Status::Infeasible)
        throw OptimisticInfeasible("extended LP is infeasible");
    if (sol.status != lp::Status::Optimal)
        throw SolverError("extended LP returned status " + std::string(lp::to_string(sol.status)));

    const std::size_t H = c_tilde.horizon(), S = c_tilde.states(), A = c_tilde.actions();
    PlanResult plan;
    plan.occupancy = OccupancyMeasure(H, S, A);
    TransitionModel model(H, S, A);
    std::size_t j = 0;
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t a = 0; a < A; ++a) {
                auto row = model.row(h, s, a);
                double mass = 0.0;
                for (std::size_t n = 0; n < S; ++n) {
                    row[n] = std::max(sol.x[j + n], 0.0);
                    mass += row[n];
                }
                j += S;
                plan.occupancy(h, s, a) = mass;
                if (mass > 1e-9) {
                    for (double& v : row) v /= mass;
                } else {
                    auto fallback = p_hat.row(h, s, a);
                    std::copy(fallback.begin(), fallback.end(), row.begin());
                }
            }
    plan.policy = policy_from_occupancy(plan.occupancy);
    plan.optimistic_value = value_from_occupancy(plan.occupancy, c_tilde);
    plan.constraint_values = constraint_values(plan.occupancy, d_tilde);
    plan.chosen_model = std::move(model);
    return plan;
}

} // namespace cmdpx
