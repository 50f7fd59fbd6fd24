#include <doctest.h>

#include "cmdpx/envs.hpp"
#include "cmdpx/errors.hpp"
#include "cmdpx/estimation.hpp"
#include "cmdpx/planner.hpp"
#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

using namespace cmdpx;
using namespace cmdpx::testing;

namespace {

void check_plan(const PlanResult& plan, const TransitionModel& model,
                std::span<const double> alphas, std::span<const double> mu) {
    CHECK(plan.occupancy.max_layer_mass_error() <= 1e-8);
    CHECK(flow_residual(plan.occupancy, model, mu) <= 1e-8);
    CHECK_NOTHROW(plan.policy.validate());
    for (std::size_t i = 0; i < alphas.size(); ++i) CHECK(plan.constraint_values[i] <= alphas[i] + 1e-6);
    const auto replay = occupancy_from_policy(plan.policy, model, mu);
    for (std::size_t j = 0; j < replay.size(); ++j)
        CHECK(std::abs(replay.flat()[j] - plan.occupancy.flat()[j]) <= 1e-8);
}

Cmdp bandit(double c0, double c1, double d0, double d1, double alpha) {
    Cmdp m;
    m.num_states = 1;
    m.num_actions = 2;
    m.horizon = 1;
    m.transitions = TransitionModel(1, 1, 2, 1.0);
    m.mean_costs = StageTable(1, 1, 2);
    m.mean_costs(0, 0, 0) = c0;
    m.mean_costs(0, 0, 1) = c1;
    StageTable d(1, 1, 2);
    d(0, 0, 0) = d0;
    d(0, 0, 1) = d1;
    m.constraint_costs = {d};
    m.thresholds = {alpha};
    m.initial_dist = {1.0};
    return m;
}

// p_hat = (1 - w) p + w u for a random stochastic u, with beta = |p - p_hat| + pad:
// the true model sits inside every box.
std::pair<TransitionModel, SasTable> boxes_around(const TransitionModel& p, Rng& rng, double w,
                                                  double pad) {
    const TransitionModel u = random_model(p.horizon(), p.states(), p.actions(), rng);
    TransitionModel p_hat(p.horizon(), p.states(), p.actions());
    SasTable beta(p.horizon(), p.states(), p.actions());
    for (std::size_t h = 0; h < p.horizon(); ++h)
        for (std::size_t s = 0; s < p.states(); ++s)
            for (std::size_t a = 0; a < p.actions(); ++a)
                for (std::size_t n = 0; n < p.states(); ++n) {
                    p_hat(h, s, a, n) = (1.0 - w) * p(h, s, a, n) + w * u(h, s, a, n);
                    beta(h, s, a, n) = std::abs(p_hat(h, s, a, n) - p(h, s, a, n)) + pad;
                }
    return {p_hat, beta};
}

} // namespace

TEST_CASE("unconstrained exact LP matches exhaustive deterministic search") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        CAPTURE(seed);
        RandomCmdpParams params;
        params.states = 2;
        params.actions = 2 + seed % 2;
        params.horizon = 3;
        params.seed = seed;
        Cmdp m = random_cmdp(params);
        for (double& alpha : m.thresholds) alpha = static_cast<double>(m.horizon);
        const PlanResult plan = solve_cmdp_exact(m);
        double best = std::numeric_limits<double>::infinity();
        for_each_deterministic_policy(m.horizon, m.num_states, m.num_actions, [&](const Policy& pi) {
            best = std::min(best, initial_value(m.mean_costs, m.transitions, pi, m.initial_dist));
        });
        CHECK(std::abs(plan.optimistic_value - best) <= 1e-9);
        CHECK(std::abs(plan.optimistic_value -
                       dp_min_value(m.mean_costs, m.transitions, m.initial_dist)) <= 1e-9);
        check_plan(plan, m.transitions, m.thresholds, m.initial_dist);
    }
}

TEST_CASE("two-armed constrained bandit mixes evenly") {
    const Cmdp m = bandit(0.0, 1.0, 1.0, 0.0, 0.5);
    const PlanResult plan = solve_cmdp_exact(m);
    CHECK(plan.optimistic_value == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(plan.occupancy(0, 0, 0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(plan.occupancy(0, 0, 1) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(!plan.chosen_model.has_value());

    double grid_best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 1000; ++i) {
        const double x = i / 1000.0;
        if (x * 1.0 <= 0.5 + 1e-12) grid_best = std::min(grid_best, (1.0 - x) * 1.0);
    }
    CHECK(std::abs(plan.optimistic_value - grid_best) <= 1e-9);
}

TEST_CASE("unit constraint cost with a zero threshold is infeasible") {
    Cmdp m = random_cmdp({});
    for (double& d : m.constraint_costs[0].flat()) d = 1.0;
    m.thresholds[0] = 0.0;
    CHECK_THROWS_AS(solve_cmdp_exact(m), CmdpInfeasible);
}

TEST_CASE("exact plans satisfy occupancy and constraint invariants") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        CAPTURE(seed);
        RandomCmdpParams params;
        params.states = 3 + seed % 3;
        params.actions = 2 + seed % 2;
        params.horizon = 2 + seed % 3;
        params.constraints = 1 + seed % 3;
        params.branching = 2;
        params.seed = seed;
        const Cmdp m = random_cmdp(params);
        const PlanResult plan = solve_cmdp_exact(m);
        check_plan(plan, m.transitions, m.thresholds, m.initial_dist);
        CHECK(std::abs(plan.optimistic_value -
                       initial_value(m.mean_costs, m.transitions, plan.policy, m.initial_dist)) <=
              1e-8);
    }
}

TEST_CASE("occupancy LP orders variables by (h, s, a)") {
    const Cmdp m = random_cmdp({});
    const auto program = build_occupancy_lp(m.transitions, m.mean_costs, m.constraint_costs,
                                            m.thresholds, m.initial_dist);
    REQUIRE(program.num_vars() == m.mean_costs.size());
    for (std::size_t h = 0; h < m.horizon; ++h)
        for (std::size_t s = 0; s < m.num_states; ++s)
            for (std::size_t a = 0; a < m.num_actions; ++a)
                CHECK(program.objective()[(h * m.num_states + s) * m.num_actions + a] ==
                      m.mean_costs(h, s, a));
    CHECK(program.eq_rows().size() == m.horizon * m.num_states);
    CHECK(program.le_rows().size() == m.num_constraints());
}

TEST_CASE("extended LP with zero widths reproduces the exact LP") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        CAPTURE(seed);
        RandomCmdpParams params;
        params.seed = seed;
        params.constraints = 1 + seed % 2;
        const Cmdp m = random_cmdp(params);
        const SasTable zero(m.horizon, m.num_states, m.num_actions);
        const PlanResult ext = solve_optcmdp_extended(m.transitions, zero, m.mean_costs,
                                                      m.constraint_costs, m.thresholds, m.initial_dist);
        const PlanResult exact = solve_cmdp_exact(m);
        CHECK(std::abs(ext.optimistic_value - exact.optimistic_value) <= 1e-5);
        REQUIRE(ext.chosen_model.has_value());
        check_plan(ext, *ext.chosen_model, m.thresholds, m.initial_dist);
    }
}

TEST_CASE("extended LP without data is feasible and nonpositive") {
    const Cmdp m = random_cmdp({});
    EstimatorState state(m.num_states, m.num_actions, m.horizon, m.num_constraints(), 100, 0.1);
    const Widths w = compute_widths(state);
    for (double b : w.beta_p.flat()) REQUIRE(b >= 1.0);
    const OptimisticCosts costs = optimistic_costs(state, w, OptimismMode::Width);
    for (double c : costs.c_tilde.flat()) REQUIRE(c <= 0.0);
    const PlanResult plan = solve_optcmdp_extended(state.empirical_transitions(), w.beta_p,
                                                   costs.c_tilde, costs.d_tilde, m.thresholds,
                                                   m.initial_dist);
    CHECK(plan.optimistic_value <= 0.0);
    CHECK(solve_cmdp_exact(m).optimistic_value >= 0.0);
    REQUIRE(plan.chosen_model.has_value());
    CHECK_NOTHROW(plan.chosen_model->validate(1e-6));
}

TEST_CASE("extended LP is optimistic when the true model lies in the boxes") {
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
        CAPTURE(seed);
        RandomCmdpParams params;
        params.seed = seed;
        params.states = 3 + seed % 2;
        const Cmdp m = random_cmdp(params);
        Rng rng(split_seed(seed, 5));
        auto [p_hat, beta] = boxes_around(m.transitions, rng, 0.3, 0.02 * (seed % 4));
        StageTable c_tilde = m.mean_costs;
        for (double& c : c_tilde.flat()) c -= 0.1 * rng.uniform();
        std::vector<StageTable> d_tilde = m.constraint_costs;
        for (StageTable& d : d_tilde)
            for (double& x : d.flat()) x -= 0.1 * rng.uniform();

        const PlanResult plan =
            solve_optcmdp_extended(p_hat, beta, c_tilde, d_tilde, m.thresholds, m.initial_dist);
        const double v_star = solve_cmdp_exact(m).optimistic_value;
        CHECK(plan.optimistic_value <= v_star + 1e-6);

        // Recovered model stays inside the boxes wherever the plan puts mass.
        REQUIRE(plan.chosen_model.has_value());
        const TransitionModel& p_tilde = *plan.chosen_model;
        CHECK_NOTHROW(p_tilde.validate(1e-6));
        for (std::size_t h = 0; h < m.horizon; ++h)
            for (std::size_t s = 0; s < m.num_states; ++s)
                for (std::size_t a = 0; a < m.num_actions; ++a) {
                    if (plan.occupancy(h, s, a) <= 1e-9) continue;
                    for (std::size_t n = 0; n < m.num_states; ++n)
                        CHECK(std::abs(p_tilde(h, s, a, n) - p_hat(h, s, a, n)) <=
                              beta(h, s, a, n) + 1e-6);
                }
        check_plan(plan, p_tilde, m.thresholds, m.initial_dist);
    }
}

TEST_CASE("extended LP marginals equal the reported occupancy") {
    const Cmdp m = random_cmdp({.seed = 4});
    Rng rng(8);
    auto [p_hat, beta] = boxes_around(m.transitions, rng, 0.5, 0.05);
    const auto program = build_extended_lp(p_hat, beta, m.mean_costs, m.constraint_costs,
                                           m.thresholds, m.initial_dist);
    const lp::Solution sol = lp::solve(program);
    REQUIRE(sol.status == lp::Status::Optimal);
    const PlanResult plan = solve_optcmdp_extended(p_hat, beta, m.mean_costs, m.constraint_costs,
                                                   m.thresholds, m.initial_dist);
    const std::size_t S = m.num_states;
    for (std::size_t j = 0; j < plan.occupancy.size(); ++j) {
        double marginal = 0.0;
        for (std::size_t n = 0; n < S; ++n) marginal += std::max(sol.x[j * S + n], 0.0);
        CHECK(std::abs(marginal - plan.occupancy.flat()[j]) <= 1e-8);
    }
    CHECK(sol.objective_value == doctest::Approx(plan.optimistic_value).epsilon(1e-9));
}

TEST_CASE("infeasible optimistic problems raise OptimisticInfeasible") {
    Cmdp m = random_cmdp({});
    for (double& d : m.constraint_costs[0].flat()) d = 1.0;
    const SasTable zero(m.horizon, m.num_states, m.num_actions);
    const std::vector<double> alphas{0.0};
    CHECK_THROWS_AS(solve_optcmdp_extended(m.transitions, zero, m.mean_costs, m.constraint_costs,
                                           alphas, m.initial_dist),
                    OptimisticInfeasible);
    CHECK_THROWS_AS(
        solve_bonus_cmdp(m.transitions, m.mean_costs, m.constraint_costs, alphas, m.initial_dist),
        OptimisticInfeasible);
}

TEST_CASE("bonus LP with zero bonuses reproduces the exact LP") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Cmdp m = random_cmdp({.constraints = 2, .seed = seed});
        const PlanResult plan = solve_bonus_cmdp(m.transitions, m.mean_costs, m.constraint_costs,
                                                 m.thresholds, m.initial_dist);
        CHECK(std::abs(plan.optimistic_value - solve_cmdp_exact(m).optimistic_value) <= 1e-5);
        check_plan(plan, m.transitions, m.thresholds, m.initial_dist);
    }
}

TEST_CASE("bonus LP with all-negative costs has a negative value") {
    const Cmdp m = random_cmdp({});
    StageTable c_tilde = m.mean_costs;
    for (double& c : c_tilde.flat()) c -= 2.0;
    const PlanResult plan =
        solve_bonus_cmdp(m.transitions, c_tilde, m.constraint_costs, m.thresholds, m.initial_dist);
    CHECK(plan.optimistic_value < 0.0);
}

TEST_CASE("bonus LP is optimistic on the good event") {
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        CAPTURE(seed);
        const Cmdp m = random_cmdp({.seed = seed});
        EstimatorState state(m.num_states, m.num_actions, m.horizon, 1, 500, 0.1);
        const Policy pi = Policy::uniform(m.horizon, m.num_states, m.num_actions);
        for (std::size_t k = 0; k < 500; ++k) {
            Rng rng(episode_seed(seed, 0, k));
            state.update(sample_trajectory(m, pi, rng));
        }
        const Widths w = compute_widths(state);
        bool good = true;
        for (std::size_t h = 0; h < m.horizon; ++h)
            for (std::size_t s = 0; s < m.num_states; ++s)
                for (std::size_t a = 0; a < m.num_actions; ++a) {
                    good &= std::abs(state.mean_costs()(h, s, a) - m.mean_costs(h, s, a)) <=
                            w.beta_c(h, s, a);
                    good &= std::abs(state.mean_constraint_costs(0)(h, s, a) -
                                     m.constraint_costs[0](h, s, a)) <= w.beta_c(h, s, a);
                    for (std::size_t n = 0; n < m.num_states; ++n)
                        good &= std::abs(state.empirical_transitions()(h, s, a, n) -
                                         m.transitions(h, s, a, n)) <= w.beta_p(h, s, a, n);
                }
        if (!good) continue;
        ++checked;
        const OptimisticCosts costs = optimistic_costs(state, w, OptimismMode::Bonus);
        const PlanResult plan = solve_bonus_cmdp(state.empirical_transitions(), costs.c_tilde,
                                                 costs.d_tilde, m.thresholds, m.initial_dist);
        CHECK(plan.optimistic_value <= solve_cmdp_exact(m).optimistic_value + 1e-6);
    }
    CHECK(checked >= 8);
}
