#include <doctest.h>

#include "cmdpx/cmdp.hpp"
#include "cmdpx/envs.hpp"
#include "cmdpx/errors.hpp"
#include "support.hpp"

#include <cmath>
#include <vector>

using namespace cmdpx;
using namespace cmdpx::testing;

namespace {

Cmdp single_state(std::size_t H, std::size_t A, double cost) {
    Cmdp m;
    m.num_states = 1;
    m.num_actions = A;
    m.horizon = H;
    m.transitions = TransitionModel(H, 1, A, 1.0);
    m.mean_costs = StageTable(H, 1, A, cost);
    m.initial_dist = {1.0};
    return m;
}

} // namespace

TEST_CASE("policy_value on one-state instances") {
    {
        Cmdp m = single_state(1, 1, 0.4);
        auto v = policy_value(m.mean_costs, m.transitions, Policy::uniform(1, 1, 1));
        CHECK(v.value(0, 0) == doctest::Approx(0.4).epsilon(1e-15));
        CHECK(v.value(1, 0) == 0.0);
    }
    {
        Cmdp m = single_state(2, 1, 1.0);
        auto v = policy_value(m.mean_costs, m.transitions, Policy::uniform(2, 1, 1));
        CHECK(v.initial_value(m.initial_dist) == doctest::Approx(2.0).epsilon(1e-15));
    }
}

TEST_CASE("policy_value rejects mismatched shapes") {
    StageTable c(2, 2, 2);
    TransitionModel p = TransitionModel::uniform(2, 2, 2);
    CHECK_THROWS_AS(policy_value(c, p, Policy::uniform(2, 3, 2)), StructuralError);
    CHECK_THROWS_AS(policy_value(StageTable(3, 2, 2), p, Policy::uniform(2, 2, 2)),
                    StructuralError);
    CHECK_THROWS_AS(occupancy_from_policy(Policy::uniform(2, 2, 2), p, std::vector<double>{1.0}),
                    StructuralError);
}

TEST_CASE("Cmdp validation catches range violations") {
    Cmdp m = random_cmdp({});
    CHECK_NOTHROW(m.validate());
    Cmdp bad = m;
    bad.mean_costs(0, 0, 0) = 1.5;
    CHECK_THROWS_AS(bad.validate(), StructuralError);
    bad = m;
    bad.thresholds[0] = static_cast<double>(m.horizon) + 0.1;
    CHECK_THROWS_AS(bad.validate(), StructuralError);
    bad = m;
    bad.initial_dist[0] += 0.01;
    CHECK_THROWS_AS(bad.validate(), StructuralError);
    bad = m;
    bad.transitions(0, 0, 0, 0) += 0.01;
    CHECK_THROWS_AS(bad.validate(), StructuralError);
}

TEST_CASE("occupancy of a deterministic chain follows the unique path") {
    const std::size_t H = 4, S = 4, A = 2;
    TransitionModel p(H, S, A);
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t a = 0; a < A; ++a) p(h, s, a, (s + 1 + a) % S) = 1.0;
    Policy pi(H, S, A);
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t s = 0; s < S; ++s) pi(h, s, s % 2) = 1.0;
    auto q = occupancy_from_policy(pi, p, std::vector<double>{1.0, 0.0, 0.0, 0.0});
    std::size_t s = 0;
    for (std::size_t h = 0; h < H; ++h) {
        const std::size_t a = s % 2;
        for (std::size_t x = 0; x < S; ++x)
            for (std::size_t b = 0; b < A; ++b)
                CHECK(q(h, x, b) == (x == s && b == a ? 1.0 : 0.0));
        s = (s + 1 + a) % S;
    }
}

TEST_CASE("uniform policy on one state splits the first layer") {
    Cmdp m = single_state(1, 2, 0.0);
    auto q = occupancy_from_policy(Policy::uniform(1, 1, 2), m.transitions, m.initial_dist);
    CHECK(q(0, 0, 0) == 0.5);
    CHECK(q(0, 0, 1) == 0.5);
}

TEST_CASE("policy_from_occupancy normalizes and falls back to uniform") {
    OccupancyMeasure q(1, 2, 2);
    q(0, 0, 0) = 0.25;
    q(0, 0, 1) = 0.75;
    auto pi = policy_from_occupancy(q);
    CHECK(pi(0, 0, 0) == doctest::Approx(0.25));
    CHECK(pi(0, 0, 1) == doctest::Approx(0.75));
    CHECK(pi(0, 1, 0) == 0.5);
    CHECK(pi(0, 1, 1) == 0.5);
}

TEST_CASE("value_from_occupancy on constant costs") {
    Rng rng(3);
    auto p = random_model(5, 3, 2, rng);
    auto q = occupancy_from_policy(random_policy(5, 3, 2, rng), p, std::vector<double>{0.2, 0.3, 0.5});
    CHECK(value_from_occupancy(q, StageTable(5, 3, 2, 0.0)) == 0.0);
    CHECK(value_from_occupancy(q, StageTable(5, 3, 2, 1.0)) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("occupancy algebra on 100 random instances") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        CAPTURE(seed);
        RandomCmdpParams params;
        params.states = 2 + seed % 4;
        params.actions = 2 + seed % 3;
        params.horizon = 1 + seed % 5;
        params.branching = 1 + seed % params.states;
        params.seed = seed;
        const Cmdp m = random_cmdp(params);
        Rng rng(split_seed(seed, 77));
        const Policy pi = random_policy(m.horizon, m.num_states, m.num_actions, rng);
        const auto q = occupancy_from_policy(pi, m.transitions, m.initial_dist);

        CHECK(q.max_layer_mass_error() <= 1e-8);
        CHECK(flow_residual(q, m.transitions, m.initial_dist) <= 1e-8);
        for (double x : q.flat()) CHECK(x >= 0.0);

        const auto values = policy_value(m.mean_costs, m.transitions, pi);
        CHECK(std::abs(value_from_occupancy(q, m.mean_costs) - values.initial_value(m.initial_dist)) <=
              1e-9);
        for (const StageTable& d : m.constraint_costs)
            CHECK(std::abs(value_from_occupancy(q, d) -
                           initial_value(d, m.transitions, pi, m.initial_dist)) <= 1e-9);

        const Policy back = policy_from_occupancy(q);
        for (std::size_t h = 0; h < m.horizon; ++h)
            for (std::size_t s = 0; s < m.num_states; ++s) {
                double mass = 0.0;
                for (std::size_t a = 0; a < m.num_actions; ++a) mass += q(h, s, a);
                if (mass <= 1e-9) continue;
                for (std::size_t a = 0; a < m.num_actions; ++a)
                    CHECK(std::abs(back(h, s, a) - pi(h, s, a)) <= 1e-9);
            }
        CHECK_NOTHROW(back.validate());

        for (std::size_t h = 0; h <= m.horizon; ++h)
            for (std::size_t s = 0; s < m.num_states; ++s) {
                const double v = values.value(h, s);
                CHECK(v >= 0.0);
                CHECK(v <= static_cast<double>(m.horizon - h) + 1e-12);
                if (h == m.horizon) continue;
                double mix = 0.0;
                for (std::size_t a = 0; a < m.num_actions; ++a)
                    mix += pi(h, s, a) * values.q_values(h, s, a);
                CHECK(std::abs(mix - v) <= 1e-9);
            }
    }
}

TEST_CASE("policy_value and occupancy agree with Monte Carlo rollouts") {
    RandomCmdpParams params;
    params.states = 3;
    params.actions = 2;
    params.horizon = 4;
    params.branching = 3;
    params.seed = 11;
    const Cmdp m = random_cmdp(params);
    Rng policy_rng(5);
    const Policy pi = random_policy(4, 3, 2, policy_rng);
    const auto q = occupancy_from_policy(pi, m.transitions, m.initial_dist);
    const double exact = policy_value(m.mean_costs, m.transitions, pi).initial_value(m.initial_dist);

    constexpr std::size_t kRuns = 1000000;
    double sum = 0.0, sum_sq = 0.0;
    StageTable visits(4, 3, 2);
    Rng rng(123);
    for (std::size_t run = 0; run < kRuns; ++run) {
        const Trajectory t = sample_trajectory(m, pi, rng);
        double cost = 0.0;
        for (std::size_t h = 0; h < t.steps.size(); ++h) {
            cost += t.steps[h].cost;
            visits(h, t.steps[h].state, t.steps[h].action) += 1.0;
        }
        sum += cost;
        sum_sq += cost * cost;
    }
    const double n = static_cast<double>(kRuns);
    const double mean = sum / n;
    const double se = std::sqrt((sum_sq / n - mean * mean) / n);
    CHECK(std::abs(mean - exact) <= 3.0 * se);

    for (std::size_t j = 0; j < q.size(); ++j) {
        const double f = visits.flat()[j] / n;
        const double p = q.flat()[j];
        const double q_se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / n);
        CAPTURE(j);
        CHECK(std::abs(f - p) <= 3.0 * q_se);
    }
}
