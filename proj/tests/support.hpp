#pragma once

// Small oracles and builders shared by the unit tests.

#include "cmdpx/cmdp.hpp"
#include "cmdpx/envs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

namespace cmdpx::testing {

inline Policy random_policy(std::size_t H, std::size_t S, std::size_t A, Rng& rng) {
    Policy pi(H, S, A);
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t s = 0; s < S; ++s) {
            auto row = pi.row(h, s);
            double total = 0.0;
            for (double& x : row) {
                x = -std::log1p(-rng.uniform()) + 1e-3;
                total += x;
            }
            for (double& x : row) x /= total;
        }
    return pi;
}

inline StageTable random_table(std::size_t H, std::size_t S, std::size_t A, Rng& rng,
                               double lo = 0.0, double hi = 1.0) {
    StageTable t(H, S, A);
    for (double& x : t.flat()) x = lo + (hi - lo) * rng.uniform();
    return t;
}

inline TransitionModel random_model(std::size_t H, std::size_t S, std::size_t A, Rng& rng) {
    TransitionModel p(H, S, A);
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t a = 0; a < A; ++a) {
                auto row = p.row(h, s, a);
                double total = 0.0;
                for (double& x : row) {
                    x = -std::log1p(-rng.uniform());
                    total += x;
                }
                for (double& x : row) x /= total;
            }
    return p;
}

/// Calls f on every deterministic Markov policy (A^{SH} of them).
inline void for_each_deterministic_policy(std::size_t H, std::size_t S, std::size_t A,
                                          const std::function<void(const Policy&)>& f) {
    const std::size_t cells = H * S;
    std::vector<std::size_t> choice(cells, 0);
    while (true) {
        Policy pi(H, S, A);
        for (std::size_t c = 0; c < cells; ++c) pi(c / S, c % S, choice[c]) = 1.0;
        f(pi);
        std::size_t c = 0;
        while (c < cells && ++choice[c] == A) choice[c++] = 0;
        if (c == cells) return;
    }
}

/// Unconstrained optimum by backward induction with min over actions.
inline double dp_min_value(const StageTable& costs, const TransitionModel& p,
                           const std::vector<double>& mu) {
    const std::size_t H = costs.horizon(), S = costs.states(), A = costs.actions();
    std::vector<double> v(S, 0.0), next(S, 0.0);
    for (std::size_t h = H; h-- > 0;) {
        for (std::size_t s = 0; s < S; ++s) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < A; ++a) {
                double q = costs(h, s, a);
                for (std::size_t n = 0; n < S; ++n) q += p(h, s, a, n) * v[n];
                best = std::min(best, q);
            }
            next[s] = best;
        }
        v = next;
    }
    double total = 0.0;
    for (std::size_t s = 0; s < S; ++s) total += mu[s] * v[s];
    return total;
}

inline double initial_value(const StageTable& costs, const TransitionModel& p, const Policy& pi,
                            const std::vector<double>& mu) {
    return policy_value(costs, p, pi).initial_value(mu);
}

} // namespace cmdpx::testing
