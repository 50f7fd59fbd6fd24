#include "cmdpx/envs.hpp"

#include "cmdpx/errors.hpp"
#include "cmdpx/planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace cmdpx {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

} // namespace

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t state = seed;
    std::uint64_t mixed = splitmix64(state);
    state = mixed ^ (stream * 0xd1b54a32d192ed03ULL);
    return splitmix64(state);
}

std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t replica, std::uint64_t episode) {
    return split_seed(split_seed(seed, replica), episode);
}

Rng::Rng(std::uint64_t seed) {
    std::uint64_t state = seed;
    for (auto& word : state_) word = splitmix64(state);
}

std::uint64_t Rng::next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::size_t Rng::categorical(std::span<const double> probs) {
    const double u = uniform();
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0.0) continue;
        cumulative += probs[i];
        last_positive = i;
        if (u < cumulative) return i;
    }
    return last_positive;
}

Trajectory sample_trajectory(const Cmdp& cmdp, const Policy& policy, Rng& rng) {
    const std::size_t I = cmdp.num_constraints();
    Trajectory traj;
    traj.steps.reserve(cmdp.horizon);
    std::size_t state = rng.categorical(cmdp.initial_dist);
    for (std::size_t h = 0; h < cmdp.horizon; ++h) {
        Step step;
        step.state = state;
        step.action = rng.categorical(policy.row(h, state));
        step.cost = rng.bernoulli(cmdp.mean_costs(h, state, step.action)) ? 1.0 : 0.0;
        step.constraint_costs.resize(I);
        for (std::size_t i = 0; i < I; ++i)
            step.constraint_costs[i] =
                rng.bernoulli(cmdp.constraint_costs[i](h, state, step.action)) ? 1.0 : 0.0;
        state = rng.categorical(cmdp.transitions.row(h, state, step.action));
        traj.steps.push_back(std::move(step));
    }
    traj.final_state = state;
    return traj;
}

Cmdp random_cmdp(const RandomCmdpParams& params) {
    const std::size_t S = params.states, A = params.actions, H = params.horizon;
    const std::size_t I = params.constraints, N = params.branching;
    if (S == 0 || A == 0 || H == 0) throw StructuralError("dimensions must be positive");
    if (N == 0 || N > S) throw StructuralError("branching factor must lie in [1, S]");
    const double margin = params.slater_margin.value_or(0.25 * static_cast<double>(H));
    if (!(margin > 0.0 && margin < static_cast<double>(H)))
        throw StructuralError("slater margin must lie in (0, H)");

    Rng rng(params.seed);
    Cmdp cmdp;
    cmdp.num_states = S;
    cmdp.num_actions = A;
    cmdp.horizon = H;
    cmdp.transitions = TransitionModel(H, S, A);
    std::vector<std::size_t> order(S);
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t a = 0; a < A; ++a) {
                std::iota(order.begin(), order.end(), std::size_t{0});
                for (std::size_t k = 0; k < N; ++k) {
                    const std::size_t pick = k + static_cast<std::size_t>(rng.next() % (S - k));
                    std::swap(order[k], order[pick]);
                }
                // Dirichlet(1): normalized unit exponentials.
                std::vector<double> weights(N);
                double total = 0.0;
                for (double& w : weights) {
                    w = -std::log1p(-rng.uniform());
                    total += w;
                }
                auto row = cmdp.transitions.row(h, s, a);
                for (std::size_t k = 0; k < N; ++k) row[order[k]] = weights[k] / total;
            }
    cmdp.mean_costs = StageTable(H, S, A);
    for (double& c : cmdp.mean_costs.flat()) c = rng.uniform();
    cmdp.constraint_costs.assign(I, StageTable(H, S, A));
    for (StageTable& d : cmdp.constraint_costs)
        for (double& v : d.flat()) v = rng.uniform();
    cmdp.initial_dist.assign(S, 0.0);
    cmdp.initial_dist[0] = 1.0;

    const OccupancyMeasure uniform_q =
        occupancy_from_policy(Policy::uniform(H, S, A), cmdp.transitions, cmdp.initial_dist);
    const double Hd = static_cast<double>(H);
    for (const StageTable& d : cmdp.constraint_costs) {
        const double v = value_from_occupancy(uniform_q, d);
        cmdp.thresholds.push_back(v + margin * (Hd - v) / Hd);
    }
    cmdp.validate();
    return cmdp;
}

Cmdp hazard_chain(const HazardChainParams& params) {
    const std::size_t L = params.length, H = params.horizon;
    const double kappa = params.hazard_cost;
    if (L < 2) throw StructuralError("hazard chain needs at least two states");
    if (H == 0) throw StructuralError("horizon must be positive");
    if (!(kappa > 0.0 && kappa <= 1.0)) throw StructuralError("hazard cost must lie in (0, 1]");

    constexpr std::size_t kSafe = 0, kFast = 1;
    const std::size_t goal = L - 1;
    Cmdp cmdp;
    cmdp.num_states = L;
    cmdp.num_actions = 2;
    cmdp.horizon = H;
    cmdp.transitions = TransitionModel(H, L, 2);
    cmdp.mean_costs = StageTable(H, L, 2);
    cmdp.constraint_costs.assign(1, StageTable(H, L, 2));
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t s = 0; s < L; ++s) {
            if (s == goal) {
                cmdp.transitions(h, s, kSafe, s) = 1.0;
                cmdp.transitions(h, s, kFast, s) = 1.0;
                continue;
            }
            cmdp.transitions(h, s, kSafe, s + 1) = 1.0;
            cmdp.transitions(h, s, kFast, goal) = 1.0;
            cmdp.mean_costs(h, s, kSafe) = 1.0;
            cmdp.mean_costs(h, s, kFast) = 0.5;
            cmdp.constraint_costs[0](h, s, kFast) = kappa;
        }
    cmdp.thresholds = {0.5 * kappa};
    cmdp.initial_dist.assign(L, 0.0);
    cmdp.initial_dist[0] = 1.0;
    cmdp.validate();
    return cmdp;
}

SlaterAnalysis slater_analysis(const Cmdp& cmdp) {
    cmdp.validate();
    const std::size_t I = cmdp.num_constraints();
    if (I == 0) throw NoSlaterPoint("instance has no constraints");
    const lp::LinearProgram base = build_occupancy_lp(
        cmdp.transitions, cmdp.mean_costs, cmdp.constraint_costs, cmdp.thresholds,
        cmdp.initial_dist);
    const std::size_t n = base.num_vars();

    // Stage one: maximize t subject to d_i.q + t <= alpha_i.
    lp::LinearProgram max_slack(n + 1);
    max_slack.set_bounds(n, -lp::kInfinity, lp::kInfinity);
    max_slack.set_objective(n, -1.0);
    for (const lp::Row& row : base.eq_rows()) max_slack.add_eq(row.terms, row.rhs);
    for (std::size_t i = 0; i < I; ++i) {
        std::vector<lp::Term> terms = base.le_rows()[i].terms;
        terms.push_back({n, 1.0});
        max_slack.add_le(std::move(terms), cmdp.thresholds[i]);
    }
    const lp::Solution first = lp::solve(max_slack);
    if (first.status != lp::Status::Optimal)
        throw SolverError("max-slack LP returned status " + std::string(lp::to_string(first.status)));
    const double best_slack = first.x[n];
    if (best_slack <= 1e-12) throw NoSlaterPoint("no strictly feasible policy exists");

    // Stage two: cheapest policy among those keeping the maximal slack.
    lp::LinearProgram cheapest(n);
    for (std::size_t j = 0; j < n; ++j) cheapest.set_objective(j, base.objective()[j]);
    for (const lp::Row& row : base.eq_rows()) cheapest.add_eq(row.terms, row.rhs);
    for (std::size_t i = 0; i < I; ++i)
        cheapest.add_le(base.le_rows()[i].terms, cmdp.thresholds[i] - best_slack + 1e-10);
    const lp::Solution second = lp::solve(cheapest);
    if (second.status != lp::Status::Optimal)
        throw SolverError("Slater cost LP returned status " + std::string(lp::to_string(second.status)));

    OccupancyMeasure q(cmdp.horizon, cmdp.num_states, cmdp.num_actions);
    for (std::size_t j = 0; j < n; ++j) q.flat()[j] = std::max(second.x[j], 0.0);

    SlaterAnalysis out;
    out.slater_policy = policy_from_occupancy(q);
    out.slater_value = value_from_occupancy(q, cmdp.mean_costs);
    out.slack = lp::kInfinity;
    for (std::size_t i = 0; i < I; ++i)
        out.slack = std::min(out.slack,
                             cmdp.thresholds[i] - value_from_occupancy(q, cmdp.constraint_costs[i]));
    if (out.slack <= 1e-12) throw NoSlaterPoint("no strictly feasible policy exists");
    out.optimal_value = solve_cmdp_exact(cmdp).optimistic_value;
    out.rho = std::max(out.slater_value - out.optimal_value, 0.0) / out.slack;
    return out;
}

double true_rho(const Cmdp& cmdp) { return slater_analysis(cmdp).rho; }

nlohmann::json cmdp_to_json(const Cmdp& cmdp) {
    using nlohmann::json;
    const std::size_t S = cmdp.num_states, A = cmdp.num_actions, H = cmdp.horizon;
    auto stage_json = [&](const StageTable& t) {
        json out = json::array();
        for (std::size_t h = 0; h < H; ++h) {
            json layer = json::array();
            for (std::size_t s = 0; s < S; ++s) {
                auto r = t.row(h, s);
                layer.push_back(std::vector<double>(r.begin(), r.end()));
            }
            out.push_back(std::move(layer));
        }
        return out;
    };
    json transitions = json::array();
    for (std::size_t h = 0; h < H; ++h) {
        json layer = json::array();
        for (std::size_t s = 0; s < S; ++s) {
            json per_action = json::array();
            for (std::size_t a = 0; a < A; ++a) {
                auto r = cmdp.transitions.row(h, s, a);
                per_action.push_back(std::vector<double>(r.begin(), r.end()));
            }
            layer.push_back(std::move(per_action));
        }
        transitions.push_back(std::move(layer));
    }
    json constraint_costs = json::array();
    for (const StageTable& d : cmdp.constraint_costs) constraint_costs.push_back(stage_json(d));
    return json{{"S", S},
                {"A", A},
                {"H", H},
                {"I", cmdp.num_constraints()},
                {"transitions", std::move(transitions)},
                {"costs", stage_json(cmdp.mean_costs)},
                {"constraint_costs", std::move(constraint_costs)},
                {"alphas", cmdp.thresholds},
                {"mu", cmdp.initial_dist}};
}

Cmdp cmdp_from_json(const nlohmann::json& doc) {
    try {
        Cmdp cmdp;
        const auto S = doc.at("S").get<std::size_t>();
        const auto A = doc.at("A").get<std::size_t>();
        const auto H = doc.at("H").get<std::size_t>();
        const auto I = doc.at("I").get<std::size_t>();
        cmdp.num_states = S;
        cmdp.num_actions = A;
        cmdp.horizon = H;
        auto expect_size = [](const nlohmann::json& node, std::size_t n, const char* what) {
            if (!node.is_array() || node.size() != n)
                throw StructuralError(std::string("wrong extent for ") + what);
        };
        auto read_stage = [&](const nlohmann::json& node, const char* what) {
            StageTable t(H, S, A);
            expect_size(node, H, what);
            for (std::size_t h = 0; h < H; ++h) {
                expect_size(node[h], S, what);
                for (std::size_t s = 0; s < S; ++s) {
                    expect_size(node[h][s], A, what);
                    for (std::size_t a = 0; a < A; ++a) t(h, s, a) = node[h][s][a].get<double>();
                }
            }
            return t;
        };
        const auto& tr = doc.at("transitions");
        cmdp.transitions = TransitionModel(H, S, A);
        expect_size(tr, H, "transitions");
        for (std::size_t h = 0; h < H; ++h) {
            expect_size(tr[h], S, "transitions");
            for (std::size_t s = 0; s < S; ++s) {
                expect_size(tr[h][s], A, "transitions");
                for (std::size_t a = 0; a < A; ++a) {
                    expect_size(tr[h][s][a], S, "transitions");
                    for (std::size_t n = 0; n < S; ++n)
                        cmdp.transitions(h, s, a, n) = tr[h][s][a][n].get<double>();
                }
            }
        }
        cmdp.mean_costs = read_stage(doc.at("costs"), "costs");
        const auto& dc = doc.at("constraint_costs");
        expect_size(dc, I, "constraint_costs");
        for (std::size_t i = 0; i < I; ++i)
            cmdp.constraint_costs.push_back(read_stage(dc[i], "constraint_costs"));
        cmdp.thresholds = doc.at("alphas").get<std::vector<double>>();
        cmdp.initial_dist = doc.at("mu").get<std::vector<double>>();
        cmdp.validate();
        return cmdp;
    } catch (const nlohmann::json::exception& e) {
        throw StructuralError(std::string("malformed instance document: ") + e.what());
    }
}

void save_cmdp(const Cmdp& cmdp, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw StructuralError("cannot write " + path.string());
    out << cmdp_to_json(cmdp).dump(1) << '\n';
}

Cmdp load_cmdp(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw StructuralError("cannot read " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw StructuralError("cannot parse " + path.string() + ": " + e.what());
    }
    return cmdp_from_json(doc);
}

} // namespace cmdpx
