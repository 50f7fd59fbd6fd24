#pragma once

// Occupancy-measure linear programs: the known-model CMDP LP, the extended
// LP over state-action-state occupancies with transition confidence boxes,
// and the bonus-adjusted CMDP LP on the empirical model.

#include "cmdpx/cmdp.hpp"
#include "cmdpx/lp.hpp"

#include <optional>
#include <span>
#include <vector>

namespace cmdpx {

struct PlanResult {
    Policy policy;
    OccupancyMeasure occupancy;
    double optimistic_value = 0.0;
    std::vector<double> constraint_values;
    /// Only set by the extended LP.
    std::optional<TransitionModel> chosen_model;
};

/// min c.q subject to D q <= alpha over the occupancy polytope of the true
/// model. Throws CmdpInfeasible if no policy satisfies the constraints.
PlanResult solve_cmdp_exact(const Cmdp& cmdp);

/// Extended LP over z_h(s,a,s') with |p~ - p_hat| <= beta_p elementwise.
/// Throws OptimisticInfeasible if the LP is infeasible.
PlanResult solve_optcmdp_extended(const TransitionModel& p_hat, const SasTable& beta_p,
                                  const StageTable& c_tilde,
                                  const std::vector<StageTable>& d_tilde,
                                  std::span<const double> alphas, std::span<const double> mu);

/// CMDP LP on the model p_bar with (possibly negative) optimistic costs.
/// Throws OptimisticInfeasible if the LP is infeasible.
PlanResult solve_bonus_cmdp(const TransitionModel& p_bar, const StageTable& c_tilde,
                            const std::vector<StageTable>& d_tilde,
                            std::span<const double> alphas, std::span<const double> mu);

/// The LP solved by solve_cmdp_exact / solve_bonus_cmdp (variables ordered
/// lexicographically by (h,s,a)); exposed for dumps and oracle tests.
lp::LinearProgram build_occupancy_lp(const TransitionModel& p, const StageTable& costs,
                                     const std::vector<StageTable>& constraint_costs,
                                     std::span<const double> alphas,
                                     std::span<const double> mu);

/// The extended LP (variables ordered lexicographically by (h,s,a,s')).
lp::LinearProgram build_extended_lp(const TransitionModel& p_hat, const SasTable& beta_p,
                                    const StageTable& c_tilde,
                                    const std::vector<StageTable>& d_tilde,
                                    std::span<const double> alphas,
                                    std::span<const double> mu);

} // namespace cmdpx
