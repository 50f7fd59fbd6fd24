#pragma once

// Minimization linear programs in a solver-neutral row format, plus a
// self-contained deterministic two-phase simplex solver.

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <utility>
#include <vector>

namespace cmdpx::lp {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct Term {
    std::size_t var;
    double coeff;
};

struct Row {
    std::vector<Term> terms;
    double rhs = 0.0;
};

class LinearProgram {
public:
    explicit LinearProgram(std::size_t num_vars);

    std::size_t num_vars() const { return objective_.size(); }

    void set_objective(std::size_t var, double coeff) { objective_.at(var) = coeff; }
    void set_bounds(std::size_t var, double lower, double upper);
    /// sum coeff * x = rhs
    void add_eq(std::vector<Term> terms, double rhs);
    /// sum coeff * x <= rhs
    void add_le(std::vector<Term> terms, double rhs);

    const std::vector<double>& objective() const { return objective_; }
    const std::vector<double>& lower() const { return lower_; }
    const std::vector<double>& upper() const { return upper_; }
    const std::vector<Row>& eq_rows() const { return eq_rows_; }
    const std::vector<Row>& le_rows() const { return le_rows_; }

    /// Throws StructuralError on out-of-range indices or non-finite data.
    void validate() const;

private:
    std::vector<double> objective_;
    std::vector<double> lower_;
    std::vector<double> upper_;
    std::vector<Row> eq_rows_;
    std::vector<Row> le_rows_;
};

enum class Status { Optimal, Infeasible, Unbounded };

const char* to_string(Status status);

struct Solution {
    Status status = Status::Infeasible;
    std::vector<double> x;
    double objective_value = 0.0;
};

struct Residuals {
    double eq = 0.0;    ///< max |a.x - b| / (1 + |b|)
    double le = 0.0;    ///< max (a.x - b)_+
    double bound = 0.0; ///< max bound violation
};

Residuals residuals(const LinearProgram& lp, const std::vector<double>& x);

/// Solves the LP. Infeasible and Unbounded are reported through the status;
/// exceeding the iteration cap throws SolverError.
Solution solve(const LinearProgram& lp);

/// One line per row: `kind idx:coeff ... rhs`, preceded by a header, the
/// objective and any non-default bounds.
void dump(const LinearProgram& lp, std::ostream& out);

} // namespace cmdpx::lp
