#include "cmdpx/lp.hpp"

#include "cmdpx/errors.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

namespace cmdpx::lp {

LinearProgram::LinearProgram(std::size_t num_vars)
    : objective_(num_vars, 0.0), lower_(num_vars, 0.0), upper_(num_vars, kInfinity) {}

void LinearProgram::set_bounds(std::size_t var, double lower, double upper) {
    lower_.at(var) = lower;
    upper_.at(var) = upper;
}

void LinearProgram::add_eq(std::vector<Term> terms, double rhs) {
    eq_rows_.push_back({std::move(terms), rhs});
}

void LinearProgram::add_le(std::vector<Term> terms, double rhs) {
    le_rows_.push_back({std::move(terms), rhs});
}

void LinearProgram::validate() const {
    const std::size_t n = num_vars();
    for (std::size_t j = 0; j < n; ++j) {
        if (!std::isfinite(objective_[j]))
            throw StructuralError("non-finite objective coefficient");
        if (std::isnan(lower_[j]) || std::isnan(upper_[j]) || lower_[j] > upper_[j] ||
            lower_[j] == kInfinity || upper_[j] == -kInfinity)
            throw StructuralError("invalid bounds for variable " + std::to_string(j));
    }
    auto check = [n](const Row& row) {
        if (!std::isfinite(row.rhs)) throw StructuralError("non-finite row rhs");
        for (const Term& t : row.terms) {
            if (t.var >= n) throw StructuralError("row references variable out of range");
            if (!std::isfinite(t.coeff)) throw StructuralError("non-finite row coefficient");
        }
    };
    for (const Row& row : eq_rows_) check(row);
    for (const Row& row : le_rows_) check(row);
}

const char* to_string(Status status) {
    switch (status) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    }
    return "unknown";
}

Residuals residuals(const LinearProgram& lp, const std::vector<double>& x) {
    Residuals r;
    auto activity = [&x](const Row& row) {
        double total = 0.0;
        for (const Term& t : row.terms) total += t.coeff * x[t.var];
        return total;
    };
    for (const Row& row : lp.eq_rows())
        r.eq = std::max(r.eq, std::abs(activity(row) - row.rhs) / (1.0 + std::abs(row.rhs)));
    for (const Row& row : lp.le_rows()) r.le = std::max(r.le, activity(row) - row.rhs);
    for (std::size_t j = 0; j < lp.num_vars(); ++j) {
        r.bound = std::max(r.bound, lp.lower()[j] - x[j]);
        r.bound = std::max(r.bound, x[j] - lp.upper()[j]);
    }
    return r;
}

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kReducedCostTol = 1e-9;
constexpr double kPhaseOneTol = 1e-8;
constexpr std::size_t kIterationCap = 1'000'000;
constexpr std::size_t kDegenerateStreakForBland = 50;

// Column of the standard form: x_orig += sign * x_col.
struct ColumnMap {
    std::size_t var;
    double sign;
};

// Dense simplex tableau over the standard form  A x = b, x >= 0, b >= 0.
class Tableau {
public:
    Tableau(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), width_(cols + 1), data_((rows + 1) * (cols + 1), 0.0),
          basis_(rows, 0) {}

    double& at(std::size_t i, std::size_t j) { return data_[i * width_ + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * width_ + j]; }
    double& rhs(std::size_t i) { return data_[i * width_ + cols_]; }
    double rhs(std::size_t i) const { return data_[i * width_ + cols_]; }
    std::size_t objective_row() const { return rows_; }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::vector<std::size_t>& basis() { return basis_; }

    void pivot(std::size_t r, std::size_t e) {
        double* pivot_row = &data_[r * width_];
        const double inv = 1.0 / pivot_row[e];
        nonzero_.clear();
        for (std::size_t j = 0; j < width_; ++j) {
            if (pivot_row[j] != 0.0) {
                pivot_row[j] *= inv;
                nonzero_.push_back(j);
            }
        }
        pivot_row[e] = 1.0;
        for (std::size_t i = 0; i <= rows_; ++i) {
            if (i == r) continue;
            double* row = &data_[i * width_];
            const double f = row[e];
            if (f == 0.0) continue;
            for (std::size_t j : nonzero_) row[j] -= f * pivot_row[j];
            row[e] = 0.0;
        }
        basis_[r] = e;
        ++iterations_;
        if (iterations_ > kIterationCap)
            throw SolverError("simplex exceeded the iteration cap");
    }

    enum class Outcome { Optimal, Unbounded };

    /// Runs primal simplex on the current objective row over columns with
    /// allowed[j] set.
    Outcome run(const std::vector<char>& allowed) {
        std::size_t degenerate_streak = 0;
        const std::size_t obj = objective_row();
        for (;;) {
            const bool bland = degenerate_streak >= kDegenerateStreakForBland;
            std::size_t entering = cols_;
            double best = -kReducedCostTol;
            for (std::size_t j = 0; j < cols_; ++j) {
                if (!allowed[j]) continue;
                const double d = at(obj, j);
                if (d < best) {
                    entering = j;
                    if (bland) break;
                    best = d;
                }
            }
            if (entering == cols_) return Outcome::Optimal;

            std::size_t leaving = rows_;
            double min_ratio = kInfinity;
            for (std::size_t i = 0; i < rows_; ++i) {
                const double a = at(i, entering);
                if (a <= kPivotTol) continue;
                const double ratio = std::max(rhs(i), 0.0) / a;
                if (leaving == rows_ || ratio < min_ratio - 1e-12) {
                    leaving = i;
                    min_ratio = ratio;
                } else if (ratio <= min_ratio + 1e-12) {
                    // Ties: Bland picks the smallest basic index, otherwise
                    // prefer the larger pivot element.
                    const bool take = bland ? basis_[i] < basis_[leaving]
                                            : a > at(leaving, entering);
                    if (take) {
                        leaving = i;
                        min_ratio = std::min(min_ratio, ratio);
                    }
                }
            }
            if (leaving == rows_) return Outcome::Unbounded;
            degenerate_streak = min_ratio <= 1e-12 ? degenerate_streak + 1 : 0;
            pivot(leaving, entering);
        }
    }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::size_t width_;
    std::vector<double> data_;
    std::vector<std::size_t> basis_;
    std::vector<std::size_t> nonzero_;
    std::size_t iterations_ = 0;
};

// Solves the square system M y = b in place by Gaussian elimination with
// partial pivoting. Returns false if M is numerically singular.
bool solve_dense(std::vector<double>& m, std::vector<double>& b, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(m[i * n + k]) > std::abs(m[p * n + k])) p = i;
        if (std::abs(m[p * n + k]) < 1e-14) return false;
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(m[k * n + j], m[p * n + j]);
            std::swap(b[k], b[p]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = m[i * n + k] / m[k * n + k];
            if (f == 0.0) continue;
            for (std::size_t j = k; j < n; ++j) m[i * n + j] -= f * m[k * n + j];
            b[i] -= f * b[k];
        }
    }
    for (std::size_t k = n; k-- > 0;) {
        double v = b[k];
        for (std::size_t j = k + 1; j < n; ++j) v -= m[k * n + j] * b[j];
        b[k] = v / m[k * n + k];
    }
    return true;
}

double worst(const Residuals& r) { return std::max({r.eq, r.le, r.bound}); }

} // namespace

Solution solve(const LinearProgram& lp) {
    lp.validate();
    const std::size_t n = lp.num_vars();

    // Shift and split variables so every standard-form column is >= 0.
    std::vector<double> offset(n, 0.0);
    std::vector<std::vector<ColumnMap>> var_columns(n);
    std::vector<ColumnMap> columns;
    struct StdRow {
        std::vector<Term> terms; // over standard-form columns
        double rhs;
        bool equality;
    };
    std::vector<StdRow> std_rows;
    for (std::size_t j = 0; j < n; ++j) {
        const double lo = lp.lower()[j], hi = lp.upper()[j];
        if (std::isfinite(lo)) {
            offset[j] = lo;
            var_columns[j].push_back({columns.size(), 1.0});
            columns.push_back({j, 1.0});
            if (std::isfinite(hi))
                std_rows.push_back({{{columns.size() - 1, 1.0}}, hi - lo, false});
        } else if (std::isfinite(hi)) {
            offset[j] = hi;
            var_columns[j].push_back({columns.size(), -1.0});
            columns.push_back({j, -1.0});
        } else {
            var_columns[j].push_back({columns.size(), 1.0});
            columns.push_back({j, 1.0});
            var_columns[j].push_back({columns.size(), -1.0});
            columns.push_back({j, -1.0});
        }
    }
    auto translate = [&](const Row& row, bool equality) {
        StdRow out{{}, row.rhs, equality};
        for (const Term& t : row.terms) {
            out.rhs -= t.coeff * offset[t.var];
            for (const ColumnMap& c : var_columns[t.var])
                out.terms.push_back({c.var, t.coeff * c.sign});
        }
        return out;
    };
    std::vector<StdRow> rows;
    rows.reserve(lp.eq_rows().size() + lp.le_rows().size() + std_rows.size());
    for (const Row& row : lp.eq_rows()) rows.push_back(translate(row, true));
    for (const Row& row : lp.le_rows()) rows.push_back(translate(row, false));
    for (StdRow& row : std_rows) rows.push_back(std::move(row));

    const std::size_t m = rows.size();
    const std::size_t n_struct = columns.size();
    std::size_t n_slack = 0, n_art = 0;
    for (const StdRow& row : rows) {
        if (!row.equality) ++n_slack;
        if (row.equality || row.rhs < 0.0) ++n_art;
    }
    const std::size_t n_cols = n_struct + n_slack + n_art;

    Tableau tab(m, n_cols);
    std::vector<char> is_artificial(n_cols, 0);
    {
        std::size_t slack = n_struct, art = n_struct + n_slack;
        for (std::size_t i = 0; i < m; ++i) {
            const StdRow& row = rows[i];
            const double sign = row.rhs < 0.0 ? -1.0 : 1.0;
            for (const Term& t : row.terms) tab.at(i, t.var) += sign * t.coeff;
            tab.rhs(i) = sign * row.rhs;
            if (!row.equality) {
                tab.at(i, slack) = sign;
                if (sign > 0.0) tab.basis()[i] = slack;
                ++slack;
            }
            if (row.equality || sign < 0.0) {
                tab.at(i, art) = 1.0;
                is_artificial[art] = 1;
                tab.basis()[i] = art;
                ++art;
            }
        }
    }
    // Kept for the final refinement solve; the tableau is overwritten by pivots.
    std::vector<double> original_matrix(m * n_cols);
    std::vector<double> original_rhs(m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n_cols; ++j) original_matrix[i * n_cols + j] = tab.at(i, j);
        original_rhs[i] = tab.rhs(i);
    }

    const std::size_t obj = tab.objective_row();
    Solution solution;
    solution.x.assign(n, 0.0);

    // Phase one: minimize the sum of artificials.
    if (n_art > 0) {
        for (std::size_t j = 0; j < n_cols; ++j) tab.at(obj, j) = is_artificial[j] ? 1.0 : 0.0;
        tab.rhs(obj) = 0.0;
        double scale = 1.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (!is_artificial[tab.basis()[i]]) continue;
            scale = std::max(scale, tab.rhs(i));
            for (std::size_t j = 0; j <= n_cols; ++j) tab.at(obj, j) -= tab.at(i, j);
        }
        std::vector<char> all(n_cols, 1);
        tab.run(all);
        if (-tab.rhs(obj) > kPhaseOneTol * scale) {
            solution.status = Status::Infeasible;
            return solution;
        }
        // Drive remaining artificials out of the basis where possible.
        for (std::size_t i = 0; i < m; ++i) {
            if (!is_artificial[tab.basis()[i]]) continue;
            std::size_t best = n_cols;
            double best_abs = kPivotTol;
            for (std::size_t j = 0; j < n_cols; ++j) {
                if (is_artificial[j]) continue;
                if (std::abs(tab.at(i, j)) > best_abs) {
                    best_abs = std::abs(tab.at(i, j));
                    best = j;
                }
            }
            if (best != n_cols) tab.pivot(i, best);
        }
    }

    // Phase two on the shifted costs.
    std::vector<double> cost(n_cols, 0.0);
    double constant = 0.0;
    for (std::size_t j = 0; j < n; ++j) constant += lp.objective()[j] * offset[j];
    for (std::size_t c = 0; c < n_struct; ++c)
        cost[c] = lp.objective()[columns[c].var] * columns[c].sign;
    for (std::size_t j = 0; j < n_cols; ++j) tab.at(obj, j) = cost[j];
    tab.rhs(obj) = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double cb = cost[tab.basis()[i]];
        if (cb == 0.0) continue;
        for (std::size_t j = 0; j <= n_cols; ++j) tab.at(obj, j) -= cb * tab.at(i, j);
    }
    std::vector<char> allowed(n_cols);
    for (std::size_t j = 0; j < n_cols; ++j) allowed[j] = is_artificial[j] ? 0 : 1;
    if (tab.run(allowed) == Tableau::Outcome::Unbounded) {
        solution.status = Status::Unbounded;
        return solution;
    }

    auto to_original = [&](const std::vector<double>& col_values) {
        std::vector<double> x(offset);
        for (std::size_t c = 0; c < n_struct; ++c) x[columns[c].var] += columns[c].sign * col_values[c];
        return x;
    };
    std::vector<double> col_values(n_cols, 0.0);
    for (std::size_t i = 0; i < m; ++i) col_values[tab.basis()[i]] = std::max(tab.rhs(i), 0.0);
    solution.x = to_original(col_values);
    Residuals res = residuals(lp, solution.x);

    // Refine the basic solution against the untouched constraint matrix when
    // accumulated pivot error is visible.
    if (worst(res) > 1e-10 && m > 0) {
        std::vector<double> basis_matrix(m * m);
        std::vector<double> b(original_rhs);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t k = 0; k < m; ++k)
                basis_matrix[i * m + k] = original_matrix[i * n_cols + tab.basis()[k]];
        if (solve_dense(basis_matrix, b, m)) {
            std::vector<double> refined(n_cols, 0.0);
            for (std::size_t k = 0; k < m; ++k) refined[tab.basis()[k]] = std::max(b[k], 0.0);
            std::vector<double> x = to_original(refined);
            Residuals refined_res = residuals(lp, x);
            if (worst(refined_res) < worst(res)) {
                solution.x = std::move(x);
                res = refined_res;
            }
        }
    }
    for (std::size_t j = 0; j < n; ++j)
        solution.x[j] = std::clamp(solution.x[j], lp.lower()[j], lp.upper()[j]);

    solution.status = Status::Optimal;
    solution.objective_value = 0.0;
    for (std::size_t j = 0; j < n; ++j) solution.objective_value += lp.objective()[j] * solution.x[j];
    return solution;
}

void dump(const LinearProgram& lp, std::ostream& out) {
    const auto old_precision = out.precision(17);
    out << "lp vars " << lp.num_vars() << " eq " << lp.eq_rows().size() << " le "
        << lp.le_rows().size() << '\n';
    out << "obj";
    for (std::size_t j = 0; j < lp.num_vars(); ++j)
        if (lp.objective()[j] != 0.0) out << ' ' << j << ':' << lp.objective()[j];
    out << '\n';
    for (std::size_t j = 0; j < lp.num_vars(); ++j)
        if (lp.lower()[j] != 0.0 || lp.upper()[j] != kInfinity)
            out << "bound " << j << ' ' << lp.lower()[j] << ' ' << lp.upper()[j] << '\n';
    auto write = [&out](const char* kind, const Row& row) {
        out << kind;
        for (const Term& t : row.terms) out << ' ' << t.var << ':' << t.coeff;
        out << ' ' << row.rhs << '\n';
    };
    for (const Row& row : lp.eq_rows()) write("eq", row);
    for (const Row& row : lp.le_rows()) write("le", row);
    out.precision(old_precision);
}

} // namespace cmdpx::lp
