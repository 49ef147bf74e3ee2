#include "mdiqkd/lp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mdiqkd::lp {

const char* to_string(Status s) {
    switch (s) {
        case Status::optimal: return "optimal";
        case Status::infeasible: return "infeasible";
        case Status::unbounded: return "unbounded";
        case Status::iteration_limit: return "iteration_limit";
    }
    return "?";
}

namespace {

constexpr double kCostTol = 1e-9;   // reduced-cost optimality tolerance
constexpr double kPivotTol = 1e-8;  // minimum acceptable pivot magnitude
constexpr double kFeasTol = 1e-9;

/// Dense tableau for "min c.x  s.t.  A x (<=,>=,=) b,  x >= 0" built from the
/// shifted standard form of a Problem. Columns: structural, then slack /
/// surplus, then artificial, then rhs.
class Tableau {
  public:
    enum class RowKind { le, ge, eq };

    Tableau(const Problem& p, const std::vector<double>& cost_min)
        : n_struct_(p.num_vars), cost_(cost_min) {
        // Shift variables to x' = x - lo >= 0; finite upper bounds become rows.
        shift_ = p.var_lo;
        std::vector<std::vector<double>> coeffs;
        std::vector<double> rhs;
        std::vector<RowKind> kind;

        auto add = [&](const std::vector<double>& a, double b, RowKind k) {
            coeffs.push_back(a);
            rhs.push_back(b);
            kind.push_back(k);
        };

        for (const Row& row : p.rows) {
            if (static_cast<int>(row.coeffs.size()) != p.num_vars)
                throw std::invalid_argument("lp: row width != num_vars");
            double offset = 0.0;
            for (int v = 0; v < p.num_vars; ++v) offset += row.coeffs[static_cast<size_t>(v)] * shift_[static_cast<size_t>(v)];
            if (row.lo == row.hi) {
                add(row.coeffs, row.lo - offset, RowKind::eq);
                continue;
            }
            if (std::isfinite(row.lo)) add(row.coeffs, row.lo - offset, RowKind::ge);
            if (std::isfinite(row.hi)) add(row.coeffs, row.hi - offset, RowKind::le);
        }
        for (int v = 0; v < p.num_vars; ++v) {
            if (!std::isfinite(p.var_hi[static_cast<size_t>(v)])) continue;
            std::vector<double> a(static_cast<size_t>(p.num_vars), 0.0);
            a[static_cast<size_t>(v)] = 1.0;
            add(a, p.var_hi[static_cast<size_t>(v)] - shift_[static_cast<size_t>(v)], RowKind::le);
        }

        m_ = static_cast<int>(coeffs.size());
        // Normalize senses so every rhs is nonnegative.
        for (int r = 0; r < m_; ++r) {
            if (rhs[static_cast<size_t>(r)] < 0.0) {
                for (double& a : coeffs[static_cast<size_t>(r)]) a = -a;
                rhs[static_cast<size_t>(r)] = -rhs[static_cast<size_t>(r)];
                if (kind[static_cast<size_t>(r)] == RowKind::le)
                    kind[static_cast<size_t>(r)] = RowKind::ge;
                else if (kind[static_cast<size_t>(r)] == RowKind::ge)
                    kind[static_cast<size_t>(r)] = RowKind::le;
            }
        }

        int n_slack = 0, n_art = 0;
        for (RowKind k : kind) {
            if (k != RowKind::eq) ++n_slack;
            if (k != RowKind::le) ++n_art;
        }
        n_total_ = n_struct_ + n_slack + n_art;
        art_begin_ = n_struct_ + n_slack;

        tab_.assign(static_cast<size_t>(m_), std::vector<double>(static_cast<size_t>(n_total_ + 1), 0.0));
        basis_.assign(static_cast<size_t>(m_), -1);
        row_scale_.assign(static_cast<size_t>(m_), 1.0);

        int slack = n_struct_, art = art_begin_;
        for (int r = 0; r < m_; ++r) {
            auto& tr = tab_[static_cast<size_t>(r)];
            for (int v = 0; v < n_struct_; ++v) tr[static_cast<size_t>(v)] = coeffs[static_cast<size_t>(r)][static_cast<size_t>(v)];
            tr[static_cast<size_t>(n_total_)] = rhs[static_cast<size_t>(r)];
            switch (kind[static_cast<size_t>(r)]) {
                case RowKind::le:
                    tr[static_cast<size_t>(slack)] = 1.0;
                    basis_[static_cast<size_t>(r)] = slack++;
                    break;
                case RowKind::ge:
                    tr[static_cast<size_t>(slack++)] = -1.0;
                    tr[static_cast<size_t>(art)] = 1.0;
                    basis_[static_cast<size_t>(r)] = art++;
                    break;
                case RowKind::eq:
                    tr[static_cast<size_t>(art)] = 1.0;
                    basis_[static_cast<size_t>(r)] = art++;
                    break;
            }
            // Row equilibration over structural coefficients and rhs.
            double scale = 0.0;
            for (int v = 0; v < n_struct_; ++v) scale = std::max(scale, std::abs(tr[static_cast<size_t>(v)]));
            scale = std::max(scale, std::abs(tr[static_cast<size_t>(n_total_)]));
            if (scale > 0.0 && (scale > 16.0 || scale < 1.0 / 16.0)) {
                for (double& a : tr) a /= scale;
                row_scale_[static_cast<size_t>(r)] = scale;
            }
        }
    }

    bool needs_phase1() const { return art_begin_ < n_total_; }

    /// Phase 1: minimize the sum of artificials. Returns false if the
    /// minimum is positive (primal infeasible).
    bool phase1(PivotRule rule, int& iterations) {
        std::vector<double> cost(static_cast<size_t>(n_total_), 0.0);
        for (int j = art_begin_; j < n_total_; ++j) cost[static_cast<size_t>(j)] = 1.0;
        build_objective_row(cost);
        const Status st = iterate(rule, /*allow=*/n_total_, iterations);
        if (st != Status::optimal) return false;
        if (obj_value() > 1e-7) return false;
        drive_out_artificials();
        return true;
    }

    Status phase2(PivotRule rule, int& iterations) {
        std::vector<double> cost(static_cast<size_t>(n_total_), 0.0);
        for (int j = 0; j < n_struct_; ++j) cost[static_cast<size_t>(j)] = cost_[static_cast<size_t>(j)];
        build_objective_row(cost);
        return iterate(rule, /*allow=*/art_begin_, iterations);
    }

    std::vector<double> extract() const {
        std::vector<double> x(static_cast<size_t>(n_struct_), 0.0);
        for (int r = 0; r < m_; ++r)
            if (basis_[static_cast<size_t>(r)] < n_struct_)
                x[static_cast<size_t>(basis_[static_cast<size_t>(r)])] = tab_[static_cast<size_t>(r)][static_cast<size_t>(n_total_)];
        for (int v = 0; v < n_struct_; ++v) x[static_cast<size_t>(v)] += shift_[static_cast<size_t>(v)];
        return x;
    }

  private:
    double obj_value() const { return -z_[static_cast<size_t>(n_total_)]; }

    void build_objective_row(const std::vector<double>& cost) {
        z_.assign(static_cast<size_t>(n_total_ + 1), 0.0);
        for (int j = 0; j < n_total_; ++j) z_[static_cast<size_t>(j)] = cost[static_cast<size_t>(j)];
        // Price out the current basis so reduced costs of basic vars are zero.
        for (int r = 0; r < m_; ++r) {
            const int b = basis_[static_cast<size_t>(r)];
            const double cb = cost[static_cast<size_t>(b)];
            if (cb == 0.0) continue;
            const auto& tr = tab_[static_cast<size_t>(r)];
            for (int j = 0; j <= n_total_; ++j) z_[static_cast<size_t>(j)] -= cb * tr[static_cast<size_t>(j)];
        }
    }

    Status iterate(PivotRule rule, int allow, int& iterations) {
        const int max_iter = 200 * (m_ + n_total_) + 5000;
        int stall = 0;
        double last_obj = obj_value();
        bool bland = rule == PivotRule::bland;

        for (;;) {
            if (++iterations > max_iter) return Status::iteration_limit;

            // Entering column.
            int enter = -1;
            if (bland) {
                for (int j = 0; j < allow; ++j)
                    if (z_[static_cast<size_t>(j)] < -kCostTol) {
                        enter = j;
                        break;
                    }
            } else {
                double best = -kCostTol;
                for (int j = 0; j < allow; ++j)
                    if (z_[static_cast<size_t>(j)] < best) {
                        best = z_[static_cast<size_t>(j)];
                        enter = j;
                    }
            }
            if (enter < 0) return Status::optimal;

            // Ratio test.
            int leave = -1;
            double best_ratio = kInf;
            for (int r = 0; r < m_; ++r) {
                const double a = tab_[static_cast<size_t>(r)][static_cast<size_t>(enter)];
                if (a <= kPivotTol) continue;
                const double ratio = tab_[static_cast<size_t>(r)][static_cast<size_t>(n_total_)] / a;
                if (ratio < best_ratio - 1e-12) {
                    best_ratio = ratio;
                    leave = r;
                } else if (ratio < best_ratio + 1e-12 && leave >= 0) {
                    if (bland) {
                        if (basis_[static_cast<size_t>(r)] < basis_[static_cast<size_t>(leave)]) leave = r;
                    } else if (a > tab_[static_cast<size_t>(leave)][static_cast<size_t>(enter)]) {
                        leave = r;  // prefer the larger pivot for stability
                    }
                }
            }
            if (leave < 0) return Status::unbounded;

            pivot(leave, enter);

            const double obj = obj_value();
            if (obj < last_obj - 1e-12) {
                stall = 0;
                last_obj = obj;
            } else if (!bland && ++stall > 2 * (m_ + n_total_)) {
                bland = true;  // anti-cycling fallback
                stall = 0;
            }
        }
    }

    void pivot(int leave, int enter) {
        auto& pr = tab_[static_cast<size_t>(leave)];
        const double p = pr[static_cast<size_t>(enter)];
        for (double& a : pr) a /= p;
        pr[static_cast<size_t>(enter)] = 1.0;
        for (int r = 0; r < m_; ++r) {
            if (r == leave) continue;
            auto& tr = tab_[static_cast<size_t>(r)];
            const double f = tr[static_cast<size_t>(enter)];
            if (f == 0.0) continue;
            for (int j = 0; j <= n_total_; ++j) tr[static_cast<size_t>(j)] -= f * pr[static_cast<size_t>(j)];
            tr[static_cast<size_t>(enter)] = 0.0;
        }
        const double f = z_[static_cast<size_t>(enter)];
        if (f != 0.0) {
            for (int j = 0; j <= n_total_; ++j) z_[static_cast<size_t>(j)] -= f * pr[static_cast<size_t>(j)];
            z_[static_cast<size_t>(enter)] = 0.0;
        }
        basis_[static_cast<size_t>(leave)] = enter;
    }

    /// After phase 1, pivot any artificial still in the basis (at value ~0)
    /// onto the largest structural or slack coefficient in its row; dividing
    /// by a near-cancelled residue instead would poison the whole tableau.
    /// A row with no usable coefficient is redundant and neutralized.
    void drive_out_artificials() {
        for (int r = 0; r < m_; ++r) {
            if (basis_[static_cast<size_t>(r)] < art_begin_) continue;
            int col = -1;
            double best = 1e-7;
            for (int j = 0; j < art_begin_; ++j) {
                const double a = std::abs(tab_[static_cast<size_t>(r)][static_cast<size_t>(j)]);
                if (a > best) {
                    best = a;
                    col = j;
                }
            }
            if (col >= 0) {
                pivot(r, col);
            } else {
                // Redundant row: zero it so it can never be chosen as a pivot row.
                for (int j = 0; j <= n_total_; ++j) tab_[static_cast<size_t>(r)][static_cast<size_t>(j)] = 0.0;
            }
        }
        // Artificial columns must never re-enter.
        for (int r = 0; r < m_; ++r)
            for (int j = art_begin_; j < n_total_; ++j) tab_[static_cast<size_t>(r)][static_cast<size_t>(j)] = 0.0;
    }

    int n_struct_ = 0;
    int n_total_ = 0;
    int art_begin_ = 0;
    int m_ = 0;
    std::vector<double> cost_;
    std::vector<double> shift_;
    std::vector<std::vector<double>> tab_;
    std::vector<double> z_;
    std::vector<int> basis_;
    std::vector<double> row_scale_;
};

}  // namespace

double max_violation(const Problem& problem, const std::vector<double>& x) {
    double worst = 0.0;
    for (const Row& row : problem.rows) {
        double act = 0.0, scale = 1.0;
        for (int v = 0; v < problem.num_vars; ++v) {
            act += row.coeffs[static_cast<size_t>(v)] * x[static_cast<size_t>(v)];
            scale = std::max(scale, std::abs(row.coeffs[static_cast<size_t>(v)]));
        }
        scale = std::max({scale, std::abs(row.lo), std::abs(row.hi)});
        if (std::isfinite(row.lo)) worst = std::max(worst, (row.lo - act) / scale);
        if (std::isfinite(row.hi)) worst = std::max(worst, (act - row.hi) / scale);
    }
    for (int v = 0; v < problem.num_vars; ++v) {
        worst = std::max(worst, problem.var_lo[static_cast<size_t>(v)] - x[static_cast<size_t>(v)]);
        worst = std::max(worst, x[static_cast<size_t>(v)] - problem.var_hi[static_cast<size_t>(v)]);
    }
    return worst;
}

Solution solve(const Problem& problem, Sense sense, const std::vector<double>& objective,
               PivotRule rule) {
    if (static_cast<int>(objective.size()) != problem.num_vars)
        throw std::invalid_argument("lp: objective width != num_vars");
    if (static_cast<int>(problem.var_lo.size()) != problem.num_vars ||
        static_cast<int>(problem.var_hi.size()) != problem.num_vars)
        throw std::invalid_argument("lp: bound vectors must cover all variables");
    for (int v = 0; v < problem.num_vars; ++v)
        if (problem.var_lo[static_cast<size_t>(v)] > problem.var_hi[static_cast<size_t>(v)])
            throw std::invalid_argument("lp: variable bounds out of order");
    for (const Row& r : problem.rows)
        if (r.lo > r.hi) throw std::invalid_argument("lp: row bounds out of order");

    std::vector<double> cost = objective;
    if (sense == Sense::maximize)
        for (double& c : cost) c = -c;

    auto run = [&](PivotRule r) {
        Solution sol;
        Tableau tab(problem, cost);
        if (tab.needs_phase1() && !tab.phase1(r, sol.iterations)) {
            sol.status = Status::infeasible;
            return sol;
        }
        sol.status = tab.phase2(r, sol.iterations);
        if (sol.status != Status::optimal) return sol;

        sol.x = tab.extract();
        double obj = 0.0;
        for (int v = 0; v < problem.num_vars; ++v)
            obj += objective[static_cast<size_t>(v)] * sol.x[static_cast<size_t>(v)];
        sol.objective = obj;
        sol.max_violation = max_violation(problem, sol.x);
        if (sol.max_violation > 1e-6) sol.status = Status::iteration_limit;  // numerically unusable
        return sol;
    };

    Solution sol = run(rule);
    if (sol.status == Status::iteration_limit && rule != PivotRule::bland) {
        // Degenerate instances can wreck the Dantzig pivot path numerically;
        // Bland's slower walk usually lands on a clean basis. Keep whichever
        // solution respects the constraints better.
        Solution retry = run(PivotRule::bland);
        retry.iterations += sol.iterations;
        if (retry.status == Status::optimal || retry.max_violation < sol.max_violation)
            return retry;
    }
    return sol;
}

}  // namespace mdiqkd::lp
