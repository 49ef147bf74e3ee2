#pragma once

#include <limits>
#include <string>
#include <vector>

namespace mdiqkd::lp {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { minimize, maximize };
enum class Status { optimal, infeasible, unbounded, iteration_limit };
enum class PivotRule { dantzig, bland };

const char* to_string(Status s);

/// One two-sided constraint lo <= coeffs . x <= hi. Either side may be
/// infinite; lo == hi makes it an equality.
struct Row {
    std::vector<double> coeffs;
    double lo = -kInf;
    double hi = kInf;
};

/// Dense LP over box-bounded variables.
struct Problem {
    int num_vars = 0;
    std::vector<Row> rows;
    std::vector<double> var_lo;  // size num_vars
    std::vector<double> var_hi;

    void add_row(std::vector<double> coeffs, double lo, double hi) {
        rows.push_back({std::move(coeffs), lo, hi});
    }
};

struct Solution {
    Status status = Status::infeasible;
    double objective = 0.0;
    std::vector<double> x;
    /// Largest constraint/bound violation of the returned point, relative to
    /// each row's coefficient scale. Optimal solutions keep this <= 1e-9.
    double max_violation = 0.0;
    int iterations = 0;
};

/// Two-phase dense simplex. Proven-optimal vertex or an explicit
/// infeasible/unbounded status; never silently clamps.
Solution solve(const Problem& problem, Sense sense, const std::vector<double>& objective,
               PivotRule rule = PivotRule::dantzig);

/// Max relative violation of x over all rows and box bounds.
double max_violation(const Problem& problem, const std::vector<double>& x);

}  // namespace mdiqkd::lp
