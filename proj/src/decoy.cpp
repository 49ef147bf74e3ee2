#include "mdiqkd/decoy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mdiqkd {
namespace {

/// Truncated exponential series S(mu) = sum_{i<n_cut} mu^i / i!.
double truncated_exp(double mu, int n_cut) {
    double term = 1.0, sum = 0.0;
    for (int i = 0; i < n_cut; ++i) {
        sum += term;
        term *= mu / (i + 1);
    }
    return sum;
}

/// Poissonian coefficient mu^i nu^j / (i! j!), with 0^0 = 1.
double poisson_coeff(double mu, int i, double nu, int j) {
    double c = 1.0;
    for (int a = 1; a <= i; ++a) c *= mu / a;
    for (int a = 1; a <= j; ++a) c *= nu / a;
    return c;
}

void check_settings(const DecoySettings& s) {
    if (s.photon_cutoff < 2)
        throw std::invalid_argument("decoy: photon_cutoff must be at least 2");
    if (s.fluctuation_sigmas < 0.0)
        throw std::invalid_argument("decoy: fluctuation_sigmas must be nonnegative");
}

/// Observed rate, its fluctuation width, and the trial count behind it.
struct CellObservation {
    double value = 0.0;
    double sigma = 0.0;
    std::uint64_t trials = 0;
};

/// sigma for a rate estimated from `trials` Bernoulli draws, floored at
/// 1/trials: an observed count of 0 (or trials) makes the plug-in binomial
/// sigma vanish while the true rate can still be of order 1/trials.
double floored_sigma(double raw_sigma, std::uint64_t trials) {
    if (trials == 0) return raw_sigma;
    return std::max(raw_sigma, 1.0 / static_cast<double>(trials));
}

lp::Problem build_constraints(const RatesTable& rates, const DecoySettings& settings,
                              bool error_weights, const std::vector<double>& box_hi) {
    check_settings(settings);
    const int n = settings.photon_cutoff;
    lp::Problem p;
    p.num_vars = n * n;
    p.var_lo.assign(static_cast<size_t>(p.num_vars), 0.0);
    if (box_hi.empty()) {
        p.var_hi.assign(static_cast<size_t>(p.num_vars), 1.0);
    } else {
        if (static_cast<int>(box_hi.size()) != p.num_vars)
            throw std::invalid_argument("decoy: box bound vector has wrong length");
        p.var_hi = box_hi;
        for (double& h : p.var_hi) h = std::clamp(h, 0.0, 1.0);
    }

    for (int k = 0; k < kNumIntensities; ++k) {
        for (int l = 0; l < kNumIntensities; ++l) {
            const CellRate& cell = rates.at(k, l);
            if (cell.empty) {
                std::ostringstream msg;
                msg << "decoy: no data for intensity pair (k=" << k << ", l=" << l << ")";
                throw DecoyError(DecoyError::Kind::missing_cell, msg.str());
            }
            CellObservation obs;
            if (error_weights) {
                obs.value = cell.e * cell.q;  // E*Q = errors / sent
                obs.trials = cell.sent;
                obs.sigma = cell.sent > 0
                                ? std::sqrt(std::max(obs.value * (1.0 - obs.value), 0.0) /
                                            static_cast<double>(cell.sent))
                                : 0.0;
            } else {
                obs.value = cell.q;
                obs.trials = cell.sent;
                obs.sigma = cell.sigma_q;
            }
            if (settings.fluctuation_sigmas > 0.0) obs.sigma = floored_sigma(obs.sigma, obs.trials);

            const double mu = settings.intensities_alice[static_cast<size_t>(k)];
            const double nu = settings.intensities_bob[static_cast<size_t>(l)];
            const double scale = std::exp(mu + nu);
            const double width = settings.fluctuation_sigmas * obs.sigma;

            lp::Row row;
            row.coeffs.assign(static_cast<size_t>(p.num_vars), 0.0);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    row.coeffs[static_cast<size_t>(decoy_var(i, j, n))] = poisson_coeff(mu, i, nu, j);
            row.lo = std::max(0.0, (obs.value - width)) * scale;
            row.hi = (obs.value + width) * scale + truncation_tail(mu, nu, n);
            p.rows.push_back(std::move(row));
        }
    }
    return p;
}

lp::Solution solve_or_throw(const lp::Problem& p, lp::Sense sense,
                            const std::vector<double>& objective, const char* what) {
    lp::Solution sol = lp::solve(p, sense, objective);
    // Exactly degenerate windows (zero-sigma rates, duplicated tables) can
    // defeat the solver numerically, surfacing as either failure status.
    // Retrying with slightly relaxed windows is bound-safe both ways: looser
    // windows only loosen the yield/error bounds taken from them, and a
    // relaxed program that is still infeasible proves the original is too.
    for (double eps : {1e-8, 1e-6}) {
        if (sol.status == lp::Status::optimal) break;
        lp::Problem relaxed = p;
        for (lp::Row& row : relaxed.rows) {
            const double width = eps * std::max({1.0, std::abs(row.lo), std::abs(row.hi)});
            if (std::isfinite(row.lo)) row.lo -= width;
            if (std::isfinite(row.hi)) row.hi += width;
        }
        sol = lp::solve(relaxed, sense, objective);
        // Residuals are judged against the original windows.
        if (!sol.x.empty()) sol.max_violation = lp::max_violation(p, sol.x);
    }
    if (sol.status == lp::Status::infeasible) {
        std::ostringstream msg;
        msg << "decoy: " << what
            << " program is infeasible: the measured rates admit no truncated photon-number "
               "model at this fluctuation width; widen fluctuation_sigmas or raise photon_cutoff";
        throw DecoyError(DecoyError::Kind::infeasible, msg.str());
    }
    if (sol.status != lp::Status::optimal) {
        std::ostringstream msg;
        msg << "decoy: " << what << " program failed: solver status " << lp::to_string(sol.status);
        throw DecoyError(DecoyError::Kind::solver_failure, msg.str());
    }
    return sol;
}

std::vector<double> unit_objective(int num_vars, int var) {
    std::vector<double> c(static_cast<size_t>(num_vars), 0.0);
    c[static_cast<size_t>(var)] = 1.0;
    return c;
}

/// Column index of Y_ij in the merged two-basis yield program. The four
/// vacuum/single yields (i,j in {0,1}^2) occupy shared columns 0..3 used by
/// both bases' rows; every other Y_ij gets a basis-specific column. Sharing
/// columns instead of adding equality ties keeps the program free of
/// artificial-heavy degenerate rows.
int joint_col(int i, int j, bool x_block, int n_cut) {
    if (i <= 1 && j <= 1) return 2 * i + j;
    const int idx = decoy_var(i, j, n_cut);
    const int skipped = (idx > 0) + (idx > 1) + (idx > n_cut) + (idx > n_cut + 1);
    return 4 + (x_block ? n_cut * n_cut - 4 : 0) + (idx - skipped);
}

/// Merges the two per-basis yield programs into one over 2*n^2 - 4 columns:
/// with uniform bits the vacuum/single-photon inputs average to the same
/// state in either basis, so Y00, Y01, Y10, Y11 are shared quantities that
/// both bases' windows constrain at once.
lp::Problem build_joint_yield(const lp::Problem& z, const lp::Problem& x, int n_cut) {
    lp::Problem joint;
    joint.num_vars = 2 * n_cut * n_cut - 4;
    joint.var_lo.assign(static_cast<size_t>(joint.num_vars), 0.0);
    joint.var_hi.assign(static_cast<size_t>(joint.num_vars), 1.0);

    auto append = [&](const lp::Problem& p, bool x_block) {
        for (const lp::Row& row : p.rows) {
            lp::Row merged;
            merged.coeffs.assign(static_cast<size_t>(joint.num_vars), 0.0);
            for (int i = 0; i < n_cut; ++i)
                for (int j = 0; j < n_cut; ++j)
                    merged.coeffs[static_cast<size_t>(joint_col(i, j, x_block, n_cut))] =
                        row.coeffs[static_cast<size_t>(decoy_var(i, j, n_cut))];
            merged.lo = row.lo;
            merged.hi = row.hi;
            joint.rows.push_back(std::move(merged));
        }
    };
    append(z, false);
    append(x, true);
    return joint;
}

/// Error-weight program coupled to the yields: variables [b_ij | Y columns of
/// the joint yield program]. On top of the X-basis error windows and both
/// bases' yield windows it enforces b_ij <= Y^X_ij (an error weight never
/// exceeds its yield) and b_0j = Y_0j / 2, b_i0 = Y_i0 / 2: a pulse carrying
/// zero photons carries no bit information, so accepted events on vacuum
/// components err with probability exactly 1/2.
lp::Problem build_coupled_error(const lp::Problem& error_x, const lp::Problem& joint, int n_cut) {
    const int nb = n_cut * n_cut;
    lp::Problem cp;
    cp.num_vars = nb + joint.num_vars;
    cp.var_lo.assign(static_cast<size_t>(cp.num_vars), 0.0);
    cp.var_hi.assign(static_cast<size_t>(cp.num_vars), 1.0);

    for (const lp::Row& row : error_x.rows) {
        lp::Row widened = row;
        widened.coeffs.resize(static_cast<size_t>(cp.num_vars), 0.0);
        cp.rows.push_back(std::move(widened));
    }
    for (const lp::Row& row : joint.rows) {
        lp::Row shifted;
        shifted.coeffs.assign(static_cast<size_t>(cp.num_vars), 0.0);
        for (int v = 0; v < joint.num_vars; ++v)
            shifted.coeffs[static_cast<size_t>(nb + v)] = row.coeffs[static_cast<size_t>(v)];
        shifted.lo = row.lo;
        shifted.hi = row.hi;
        cp.rows.push_back(std::move(shifted));
    }
    for (int i = 0; i < n_cut; ++i)
        for (int j = 0; j < n_cut; ++j) {
            lp::Row row;
            row.coeffs.assign(static_cast<size_t>(cp.num_vars), 0.0);
            row.coeffs[static_cast<size_t>(decoy_var(i, j, n_cut))] = 1.0;
            const int ycol = nb + joint_col(i, j, /*x_block=*/true, n_cut);
            if (i == 0 || j == 0) {
                row.coeffs[static_cast<size_t>(ycol)] = -0.5;
                row.lo = 0.0;
                row.hi = 0.0;
            } else {
                row.coeffs[static_cast<size_t>(ycol)] = -1.0;
                row.lo = -std::numeric_limits<double>::infinity();
                row.hi = 0.0;
            }
            cp.rows.push_back(std::move(row));
        }
    return cp;
}

}  // namespace

DecoySettings DecoySettings::from_config(const ExperimentConfig& cfg) {
    DecoySettings s;
    s.intensities_alice = cfg.intensities_alice;
    s.intensities_bob = cfg.intensities_bob;
    s.photon_cutoff = cfg.photon_cutoff;
    s.fluctuation_sigmas = cfg.fluctuation_sigmas;
    return s;
}

double truncation_tail(double mu, double nu, int n_cut) {
    const double tail = std::exp(mu + nu) - truncated_exp(mu, n_cut) * truncated_exp(nu, n_cut);
    return std::max(tail, 0.0);  // analytically >= 0; guard rounding
}

lp::Problem build_yield_constraints(const RatesTable& rates, const DecoySettings& settings) {
    return build_constraints(rates, settings, /*error_weights=*/false, {});
}

lp::Problem build_error_constraints(const RatesTable& rates, const DecoySettings& settings,
                                    const std::vector<double>& b_upper) {
    return build_constraints(rates, settings, /*error_weights=*/true, b_upper);
}

DecoyEstimate estimate(const RatesTable& z_rates, const RatesTable& x_rates,
                       const DecoySettings& settings) {
    check_settings(settings);
    const int n = settings.photon_cutoff;
    const int v11 = decoy_var(1, 1, n);

    DecoyEstimate est;
    est.photon_cutoff = n;
    est.fluctuation_sigmas = settings.fluctuation_sigmas;

    const lp::Problem yield_z = build_yield_constraints(z_rates, settings);
    const lp::Problem yield_x = build_yield_constraints(x_rates, settings);
    const lp::Problem joint = build_joint_yield(yield_z, yield_x, n);

    // Y11 lower bound from the joint program: it satisfies every Z and X
    // window simultaneously, so its minimum dominates either single-basis
    // minimum while remaining a valid bound on the shared quantity.
    lp::Solution sol =
        solve_or_throw(joint, lp::Sense::minimize,
                       unit_objective(joint.num_vars, joint_col(1, 1, false, n)), "joint yield");
    est.yield_z_status = sol.status;
    est.max_constraint_violation = std::max(est.max_constraint_violation, sol.max_violation);
    est.y11_lower = sol.objective;
    if (est.y11_lower < 0.0 || est.y11_lower > 1.0) {
        est.y11_clamped = true;
        est.y11_lower = std::clamp(est.y11_lower, 0.0, 1.0);
    }

    // Uncoupled X-basis minimum, kept as a diagnostic for how much the
    // cross-basis ties sharpen the bound.
    sol = solve_or_throw(yield_x, lp::Sense::minimize, unit_objective(yield_x.num_vars, v11),
                         "X-basis yield");
    est.yield_x_status = sol.status;
    est.max_constraint_violation = std::max(est.max_constraint_violation, sol.max_violation);
    est.y11_x_lower = std::clamp(sol.objective, 0.0, 1.0);

    const lp::Problem error_x = build_error_constraints(x_rates, settings);
    const lp::Problem coupled = build_coupled_error(error_x, joint, n);
    sol = solve_or_throw(coupled, lp::Sense::maximize, unit_objective(coupled.num_vars, v11),
                         "X-basis error");
    est.error_x_status = sol.status;
    est.max_constraint_violation = std::max(est.max_constraint_violation, sol.max_violation);
    est.b11_upper = std::clamp(sol.objective, 0.0, 1.0);

    double e11 = est.y11_lower > 0.0 ? est.b11_upper / est.y11_lower : 1.0;
    if (est.y11_lower <= 0.0 || e11 > 1.0) {
        est.e11_clamped = true;
        e11 = std::min(e11, 1.0);
    }
    est.e11_upper = e11;
    return est;
}

DecoyEstimate estimate(const TallyTable& table, const ExperimentConfig& cfg) {
    return estimate(rates(table, Basis::Z), rates(table, Basis::X),
                    DecoySettings::from_config(cfg));
}

std::string estimate_to_json(const DecoyEstimate& est) {
    nlohmann::json j;
    j["y11_lower"] = est.y11_lower;
    j["e11_upper"] = est.e11_upper;
    j["y11_x_lower"] = est.y11_x_lower;
    j["b11_upper"] = est.b11_upper;
    j["yield_z_status"] = lp::to_string(est.yield_z_status);
    j["yield_x_status"] = lp::to_string(est.yield_x_status);
    j["error_x_status"] = lp::to_string(est.error_x_status);
    j["max_constraint_violation"] = est.max_constraint_violation;
    j["y11_clamped"] = est.y11_clamped;
    j["e11_clamped"] = est.e11_clamped;
    j["photon_cutoff"] = est.photon_cutoff;
    j["fluctuation_sigmas"] = est.fluctuation_sigmas;
    return j.dump(2) + "\n";
}

DecoyEstimate estimate_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("estimate JSON parse error: ") + e.what());
    }
    auto status = [&](const char* key) {
        const std::string s = j.at(key).get<std::string>();
        if (s == "optimal") return lp::Status::optimal;
        if (s == "infeasible") return lp::Status::infeasible;
        if (s == "unbounded") return lp::Status::unbounded;
        if (s == "iteration_limit") return lp::Status::iteration_limit;
        throw std::runtime_error("estimate JSON: unknown LP status '" + s + "'");
    };
    DecoyEstimate est;
    try {
        est.y11_lower = j.at("y11_lower").get<double>();
        est.e11_upper = j.at("e11_upper").get<double>();
        est.y11_x_lower = j.at("y11_x_lower").get<double>();
        est.b11_upper = j.at("b11_upper").get<double>();
        est.yield_z_status = status("yield_z_status");
        est.yield_x_status = status("yield_x_status");
        est.error_x_status = status("error_x_status");
        est.max_constraint_violation = j.at("max_constraint_violation").get<double>();
        est.y11_clamped = j.at("y11_clamped").get<bool>();
        est.e11_clamped = j.at("e11_clamped").get<bool>();
        est.photon_cutoff = j.at("photon_cutoff").get<int>();
        est.fluctuation_sigmas = j.at("fluctuation_sigmas").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("estimate JSON field error: ") + e.what());
    }
    return est;
}

}  // namespace mdiqkd
