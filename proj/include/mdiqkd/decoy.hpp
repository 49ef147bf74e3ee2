#pragma once

#include <array>
#include <string>
#include <vector>

#include "mdiqkd/config.hpp"
#include "mdiqkd/lp.hpp"
#include "mdiqkd/tally.hpp"

namespace mdiqkd {

/// Settings for the photon-number-resolved linear programs.
struct DecoySettings {
    std::array<double, kNumIntensities> intensities_alice{};
    std::array<double, kNumIntensities> intensities_bob{};
    int photon_cutoff = 7;       // variables Y_ij for i,j < cutoff
    double fluctuation_sigmas = 3.0;

    static DecoySettings from_config(const ExperimentConfig& cfg);
};

class DecoyError : public std::runtime_error {
  public:
    enum class Kind { missing_cell, infeasible, solver_failure };

    DecoyError(Kind kind, std::string message) : std::runtime_error(std::move(message)), kind_(kind) {}
    Kind kind() const { return kind_; }

  private:
    Kind kind_;
};

/// Bounds extracted from the decoy-state linear programs. With uniform bits
/// the bit-averaged vacuum/single-photon inputs are the same state in either
/// basis, so Y00, Y01, Y10, Y11 are basis-independent; y11_lower minimizes the
/// shared Y11 over a joint program that stacks both bases' windows and ties
/// those four yields equal across bases. e11_upper = b11_upper / y11_lower.
/// Clamp flags record whether the raw LP output left [0,1] before clamping.
struct DecoyEstimate {
    double y11_lower = 0.0;
    double e11_upper = 1.0;
    double y11_x_lower = 0.0;  // X-windows-only minimum, for comparison
    double b11_upper = 0.0;    // numerator of e11_upper (= max e11*Y11)
    lp::Status yield_z_status = lp::Status::optimal;  // joint yield minimization
    lp::Status yield_x_status = lp::Status::optimal;  // uncoupled X minimization
    lp::Status error_x_status = lp::Status::optimal;
    double max_constraint_violation = 0.0;  // worst residual over all LPs
    bool y11_clamped = false;
    bool e11_clamped = false;
    int photon_cutoff = 0;
    double fluctuation_sigmas = 0.0;
};

/// Photon-number variable index within an LP over {Y_ij} or {b_ij}.
inline int decoy_var(int i, int j, int n_cut) { return i * n_cut + j; }

/// Truncation tail for cell (mu, nu): sum over i or j >= n_cut of
/// mu^i nu^j / (i! j!), evaluated in closed form as
/// e^{mu+nu} - S(mu) S(nu) with S the truncated exponential series.
double truncation_tail(double mu, double nu, int n_cut);

/// Yield constraints, Y variables in [0,1]: for every intensity pair (k,l),
///   (Q - s*sigma_Q) e^{mu+nu} <= sum_{i,j<cut} mu^i nu^j/(i!j!) Y_ij
///                              <= (Q + s*sigma_Q) e^{mu+nu} + tail(k,l).
/// The lower side is floored at 0. sigma_Q is taken from the rates table,
/// floored at 1/sent when counts are present (an observed 0 still admits a
/// true rate of order 1/sent).
lp::Problem build_yield_constraints(const RatesTable& rates, const DecoySettings& settings);

/// Error-weight constraints over b_ij = e_ij * Y_ij, same algebra with
/// W = E*Q in place of Q. b_upper, when provided, box-bounds each b_ij by a
/// feasible upper bound on the matching Y_ij (b <= Y always); defaults to 1.
lp::Problem build_error_constraints(const RatesTable& rates, const DecoySettings& settings,
                                    const std::vector<double>& b_upper = {});

/// Full estimation: y11_lower = min Y11 over the joint two-basis yield
/// program (both bases' windows, vacuum/single yields shared across bases);
/// b11_upper = max b11 over the X error windows coupled to that program
/// (b_ij <= Y^X_ij, and vacuum error weights pinned to Y/2 because a
/// zero-photon pulse carries no bit information); e11_upper = b11_upper /
/// y11_lower. Throws DecoyError on infeasibility.
DecoyEstimate estimate(const RatesTable& z_rates, const RatesTable& x_rates,
                       const DecoySettings& settings);
DecoyEstimate estimate(const TallyTable& table, const ExperimentConfig& cfg);

std::string estimate_to_json(const DecoyEstimate& est);
DecoyEstimate estimate_from_json(const std::string& text);

}  // namespace mdiqkd
