#pragma once

#include <array>

#include "mdiqkd/config.hpp"
#include "mdiqkd/source.hpp"

namespace mdiqkd {

/// Threshold (non-number-resolving) detector pair behind the beam splitter.
struct DetectorModel {
    double efficiency = 1.0;       // eta
    double dark_count_prob = 0.0;  // p_d, per detector per time bin
    double misalignment = 0.0;     // e_d

    static DetectorModel from_config(const ExperimentConfig& cfg) {
        return {cfg.detector_efficiency, cfg.dark_count_prob_per_gate, cfg.misalignment};
    }
};

/// Output-mode amplitudes after the 50:50 beam splitter, one complex
/// amplitude per (detector, bin). Index order matches PulsePairOutcome::clicks:
/// (D1,t0), (D1,t1), (D2,t0), (D2,t1).
struct BsmOutputs {
    std::array<std::complex<double>, 4> amps{};

    double mean_photons(int mode) const { return std::norm(amps[static_cast<size_t>(mode)]); }
};

/// Interferes the two arms on a balanced splitter after applying each arm's
/// global phase: per bin, D1 = (a + b)/sqrt(2), D2 = (a - b)/sqrt(2).
/// Energy is conserved per bin.
BsmOutputs interfere(const ArmState& alice, const ArmState& bob);

/// Click probability of one threshold detector-bin: 1 - (1-p_d) exp(-eta m).
double click_probability(double mean_photons, double efficiency, double dark_count_prob);

/// Per-mode click probabilities for all four detector-bins.
std::array<double, 4> click_probabilities(const BsmOutputs& outputs, const DetectorModel& model);

/// Samples the four independent click flags.
std::array<bool, 4> detect(const BsmOutputs& outputs, const DetectorModel& model,
                           rng::Stream& stream);

/// Precomputes per-config quantities (fiber transmittances, cumulative
/// intensity probabilities) and simulates rounds. Rounds are independent and
/// deterministic given (cfg.seed, round_index), so any execution order or
/// partitioning reproduces the same outcomes.
class RoundSimulator {
  public:
    explicit RoundSimulator(const ExperimentConfig& cfg);

    PulsePairOutcome simulate(std::uint64_t round_index) const;

    double transmittance_alice() const { return tau_alice_; }
    double transmittance_bob() const { return tau_bob_; }

  private:
    static int pick_index(const std::array<double, kNumIntensities>& cum, double u);

    ExperimentConfig cfg_;
    DetectorModel model_;
    double tau_alice_;
    double tau_bob_;
    std::array<double, kNumIntensities> cum_probs_alice_{};
    std::array<double, kNumIntensities> cum_probs_bob_{};
};

/// One-shot convenience wrapper around RoundSimulator.
PulsePairOutcome simulate_round(const ExperimentConfig& cfg, std::uint64_t round_index);

}  // namespace mdiqkd
