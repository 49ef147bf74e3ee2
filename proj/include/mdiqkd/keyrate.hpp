#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "mdiqkd/config.hpp"
#include "mdiqkd/decoy.hpp"
#include "mdiqkd/tally.hpp"

namespace mdiqkd {

/// Binary Shannon entropy in bits, H(0) = H(1) = 0 by continuity.
/// Throws std::domain_error outside [0,1].
double binary_entropy(double e);

/// Single-photon-pair gain mu*nu*exp(-mu-nu)*y11 for intensities (mu, nu).
double q11_gain(double mu, double nu, double y11);

/// One intensity pair's slice of the key rate. conditional_rate is bits per
/// pulse given both parties chose this pair in the key basis; contribution
/// is that rate times the pair's occupancy weight sent/total_rounds, so the
/// contributions sum directly to the overall per-pulse rate.
struct PairRate {
    double weight = 0.0;
    double gain = 0.0;   // measured Q for the pair
    double error = 0.0;  // measured E for the pair
    double q11 = 0.0;
    double i_ec = 0.0;  // error-correction leakage Q*f*H(E)
    double conditional_rate = 0.0;
    double contribution = 0.0;
    bool empty = false;    // no pulses sent: contributes 0
    bool clamped = false;  // conditional rate was negative before max{.,0}
};

struct KeyRateReport {
    std::array<PairRate, kNumIntensities * kNumIntensities> pairs{};
    double total_rate = 0.0;  // bits per pulse; equals the contribution sum
    double bits_per_second = 0.0;
    double total_key_bits = 0.0;
    double y11_used = 0.0;
    double e11_used = 0.0;
    double ec_efficiency = 0.0;
    double repetition_rate_hz = 0.0;
    std::uint64_t total_rounds = 0;

    const PairRate& at(int k, int l) const {
        return pairs[static_cast<size_t>(k * kNumIntensities + l)];
    }
    PairRate& at(int k, int l) { return pairs[static_cast<size_t>(k * kNumIntensities + l)]; }
};

/// Evaluates the per-pair and total secure key rate from key-basis rates and
/// the decoy bounds, using cfg for intensities, error-correction efficiency
/// and repetition rate.
KeyRateReport key_rate(const RatesTable& z_rates, const DecoyEstimate& estimate,
                       const ExperimentConfig& cfg);

std::string report_to_json(const KeyRateReport& report);
std::string report_to_text(const KeyRateReport& report);

}  // namespace mdiqkd
