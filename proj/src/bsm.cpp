#include "mdiqkd/bsm.hpp"

#include <cassert>
#include <cmath>
#include <numbers>

namespace mdiqkd {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kInvSqrt2 = std::numbers::sqrt2 / 2.0;
}  // namespace

BsmOutputs interfere(const ArmState& alice, const ArmState& bob) {
    const auto rot_a = std::polar(1.0, alice.global_phase);
    const auto rot_b = std::polar(1.0, bob.global_phase);

    BsmOutputs out;
    const std::complex<double> a0 = alice.amp_bin0 * rot_a;
    const std::complex<double> a1 = alice.amp_bin1 * rot_a;
    const std::complex<double> b0 = bob.amp_bin0 * rot_b;
    const std::complex<double> b1 = bob.amp_bin1 * rot_b;
    out.amps[0] = (a0 + b0) * kInvSqrt2;  // D1, t0
    out.amps[1] = (a1 + b1) * kInvSqrt2;  // D1, t1
    out.amps[2] = (a0 - b0) * kInvSqrt2;  // D2, t0
    out.amps[3] = (a1 - b1) * kInvSqrt2;  // D2, t1

    assert(std::abs((out.mean_photons(0) + out.mean_photons(2)) - (std::norm(a0) + std::norm(b0))) <
           1e-12 * (1.0 + std::norm(a0) + std::norm(b0)));
    assert(std::abs((out.mean_photons(1) + out.mean_photons(3)) - (std::norm(a1) + std::norm(b1))) <
           1e-12 * (1.0 + std::norm(a1) + std::norm(b1)));
    return out;
}

double click_probability(double mean_photons, double efficiency, double dark_count_prob) {
    return 1.0 - (1.0 - dark_count_prob) * std::exp(-efficiency * mean_photons);
}

std::array<double, 4> click_probabilities(const BsmOutputs& outputs, const DetectorModel& model) {
    std::array<double, 4> probs;
    for (int m = 0; m < 4; ++m)
        probs[static_cast<size_t>(m)] =
            click_probability(outputs.mean_photons(m), model.efficiency, model.dark_count_prob);
    return probs;
}

std::array<bool, 4> detect(const BsmOutputs& outputs, const DetectorModel& model,
                           rng::Stream& stream) {
    const auto probs = click_probabilities(outputs, model);
    std::array<bool, 4> clicks;
    for (int m = 0; m < 4; ++m) clicks[static_cast<size_t>(m)] = stream.next_bernoulli(probs[static_cast<size_t>(m)]);
    return clicks;
}

RoundSimulator::RoundSimulator(const ExperimentConfig& cfg)
    : cfg_(cfg),
      model_(DetectorModel::from_config(cfg)),
      tau_alice_(arm_transmittance(cfg.fiber_length_km_alice, cfg.attenuation_db_per_km)),
      tau_bob_(arm_transmittance(cfg.fiber_length_km_bob, cfg.attenuation_db_per_km)) {
    double ca = 0.0, cb = 0.0;
    for (int i = 0; i < kNumIntensities; ++i) {
        ca += cfg.intensity_probs_alice[static_cast<size_t>(i)];
        cb += cfg.intensity_probs_bob[static_cast<size_t>(i)];
        cum_probs_alice_[static_cast<size_t>(i)] = ca;
        cum_probs_bob_[static_cast<size_t>(i)] = cb;
    }
}

int RoundSimulator::pick_index(const std::array<double, kNumIntensities>& cum, double u) {
    for (int i = 0; i < kNumIntensities - 1; ++i)
        if (u < cum[static_cast<size_t>(i)]) return i;
    return kNumIntensities - 1;
}

PulsePairOutcome RoundSimulator::simulate(std::uint64_t round_index) const {
    rng::Stream stream(rng::derive_round_seed(cfg_.seed, round_index));

    PulsePairOutcome outcome;
    outcome.intensity_index_alice =
        static_cast<std::uint8_t>(pick_index(cum_probs_alice_, stream.next_unit()));
    outcome.intensity_index_bob =
        static_cast<std::uint8_t>(pick_index(cum_probs_bob_, stream.next_unit()));
    outcome.basis_alice = stream.next_unit() < cfg_.basis_prob_z ? Basis::Z : Basis::X;
    outcome.basis_bob = stream.next_unit() < cfg_.basis_prob_z ? Basis::Z : Basis::X;
    outcome.bit_alice = static_cast<std::uint8_t>(stream.next_bit());
    outcome.bit_bob = static_cast<std::uint8_t>(stream.next_bit());

    ArmState alice = encode_pulse(cfg_.intensities_alice[outcome.intensity_index_alice],
                                  outcome.basis_alice, outcome.bit_alice, tau_alice_, stream);
    ArmState bob = encode_pulse(cfg_.intensities_bob[outcome.intensity_index_bob],
                                outcome.basis_bob, outcome.bit_bob, tau_bob_, stream);

    // Misalignment: with probability e_d the two sources are effectively
    // distinguishable this round. Each of Bob's bins picks up an independent
    // uniform phase, which removes any phase relation between the bins and
    // with Alice while conserving energy.
    if (stream.next_bernoulli(model_.misalignment)) {
        bob.amp_bin0 *= std::polar(1.0, stream.next_unit() * kTwoPi);
        bob.amp_bin1 *= std::polar(1.0, stream.next_unit() * kTwoPi);
    }

    outcome.clicks = detect(interfere(alice, bob), model_, stream);
    return outcome;
}

PulsePairOutcome simulate_round(const ExperimentConfig& cfg, std::uint64_t round_index) {
    return RoundSimulator(cfg).simulate(round_index);
}

}  // namespace mdiqkd
