#pragma once

#include <complex>

#include "mdiqkd/config.hpp"
#include "mdiqkd/rng.hpp"

namespace mdiqkd {

/// Phase-randomized weak-coherent time-bin pulse pair as it arrives at the
/// beam splitter. Amplitudes are in units of sqrt(photons); the encoding
/// (which bin, relative phase) lives in amp_bin0/amp_bin1, the per-round
/// random phase is kept separate so interference code can apply it where the
/// fields meet.
struct ArmState {
    std::complex<double> amp_bin0{0.0, 0.0};
    std::complex<double> amp_bin1{0.0, 0.0};
    double global_phase = 0.0;  // radians, uniform in [0, 2pi)
};

/// 10^(-attenuation * length / 10): power transmittance of a fiber arm.
double arm_transmittance(double length_km, double attenuation_db_per_km);

/// Builds the arriving coherent state for one party and one round.
/// Z basis puts all amplitude sqrt(tau*I) in the bin named by `bit`;
/// X basis splits sqrt(tau*I/2) across both bins with a relative phase of
/// pi*bit on bin 1. The global phase is drawn fresh from `stream`.
ArmState encode_pulse(double intensity, Basis basis, int bit, double transmittance,
                      rng::Stream& stream);

/// Mean photon number of the state (|amp0|^2 + |amp1|^2).
double total_mean_photons(const ArmState& arm);

}  // namespace mdiqkd
