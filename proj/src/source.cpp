#include "mdiqkd/source.hpp"

#include <cassert>
#include <cmath>
#include <numbers>

namespace mdiqkd {

double arm_transmittance(double length_km, double attenuation_db_per_km) {
    return std::pow(10.0, -attenuation_db_per_km * length_km / 10.0);
}

ArmState encode_pulse(double intensity, Basis basis, int bit, double transmittance,
                      rng::Stream& stream) {
    ArmState arm;
    arm.global_phase = stream.next_unit() * 2.0 * std::numbers::pi;

    const double arrived = transmittance * intensity;
    if (basis == Basis::Z) {
        const double amp = std::sqrt(arrived);
        (bit == 0 ? arm.amp_bin0 : arm.amp_bin1) = amp;
    } else {
        const double amp = std::sqrt(arrived / 2.0);
        arm.amp_bin0 = amp;
        arm.amp_bin1 = (bit == 0) ? amp : -amp;  // relative phase 0 or pi
    }
    assert(std::abs(total_mean_photons(arm) - arrived) <= 1e-12 * (1.0 + arrived));
    return arm;
}

double total_mean_photons(const ArmState& arm) {
    return std::norm(arm.amp_bin0) + std::norm(arm.amp_bin1);
}

}  // namespace mdiqkd
