#include "oracles.hpp"

#include <cmath>
#include <complex>

namespace mdiqkd::oracle {
namespace {

using cplx = std::complex<double>;

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

double binomial(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

/// Coherent-state Fock coefficient <n|alpha> = e^{-|a|^2/2} a^n / sqrt(n!).
cplx coherent_coeff(cplx alpha, int n) {
    cplx p = 1.0;
    for (int i = 0; i < n; ++i) p *= alpha;
    return std::exp(-0.5 * std::norm(alpha)) * p / std::sqrt(factorial(n));
}

/// <m1, m2 | BS | na, nb> for a balanced splitter with a = (d1+d2)/sqrt(2),
/// b = (d1-d2)/sqrt(2); m2 = na + nb - m1 implied.
double bs_amplitude(int na, int nb, int m1) {
    const int total = na + nb;
    const int m2 = total - m1;
    if (m1 < 0 || m2 < 0) return 0.0;
    double sum = 0.0;
    for (int j = std::max(0, m1 - nb); j <= std::min(na, m1); ++j) {
        const int k = m1 - j;
        sum += binomial(na, j) * binomial(nb, k) * (((nb - k) % 2 == 0) ? 1.0 : -1.0);
    }
    return sum * std::sqrt(factorial(m1) * factorial(m2) / (factorial(na) * factorial(nb))) /
           std::pow(2.0, 0.5 * total);
}

double click_given_n(int n, double eta, double p_d) {
    return 1.0 - (1.0 - p_d) * std::pow(1.0 - eta, n);
}

/// One detector-bin mode's mean photon number from interfered amplitudes.
std::array<double, 4> mode_means(const ArmState& alice, const ArmState& bob) {
    const cplx pa = std::polar(1.0, alice.global_phase);
    const cplx pb = std::polar(1.0, bob.global_phase);
    const cplx a0 = alice.amp_bin0 * pa, a1 = alice.amp_bin1 * pa;
    const cplx b0 = bob.amp_bin0 * pb, b1 = bob.amp_bin1 * pb;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    return {std::norm((a0 + b0) * inv_sqrt2), std::norm((a1 + b1) * inv_sqrt2),
            std::norm((a0 - b0) * inv_sqrt2), std::norm((a1 - b1) * inv_sqrt2)};
}

std::array<double, 16> pattern_probs_from_click_probs(const std::array<double, 4>& q) {
    std::array<double, 16> probs{};
    for (int pattern = 0; pattern < 16; ++pattern) {
        double p = 1.0;
        for (int m = 0; m < 4; ++m)
            p *= (pattern >> m) & 1 ? q[static_cast<size_t>(m)] : 1.0 - q[static_cast<size_t>(m)];
        probs[static_cast<size_t>(pattern)] = p;
    }
    return probs;
}

}  // namespace

std::array<double, 16> fock_pattern_probs(const ArmState& alice, const ArmState& bob,
                                          const DetectorModel& model, int cutoff) {
    const cplx pa = std::polar(1.0, alice.global_phase);
    const cplx pb = std::polar(1.0, bob.global_phase);
    const cplx a0 = alice.amp_bin0 * pa, a1 = alice.amp_bin1 * pa;
    const cplx b0 = bob.amp_bin0 * pb, b1 = bob.amp_bin1 * pb;

    // Joint output amplitude over photon numbers (m10, m11, m20, m21) in the
    // four detector-bin modes; amplitudes from different input Fock terms
    // landing on the same output interfere.
    const int dim = 2 * cutoff + 1;
    std::vector<cplx> amp(static_cast<size_t>(dim * dim * dim * dim), cplx(0.0));
    auto at = [&](int m10, int m11, int m20, int m21) -> cplx& {
        return amp[static_cast<size_t>(((m10 * dim + m11) * dim + m20) * dim + m21)];
    };

    for (int na0 = 0; na0 <= cutoff; ++na0)
        for (int na1 = 0; na1 + na0 <= cutoff; ++na1)
            for (int nb0 = 0; nb0 <= cutoff; ++nb0)
                for (int nb1 = 0; nb1 + nb0 <= cutoff; ++nb1) {
                    const cplx in = coherent_coeff(a0, na0) * coherent_coeff(a1, na1) *
                                    coherent_coeff(b0, nb0) * coherent_coeff(b1, nb1);
                    if (std::norm(in) < 1e-40) continue;
                    for (int m10 = 0; m10 <= na0 + nb0; ++m10) {
                        const double t0 = bs_amplitude(na0, nb0, m10);
                        if (t0 == 0.0) continue;
                        for (int m11 = 0; m11 <= na1 + nb1; ++m11) {
                            const double t1 = bs_amplitude(na1, nb1, m11);
                            if (t1 == 0.0) continue;
                            at(m10, m11, na0 + nb0 - m10, na1 + nb1 - m11) += in * t0 * t1;
                        }
                    }
                }

    std::array<double, 16> probs{};
    for (int m10 = 0; m10 < dim; ++m10)
        for (int m11 = 0; m11 < dim; ++m11)
            for (int m20 = 0; m20 < dim; ++m20)
                for (int m21 = 0; m21 < dim; ++m21) {
                    const double p = std::norm(at(m10, m11, m20, m21));
                    if (p == 0.0) continue;
                    const double q0 = click_given_n(m10, model.efficiency, model.dark_count_prob);
                    const double q1 = click_given_n(m11, model.efficiency, model.dark_count_prob);
                    const double q2 = click_given_n(m20, model.efficiency, model.dark_count_prob);
                    const double q3 = click_given_n(m21, model.efficiency, model.dark_count_prob);
                    for (int pattern = 0; pattern < 16; ++pattern) {
                        double f = p;
                        f *= (pattern & 1) ? q0 : 1.0 - q0;
                        f *= (pattern & 2) ? q1 : 1.0 - q1;
                        f *= (pattern & 4) ? q2 : 1.0 - q2;
                        f *= (pattern & 8) ? q3 : 1.0 - q3;
                        probs[static_cast<size_t>(pattern)] += f;
                    }
                }
    return probs;
}

std::array<double, 16> analytic_pattern_probs(const ArmState& alice, const ArmState& bob,
                                              const DetectorModel& model) {
    const BsmOutputs outputs = interfere(alice, bob);
    return pattern_probs_from_click_probs(click_probabilities(outputs, model));
}

namespace {

/// Amplitudes at the beam splitter for a deterministic encoding (zero global
/// phase; the quadrature below integrates phases explicitly).
ArmState encoded_arm(double intensity, double transmittance, Basis basis, int bit) {
    ArmState arm;
    arm.global_phase = 0.0;
    const double tau_i = transmittance * intensity;
    if (basis == Basis::Z) {
        (bit == 0 ? arm.amp_bin0 : arm.amp_bin1) = std::sqrt(tau_i);
    } else {
        arm.amp_bin0 = std::sqrt(0.5 * tau_i);
        arm.amp_bin1 = std::sqrt(0.5 * tau_i) * (bit == 0 ? 1.0 : -1.0);
    }
    return arm;
}

constexpr int kQuadraturePoints = 512;

double click_from_mean(double m, double eta, double p_d) {
    return 1.0 - (1.0 - p_d) * std::exp(-eta * m);
}

/// P(accept) and P(accept & two-click pattern) pieces for an aligned round:
/// single integral over the relative global phase.
double accept_prob_aligned(const ArmState& a, const ArmState& b, double eta, double p_d) {
    double acc = 0.0;
    for (int s = 0; s < kQuadraturePoints; ++s) {
        const double delta = (s + 0.5) * 2.0 * M_PI / kQuadraturePoints;
        const cplx rot = std::polar(1.0, delta);
        const double inv2 = 0.5;
        const double m0 = std::norm(a.amp_bin0 + b.amp_bin0 * rot) * inv2;
        const double m1 = std::norm(a.amp_bin1 + b.amp_bin1 * rot) * inv2;
        const double m2 = std::norm(a.amp_bin0 - b.amp_bin0 * rot) * inv2;
        const double m3 = std::norm(a.amp_bin1 - b.amp_bin1 * rot) * inv2;
        const double q0 = click_from_mean(m0, eta, p_d), q1 = click_from_mean(m1, eta, p_d);
        const double q2 = click_from_mean(m2, eta, p_d), q3 = click_from_mean(m3, eta, p_d);
        acc += q0 * q3 * (1 - q1) * (1 - q2) + q1 * q2 * (1 - q0) * (1 - q3);
    }
    return acc / kQuadraturePoints;
}

/// Misaligned rounds: each bin's relative phase is independently uniform, so
/// the two bins decouple; integrate each bin's 2x2 click table separately.
double accept_prob_misaligned(const ArmState& a, const ArmState& b, double eta, double p_d) {
    // F[bin][cD1][cD2]
    double F[2][2][2] = {};
    for (int bin = 0; bin < 2; ++bin) {
        const cplx aa = bin == 0 ? a.amp_bin0 : a.amp_bin1;
        const cplx bb = bin == 0 ? b.amp_bin0 : b.amp_bin1;
        for (int s = 0; s < kQuadraturePoints; ++s) {
            const double delta = (s + 0.5) * 2.0 * M_PI / kQuadraturePoints;
            const cplx rot = std::polar(1.0, delta);
            const double mD1 = std::norm(aa + bb * rot) * 0.5;
            const double mD2 = std::norm(aa - bb * rot) * 0.5;
            const double q1 = click_from_mean(mD1, eta, p_d);
            const double q2 = click_from_mean(mD2, eta, p_d);
            F[bin][0][0] += (1 - q1) * (1 - q2);
            F[bin][0][1] += (1 - q1) * q2;
            F[bin][1][0] += q1 * (1 - q2);
            F[bin][1][1] += q1 * q2;
        }
        for (int c1 = 0; c1 < 2; ++c1)
            for (int c2 = 0; c2 < 2; ++c2) F[bin][c1][c2] /= kQuadraturePoints;
    }
    // Accepted patterns: (D1,t0)&(D2,t1) or (D1,t1)&(D2,t0), nothing else.
    return F[0][1][0] * F[1][0][1] + F[0][0][1] * F[1][1][0];
}

}  // namespace

CellExpectation expected_cell(const ExperimentConfig& cfg, int k, int l, Basis basis) {
    const double tau_a = arm_transmittance(cfg.fiber_length_km_alice, cfg.attenuation_db_per_km);
    const double tau_b = arm_transmittance(cfg.fiber_length_km_bob, cfg.attenuation_db_per_km);
    const double mu = cfg.intensities_alice[static_cast<size_t>(k)];
    const double nu = cfg.intensities_bob[static_cast<size_t>(l)];
    const double eta = cfg.detector_efficiency, p_d = cfg.dark_count_prob_per_gate;

    CellExpectation cell;
    for (int bit_a = 0; bit_a < 2; ++bit_a) {
        for (int bit_b = 0; bit_b < 2; ++bit_b) {
            const ArmState a = encoded_arm(mu, tau_a, basis, bit_a);
            const ArmState b = encoded_arm(nu, tau_b, basis, bit_b);
            const double aligned = accept_prob_aligned(a, b, eta, p_d);
            const double misaligned = accept_prob_misaligned(a, b, eta, p_d);
            const double acc =
                0.25 * ((1.0 - cfg.misalignment) * aligned + cfg.misalignment * misaligned);
            cell.q += acc;
            if (bit_a == bit_b) cell.w += acc;  // raw agreement is a sifted error
        }
    }
    return cell;
}

RatesTable expected_rates(const ExperimentConfig& cfg, Basis basis) {
    RatesTable table;
    table.total_rounds = cfg.pulse_pairs;
    const double p_basis = basis == Basis::Z ? cfg.basis_prob_z : 1.0 - cfg.basis_prob_z;
    for (int k = 0; k < kNumIntensities; ++k) {
        for (int l = 0; l < kNumIntensities; ++l) {
            const CellExpectation exp_cell = expected_cell(cfg, k, l, basis);
            const double p_cell = p_basis * p_basis *
                                  cfg.intensity_probs_alice[static_cast<size_t>(k)] *
                                  cfg.intensity_probs_bob[static_cast<size_t>(l)];
            CellRate& rate = table.at(k, l);
            rate.sent = static_cast<std::uint64_t>(
                std::llround(p_cell * static_cast<double>(cfg.pulse_pairs)));
            rate.accepted = static_cast<std::uint64_t>(
                std::llround(exp_cell.q * static_cast<double>(rate.sent)));
            rate.errors = static_cast<std::uint64_t>(
                std::llround(exp_cell.w * static_cast<double>(rate.sent)));
            rate.q = exp_cell.q;
            rate.e = exp_cell.e();
            rate.empty = rate.sent == 0;
            rate.e_undefined = rate.accepted == 0;
            if (rate.sent > 0) {
                const double n = static_cast<double>(rate.sent);
                rate.sigma_q = std::sqrt(std::max(rate.q * (1.0 - rate.q), 0.0) / n);
                const double na = std::max(static_cast<double>(rate.accepted), 1.0);
                rate.sigma_e = std::sqrt(std::max(rate.e * (1.0 - rate.e), 0.0) / na);
            }
        }
    }
    return table;
}

PlantedModel random_planted(rng::Stream& stream, int n_cut) {
    PlantedModel m;
    m.n_cut = n_cut;
    m.y.resize(static_cast<size_t>(n_cut * n_cut));
    m.e.resize(static_cast<size_t>(n_cut * n_cut));
    for (auto& v : m.y) v = stream.next_unit();
    for (auto& v : m.e) v = 0.5 * stream.next_unit();
    // Physical channels err with probability exactly 1/2 whenever either
    // pulse is vacuum: a zero-photon pulse carries no bit information.
    for (int i = 0; i < n_cut; ++i) {
        m.e[static_cast<size_t>(i * n_cut)] = 0.5;
        m.e[static_cast<size_t>(i)] = 0.5;
    }
    return m;
}

RatesTable planted_rates(const PlantedModel& m, const std::array<double, 4>& mu,
                         const std::array<double, 4>& nu, std::uint64_t sent_per_cell) {
    RatesTable table;
    table.total_rounds = sent_per_cell * 16;
    for (int k = 0; k < kNumIntensities; ++k) {
        for (int l = 0; l < kNumIntensities; ++l) {
            double qe = 0.0, we = 0.0;  // Q e^{mu+nu} and E Q e^{mu+nu}
            for (int i = 0; i < m.n_cut; ++i) {
                for (int j = 0; j < m.n_cut; ++j) {
                    double coeff = 1.0;
                    for (int a = 1; a <= i; ++a) coeff *= mu[static_cast<size_t>(k)] / a;
                    for (int a = 1; a <= j; ++a) coeff *= nu[static_cast<size_t>(l)] / a;
                    const double y = m.y[static_cast<size_t>(i * m.n_cut + j)];
                    qe += coeff * y;
                    we += coeff * y * m.e[static_cast<size_t>(i * m.n_cut + j)];
                }
            }
            const double damp =
                std::exp(-mu[static_cast<size_t>(k)] - nu[static_cast<size_t>(l)]);
            CellRate& rate = table.at(k, l);
            rate.q = qe * damp;
            rate.e = rate.q > 0.0 ? (we * damp) / rate.q : 0.0;
            rate.sent = sent_per_cell;
            rate.accepted = static_cast<std::uint64_t>(
                std::llround(rate.q * static_cast<double>(sent_per_cell)));
            rate.errors = static_cast<std::uint64_t>(
                std::llround(rate.e * rate.q * static_cast<double>(sent_per_cell)));
            rate.empty = false;
            rate.e_undefined = rate.q <= 0.0;
            if (sent_per_cell > 0) {
                const double n = static_cast<double>(sent_per_cell);
                rate.sigma_q = std::sqrt(std::max(rate.q * (1.0 - rate.q), 0.0) / n);
                rate.sigma_e = std::sqrt(std::max(rate.e * (1.0 - rate.e), 0.0) /
                                         std::max(rate.q * n, 1.0));
            }
        }
    }
    return table;
}

}  // namespace mdiqkd::oracle
