#include "mdiqkd/keyrate.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mdiqkd {

double binary_entropy(double e) {
    if (!(e >= 0.0 && e <= 1.0))
        throw std::domain_error("binary_entropy: argument must lie in [0,1]");
    double h = 0.0;
    if (e > 0.0) h -= e * std::log2(e);
    if (e < 1.0) h -= (1.0 - e) * std::log2(1.0 - e);
    return h;
}

double q11_gain(double mu, double nu, double y11) {
    if (mu < 0.0 || nu < 0.0) throw std::domain_error("q11_gain: intensities must be nonnegative");
    if (!(y11 >= 0.0 && y11 <= 1.0)) throw std::domain_error("q11_gain: y11 must lie in [0,1]");
    return mu * nu * std::exp(-mu - nu) * y11;
}

KeyRateReport key_rate(const RatesTable& z_rates, const DecoyEstimate& estimate,
                       const ExperimentConfig& cfg) {
    KeyRateReport report;
    report.y11_used = estimate.y11_lower;
    report.e11_used = estimate.e11_upper;
    report.ec_efficiency = cfg.ec_efficiency;
    report.repetition_rate_hz = cfg.repetition_rate_hz;
    report.total_rounds = z_rates.total_rounds;

    // A phase-error bound at or beyond 1/2 leaves no extractable privacy;
    // capping the entropy argument there keeps H monotone in the bound
    // (H(0.7) < H(0.5) would otherwise credit worse bounds with more key).
    const double privacy = 1.0 - binary_entropy(std::min(estimate.e11_upper, 0.5));
    for (int k = 0; k < kNumIntensities; ++k) {
        for (int l = 0; l < kNumIntensities; ++l) {
            const CellRate& cell = z_rates.at(k, l);
            PairRate& pair = report.at(k, l);
            pair.gain = cell.q;
            pair.error = cell.e;
            if (cell.empty) {
                pair.empty = true;
                continue;
            }
            const double mu = cfg.intensities_alice[static_cast<size_t>(k)];
            const double nu = cfg.intensities_bob[static_cast<size_t>(l)];
            pair.q11 = q11_gain(mu, nu, estimate.y11_lower);
            pair.i_ec = cell.q * cfg.ec_efficiency * binary_entropy(cell.e);
            const double raw = pair.q11 * privacy - pair.i_ec;
            pair.clamped = raw < 0.0;
            pair.conditional_rate = std::max(raw, 0.0);
            if (report.total_rounds > 0)
                pair.weight =
                    static_cast<double>(cell.sent) / static_cast<double>(report.total_rounds);
            pair.contribution = pair.weight * pair.conditional_rate;
            report.total_rate += pair.contribution;
        }
    }
    report.bits_per_second = report.total_rate * cfg.repetition_rate_hz;
    report.total_key_bits = report.total_rate * static_cast<double>(report.total_rounds);
    return report;
}

std::string report_to_json(const KeyRateReport& report) {
    nlohmann::json j;
    j["total_rate_bits_per_pulse"] = report.total_rate;
    j["bits_per_second"] = report.bits_per_second;
    j["total_key_bits"] = report.total_key_bits;
    j["y11_used"] = report.y11_used;
    j["e11_used"] = report.e11_used;
    j["ec_efficiency"] = report.ec_efficiency;
    j["repetition_rate_hz"] = report.repetition_rate_hz;
    j["total_rounds"] = report.total_rounds;
    nlohmann::json pairs = nlohmann::json::array();
    for (int k = 0; k < kNumIntensities; ++k) {
        for (int l = 0; l < kNumIntensities; ++l) {
            const PairRate& p = report.at(k, l);
            nlohmann::json jp;
            jp["k"] = k;
            jp["l"] = l;
            jp["weight"] = p.weight;
            jp["gain"] = p.gain;
            jp["error"] = p.error;
            jp["q11"] = p.q11;
            jp["i_ec"] = p.i_ec;
            jp["conditional_rate"] = p.conditional_rate;
            jp["contribution"] = p.contribution;
            jp["empty"] = p.empty;
            jp["clamped"] = p.clamped;
            pairs.push_back(std::move(jp));
        }
    }
    j["pairs"] = std::move(pairs);
    return j.dump(2) + "\n";
}

std::string report_to_text(const KeyRateReport& report) {
    std::ostringstream out;
    out.precision(6);
    out << "secure key rate summary\n"
        << "  Y11 lower bound : " << report.y11_used << "\n"
        << "  e11 upper bound : " << report.e11_used << "\n"
        << "  EC efficiency f : " << report.ec_efficiency << "\n"
        << "  rounds          : " << report.total_rounds << "\n\n"
        << "  k l    weight        Q            E        cond. rate   contribution\n";
    for (int k = 0; k < kNumIntensities; ++k) {
        for (int l = 0; l < kNumIntensities; ++l) {
            const PairRate& p = report.at(k, l);
            out << "  " << k << " " << l << "  ";
            out.setf(std::ios::scientific);
            out << p.weight << "  " << p.gain << "  " << p.error << "  " << p.conditional_rate
                << "  " << p.contribution;
            out.unsetf(std::ios::scientific);
            if (p.empty) out << "  (no data)";
            if (p.clamped) out << "  (clamped to 0)";
            out << "\n";
        }
    }
    out.setf(std::ios::scientific);
    out << "\n  total rate      : " << report.total_rate << " bits/pulse\n"
        << "  key throughput  : " << report.bits_per_second << " bits/s\n"
        << "  run total       : " << report.total_key_bits << " bits\n";
    return out.str();
}

}  // namespace mdiqkd
