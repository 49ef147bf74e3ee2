#include "mdiqkd/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mdiqkd {

namespace {

constexpr double kProbSumTol = 1e-9;

void check_prob_vector(std::vector<ConfigViolation>& out, const char* field,
                       const std::array<double, kNumIntensities>& p) {
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0 && v <= 1.0)) {
            out.push_back({field, "entries must lie in [0,1]"});
            return;
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > kProbSumTol)
        out.push_back({field, "normalization violated: entries must sum to 1 within 1e-9"});
}

}  // namespace

std::vector<ConfigViolation> validate_config(const ExperimentConfig& cfg) {
    std::vector<ConfigViolation> v;

    auto check_intensities = [&](const char* field, const std::array<double, kNumIntensities>& in) {
        for (double mu : in)
            if (!(mu >= 0.0) || !std::isfinite(mu)) {
                v.push_back({field, "intensities must be finite and >= 0"});
                return;
            }
    };
    check_intensities("intensities_alice", cfg.intensities_alice);
    check_intensities("intensities_bob", cfg.intensities_bob);
    check_prob_vector(v, "intensity_probs_alice", cfg.intensity_probs_alice);
    check_prob_vector(v, "intensity_probs_bob", cfg.intensity_probs_bob);

    if (!(cfg.basis_prob_z >= 0.0 && cfg.basis_prob_z <= 1.0))
        v.push_back({"basis_prob_z", "must lie in [0,1]"});
    if (!(cfg.fiber_length_km_alice >= 0.0))
        v.push_back({"fiber_length_km_alice", "must be >= 0"});
    if (!(cfg.fiber_length_km_bob >= 0.0))
        v.push_back({"fiber_length_km_bob", "must be >= 0"});
    if (!(cfg.attenuation_db_per_km >= 0.0))
        v.push_back({"attenuation_db_per_km", "must be >= 0"});
    if (!(cfg.detector_efficiency >= 0.0 && cfg.detector_efficiency <= 1.0))
        v.push_back({"detector_efficiency", "must lie in [0,1]"});
    if (!(cfg.dark_count_prob_per_gate >= 0.0 && cfg.dark_count_prob_per_gate < 1.0))
        v.push_back({"dark_count_prob_per_gate", "must lie in [0,1)"});
    if (!(cfg.misalignment >= 0.0 && cfg.misalignment <= 0.5))
        v.push_back({"misalignment", "must lie in [0,0.5]"});
    if (cfg.pulse_pairs < 1)
        v.push_back({"pulse_pairs", "must be >= 1"});
    if (!(cfg.repetition_rate_hz > 0.0))
        v.push_back({"repetition_rate_hz", "must be > 0"});
    if (!(cfg.ec_efficiency >= 1.0))
        v.push_back({"ec_efficiency", "must be >= 1"});
    if (!(cfg.fluctuation_sigmas >= 0.0))
        v.push_back({"fluctuation_sigmas", "must be >= 0"});
    if (cfg.photon_cutoff < 2)
        v.push_back({"photon_cutoff", "must be >= 2"});
    return v;
}

ExperimentConfig validated(const ExperimentConfig& cfg) {
    auto violations = validate_config(cfg);
    if (violations.empty()) return cfg;
    std::ostringstream msg;
    msg << "invalid config:";
    for (const auto& viol : violations) msg << " [" << viol.field << ": " << viol.message << "]";
    throw ConfigError(msg.str(), std::move(violations));
}

bool is_preset_name(const std::string& name) { return name == "paper-50km"; }

ExperimentConfig preset_config(const std::string& name) {
    if (name != "paper-50km") throw std::invalid_argument("unknown preset: " + name);
    ExperimentConfig cfg;
    cfg.intensities_alice = {0.0, 0.1, 0.2, 0.5};
    cfg.intensities_bob = {0.0, 0.1, 0.2, 0.5};
    // Decoy-heavy allocation: the Y11 lower bound lives or dies on the
    // statistics of the 0.1/0.2 cells, while the 0.5/0.5 cell only needs
    // enough weight to carry the key. Vacuum pulls its weight at a
    // fraction of the budget.
    cfg.intensity_probs_alice = {0.10, 0.33, 0.33, 0.24};
    cfg.intensity_probs_bob = {0.10, 0.33, 0.33, 0.24};
    cfg.basis_prob_z = 0.5;
    cfg.fiber_length_km_alice = 25.0;
    cfg.fiber_length_km_bob = 25.0;
    cfg.attenuation_db_per_km = 0.2;  // standard telecom fiber
    cfg.detector_efficiency = 0.20;
    // 1 kHz dark rate gated by the ~2 ns pulse window: 1e3/s * 2e-9 s per bin.
    cfg.dark_count_prob_per_gate = 2e-6;
    // Calibrated so the estimated single-photon phase-error upper bound sits
    // at 24.6% when the estimator is fed exact expected rates at the full
    // 59.5 h x 1 MHz sample (see README, "calibrating the misalignment").
    cfg.misalignment = 0.2685;
    cfg.pulse_pairs = 100'000'000;
    cfg.repetition_rate_hz = 1e6;
    cfg.ec_efficiency = 1.16;
    cfg.fluctuation_sigmas = 3.0;
    cfg.photon_cutoff = 7;
    cfg.seed = 424242;
    return cfg;
}

namespace {

using nlohmann::json;

template <typename T>
void read_field(const json& j, const char* key, T& out, std::set<std::string>& seen) {
    auto it = j.find(key);
    if (it == j.end()) throw std::runtime_error(std::string("config: missing field '") + key + "'");
    try {
        it->get_to(out);
    } catch (const json::exception&) {
        throw std::runtime_error(std::string("config: field '") + key + "' has the wrong type");
    }
    seen.insert(key);
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["intensities_alice"] = cfg.intensities_alice;
    j["intensities_bob"] = cfg.intensities_bob;
    j["intensity_probs_alice"] = cfg.intensity_probs_alice;
    j["intensity_probs_bob"] = cfg.intensity_probs_bob;
    j["basis_prob_z"] = cfg.basis_prob_z;
    j["fiber_length_km_alice"] = cfg.fiber_length_km_alice;
    j["fiber_length_km_bob"] = cfg.fiber_length_km_bob;
    j["attenuation_db_per_km"] = cfg.attenuation_db_per_km;
    j["detector_efficiency"] = cfg.detector_efficiency;
    j["dark_count_prob_per_gate"] = cfg.dark_count_prob_per_gate;
    j["misalignment"] = cfg.misalignment;
    j["pulse_pairs"] = cfg.pulse_pairs;
    j["repetition_rate_hz"] = cfg.repetition_rate_hz;
    j["ec_efficiency"] = cfg.ec_efficiency;
    j["fluctuation_sigmas"] = cfg.fluctuation_sigmas;
    j["photon_cutoff"] = cfg.photon_cutoff;
    j["seed"] = cfg.seed;
    return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("config: not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::runtime_error("config: top level must be an object");

    ExperimentConfig cfg;
    std::set<std::string> seen;
    read_field(j, "intensities_alice", cfg.intensities_alice, seen);
    read_field(j, "intensities_bob", cfg.intensities_bob, seen);
    read_field(j, "intensity_probs_alice", cfg.intensity_probs_alice, seen);
    read_field(j, "intensity_probs_bob", cfg.intensity_probs_bob, seen);
    read_field(j, "basis_prob_z", cfg.basis_prob_z, seen);
    read_field(j, "fiber_length_km_alice", cfg.fiber_length_km_alice, seen);
    read_field(j, "fiber_length_km_bob", cfg.fiber_length_km_bob, seen);
    read_field(j, "attenuation_db_per_km", cfg.attenuation_db_per_km, seen);
    read_field(j, "detector_efficiency", cfg.detector_efficiency, seen);
    read_field(j, "dark_count_prob_per_gate", cfg.dark_count_prob_per_gate, seen);
    read_field(j, "misalignment", cfg.misalignment, seen);
    read_field(j, "pulse_pairs", cfg.pulse_pairs, seen);
    read_field(j, "repetition_rate_hz", cfg.repetition_rate_hz, seen);
    read_field(j, "ec_efficiency", cfg.ec_efficiency, seen);
    read_field(j, "fluctuation_sigmas", cfg.fluctuation_sigmas, seen);
    read_field(j, "photon_cutoff", cfg.photon_cutoff, seen);
    read_field(j, "seed", cfg.seed, seen);

    for (auto it = j.begin(); it != j.end(); ++it)
        if (!seen.count(it.key()))
            throw std::runtime_error("config: unknown field '" + it.key() + "'");
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    if (is_preset_name(path)) return preset_config(path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return config_from_json(buf.str());
}

}  // namespace mdiqkd
