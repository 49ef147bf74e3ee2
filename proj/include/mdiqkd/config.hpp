#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdiqkd {

enum class Basis : std::uint8_t { Z = 0, X = 1 };

constexpr const char* to_string(Basis b) { return b == Basis::Z ? "Z" : "X"; }

/// Number of intensity settings per party (signal + three decoys).
constexpr int kNumIntensities = 4;

/// All physical and protocol parameters of a run. Values are plain data;
/// validation is a separate step so a config can be loaded, inspected and
/// reported on even when invalid.
struct ExperimentConfig {
    std::array<double, kNumIntensities> intensities_alice{};  // mean photons per pulse pair
    std::array<double, kNumIntensities> intensities_bob{};
    std::array<double, kNumIntensities> intensity_probs_alice{};
    std::array<double, kNumIntensities> intensity_probs_bob{};
    double basis_prob_z = 0.5;
    double fiber_length_km_alice = 0.0;
    double fiber_length_km_bob = 0.0;
    double attenuation_db_per_km = 0.2;
    double detector_efficiency = 1.0;       // eta
    double dark_count_prob_per_gate = 0.0;  // per detector per time bin
    double misalignment = 0.0;              // e_d
    std::uint64_t pulse_pairs = 0;          // rounds N
    double repetition_rate_hz = 1e6;
    double ec_efficiency = 1.16;  // f
    double fluctuation_sigmas = 3.0;
    int photon_cutoff = 7;  // n_cut
    std::uint64_t seed = 1;
};

/// One failed invariant: which field and which bound it broke.
struct ConfigViolation {
    std::string field;
    std::string message;
};

class ConfigError : public std::runtime_error {
  public:
    ConfigError(std::string what, std::vector<ConfigViolation> violations)
        : std::runtime_error(std::move(what)), violations_(std::move(violations)) {}
    const std::vector<ConfigViolation>& violations() const { return violations_; }

  private:
    std::vector<ConfigViolation> violations_;
};

/// Checks every config invariant. Empty result means the config is valid.
std::vector<ConfigViolation> validate_config(const ExperimentConfig& cfg);

/// Returns cfg unchanged if valid, otherwise throws ConfigError listing every
/// violated invariant.
ExperimentConfig validated(const ExperimentConfig& cfg);

/// Built-in parameter presets addressable by name ("paper-50km").
/// Returns true if `name` is a known preset.
bool is_preset_name(const std::string& name);
ExperimentConfig preset_config(const std::string& name);

/// JSON (de)serialization. The schema is flat, field names match the struct
/// members exactly, unknown keys are an error. Round-trips bit-exactly.
std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

/// One simulated round. Clicks are ordered (D1,t0), (D1,t1), (D2,t0), (D2,t1).
struct PulsePairOutcome {
    std::uint8_t intensity_index_alice = 0;
    std::uint8_t intensity_index_bob = 0;
    Basis basis_alice = Basis::Z;
    Basis basis_bob = Basis::Z;
    std::uint8_t bit_alice = 0;
    std::uint8_t bit_bob = 0;
    std::array<bool, 4> clicks{};
};

}  // namespace mdiqkd
