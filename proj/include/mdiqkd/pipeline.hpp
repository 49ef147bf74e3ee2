#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdiqkd/config.hpp"
#include "mdiqkd/decoy.hpp"
#include "mdiqkd/keyrate.hpp"
#include "mdiqkd/tally.hpp"

namespace mdiqkd {

inline constexpr const char* kVersion = "1.0.0";

/// Rounds per work partition; long runs are chunked at this grain so they can
/// be parallelized and checkpointed.
inline constexpr std::uint64_t kPartitionRounds = 1'000'000;

enum class LogLevel { debug = 0, info, warn, error, silent };

/// Level parsed from the MDIQKD_LOG environment variable (default: warn).
LogLevel log_level();
void log_message(LogLevel level, const std::string& message);

struct PipelineOptions {
    int partitions = 0;  // 0: one partition per kPartitionRounds
    int threads = 0;     // 0: hardware concurrency
    std::uint64_t checkpoint_interval = 64;  // merged partitions per checkpoint
    bool resume = true;  // pick up a matching checkpoint if present
    // Optional config overrides; when set, the manifest snapshots the
    // effective (overridden) config rather than the input bytes.
    std::uint64_t override_rounds = 0;  // 0: keep config value
    bool has_override_seed = false;
    std::uint64_t override_seed = 0;
};

struct RunManifest {
    std::string config_snapshot;  // byte-identical to the input config
    std::uint64_t seed = 0;
    std::string started_at;   // ISO 8601 UTC
    std::string finished_at;  // ISO 8601 UTC
    std::string version;
    std::vector<std::string> outputs;  // every artifact written by the run
};

std::string manifest_to_json(const RunManifest& manifest);

/// Simulates rounds [first_round, first_round + count) into a fresh table.
/// Pure function of (cfg, range): partitioning does not affect totals.
TallyTable simulate_partition(const ExperimentConfig& cfg, std::uint64_t first_round,
                              std::uint64_t count);

/// Full simulation with parallel partitions, in-order merge, and optional
/// checkpoint/resume through checkpoint_path (empty: no checkpointing).
TallyTable run_simulation(const ExperimentConfig& cfg, const PipelineOptions& opts,
                          const std::string& checkpoint_path = "");

/// End-to-end driver: load config (path or preset name), simulate, tally,
/// estimate, evaluate the key rate, and write config.json, tallies.csv,
/// estimate.json, keyrate.json, keyrate.txt and manifest.json to out_dir.
RunManifest run_pipeline(const std::string& config_path, const std::string& out_dir,
                         const PipelineOptions& opts = {});

struct EstimateOnlyResult {
    DecoyEstimate estimate;
    KeyRateReport report;
};

/// Post-processing of an externally supplied tally CSV with the given
/// config; gives results identical to the in-pipeline path on equal tables.
EstimateOnlyResult estimate_only(const std::string& tally_csv_path,
                                 const std::string& config_path);
EstimateOnlyResult estimate_tables(const TallyTable& table, const ExperimentConfig& cfg);

}  // namespace mdiqkd
