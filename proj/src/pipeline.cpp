#include "mdiqkd/pipeline.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mdiqkd/bsm.hpp"
#include "mdiqkd/tally.hpp"

namespace mdiqkd {

namespace fs = std::filesystem;

namespace {

LogLevel parse_log_level() {
    const char* env = std::getenv("MDIQKD_LOG");
    if (env == nullptr) return LogLevel::warn;
    const std::string v(env);
    if (v == "debug") return LogLevel::debug;
    if (v == "info") return LogLevel::info;
    if (v == "warn") return LogLevel::warn;
    if (v == "error") return LogLevel::error;
    if (v == "silent") return LogLevel::silent;
    return LogLevel::warn;
}

const char* level_tag(LogLevel level) {
    switch (level) {
        case LogLevel::debug: return "debug";
        case LogLevel::info: return "info";
        case LogLevel::warn: return "warn";
        case LogLevel::error: return "error";
        case LogLevel::silent: return "silent";
    }
    return "?";
}

std::mutex g_log_mutex;

std::string now_iso8601_utc() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << text;
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    fs::rename(tmp, path);
}

/// Partition p covers rounds [bound(p), bound(p+1)).
std::uint64_t partition_bound(std::uint64_t total, std::uint64_t partitions, std::uint64_t p) {
    // total * p can overflow for huge totals; split the product.
    const std::uint64_t q = total / partitions, r = total % partitions;
    return q * p + (r * p) / partitions;
}

struct Checkpoint {
    std::string snapshot;
    std::uint64_t partitions = 0;
    std::uint64_t merged = 0;
    TallyTable table;
};

std::optional<Checkpoint> load_checkpoint(const std::string& path) {
    if (path.empty() || !fs::exists(path)) return std::nullopt;
    try {
        const nlohmann::json j = nlohmann::json::parse(read_file(path));
        Checkpoint cp;
        cp.snapshot = j.at("config").get<std::string>();
        cp.partitions = j.at("partitions").get<std::uint64_t>();
        cp.merged = j.at("merged").get<std::uint64_t>();
        cp.table = tally_from_csv(j.at("tally_csv").get<std::string>());
        return cp;
    } catch (const std::exception& e) {
        log_message(LogLevel::warn,
                    std::string("ignoring unreadable checkpoint ") + path + ": " + e.what());
        return std::nullopt;
    }
}

void save_checkpoint(const std::string& path, const Checkpoint& cp) {
    nlohmann::json j;
    j["config"] = cp.snapshot;
    j["partitions"] = cp.partitions;
    j["merged"] = cp.merged;
    j["tally_csv"] = tally_to_csv(cp.table);
    write_file(path, j.dump());
}

/// Rethrow any stage failure with the owning module named.
template <typename F>
auto stage(const char* module_name, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("[") + module_name + "] " + e.what());
    }
}

}  // namespace

LogLevel log_level() {
    static const LogLevel level = parse_log_level();
    return level;
}

void log_message(LogLevel level, const std::string& message) {
    if (level < log_level()) return;
    std::lock_guard<std::mutex> lock(g_log_mutex);
    std::fprintf(stderr, "[mdiqkd %s] %s\n", level_tag(level), message.c_str());
}

TallyTable simulate_partition(const ExperimentConfig& cfg, std::uint64_t first_round,
                              std::uint64_t count) {
    RoundSimulator sim(cfg);
    TallyTable table;
    for (std::uint64_t i = 0; i < count; ++i) table.record(sim.simulate(first_round + i));
    return table;
}

TallyTable run_simulation(const ExperimentConfig& cfg, const PipelineOptions& opts,
                          const std::string& checkpoint_path) {
    const std::uint64_t total = cfg.pulse_pairs;
    if (total == 0) throw std::runtime_error("no data: pulse_pairs is 0");

    std::uint64_t partitions =
        opts.partitions > 0 ? static_cast<std::uint64_t>(opts.partitions)
                            : (total + kPartitionRounds - 1) / kPartitionRounds;
    partitions = std::max<std::uint64_t>(1, std::min(partitions, total));

    const std::string snapshot = config_to_json(cfg);
    Checkpoint cp;
    cp.snapshot = snapshot;
    cp.partitions = partitions;
    if (opts.resume) {
        if (auto loaded = load_checkpoint(checkpoint_path)) {
            if (loaded->snapshot == snapshot && loaded->partitions == partitions) {
                cp = std::move(*loaded);
                log_message(LogLevel::info, "resuming from checkpoint: " +
                                                std::to_string(cp.merged) + "/" +
                                                std::to_string(partitions) + " partitions done");
            } else {
                log_message(LogLevel::warn, "checkpoint does not match this run; starting fresh");
            }
        }
    }

    unsigned threads = opts.threads > 0 ? static_cast<unsigned>(opts.threads)
                                        : std::thread::hardware_concurrency();
    if (threads == 0) threads = 1;
    const std::uint64_t remaining = std::max<std::uint64_t>(partitions - cp.merged, 1);
    threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, remaining));

    std::vector<std::optional<TallyTable>> slots(partitions);
    std::mutex mu;
    std::condition_variable slot_ready;
    std::atomic<std::uint64_t> next{cp.merged};
    std::atomic<bool> failed{false};
    std::string failure;

    auto worker = [&] {
        for (;;) {
            const std::uint64_t p = next.fetch_add(1);
            if (p >= partitions || failed.load()) return;
            try {
                const std::uint64_t lo = partition_bound(total, partitions, p);
                const std::uint64_t hi = partition_bound(total, partitions, p + 1);
                TallyTable local = simulate_partition(cfg, lo, hi - lo);
                std::lock_guard<std::mutex> lock(mu);
                slots[p] = std::move(local);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(mu);
                failed = true;
                if (failure.empty()) failure = e.what();
            }
            slot_ready.notify_all();
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);

    const std::uint64_t progress_step = std::max<std::uint64_t>(1, partitions / 20);
    std::uint64_t since_checkpoint = 0;
    {
        std::unique_lock<std::mutex> lock(mu);
        while (cp.merged < partitions) {
            slot_ready.wait(lock,
                            [&] { return failed.load() || slots[cp.merged].has_value(); });
            if (failed.load()) break;
            cp.table.merge(*slots[cp.merged]);
            slots[cp.merged].reset();
            ++cp.merged;
            ++since_checkpoint;
            if (cp.merged % progress_step == 0 || cp.merged == partitions)
                log_message(LogLevel::info, "merged " + std::to_string(cp.merged) + "/" +
                                                std::to_string(partitions) + " partitions");
            if (!checkpoint_path.empty() && since_checkpoint >= opts.checkpoint_interval &&
                cp.merged < partitions) {
                lock.unlock();
                save_checkpoint(checkpoint_path, cp);
                since_checkpoint = 0;
                lock.lock();
            }
        }
    }
    for (std::thread& t : pool) t.join();
    if (failed.load()) throw std::runtime_error(failure);

    if (!checkpoint_path.empty() && fs::exists(checkpoint_path)) fs::remove(checkpoint_path);
    return cp.table;
}

std::string manifest_to_json(const RunManifest& manifest) {
    nlohmann::json j;
    j["config_snapshot"] = manifest.config_snapshot;
    j["seed"] = manifest.seed;
    j["started_at"] = manifest.started_at;
    j["finished_at"] = manifest.finished_at;
    j["version"] = manifest.version;
    j["outputs"] = manifest.outputs;
    return j.dump(2) + "\n";
}

RunManifest run_pipeline(const std::string& config_path, const std::string& out_dir,
                         const PipelineOptions& opts) {
    RunManifest manifest;
    manifest.version = kVersion;
    manifest.started_at = now_iso8601_utc();

    ExperimentConfig cfg = stage("core-model", [&] { return load_config_file(config_path); });
    const bool overridden = opts.override_rounds > 0 || opts.has_override_seed;
    if (opts.override_rounds > 0) cfg.pulse_pairs = opts.override_rounds;
    if (opts.has_override_seed) cfg.seed = opts.override_seed;
    stage("core-model", [&] { return validated(cfg); });
    // Snapshot: the input file's exact bytes; the serialized effective config
    // when the argument named a preset or overrides were applied.
    manifest.config_snapshot = is_preset_name(config_path) || overridden
                                   ? config_to_json(cfg)
                                   : read_file(config_path);
    manifest.seed = cfg.seed;

    fs::create_directories(out_dir);
    auto emit = [&](const std::string& name, const std::string& text) {
        const std::string path = (fs::path(out_dir) / name).string();
        write_file(path, text);
        manifest.outputs.push_back(path);
    };

    emit("config.json", manifest.config_snapshot);

    const std::string checkpoint = (fs::path(out_dir) / "checkpoint.json").string();
    log_message(LogLevel::info,
                "simulating " + std::to_string(cfg.pulse_pairs) + " pulse pairs");
    const TallyTable table =
        stage("bsm-detector", [&] { return run_simulation(cfg, opts, checkpoint); });
    emit("tallies.csv", tally_to_csv(table));

    const DecoyEstimate est = stage("decoy-lp", [&] { return estimate(table, cfg); });
    emit("estimate.json", estimate_to_json(est));

    const KeyRateReport report =
        stage("keyrate", [&] { return key_rate(rates(table, Basis::Z), est, cfg); });
    emit("keyrate.json", report_to_json(report));
    emit("keyrate.txt", report_to_text(report));

    manifest.finished_at = now_iso8601_utc();
    const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
    manifest.outputs.push_back(manifest_path);
    write_file(manifest_path, manifest_to_json(manifest));
    log_message(LogLevel::info, "run complete: " + manifest_path);
    return manifest;
}

EstimateOnlyResult estimate_tables(const TallyTable& table, const ExperimentConfig& cfg) {
    EstimateOnlyResult result;
    result.estimate = stage("decoy-lp", [&] { return estimate(table, cfg); });
    result.report = stage(
        "keyrate", [&] { return key_rate(rates(table, Basis::Z), result.estimate, cfg); });
    return result;
}

EstimateOnlyResult estimate_only(const std::string& tally_csv_path,
                                 const std::string& config_path) {
    const ExperimentConfig cfg = stage("core-model", [&] { return load_config_file(config_path); });
    const TallyTable table =
        stage("sift-tally", [&] { return load_tally_csv(tally_csv_path); });
    return estimate_tables(table, cfg);
}

}  // namespace mdiqkd
