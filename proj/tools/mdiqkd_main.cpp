#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include <CLI11.hpp>

#include "mdiqkd/otp.hpp"
#include "mdiqkd/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using namespace mdiqkd;

std::vector<std::uint8_t> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    return data;
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

/// Shared body of `otp encrypt` and `otp decrypt` (XOR is its own inverse).
int run_otp(const std::string& key_path, const std::string& in_path,
            const std::string& out_path) {
    KeyMaterial key = KeyMaterial::load(key_path);
    const std::vector<std::uint8_t> message = read_bytes(in_path);
    const std::vector<std::uint8_t> result = otp_xor(message, key);
    write_bytes(out_path, result);
    key.save(key_path);  // persist the advanced offset so bits are never reused
    std::cout << "processed " << message.size() << " bytes; " << key.remaining_bits()
              << " key bits remain\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Time-bin MDI-QKD simulator and post-processing toolkit"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Run the full pipeline on a config or preset");
    std::string sim_config, sim_out = "run";
    PipelineOptions opts;
    std::uint64_t sim_rounds = 0, sim_seed = 0;
    sim->add_option("--config", sim_config, "Config JSON path or preset name (e.g. paper-50km)")
        ->required();
    sim->add_option("--out", sim_out, "Output directory");
    sim->add_option("--partitions", opts.partitions, "Number of work partitions (0 = auto)");
    sim->add_option("--threads", opts.threads, "Worker threads (0 = hardware)");
    sim->add_option("--rounds", sim_rounds, "Override pulse_pairs from the config");
    auto* seed_opt = sim->add_option("--seed", sim_seed, "Override seed from the config");
    sim->add_flag("--no-resume", "Ignore any existing checkpoint");

    // estimate
    auto* est = app.add_subcommand("estimate", "Post-process a tally CSV");
    std::string est_tallies, est_config, est_out;
    est->add_option("--tallies", est_tallies, "Tally CSV path")->required();
    est->add_option("--config", est_config, "Config JSON path or preset name")->required();
    est->add_option("--out", est_out, "Directory for estimate.json/keyrate.json (optional)");

    // report
    auto* rep = app.add_subcommand("report", "Re-derive and print the report for a run directory");
    std::string rep_run;
    rep->add_option("--run", rep_run, "Run directory produced by simulate")->required();

    // otp
    auto* otp = app.add_subcommand("otp", "One-time-pad operations");
    otp->require_subcommand(1);
    std::string key_path, in_path, out_path;
    auto add_io = [&](CLI::App* cmd) {
        cmd->add_option("--key", key_path, "Key file")->required();
        cmd->add_option("--in", in_path, "Input file")->required();
        cmd->add_option("--out", out_path, "Output file")->required();
    };
    auto* enc = otp->add_subcommand("encrypt", "XOR a message with fresh key bits");
    add_io(enc);
    auto* dec = otp->add_subcommand("decrypt", "XOR ciphertext with the matching key bits");
    add_io(dec);
    auto* keygen = otp->add_subcommand("keygen", "Write a deterministic demo key file");
    std::uint64_t kg_bits = 0, kg_seed = 1;
    std::string kg_out;
    keygen->add_option("--bits", kg_bits, "Key length in bits")->required();
    keygen->add_option("--seed", kg_seed, "Generator seed");
    keygen->add_option("--out", kg_out, "Key file to write")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) {
            opts.resume = sim->count("--no-resume") == 0;
            opts.override_rounds = sim_rounds;
            if (seed_opt->count() > 0) {
                opts.has_override_seed = true;
                opts.override_seed = sim_seed;
            }
            const RunManifest manifest = run_pipeline(sim_config, sim_out, opts);
            std::cout << "wrote:\n";
            for (const std::string& path : manifest.outputs) std::cout << "  " << path << "\n";
            return 0;
        }
        if (*est) {
            const EstimateOnlyResult result = estimate_only(est_tallies, est_config);
            if (!est_out.empty()) {
                fs::create_directories(est_out);
                std::ofstream(fs::path(est_out) / "estimate.json")
                    << estimate_to_json(result.estimate);
                std::ofstream(fs::path(est_out) / "keyrate.json") << report_to_json(result.report);
            }
            std::cout << estimate_to_json(result.estimate) << "\n"
                      << report_to_text(result.report);
            return 0;
        }
        if (*rep) {
            const fs::path run(rep_run);
            const EstimateOnlyResult result = estimate_only((run / "tallies.csv").string(),
                                                            (run / "config.json").string());
            std::cout << report_to_text(result.report);
            return 0;
        }
        if (*enc) return run_otp(key_path, in_path, out_path);
        if (*dec) return run_otp(key_path, in_path, out_path);
        if (*keygen) {
            generate_key(kg_bits, kg_seed).save(kg_out);
            std::cout << "wrote " << kg_bits << "-bit key to " << kg_out << "\n";
            return 0;
        }
    } catch (const InsufficientKeyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
