// qepsd command-line driver.
//
//   qepsd run <config.json>
//   qepsd roundtrip <config.json>
//   qepsd sweep <config.json> --snr 6,8,...,24
//   qepsd vectors [--out DIR]
//   qepsd plot <csv> <svg> [--stage NAME]
//
// Exit codes: 0 success, 1 validation error, 2 I/O error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qepsd/qepsd.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

void print_report(const qepsd::ExperimentReport& r) {
    for (const auto& [name, rep] : r.scenarios)
        std::printf("%-13s ber=%.6g (%llu/%llu) evm=%.4f\n", name.c_str(), rep.ber,
                    static_cast<unsigned long long>(rep.bit_errors), static_cast<unsigned long long>(rep.total_bits),
                    rep.evm_rms);
    std::printf("throughput    %.6g Gbit/s\n", r.throughput_gbps);
    if (r.key_rate_gbps) std::printf("key rate      %.6g Gbit/s\n", *r.key_rate_gbps);
    for (const auto& f : r.files) std::printf("wrote         %s\n", (std::filesystem::path(r.config.output_dir) / f).c_str());
}

std::string vectors_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv(qepsd::kOutputDirEnv); env && *env) return env;
    return ".";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"QEPS-d phase-space encryption link simulator"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "noiseless/legitimate/attacker scenarios from a config");
    run->add_option("config", config_path, "JSON config")->required();

    auto* roundtrip = app.add_subcommand("roundtrip", "round-trip key distribution");
    roundtrip->add_option("config", config_path, "JSON config")->required();

    std::vector<double> snr_list;
    auto* sweep = app.add_subcommand("sweep", "legitimate/attacker BER against SNR");
    sweep->add_option("config", config_path, "JSON config")->required();
    sweep->add_option("--snr", snr_list, "comma-separated Es/N0 values in dB")->delimiter(',')->required();

    std::string vectors_out;
    auto* vectors = app.add_subcommand("vectors", "write keystream and cipher test vectors");
    vectors->add_option("--out", vectors_out, "output directory (default: $QEPSD_OUTPUT_DIR or .)");

    std::string csv_path, svg_path, stage;
    auto* plot = app.add_subcommand("plot", "scatter plot of a constellation CSV");
    plot->add_option("csv", csv_path)->required();
    plot->add_option("svg", svg_path)->required();
    plot->add_option("--stage", stage, "plot a single stage");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitValidation;
    }

    try {
        if (*run) {
            print_report(qepsd::run_experiment(qepsd::load_config(config_path)));
        } else if (*roundtrip) {
            print_report(qepsd::run_roundtrip(qepsd::load_config(config_path)));
        } else if (*sweep) {
            const auto cfg = qepsd::load_config(config_path);
            const auto res = qepsd::sweep_snr(cfg, snr_list);
            std::printf("%8s %12s %12s %8s\n", "snr_db", "legit_ber", "attacker_ber", "evm");
            for (const auto& r : res.rows)
                std::printf("%8.2f %12.6g %12.6g %8.4f\n", r.snr_db, r.legit_ber, r.attacker_ber, r.evm);
            std::printf("legit BER monotone: %s\n", res.legit_monotone ? "yes" : "no");
        } else if (*vectors) {
            const std::filesystem::path dir = vectors_dir(vectors_out);
            qepsd::detail::write_file(dir / "keystream_vectors.txt", qepsd::keystream_vectors());
            qepsd::detail::write_file(dir / "cipher_vectors.txt", qepsd::cipher_vectors());
            std::printf("wrote %s\nwrote %s\n", (dir / "keystream_vectors.txt").c_str(),
                        (dir / "cipher_vectors.txt").c_str());
        } else if (*plot) {
            qepsd::emit_scatter(csv_path, svg_path,
                                stage.empty() ? std::nullopt : std::optional<std::string>(stage));
            std::printf("wrote %s\n", svg_path.c_str());
        }
    } catch (const qepsd::ValidationError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitValidation;
    } catch (const qepsd::IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const qepsd::InputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    }
    return 0;
}
