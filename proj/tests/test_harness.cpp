#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "qepsd/harness.hpp"
#include "qepsd/vectors.hpp"

using namespace qepsd;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("qepsd_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::vector<PhasePoint>& stage(const ExperimentReport& r, const std::string& name, std::size_t pol = 0) {
    for (const auto& s : r.stages.at(pol))
        if (s.stage == name) return s.points;
    throw std::runtime_error("missing stage " + name);
}

}  // namespace

TEST(Throughput, SingleAndDualPolarization) {
    ExperimentConfig cfg;
    EXPECT_DOUBLE_EQ(throughput_gbps(cfg), 56.0);
    cfg.polarizations = 2;
    EXPECT_DOUBLE_EQ(throughput_gbps(cfg), 112.0);
    cfg.modulation = "16qam";
    EXPECT_DOUBLE_EQ(throughput_gbps(cfg), 224.0);
}

TEST(RunExperiment, DefaultScenarios) {
    ExperimentConfig cfg;
    const auto r = run_experiment(cfg, false);
    EXPECT_EQ(r.throughput_gbps, 56.0);
    ASSERT_NE(r.find(Scenario::noiseless), nullptr);
    ASSERT_NE(r.find(Scenario::legitimate), nullptr);
    ASSERT_NE(r.find(Scenario::attacker), nullptr);
    EXPECT_EQ(r.find(Scenario::noiseless)->bit_errors, 0u);
    EXPECT_EQ(r.find(Scenario::legitimate)->bit_errors, 0u);
    EXPECT_EQ(r.find(Scenario::legitimate)->total_bits, 65536u);
    const double a = r.find(Scenario::attacker)->ber;
    EXPECT_GE(a, 0.25);
    EXPECT_LE(a, 0.6);
    EXPECT_FALSE(r.key_rate_gbps.has_value());
}

TEST(RunExperiment, NoiselessOnly) {
    ExperimentConfig cfg;
    cfg.scenarios = {Scenario::noiseless};
    const auto r = run_experiment(cfg, false);
    ASSERT_NE(r.find(Scenario::noiseless), nullptr);
    EXPECT_EQ(r.find(Scenario::noiseless)->ber, 0.0);
    EXPECT_EQ(r.find(Scenario::attacker), nullptr);
    EXPECT_EQ(r.find(Scenario::legitimate), nullptr);
    EXPECT_FALSE(to_json(r)["scenarios"].contains("attacker"));
}

TEST(RunExperiment, DualPolarization) {
    ExperimentConfig cfg;
    cfg.polarizations = 2;
    cfg.scenarios = {Scenario::legitimate};
    const auto r = run_experiment(cfg, false);
    EXPECT_EQ(r.throughput_gbps, 112.0);
    EXPECT_EQ(r.find(Scenario::legitimate)->total_bits, 2u * 65536u);
    EXPECT_EQ(r.find(Scenario::legitimate)->bit_errors, 0u);
    ASSERT_EQ(r.per_polarization.size(), 2u);
    EXPECT_NE(stage(r, "tx_cipher", 0), stage(r, "tx_cipher", 1));
}

TEST(RunExperiment, OtherModulations) {
    for (const char* m : {"16qam", "8psk"}) {
        ExperimentConfig cfg;
        cfg.modulation = m;
        cfg.sequence_bits = 12288;
        cfg.scenarios = {Scenario::noiseless};
        const auto r = run_experiment(cfg, false);
        EXPECT_EQ(r.find(Scenario::noiseless)->ber, 0.0) << m;
    }
}

TEST(RunExperiment, LegitAndAttackerShareRealization) {
    ExperimentConfig cfg;
    cfg.sequence_bits = 8192;
    cfg.scenarios = {Scenario::legitimate, Scenario::attacker};
    const auto both = run_experiment(cfg, false);
    cfg.scenarios = {Scenario::attacker};
    const auto alone = run_experiment(cfg, false);
    EXPECT_EQ(stage(both, "rx_raw"), stage(alone, "rx_raw"));
    ASSERT_EQ(std::count_if(both.stages[0].begin(), both.stages[0].end(),
                            [](const StageDump& s) { return s.stage == "rx_raw"; }),
              1);
}

TEST(RunExperiment, OutputsAreByteIdentical) {
    ExperimentConfig cfg;
    cfg.sequence_bits = 8192;
    cfg.output_dir = scratch_dir("repro_a").string();
    const auto ra = run_experiment(cfg);
    cfg.output_dir = scratch_dir("repro_b").string();
    run_experiment(cfg);
    ASSERT_FALSE(ra.files.empty());
    for (const auto& f : ra.files) {
        if (f == "summary.json") continue;  // echoes output_dir
        EXPECT_EQ(slurp(fs::path(ra.config.output_dir) / f), slurp(fs::path(cfg.output_dir) / f)) << f;
    }
    auto a = json::parse(slurp(fs::path(ra.config.output_dir) / "summary.json"));
    auto b = json::parse(slurp(fs::path(cfg.output_dir) / "summary.json"));
    a["config"].erase("output_dir");
    b["config"].erase("output_dir");
    EXPECT_EQ(a.dump(), b.dump());
    EXPECT_EQ(a["throughput_gbps"], 56.0);
}

TEST(RunExperiment, SummaryEchoesConfig) {
    ExperimentConfig cfg;
    cfg.sequence_bits = 4096;
    cfg.link.snr_db = 18.5;
    cfg.output_dir = scratch_dir("echo").string();
    run_experiment(cfg);
    const auto j = json::parse(slurp(fs::path(cfg.output_dir) / "summary.json"));
    const auto back = config_from_json(j["config"]);
    EXPECT_EQ(back.link.snr_db, 18.5);
    EXPECT_EQ(back.sequence_bits, 4096u);
    EXPECT_EQ(to_json(back).dump(), j["config"].dump());
}

TEST(Roundtrip, RecoversAndReportsRate) {
    ExperimentConfig cfg;
    const auto r = run_roundtrip(cfg, false);
    ASSERT_NE(r.find(Scenario::roundtrip), nullptr);
    EXPECT_EQ(r.find(Scenario::roundtrip)->bit_errors, 0u);
    EXPECT_EQ(r.find(Scenario::roundtrip)->total_bits, 65536u);
    ASSERT_TRUE(r.key_rate_gbps.has_value());
    EXPECT_DOUBLE_EQ(*r.key_rate_gbps, 56.0);
    const double eve = r.find(Scenario::eavesdropper)->ber;
    EXPECT_GE(eve, 0.25);
    EXPECT_LE(eve, 0.6);

    cfg.polarizations = 2;
    EXPECT_DOUBLE_EQ(*run_roundtrip(cfg, false).key_rate_gbps, 112.0);
}

TEST(Roundtrip, AsScenarioOfRun) {
    ExperimentConfig cfg;
    cfg.sequence_bits = 4096;
    cfg.scenarios = {Scenario::roundtrip};
    const auto r = run_experiment(cfg, false);
    ASSERT_NE(r.find(Scenario::roundtrip), nullptr);
    EXPECT_EQ(r.find(Scenario::roundtrip)->ber, 0.0);
    EXPECT_EQ(r.find(Scenario::legitimate), nullptr);
}

TEST(Sweep, SingletonMatchesRun) {
    ExperimentConfig cfg;
    const std::vector<double> snr = {20.0};
    const auto s = sweep_snr(cfg, snr, false);
    cfg.scenarios = {Scenario::legitimate, Scenario::attacker};
    const auto r = run_experiment(cfg, false);
    ASSERT_EQ(s.rows.size(), 1u);
    EXPECT_EQ(s.rows[0].legit_ber, r.find(Scenario::legitimate)->ber);
    EXPECT_EQ(s.rows[0].attacker_ber, r.find(Scenario::attacker)->ber);
    EXPECT_EQ(s.rows[0].evm, r.find(Scenario::legitimate)->evm_rms);
}

TEST(Sweep, WaterfallAndAttackerBand) {
    ExperimentConfig cfg;
    std::vector<double> snr;
    for (int d = 6; d <= 24; d += 2) snr.push_back(d);
    const auto s = sweep_snr(cfg, snr, false);
    ASSERT_EQ(s.rows.size(), snr.size());
    EXPECT_GT(s.rows[0].legit_ber, s.rows[4].legit_ber);  // 6 dB vs 14 dB
    EXPECT_TRUE(s.legit_monotone);
    for (const auto& row : s.rows) {
        EXPECT_GE(row.attacker_ber, 0.25) << row.snr_db;
        EXPECT_LE(row.attacker_ber, 0.6) << row.snr_db;
    }
}

TEST(Sweep, EmptyListRejected) {
    EXPECT_THROW(sweep_snr(ExperimentConfig{}, std::span<const double>{}, false), std::invalid_argument);
}

TEST(Sweep, WritesTable) {
    ExperimentConfig cfg;
    cfg.sequence_bits = 2048;
    cfg.output_dir = scratch_dir("sweep").string();
    const std::vector<double> snr = {10.0, 20.0};
    sweep_snr(cfg, snr);
    const auto csv = slurp(fs::path(cfg.output_dir) / "sweep.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "snr_db,legit_ber,attacker_ber,evm");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
    EXPECT_EQ(json::parse(slurp(fs::path(cfg.output_dir) / "sweep.json"))["rows"].size(), 2u);
}

TEST(Config, ValidationListsEveryIssue) {
    ExperimentConfig cfg;
    cfg.polarizations = 3;
    cfg.sequence_bits = 65535;
    cfg.modulation = "qpsk";
    cfg.link.baud = -1;
    cfg.secret_hex = "";
    try {
        run_experiment(cfg, false);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.issues().size(), 4u);
    }
}

TEST(Config, JsonErrorsAreCollected) {
    const auto j = json::parse(R"({"link": {"baud": "fast", "colour": 1}, "modulation": "64qam", "extra": true})");
    try {
        config_from_json(j);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.issues().size(), 4u) << e.what();
    }
}

TEST(Config, SnrInfinityAndGainDefault) {
    const auto cfg = config_from_json(json::parse(R"({"link": {"snr_db": "inf", "fiber_length_km": 50}})"));
    EXPECT_TRUE(std::isinf(cfg.link.snr_db));
    EXPECT_DOUBLE_EQ(cfg.link.amplifier_gain_db, 10.0);
    EXPECT_EQ(to_json(cfg)["link"]["snr_db"], "inf");
}

TEST(Config, LoadFileAndEnvOverride) {
    const auto dir = scratch_dir("load");
    const auto path = dir / "cfg.json";
    detail::write_file(path, R"({"sequence_bits": 1024, "output_dir": "from_file"})");
    EXPECT_EQ(load_config(path).output_dir, "from_file");
    ::setenv(kOutputDirEnv, "from_env", 1);
    EXPECT_EQ(load_config(path).output_dir, "from_env");
    ::unsetenv(kOutputDirEnv);
    EXPECT_THROW(load_config(dir / "missing.json"), IoError);
    detail::write_file(path, "{ not json");
    EXPECT_THROW(load_config(path), ValidationError);
}

TEST(Config, ShippedDefaultMatchesBuiltIn) {
    const auto cfg = load_config(fs::path(QEPSD_TEST_DATA) / ".." / ".." / "configs" / "default.json");
    EXPECT_EQ(to_json(cfg).dump(), to_json(ExperimentConfig{}).dump());
}

TEST(Scatter, EmptyCsvGivesEmptyPlot) {
    const auto dir = scratch_dir("scatter_empty");
    detail::write_file(dir / "empty.csv", "");
    emit_scatter(dir / "empty.csv", dir / "empty.svg");
    const auto svg = slurp(dir / "empty.svg");
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    EXPECT_EQ(svg.find("<circle"), std::string::npos);

    detail::write_file(dir / "header.csv", std::string(kStageHeader) + "\n");
    EXPECT_NO_THROW(emit_scatter(dir / "header.csv", dir / "header.svg"));
}

TEST(Scatter, GarbledCsvRejected) {
    const auto dir = scratch_dir("scatter_bad");
    detail::write_file(dir / "bad_header.csv", "a,b,c\n");
    EXPECT_THROW(emit_scatter(dir / "bad_header.csv", dir / "x.svg"), InputError);
    detail::write_file(dir / "bad_row.csv", std::string(kStageHeader) + "\ntx_plain,0,1.0\n");
    EXPECT_THROW(emit_scatter(dir / "bad_row.csv", dir / "x.svg"), InputError);
    detail::write_file(dir / "bad_num.csv", std::string(kStageHeader) + "\ntx_plain,0,1.0,abc\n");
    EXPECT_THROW(emit_scatter(dir / "bad_num.csv", dir / "x.svg"), InputError);
    EXPECT_THROW(emit_scatter(dir / "missing.csv", dir / "x.svg"), InputError);
}

TEST(Scatter, DefaultRunStagesFromCsv) {
    ExperimentConfig cfg;
    cfg.output_dir = scratch_dir("scatter_run").string();
    run_experiment(cfg);
    const auto csv = fs::path(cfg.output_dir) / "constellation_pol0.csv";
    const auto stages = read_stage_csv(csv);
    for (const char* s : kStages) EXPECT_TRUE(stages.contains(s)) << s;

    // tx_cipher: amplitude multiset {0, 2, 2 sqrt 2} at 1/4, 1/2, 1/4
    const auto& c = stages.at("tx_cipher");
    std::array<double, 3> frac{};
    for (auto p : c) {
        const double a = std::abs(p);
        if (a < 1e-9) frac[0] += 1;
        else if (std::abs(a - 2.0) < 1e-9) frac[1] += 1;
        else if (std::abs(a - 2.0 * std::numbers::sqrt2) < 1e-9) frac[2] += 1;
    }
    for (auto& f : frac) f /= static_cast<double>(c.size());
    EXPECT_NEAR(frac[0], 0.25, 0.02);
    EXPECT_NEAR(frac[1], 0.50, 0.02);
    EXPECT_NEAR(frac[2], 0.25, 0.02);

    // rx_decrypted: four clusters, each symbol assigned to its transmitted point
    const auto q = spec_qpsk();
    const auto& plain = stages.at("tx_plain");
    const auto& dec = stages.at("rx_decrypted");
    ASSERT_EQ(plain.size(), dec.size());
    std::size_t pure = 0;
    for (std::size_t n = 0; n < dec.size(); ++n) pure += q.nearest(dec[n]) == q.nearest(plain[n]);
    EXPECT_GE(static_cast<double>(pure) / static_cast<double>(dec.size()), 0.99);

    emit_scatter(csv, fs::path(cfg.output_dir) / "all.svg");
    emit_scatter(csv, fs::path(cfg.output_dir) / "cipher.svg", "tx_cipher");
    const auto svg = slurp(fs::path(cfg.output_dir) / "cipher.svg");
    EXPECT_NE(svg.find("tx_cipher"), std::string::npos);
    EXPECT_EQ(svg.find("rx_raw"), std::string::npos);
}

TEST(Vectors, ShippedFilesRegenerate) {
    const auto ks = keystream_vectors();
    const auto cv = cipher_vectors();
    EXPECT_EQ(ks, keystream_vectors());
    EXPECT_EQ(cv, cipher_vectors());
    EXPECT_EQ(ks, slurp(fs::path(QEPSD_TEST_DATA) / "keystream_vectors.txt"));
    EXPECT_EQ(cv, slurp(fs::path(QEPSD_TEST_DATA) / "cipher_vectors.txt"));
}

// First keystream line checked against the FNV-1a and SplitMix64 reference
// definitions evaluated by hand here, not through the library.
TEST(Vectors, FirstLineFromReferenceDefinitions) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : std::string("qeps-d test vector")) h = (h ^ c) * 1099511628211ULL;
    std::uint64_t z = (h += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    const std::string expect = "0 " + std::to_string(z & 3) + " " + std::to_string((z >> 2) & 1023);
    std::istringstream in(keystream_vectors());
    std::string line;
    while (std::getline(in, line) && line.starts_with("#")) {}
    EXPECT_EQ(line, expect);
}
