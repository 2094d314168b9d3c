#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qepsd/keystream.hpp"
#include "qepsd/link.hpp"
#include "qepsd/modem.hpp"
#include "qepsd/qeps.hpp"
#include "qepsd/scatter.hpp"

namespace qepsd {

using json = nlohmann::json;

inline constexpr const char* kOutputDirEnv = "QEPSD_OUTPUT_DIR";

/// Config rejected; `issues` lists every violated field.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(std::vector<std::string> issues)
        : std::invalid_argument(join(issues)), issues_(std::move(issues)) {}

    const std::vector<std::string>& issues() const { return issues_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string s = "invalid config:";
        for (const auto& i : v) s += "\n  - " + i;
        return s;
    }
    std::vector<std::string> issues_;
};

/// Filesystem failure while writing results.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    LinkConfig link;
    std::string modulation{"qpsk"};
    std::string secret_hex{"00112233445566778899aabbccddeeff"};
    std::uint64_t data_seed{1};
    std::uint64_t sequence_bits{65536};
    int polarizations{1};
    std::vector<Scenario> scenarios{Scenario::noiseless, Scenario::legitimate, Scenario::attacker};
    std::uint64_t pm_block_length{1};
    double offset_scale{1.0};
    bool continuous_theta{false};
    std::string output_dir{"qepsd_out"};

    CipherOptions cipher() const { return {pm_block_length, offset_scale, continuous_theta}; }

    bool wants(Scenario s) const {
        for (auto x : scenarios)
            if (x == s) return true;
        return false;
    }
};

// ---------------------------------------------------------------------------
// Config I/O

inline std::optional<Scenario> scenario_from_string(const std::string& s) {
    for (auto v : {Scenario::noiseless, Scenario::legitimate, Scenario::attacker, Scenario::roundtrip})
        if (s == to_string(v)) return v;
    return std::nullopt;
}

inline std::vector<std::string> validate(const ExperimentConfig& cfg) {
    std::vector<std::string> issues;
    const auto& l = cfg.link;
    auto positive = [&](const char* name, double v) {
        if (!(v > 0.0) || !std::isfinite(v)) issues.push_back(std::string("link.") + name + " must be > 0");
    };
    auto non_negative = [&](const char* name, double v) {
        if (!(v >= 0.0) || !std::isfinite(v)) issues.push_back(std::string("link.") + name + " must be >= 0");
    };
    positive("baud", l.baud);
    positive("fiber_length_km", l.fiber_length_km);
    positive("wavelength_nm", l.wavelength_nm);
    non_negative("attenuation_db_per_km", l.attenuation_db_per_km);
    non_negative("dispersion_ps_nm_km", l.dispersion_ps_nm_km);
    non_negative("dispersion_slope_ps_nm2_km", l.dispersion_slope_ps_nm2_km);
    non_negative("tx_linewidth_hz", l.tx_linewidth_hz);
    non_negative("lo_linewidth_hz", l.lo_linewidth_hz);
    if (!std::isfinite(l.amplifier_gain_db)) issues.push_back("link.amplifier_gain_db must be finite");
    if (std::isnan(l.snr_db) || l.snr_db == -std::numeric_limits<double>::infinity())
        issues.push_back("link.snr_db must be a number or +inf");

    std::optional<ConstellationSpec> spec;
    try {
        spec = spec_by_name(cfg.modulation);
    } catch (const std::invalid_argument&) {
        issues.push_back("modulation '" + cfg.modulation + "' is not one of qpsk, 8psk, 16qam");
    }
    try {
        Secret::from_hex(cfg.secret_hex);
    } catch (const std::invalid_argument& e) {
        issues.push_back(std::string("secret_hex: ") + e.what());
    }
    if (cfg.sequence_bits == 0) issues.push_back("sequence_bits must be > 0");
    if (spec) {
        if (cfg.sequence_bits % spec->bits_per_symbol != 0)
            issues.push_back("sequence_bits must be divisible by " + std::to_string(spec->bits_per_symbol));
        else if (cfg.sequence_bits / spec->bits_per_symbol < kPilotLength)
            issues.push_back("sequence_bits must carry at least " + std::to_string(kPilotLength) + " symbols");
    }
    if (cfg.polarizations != 1 && cfg.polarizations != 2) issues.push_back("polarizations must be 1 or 2");
    if (cfg.scenarios.empty()) issues.push_back("scenarios must not be empty");
    if (cfg.pm_block_length == 0) issues.push_back("pm_block_length must be >= 1");
    if (!(cfg.offset_scale > 0.0) || !std::isfinite(cfg.offset_scale)) issues.push_back("offset_scale must be > 0");
    if (cfg.output_dir.empty()) issues.push_back("output_dir must not be empty");
    return issues;
}

inline json snr_to_json(double snr) { return std::isfinite(snr) ? json(snr) : json("inf"); }

inline json to_json(const LinkConfig& l) {
    return {{"baud", l.baud},
            {"fiber_length_km", l.fiber_length_km},
            {"attenuation_db_per_km", l.attenuation_db_per_km},
            {"dispersion_ps_nm_km", l.dispersion_ps_nm_km},
            {"dispersion_slope_ps_nm2_km", l.dispersion_slope_ps_nm2_km},
            {"wavelength_nm", l.wavelength_nm},
            {"tx_linewidth_hz", l.tx_linewidth_hz},
            {"lo_linewidth_hz", l.lo_linewidth_hz},
            {"amplifier_gain_db", l.amplifier_gain_db},
            {"snr_db", snr_to_json(l.snr_db)},
            {"noise_seed", l.noise_seed}};
}

inline json to_json(const ExperimentConfig& c) {
    json sc = json::array();
    for (auto s : c.scenarios) sc.push_back(to_string(s));
    return {{"link", to_json(c.link)},
            {"modulation", c.modulation},
            {"secret_hex", c.secret_hex},
            {"data_seed", c.data_seed},
            {"sequence_bits", c.sequence_bits},
            {"polarizations", c.polarizations},
            {"scenarios", sc},
            {"pm_block_length", c.pm_block_length},
            {"offset_scale", c.offset_scale},
            {"continuous_theta", c.continuous_theta},
            {"output_dir", c.output_dir}};
}

/// Builds a config from JSON on top of the defaults. Unknown keys, wrong
/// types and invalid values are all collected before throwing.
inline ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig cfg;
    std::vector<std::string> issues;
    if (!j.is_object()) throw ValidationError({"config root must be a JSON object"});

    auto read = [&]<typename T>(const json& obj, const std::string& prefix, const char* key, T& dst) {
        if (!obj.contains(key)) return;
        try {
            dst = obj.at(key).get<T>();
        } catch (const json::exception&) {
            issues.push_back(prefix + key + " has the wrong type");
        }
    };
    auto read_snr = [&](const json& obj, double& dst) {
        if (!obj.contains("snr_db")) return;
        const auto& v = obj.at("snr_db");
        if (v.is_number()) dst = v.get<double>();
        else if (v.is_null() || (v.is_string() && (v == "inf" || v == "+inf")))
            dst = std::numeric_limits<double>::infinity();
        else issues.push_back("link.snr_db has the wrong type");
    };

    static const std::set<std::string> top_keys = {
        "link", "modulation", "secret_hex", "data_seed", "sequence_bits", "polarizations", "scenarios",
        "pm_block_length", "offset_scale", "continuous_theta", "output_dir"};
    static const std::set<std::string> link_keys = {
        "baud", "fiber_length_km", "attenuation_db_per_km", "dispersion_ps_nm_km", "dispersion_slope_ps_nm2_km",
        "wavelength_nm", "tx_linewidth_hz", "lo_linewidth_hz", "amplifier_gain_db", "snr_db", "noise_seed"};
    for (const auto& [k, v] : j.items())
        if (!top_keys.contains(k)) issues.push_back("unknown key '" + k + "'");

    if (j.contains("link")) {
        const auto& l = j.at("link");
        if (!l.is_object()) {
            issues.push_back("link must be an object");
        } else {
            for (const auto& [k, v] : l.items())
                if (!link_keys.contains(k)) issues.push_back("unknown key 'link." + k + "'");
            auto& c = cfg.link;
            const std::string p = "link.";
            read(l, p, "baud", c.baud);
            read(l, p, "fiber_length_km", c.fiber_length_km);
            read(l, p, "attenuation_db_per_km", c.attenuation_db_per_km);
            read(l, p, "dispersion_ps_nm_km", c.dispersion_ps_nm_km);
            read(l, p, "dispersion_slope_ps_nm2_km", c.dispersion_slope_ps_nm2_km);
            read(l, p, "wavelength_nm", c.wavelength_nm);
            read(l, p, "tx_linewidth_hz", c.tx_linewidth_hz);
            read(l, p, "lo_linewidth_hz", c.lo_linewidth_hz);
            // Gain defaults to the span loss unless given.
            c.amplifier_gain_db = c.span_loss_db();
            read(l, p, "amplifier_gain_db", c.amplifier_gain_db);
            read_snr(l, c.snr_db);
            read(l, p, "noise_seed", c.noise_seed);
        }
    }
    read(j, "", "modulation", cfg.modulation);
    read(j, "", "secret_hex", cfg.secret_hex);
    read(j, "", "data_seed", cfg.data_seed);
    read(j, "", "sequence_bits", cfg.sequence_bits);
    read(j, "", "polarizations", cfg.polarizations);
    read(j, "", "pm_block_length", cfg.pm_block_length);
    read(j, "", "offset_scale", cfg.offset_scale);
    read(j, "", "continuous_theta", cfg.continuous_theta);
    read(j, "", "output_dir", cfg.output_dir);
    if (j.contains("scenarios")) {
        std::vector<std::string> names;
        read(j, "", "scenarios", names);
        cfg.scenarios.clear();
        for (const auto& n : names) {
            if (auto s = scenario_from_string(n)) cfg.scenarios.push_back(*s);
            else issues.push_back("scenarios: unknown scenario '" + n + "'");
        }
    }

    for (auto& i : validate(cfg)) issues.push_back(std::move(i));
    if (!issues.empty()) throw ValidationError(std::move(issues));
    return cfg;
}

/// Reads a config file; QEPSD_OUTPUT_DIR, when set, replaces output_dir.
inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError({path.string() + ": " + e.what()});
    }
    auto cfg = config_from_json(j);
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) cfg.output_dir = env;
    return cfg;
}

// ---------------------------------------------------------------------------
// Reports

inline json to_json(const BerReport& r) {
    return {{"scenario", to_string(r.scenario)},
            {"bit_errors", r.bit_errors},
            {"total_bits", r.total_bits},
            {"ber", r.ber},
            {"evm_rms", r.evm_rms}};
}

struct ExperimentReport {
    ExperimentConfig config;
    /// Aggregated over polarizations, keyed by scenario name.
    std::map<std::string, BerReport> scenarios;
    /// Per polarization, same keys.
    std::vector<std::map<std::string, BerReport>> per_polarization;
    double throughput_gbps{0.0};
    std::optional<double> key_rate_gbps;
    std::vector<std::string> files;
    /// Stage dumps per polarization, kept in memory for callers and tests.
    std::vector<std::vector<StageDump>> stages;

    const BerReport* find(Scenario s) const {
        auto it = scenarios.find(to_string(s));
        return it == scenarios.end() ? nullptr : &it->second;
    }
};

/// bits/symbol x baud x polarizations, in Gbit/s. No overhead deducted.
inline double throughput_gbps(const ExperimentConfig& cfg) {
    return spec_by_name(cfg.modulation).bits_per_symbol * cfg.link.baud * cfg.polarizations / 1e9;
}

inline json to_json(const ExperimentReport& r) {
    json sc = json::object();
    for (const auto& [k, v] : r.scenarios) sc[k] = to_json(v);
    json per = json::array();
    for (const auto& m : r.per_polarization) {
        json o = json::object();
        for (const auto& [k, v] : m) o[k] = to_json(v);
        per.push_back(o);
    }
    json j = {{"config", to_json(r.config)},
              {"scenarios", sc},
              {"per_polarization", per},
              {"throughput_gbps", r.throughput_gbps},
              {"files", r.files}};
    if (r.key_rate_gbps) j["key_rate_gbps"] = *r.key_rate_gbps;
    return j;
}

namespace detail {

inline constexpr std::uint64_t kLaneStride = 0x9E3779B97F4A7C15ULL;

inline BitStream data_bits(std::uint64_t seed, int lane, std::uint64_t count) {
    std::uint64_t s = seed + kLaneStride * static_cast<std::uint64_t>(lane);
    BitStream bits;
    bits.reserve(count);
    std::uint64_t w = 0;
    for (std::uint64_t i = 0; i < count; ++i) {
        if (i % 64 == 0) w = splitmix64(s);
        bits.push_back(static_cast<std::uint8_t>(w >> (i % 64) & 1u));
    }
    return bits;
}

inline std::uint64_t noise_seed(std::uint64_t seed, int lane) {
    return seed + kLaneStride * 2 * static_cast<std::uint64_t>(lane);
}

inline void accumulate(std::map<std::string, BerReport>& total, const BerReport& r) {
    auto& t = total[to_string(r.scenario)];
    // evm is energy-weighted across lanes of equal length
    const double n_old = static_cast<double>(t.total_bits);
    const double n_new = static_cast<double>(r.total_bits);
    t.evm_rms = std::sqrt((t.evm_rms * t.evm_rms * n_old + r.evm_rms * r.evm_rms * n_new) / (n_old + n_new));
    t.scenario = r.scenario;
    t.bit_errors += r.bit_errors;
    t.total_bits += r.total_bits;
    t.ber = static_cast<double>(t.bit_errors) / static_cast<double>(t.total_bits);
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text) || !out.flush()) throw IoError("cannot write " + path.string());
}

/// One polarization lane's shared material: data, keys, cipher, channel.
struct Lane {
    BitStream bits;
    SymbolStream plain;
    std::vector<PhasePoint> pilots;
    std::vector<EncryptionStep> steps;
    CipherStream cipher;
};

inline Lane make_lane(const ExperimentConfig& cfg, const ConstellationSpec& spec, int p) {
    Lane lane;
    lane.bits = data_bits(cfg.data_seed, p, cfg.sequence_bits);
    lane.plain = modulate(lane.bits, spec, cfg.link.baud);
    lane.pilots.assign(lane.plain.symbols.begin(), lane.plain.symbols.begin() + kPilotLength);
    const auto secret = Secret::from_hex(cfg.secret_hex);
    auto ks = seed_lane(secret, static_cast<std::uint8_t>(p));
    auto ks_copy = ks;
    lane.steps = derive_steps(ks_copy, lane.plain.size(), cfg.cipher());
    lane.cipher = encrypt_stream(lane.plain, ks, cfg.cipher());
    return lane;
}

}  // namespace detail

inline void write_outputs(ExperimentReport& report, const std::string& prefix) {
    const std::filesystem::path dir = report.config.output_dir;
    for (std::size_t p = 0; p < report.stages.size(); ++p) {
        const std::string name = prefix + "constellation_pol" + std::to_string(p) + ".csv";
        detail::write_file(dir / name, stage_csv(report.stages[p]));
        report.files.push_back(name);
    }
    const std::string summary = prefix + "summary.json";
    report.files.push_back(summary);
    detail::write_file(dir / summary, to_json(report).dump(2) + "\n");
}

/// Runs the noiseless / legitimate / attacker scenarios (and the round trip
/// when listed) on one shared channel realization per polarization.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, bool write = true);

inline ExperimentReport run_roundtrip(const ExperimentConfig& cfg, bool write = true);

namespace detail {

inline void run_roundtrip_lanes(const ExperimentConfig& cfg, ExperimentReport& report, bool dump_stages) {
    const auto spec = spec_by_name(cfg.modulation);
    const auto qpsk = spec_qpsk();
    for (int p = 0; p < cfg.polarizations; ++p) {
        // Alice's keystream is self-held; nobody else has the secret.
        const auto bits = data_bits(cfg.data_seed, p, cfg.sequence_bits);
        const auto bob = modulate(bits, spec, cfg.link.baud);
        auto ks = seed_lane(Secret::from_hex(cfg.secret_hex), static_cast<std::uint8_t>(p));
        const auto steps = derive_steps(ks, bob.size(), cfg.cipher());

        SymbolStream outbound{{}, cfg.link.baud}, returned{{}, cfg.link.baud}, recovered{{}, cfg.link.baud};
        for (std::size_t n = 0; n < bob.size(); ++n) {
            outbound.symbols.push_back(net_displacement(steps[n]));
            returned.symbols.push_back(outbound.symbols[n] + bob.symbols[n]);
            recovered.symbols.push_back(roundtrip_recover(returned.symbols[n], steps[n]));
        }
        auto rt = compute_ber(bits, demodulate(recovered, spec), Scenario::roundtrip);
        rt.evm_rms = compute_evm(recovered.symbols, spec);

        // Eavesdropper taps the return pass after the fiber span.
        GaussianSource rng(noise_seed(cfg.link.noise_seed, p) ^ 0xEAE5D0995EEDULL);
        const auto tapped = apply_channel(returned, cfg.link, rng, cipher_energy(spec, cfg.cipher()));
        const std::vector<PhasePoint> pilots(bob.symbols.begin(), bob.symbols.begin() + kPilotLength);
        auto eve = attacker_receive(tapped, cfg.link, ReceiverContext{spec, pilots, bits}, std::nullopt, cfg.cipher(),
                                    Scenario::eavesdropper);

        if (report.per_polarization.size() <= static_cast<std::size_t>(p)) report.per_polarization.resize(p + 1);
        report.per_polarization[p][to_string(rt.scenario)] = rt;
        report.per_polarization[p][to_string(eve.report.scenario)] = eve.report;
        accumulate(report.scenarios, rt);
        accumulate(report.scenarios, eve.report);

        if (dump_stages) {
            if (report.stages.size() <= static_cast<std::size_t>(p)) report.stages.resize(p + 1);
            auto& st = report.stages[p];
            st.push_back({"tx_plain", bob.symbols});
            st.push_back({"tx_cipher", outbound.symbols});
            st.push_back({"rx_raw", tapped.symbols});
            st.push_back({"rx_dsp_attacker", eve.constellation.symbols});
            st.push_back({"rx_decrypted", recovered.symbols});
        }
    }
    report.key_rate_gbps = throughput_gbps(cfg);
}

}  // namespace detail

inline ExperimentReport run_experiment(const ExperimentConfig& cfg, bool write) {
    if (auto issues = validate(cfg); !issues.empty()) throw ValidationError(std::move(issues));
    const auto spec = spec_by_name(cfg.modulation);
    const double energy = cipher_energy(spec, cfg.cipher());

    ExperimentReport report;
    report.config = cfg;
    report.throughput_gbps = throughput_gbps(cfg);
    report.per_polarization.resize(cfg.polarizations);
    report.stages.resize(cfg.polarizations);

    const bool link_scenarios =
        cfg.wants(Scenario::noiseless) || cfg.wants(Scenario::legitimate) || cfg.wants(Scenario::attacker);

    for (int p = 0; link_scenarios && p < cfg.polarizations; ++p) {
        const auto lane = detail::make_lane(cfg, spec, p);
        const ReceiverContext ctx{spec, lane.pilots, lane.bits};
        const SymbolStream cipher{lane.cipher.symbols, cfg.link.baud};
        auto& per = report.per_polarization[p];
        auto& st = report.stages[p];
        st.push_back({"tx_plain", lane.plain.symbols});
        st.push_back({"tx_cipher", lane.cipher.symbols});

        auto record = [&](const BerReport& r) {
            per[to_string(r.scenario)] = r;
            detail::accumulate(report.scenarios, r);
        };

        std::optional<ReceiverResult> legit, noiseless;
        if (cfg.wants(Scenario::noiseless)) {
            const auto ideal_link = ideal(cfg.link);
            GaussianSource rng(detail::noise_seed(cfg.link.noise_seed, p));
            const auto rx = apply_channel(cipher, ideal_link, rng, energy);
            noiseless = legitimate_receive(rx, ideal_link, lane.steps, ctx, cfg.cipher(), Scenario::noiseless);
            record(noiseless->report);
        }
        if (cfg.wants(Scenario::legitimate) || cfg.wants(Scenario::attacker)) {
            // One realization shared by both receivers.
            GaussianSource rng(detail::noise_seed(cfg.link.noise_seed, p));
            const auto rx = apply_channel(cipher, cfg.link, rng, energy);
            st.push_back({"rx_raw", rx.symbols});
            if (cfg.wants(Scenario::attacker)) {
                auto a = attacker_receive(rx, cfg.link, ctx, std::nullopt, cfg.cipher());
                record(a.report);
                st.push_back({"rx_dsp_attacker", std::move(a.constellation.symbols)});
            }
            if (cfg.wants(Scenario::legitimate)) {
                legit = legitimate_receive(rx, cfg.link, lane.steps, ctx, cfg.cipher());
                record(legit->report);
            }
        }
        if (legit) st.push_back({"rx_decrypted", legit->constellation.symbols});
        else if (noiseless) st.push_back({"rx_decrypted", noiseless->constellation.symbols});
    }

    if (cfg.wants(Scenario::roundtrip)) {
        ExperimentReport rt;
        rt.config = cfg;
        detail::run_roundtrip_lanes(cfg, rt, false);
        for (std::size_t p = 0; p < rt.per_polarization.size(); ++p)
            for (const auto& [k, v] : rt.per_polarization[p]) report.per_polarization[p][k] = v;
        for (const auto& [k, v] : rt.scenarios) report.scenarios[k] = v;
        report.key_rate_gbps = rt.key_rate_gbps;
    }

    if (write) write_outputs(report, "");
    return report;
}

/// Round-trip key distribution: Alice sends her net displacement, Bob adds
/// his data, Alice strips her displacement. Symbol level, noiseless; an
/// eavesdropper on the return fiber gets the full key-less DSP chain.
inline ExperimentReport run_roundtrip(const ExperimentConfig& cfg, bool write) {
    if (auto issues = validate(cfg); !issues.empty()) throw ValidationError(std::move(issues));
    ExperimentReport report;
    report.config = cfg;
    report.throughput_gbps = throughput_gbps(cfg);
    detail::run_roundtrip_lanes(cfg, report, true);
    if (write) write_outputs(report, "roundtrip_");
    return report;
}

struct SweepRow {
    double snr_db{0.0};
    double legit_ber{0.0};
    double attacker_ber{0.0};
    double evm{0.0};
};

struct SweepResult {
    std::vector<SweepRow> rows;
    /// legit_ber non-increasing in SNR up to 3 binomial standard deviations.
    bool legit_monotone{true};
    std::vector<std::string> files;
};

inline SweepResult sweep_snr(ExperimentConfig cfg, std::span<const double> snr_list, bool write = true) {
    if (snr_list.empty()) throw std::invalid_argument("sweep_snr: empty SNR list");
    cfg.scenarios = {Scenario::legitimate, Scenario::attacker};
    std::vector<double> order(snr_list.begin(), snr_list.end());
    SweepResult out;
    for (double snr : order) {
        cfg.link.snr_db = snr;
        const auto r = run_experiment(cfg, false);
        const auto* l = r.find(Scenario::legitimate);
        const auto* a = r.find(Scenario::attacker);
        out.rows.push_back({snr, l->ber, a->ber, l->evm_rms});
    }

    std::vector<SweepRow> sorted = out.rows;
    std::sort(sorted.begin(), sorted.end(), [](auto& x, auto& y) { return x.snr_db < y.snr_db; });
    const double n = static_cast<double>(cfg.sequence_bits) * cfg.polarizations;
    for (std::size_t k = 1; k < sorted.size(); ++k) {
        const double prev = sorted[k - 1].legit_ber;
        const double slack = 3.0 * std::sqrt(std::max(prev, 1.0 / n) * (1.0 - prev) / n);
        if (sorted[k].legit_ber > prev + slack) out.legit_monotone = false;
    }

    if (write) {
        std::string csv = "snr_db,legit_ber,attacker_ber,evm\n";
        json rows = json::array();
        for (const auto& r : out.rows) {
            csv += format_double(r.snr_db) + ',' + format_double(r.legit_ber) + ',' + format_double(r.attacker_ber) +
                   ',' + format_double(r.evm) + '\n';
            rows.push_back({{"snr_db", r.snr_db}, {"legit_ber", r.legit_ber}, {"attacker_ber", r.attacker_ber},
                            {"evm", r.evm}});
        }
        const std::filesystem::path dir = cfg.output_dir;
        detail::write_file(dir / "sweep.csv", csv);
        detail::write_file(dir / "sweep.json",
                           json{{"config", to_json(cfg)}, {"rows", rows}, {"legit_monotone", out.legit_monotone}}
                                   .dump(2) +
                               "\n");
        out.files = {"sweep.csv", "sweep.json"};
    }
    return out;
}

}  // namespace qepsd
