#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qepsd/detail/fft.hpp"
#include "qepsd/keystream.hpp"
#include "qepsd/modem.hpp"
#include "qepsd/phase_space.hpp"
#include "qepsd/qeps.hpp"

namespace qepsd {

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr std::size_t kPilotLength = 32;
inline constexpr std::size_t kCpeBlock = 64;

/// Physical parameters of the single-span link. Units follow the usual
/// datasheet conventions; conversion to SI happens at the point of use.
struct LinkConfig {
    double baud{28e9};
    double fiber_length_km{80.0};
    double attenuation_db_per_km{0.2};
    double dispersion_ps_nm_km{16.75};
    double dispersion_slope_ps_nm2_km{0.075};  // stored, not applied
    double wavelength_nm{1550.0};
    double tx_linewidth_hz{1e5};
    double lo_linewidth_hz{1e5};
    double amplifier_gain_db{16.0};
    /// Es/N0 after amplification; +inf disables the noise stage.
    double snr_db{20.0};
    std::uint64_t noise_seed{0x5EED0001};

    double span_loss_db() const { return attenuation_db_per_km * fiber_length_km; }
};

/// Same link with every impairment switched off. Loss and gain stay.
inline LinkConfig ideal(LinkConfig cfg) {
    cfg.dispersion_ps_nm_km = 0.0;
    cfg.tx_linewidth_hz = 0.0;
    cfg.lo_linewidth_hz = 0.0;
    cfg.snr_db = std::numeric_limits<double>::infinity();
    return cfg;
}

enum class Scenario { noiseless, legitimate, attacker, roundtrip, eavesdropper };

inline const char* to_string(Scenario s) {
    switch (s) {
        case Scenario::noiseless: return "noiseless";
        case Scenario::legitimate: return "legitimate";
        case Scenario::attacker: return "attacker";
        case Scenario::roundtrip: return "roundtrip";
        case Scenario::eavesdropper: return "eavesdropper";
    }
    return "unknown";
}

struct BerReport {
    std::uint64_t bit_errors{0};
    std::uint64_t total_bits{0};
    double ber{0.0};
    double evm_rms{0.0};
    Scenario scenario{Scenario::legitimate};
};

// ---------------------------------------------------------------------------
// Channel

/// Per-symbol standard deviation of the combined laser phase walk.
inline double phase_noise_sigma(const LinkConfig& cfg) {
    return std::sqrt(2.0 * std::numbers::pi * (cfg.tx_linewidth_hz + cfg.lo_linewidth_hz) / cfg.baud);
}

/// Baseband dispersion response at 1 sample/symbol, in FFT bin order.
/// H(f) = exp(+j pi lambda^2 D L f^2 / c).
inline std::vector<std::complex<double>> cd_response(std::size_t n, const LinkConfig& cfg) {
    const double lambda = cfg.wavelength_nm * 1e-9;
    const double d = cfg.dispersion_ps_nm_km * 1e-6;  // ps/(nm km) -> s/m^2
    const double len = cfg.fiber_length_km * 1e3;
    const double k = std::numbers::pi * lambda * lambda * d * len / kSpeedOfLight;
    std::vector<std::complex<double>> h(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double bin = i < (n + 1) / 2 ? static_cast<double>(i)
                                           : static_cast<double>(i) - static_cast<double>(n);
        const double f = bin * cfg.baud / static_cast<double>(n);
        h[i] = std::polar(1.0, k * f * f);
    }
    return h;
}

inline bool has_dispersion(const LinkConfig& cfg) {
    return cfg.dispersion_ps_nm_km != 0.0 && cfg.fiber_length_km != 0.0;
}

inline void apply_cd_inplace(std::span<PhasePoint> x, const LinkConfig& cfg, bool conjugate) {
    if (x.empty() || !has_dispersion(cfg)) return;
    auto h = cd_response(x.size(), cfg);
    if (conjugate)
        for (auto& v : h) v = std::conj(v);
    detail::Fft fft(x.size());
    fft.filter(x, h);
}

inline SymbolStream apply_cd(SymbolStream x, const LinkConfig& cfg) {
    apply_cd_inplace(x.symbols, cfg, false);
    return x;
}

/// Genie-aided inverse of apply_cd: the conjugate response over the same block.
inline SymbolStream compensate_cd(SymbolStream x, const LinkConfig& cfg) {
    apply_cd_inplace(x.symbols, cfg, true);
    return x;
}

inline double mean_energy(std::span<const PhasePoint> x) {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (auto v : x) acc += std::norm(v);
    return acc / static_cast<double>(x.size());
}

/// Fiber span + amplifier in baseband. Stage order: power normalization,
/// span loss, dispersion, laser phase walk, amplifier gain, additive noise.
/// With `nominal_energy` the launch scaling is fixed (and the noise-free
/// channel is linear); otherwise it is measured from the block.
/// Randomness is drawn in this order: N-1 phase increments, then N complex
/// noise samples (I before Q).
inline SymbolStream apply_channel(const SymbolStream& tx, const LinkConfig& cfg, GaussianSource& rng,
                                  std::optional<double> nominal_energy = std::nullopt) {
    for (auto v : tx.symbols)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw std::invalid_argument("apply_channel: non-finite input symbol");

    SymbolStream out{tx.symbols, cfg.baud};
    auto& y = out.symbols;

    const double e_ref = nominal_energy.value_or(mean_energy(tx.symbols));
    const double launch = e_ref > 0.0 ? 1.0 / std::sqrt(e_ref) : 1.0;
    const double loss = std::pow(10.0, -cfg.span_loss_db() / 20.0);
    for (auto& v : y) v *= launch * loss;

    apply_cd_inplace(y, cfg, false);

    const double sigma = phase_noise_sigma(cfg);
    if (sigma > 0.0) {
        double phi = 0.0;
        for (std::size_t n = 1; n < y.size(); ++n) {
            phi += sigma * rng.next();
            y[n] *= std::polar(1.0, phi);
        }
    }

    const double gain = std::pow(10.0, cfg.amplifier_gain_db / 20.0);
    for (auto& v : y) v *= gain;

    if (std::isfinite(cfg.snr_db)) {
        const double es = mean_energy(y);
        const double sd = std::sqrt(es / (2.0 * std::pow(10.0, cfg.snr_db / 10.0)));
        for (auto& v : y) {
            const double ni = rng.next();
            const double nq = rng.next();
            v += PhasePoint(sd * ni, sd * nq);
        }
    }
    return out;
}

/// Scales x so its signal part has average energy `target`. When the link
/// SNR is known the measured power is corrected for the noise share.
inline void normalize_energy(std::span<PhasePoint> x, double target, double snr_db = std::numeric_limits<double>::infinity()) {
    const double measured = mean_energy(x);
    if (measured <= 0.0) return;
    double signal = measured;
    if (std::isfinite(snr_db)) signal = measured / (1.0 + std::pow(10.0, -snr_db / 10.0));
    const double s = std::sqrt(target / signal);
    for (auto& v : x) v *= s;
}

// ---------------------------------------------------------------------------
// Carrier phase estimation

namespace detail {

inline PhasePoint ipow(PhasePoint z, unsigned m) {
    PhasePoint r{1.0, 0.0};
    for (unsigned k = 0; k < m; ++k) r *= z;
    return r;
}

/// sum(p^M) over the constellation; its angle is what the M-th power of a
/// noise-free, unrotated symbol stream averages to.
inline PhasePoint modulation_signature(const ConstellationSpec& spec) {
    PhasePoint acc{};
    for (auto p : spec.points) acc += ipow(p, spec.rotational_symmetry);
    return acc;
}

}  // namespace detail

/// M-th power phase estimate of one block, in (-pi/M, pi/M].
inline double vv_block_phase(std::span<const PhasePoint> block, const ConstellationSpec& spec) {
    const unsigned m = spec.rotational_symmetry;
    PhasePoint acc{};
    for (auto s : block) acc += detail::ipow(s, m);
    const PhasePoint z = acc * std::conj(detail::modulation_signature(spec));
    return std::arg(z) / static_cast<double>(m);
}

/// Rotation by k * 2pi/M (k in [0, M)) that best aligns the head of `x` with
/// the known pilot symbols.
inline unsigned resolve_ambiguity(std::span<const PhasePoint> x, std::span<const PhasePoint> pilots,
                                  unsigned m) {
    unsigned best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (unsigned k = 0; k < m; ++k) {
        const PhasePoint r = std::polar(1.0, 2.0 * std::numbers::pi * k / m);
        double score = 0.0;
        for (std::size_t n = 0; n < pilots.size(); ++n) score += (x[n] * r * std::conj(pilots[n])).real();
        if (score > best_score) {
            best_score = score;
            best = k;
        }
    }
    return best;
}

/// Block Viterbi-Viterbi: per block, the M-th power estimate is unwrapped
/// onto the branch nearest the previous block, the block is derotated, and
/// the leftover M-fold ambiguity is settled against the pilot head.
inline SymbolStream estimate_phase_vv(const SymbolStream& rx, std::span<const PhasePoint> pilots,
                                      const ConstellationSpec& spec, std::size_t block = kCpeBlock) {
    if (block == 0) throw std::invalid_argument("estimate_phase_vv: block must be >= 1");
    if (pilots.empty()) throw std::invalid_argument("estimate_phase_vv: no pilot symbols");
    if (rx.size() < pilots.size())
        throw std::invalid_argument("estimate_phase_vv: stream shorter than the pilot head");

    const unsigned m = spec.rotational_symmetry;
    const double branch = 2.0 * std::numbers::pi / m;
    SymbolStream out = rx;
    auto& y = out.symbols;

    double prev = 0.0;
    for (std::size_t start = 0; start < y.size(); start += block) {
        const std::size_t len = std::min(block, y.size() - start);
        std::span<PhasePoint> blk(y.data() + start, len);
        double est = vv_block_phase(blk, spec);
        est += branch * std::round((prev - est) / branch);
        prev = est;
        if (est != 0.0) {
            const PhasePoint r = std::polar(1.0, -est);
            for (auto& v : blk) v *= r;
        }
    }

    const unsigned k = resolve_ambiguity(y, pilots, m);
    if (k != 0) {
        const PhasePoint r = std::polar(1.0, branch * k);
        for (auto& v : y) v *= r;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Metrics

inline BerReport compute_ber(std::span<const std::uint8_t> tx_bits, std::span<const std::uint8_t> rx_bits,
                             Scenario scenario = Scenario::legitimate) {
    if (tx_bits.size() != rx_bits.size())
        throw std::invalid_argument("compute_ber: length mismatch " + std::to_string(tx_bits.size()) +
                                    " vs " + std::to_string(rx_bits.size()));
    BerReport r;
    r.scenario = scenario;
    r.total_bits = tx_bits.size();
    for (std::size_t i = 0; i < tx_bits.size(); ++i) r.bit_errors += (tx_bits[i] & 1u) != (rx_bits[i] & 1u);
    r.ber = r.total_bits ? static_cast<double>(r.bit_errors) / static_cast<double>(r.total_bits) : 0.0;
    return r;
}

/// RMS distance to the nearest reference point over RMS reference amplitude.
inline double compute_evm(std::span<const PhasePoint> rx, const ConstellationSpec& ref) {
    if (rx.empty()) return 0.0;
    double err = 0.0;
    for (auto s : rx) err += std::norm(s - ref.points[ref.nearest(s)]);
    return std::sqrt(err / static_cast<double>(rx.size()) / ref.average_energy());
}

// ---------------------------------------------------------------------------
// Receivers

/// Expected average energy of (beta + alpha1) for independent zero-mean
/// data and offsets.
inline double cipher_energy(const ConstellationSpec& data, const CipherOptions& opt) {
    return data.average_energy() + opt.offset_scale * opt.offset_scale * spec_qpsk().average_energy();
}

struct TrackedDecryption {
    SymbolStream symbols;
    /// Carrier reference used for each block, radians.
    std::vector<double> block_phase;
};

/// Keyed decryption of a CD-compensated, normalized block stream. Each
/// block is decrypted against the running carrier reference, the M-th power
/// estimator measures the residual rotation of the decrypted block, the
/// reference is updated, and the block is decrypted again. The initial
/// reference comes from the pilot head (known data, known keys).
inline TrackedDecryption decrypt_with_carrier_tracking(std::span<const PhasePoint> x,
                                                       std::span<const EncryptionStep> steps,
                                                       std::span<const PhasePoint> pilots,
                                                       const ConstellationSpec& spec,
                                                       std::size_t block = kCpeBlock, int passes = 2) {
    if (steps.size() != x.size()) throw std::invalid_argument("decrypt: step count does not match stream");
    if (block == 0) throw std::invalid_argument("decrypt: block must be >= 1");
    TrackedDecryption out{{std::vector<PhasePoint>(x.size()), 0.0}, {}};
    auto& y = out.symbols.symbols;
    out.block_phase.reserve((x.size() + block - 1) / block);

    double ref = 0.0;
    {
        PhasePoint corr{};
        const std::size_t n = std::min(pilots.size(), x.size());
        for (std::size_t k = 0; k < n; ++k) corr += x[k] * std::conj(encrypt_symbol(pilots[k], steps[k]));
        if (std::norm(corr) > 0.0) ref = std::arg(corr);
    }

    auto decrypt_block = [&](std::size_t start, std::size_t len, double angle) {
        const PhasePoint r = std::polar(1.0, -angle);
        for (std::size_t k = start; k < start + len; ++k) y[k] = decrypt_symbol(x[k] * r, steps[k]);
    };

    for (std::size_t start = 0; start < x.size(); start += block) {
        const std::size_t len = std::min(block, x.size() - start);
        for (int p = 0; p < passes; ++p) {
            decrypt_block(start, len, ref);
            ref += vv_block_phase(std::span<const PhasePoint>(y.data() + start, len), spec);
        }
        decrypt_block(start, len, ref);
        out.block_phase.push_back(ref);
    }
    return out;
}

/// Per-symbol phase trajectory from block references, linear between block
/// centers and held flat beyond the first and last centers.
inline std::vector<double> interpolate_block_phase(std::span<const double> block_phase, std::size_t n,
                                                   std::size_t block = kCpeBlock) {
    std::vector<double> phi(n, 0.0);
    if (block_phase.empty()) return phi;
    auto center = [&](std::size_t b) {
        const std::size_t start = b * block;
        const std::size_t len = std::min(block, n - start);
        return static_cast<double>(start) + 0.5 * static_cast<double>(len - 1);
    };
    std::size_t b = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k);
        while (b + 1 < block_phase.size() && center(b + 1) <= t) ++b;
        if (b + 1 >= block_phase.size() || t <= center(0)) {
            phi[k] = t <= center(0) ? block_phase.front() : block_phase[b];
            continue;
        }
        const double w = (t - center(b)) / (center(b + 1) - center(b));
        phi[k] = block_phase[b] + w * (block_phase[b + 1] - block_phase[b]);
    }
    return phi;
}

struct ReceiverResult {
    BerReport report;
    SymbolStream constellation;
};

/// What a receiver knows besides the samples: the modulation, the pilot
/// head, and (for scoring only) the transmitted bits.
struct ReceiverContext {
    const ConstellationSpec& spec;
    std::span<const PhasePoint> pilots;
    std::span<const std::uint8_t> tx_bits;
};

/// Keyed receiver: CD compensation, normalization, decryption with carrier
/// tracking, hard decision. The laser phase walk enters the channel after
/// dispersion, so a second pass strips the first pass's phase trajectory
/// from the raw samples before CD compensation and tracks what is left.
/// Without it the circular block boundary mixes symbols of unrelated phase.
inline ReceiverResult legitimate_receive(const SymbolStream& rx, const LinkConfig& cfg,
                                         std::span<const EncryptionStep> steps, const ReceiverContext& ctx,
                                         const CipherOptions& opt = {},
                                         Scenario scenario = Scenario::legitimate) {
    const double target = cipher_energy(ctx.spec, opt);

    SymbolStream x = compensate_cd(rx, cfg);
    normalize_energy(x.symbols, target, cfg.snr_db);
    TrackedDecryption pass = decrypt_with_carrier_tracking(x.symbols, steps, ctx.pilots, ctx.spec);

    if (has_dispersion(cfg) && phase_noise_sigma(cfg) > 0.0) {
        const auto phi = interpolate_block_phase(pass.block_phase, rx.size());
        SymbolStream z = rx;
        for (std::size_t k = 0; k < z.size(); ++k) z.symbols[k] *= std::polar(1.0, -phi[k]);
        z = compensate_cd(std::move(z), cfg);
        normalize_energy(z.symbols, target, cfg.snr_db);
        pass = decrypt_with_carrier_tracking(z.symbols, steps, ctx.pilots, ctx.spec);
    }

    ReceiverResult r{{}, std::move(pass.symbols)};
    r.constellation.baud = cfg.baud;
    r.report = compute_ber(ctx.tx_bits, demodulate(r.constellation, ctx.spec), scenario);
    r.report.evm_rms = compute_evm(r.constellation.symbols, ctx.spec);
    return r;
}

/// Key-less receiver with full DSP: CD compensation, normalization to the
/// data constellation, M-th power phase recovery with pilots, hard decision.
/// Handing it the keystream steps turns it into the keyed receiver.
inline ReceiverResult attacker_receive(const SymbolStream& cipher_after_channel, const LinkConfig& cfg,
                                       const ReceiverContext& ctx,
                                       std::optional<std::span<const EncryptionStep>> steps = std::nullopt,
                                       const CipherOptions& opt = {}, Scenario scenario = Scenario::attacker) {
    if (steps) return legitimate_receive(cipher_after_channel, cfg, *steps, ctx, opt, scenario);
    SymbolStream x = compensate_cd(cipher_after_channel, cfg);
    normalize_energy(x.symbols, ctx.spec.average_energy(), cfg.snr_db);
    ReceiverResult r{{}, estimate_phase_vv(x, ctx.pilots, ctx.spec)};
    r.report = compute_ber(ctx.tx_bits, demodulate(r.constellation, ctx.spec), scenario);
    r.report.evm_rms = compute_evm(r.constellation.symbols, ctx.spec);
    return r;
}

/// Decryption moved behind carrier recovery: the M-th power estimator runs
/// on the cipher and decryption follows. Kept for regression comparison.
inline ReceiverResult receive_decrypt_after_cpe(const SymbolStream& rx, const LinkConfig& cfg,
                                                std::span<const EncryptionStep> steps,
                                                const ReceiverContext& ctx, const CipherOptions& opt = {}) {
    SymbolStream x = compensate_cd(rx, cfg);
    normalize_energy(x.symbols, cipher_energy(ctx.spec, opt), cfg.snr_db);
    x = estimate_phase_vv(x, ctx.pilots, ctx.spec);
    ReceiverResult r{{}, SymbolStream{{}, cfg.baud}};
    r.constellation.symbols.reserve(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) r.constellation.symbols.push_back(decrypt_symbol(x.symbols[n], steps[n]));
    r.report = compute_ber(ctx.tx_bits, demodulate(r.constellation, ctx.spec), Scenario::legitimate);
    r.report.evm_rms = compute_evm(r.constellation.symbols, ctx.spec);
    return r;
}

}  // namespace qepsd
