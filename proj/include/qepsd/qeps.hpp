#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "qepsd/keystream.hpp"
#include "qepsd/modem.hpp"
#include "qepsd/phase_space.hpp"

namespace qepsd {

class DesyncError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CipherOptions {
    /// Symbols sharing one phase draw. 1 = fresh theta every symbol.
    std::uint64_t pm_block_length{1};
    /// Multiplier on the QPSK offset alphabet.
    double offset_scale{1.0};
    /// Use a 53-bit uniform theta instead of the 1024-level grid.
    bool continuous_theta{false};
};

/// One symbol's worth of cipher material: offset alpha1 then rotation theta.
struct EncryptionStep {
    PhasePoint alpha1{1.0, 1.0};
    double theta{0.0};
};

struct CipherStream {
    std::vector<PhasePoint> symbols;
    std::uint64_t start_counter{0};
};

inline double theta_from_index(std::uint32_t theta_index) {
    return 2.0 * std::numbers::pi * static_cast<double>(theta_index) / kThetaLevels;
}

inline EncryptionStep step_from_key(const SymbolKey& k, const CipherOptions& opt = {}) {
    static const ConstellationSpec qpsk = spec_qpsk();
    const double theta = opt.continuous_theta
                             ? 2.0 * std::numbers::pi * static_cast<double>(k.word >> 11) * 0x1.0p-53
                             : theta_from_index(k.theta_index);
    return {qpsk.points[k.alpha1_index] * opt.offset_scale, theta};
}

/// (beta + alpha1) * e^{j theta}
inline PhasePoint encrypt_symbol(PhasePoint beta, const EncryptionStep& step) {
    return apply_reduced(Displacement{step.alpha1}, beta) * std::polar(1.0, step.theta);
}

/// gamma * e^{-j theta} - alpha1
inline PhasePoint decrypt_symbol(PhasePoint gamma, const EncryptionStep& step) {
    return apply_reduced(invert(Displacement{step.alpha1}), gamma * std::polar(1.0, -step.theta));
}

/// What the cipher does to the vacuum: alpha1 * e^{j theta}.
inline PhasePoint net_displacement(const EncryptionStep& step) { return encrypt_symbol({}, step); }

/// Removes the whole cipher as one net displacement. Applying the rotation
/// inverse first (decrypt_symbol) does not recover data that was added
/// after encryption.
inline PhasePoint roundtrip_recover(PhasePoint received, const EncryptionStep& step) {
    return apply_reduced(invert(Displacement{net_displacement(step)}), received);
}

/// Draws `count` steps, honoring pm_block_length relative to the keystream
/// counter. A run that starts mid-block takes its first theta from the
/// first key it draws.
inline std::vector<EncryptionStep> derive_steps(KeystreamState& state, std::size_t count,
                                                const CipherOptions& opt = {}) {
    if (opt.pm_block_length == 0) throw std::invalid_argument("pm_block_length must be >= 1");
    std::vector<EncryptionStep> steps;
    steps.reserve(count);
    double held_theta = 0.0;
    for (std::size_t n = 0; n < count; ++n) {
        const std::uint64_t counter = state.counter();
        const auto step = step_from_key(state.next_symbol_key(), opt);
        if (n == 0 || counter % opt.pm_block_length == 0) held_theta = step.theta;
        steps.push_back({step.alpha1, held_theta});
    }
    return steps;
}

inline CipherStream encrypt_stream(std::span<const PhasePoint> plain, KeystreamState& state,
                                   const CipherOptions& opt = {}) {
    CipherStream out{{}, state.counter()};
    const auto steps = derive_steps(state, plain.size(), opt);
    out.symbols.reserve(plain.size());
    for (std::size_t n = 0; n < plain.size(); ++n) out.symbols.push_back(encrypt_symbol(plain[n], steps[n]));
    return out;
}

inline CipherStream encrypt_stream(const SymbolStream& plain, KeystreamState& state,
                                   const CipherOptions& opt = {}) {
    return encrypt_stream(std::span<const PhasePoint>(plain.symbols), state, opt);
}

inline SymbolStream decrypt_stream(const CipherStream& cipher, KeystreamState& state,
                                   const CipherOptions& opt = {}, double baud = 28e9) {
    if (state.counter() != cipher.start_counter)
        throw DesyncError("keystream at counter " + std::to_string(state.counter()) +
                          ", cipher starts at " + std::to_string(cipher.start_counter));
    const auto steps = derive_steps(state, cipher.symbols.size(), opt);
    SymbolStream out{{}, baud};
    out.symbols.reserve(cipher.symbols.size());
    for (std::size_t n = 0; n < steps.size(); ++n)
        out.symbols.push_back(decrypt_symbol(cipher.symbols[n], steps[n]));
    return out;
}

}  // namespace qepsd
