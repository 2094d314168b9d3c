#pragma once

#include <cstdint>
#include <cstdio>
#include <string>

#include "qepsd/keystream.hpp"
#include "qepsd/modem.hpp"
#include "qepsd/qeps.hpp"

namespace qepsd {

/// Published secret for interop vectors ("qeps-d test vector" in ASCII).
inline constexpr const char* kVectorSecretHex = "716570732d64207465737420766563746f72";
inline constexpr std::size_t kVectorCount = 1024;

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Lines of "counter alpha1_index theta_index".
inline std::string keystream_vectors(const std::string& secret_hex = kVectorSecretHex,
                                     std::size_t count = kVectorCount) {
    auto ks = seed_from_secret(Secret::from_hex(secret_hex));
    std::string out = "# secret_hex=" + secret_hex + "\n# counter alpha1_index theta_index\n";
    for (std::size_t n = 0; n < count; ++n) {
        const std::uint64_t c = ks.counter();
        const auto k = ks.next_symbol_key();
        out += std::to_string(c) + ' ' + std::to_string(k.alpha1_index) + ' ' + std::to_string(k.theta_index) + '\n';
    }
    return out;
}

/// Lines of "counter beta_i beta_q gamma_i gamma_q". Plaintext symbol n is
/// QPSK point (w_n & 3) where w_n is the n-th SplitMix64 output from state 0.
inline std::string cipher_vectors(const std::string& secret_hex = kVectorSecretHex,
                                  std::size_t count = kVectorCount) {
    const auto qpsk = spec_qpsk();
    auto ks = seed_from_secret(Secret::from_hex(secret_hex));
    std::uint64_t data_state = 0;
    std::string out = "# secret_hex=" + secret_hex +
                      "\n# plaintext: qpsk point (splitmix64 from state 0) & 3"
                      "\n# counter beta_i beta_q gamma_i gamma_q\n";
    for (std::size_t n = 0; n < count; ++n) {
        const std::uint64_t c = ks.counter();
        const PhasePoint beta = qpsk.points[splitmix64(data_state) & 3u];
        const PhasePoint gamma = encrypt_symbol(beta, step_from_key(ks.next_symbol_key()));
        out += std::to_string(c) + ' ' + format_double(beta.real()) + ' ' + format_double(beta.imag()) + ' ' +
               format_double(gamma.real()) + ' ' + format_double(gamma.imag()) + '\n';
    }
    return out;
}

}  // namespace qepsd
