#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qepsd {

inline constexpr std::size_t kMaxSecretBytes = 16384;
inline constexpr std::uint32_t kThetaLevels = 1024;

inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

/// Pre-shared secret, 1..16384 bytes.
class Secret {
public:
    explicit Secret(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {
        if (bytes_.empty()) throw std::invalid_argument("secret must not be empty");
        if (bytes_.size() > kMaxSecretBytes)
            throw std::invalid_argument("secret longer than 16384 bytes");
    }

    static Secret from_hex(std::string_view hex) {
        if (hex.size() % 2 != 0) throw std::invalid_argument("secret hex has odd length");
        auto nibble = [](char c) -> int {
            if (c >= '0' && c <= '9') return c - '0';
            if (c >= 'a' && c <= 'f') return c - 'a' + 10;
            if (c >= 'A' && c <= 'F') return c - 'A' + 10;
            return -1;
        };
        std::vector<std::uint8_t> bytes;
        bytes.reserve(hex.size() / 2);
        for (std::size_t i = 0; i < hex.size(); i += 2) {
            const int hi = nibble(hex[i]);
            const int lo = nibble(hex[i + 1]);
            if (hi < 0 || lo < 0) throw std::invalid_argument("secret hex has a non-hex character");
            bytes.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
        }
        return Secret(std::move(bytes));
    }

    std::span<const std::uint8_t> bytes() const { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

inline std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                             std::uint64_t h = kFnvOffsetBasis) {
    for (auto b : bytes) {
        h ^= b;
        h *= kFnvPrime;
    }
    return h;
}

/// SplitMix64 step. Wrapping 64-bit arithmetic throughout.
inline std::uint64_t splitmix64(std::uint64_t& s) {
    s += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

struct SymbolKey {
    std::uint32_t alpha1_index{0};  // [0, 3]
    std::uint32_t theta_index{0};   // [0, 1023]
    /// Full draw; only consulted for continuous-theta ciphers.
    std::uint64_t word{0};

    friend bool operator==(const SymbolKey&, const SymbolKey&) = default;
};

inline SymbolKey key_from_word(std::uint64_t w) {
    return {static_cast<std::uint32_t>(w & 0x3u),
            static_cast<std::uint32_t>((w >> 2) & (kThetaLevels - 1)), w};
}

/// Sequential keystream. One owner at a time; copies advance independently.
class KeystreamState {
public:
    KeystreamState() = default;
    KeystreamState(std::uint64_t state, std::uint64_t counter) : state_(state), counter_(counter) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    SymbolKey next_symbol_key() {
        const auto k = key_from_word(next_u64());
        ++counter_;
        return k;
    }

    std::uint64_t state() const { return state_; }
    std::uint64_t counter() const { return counter_; }

    friend bool operator==(const KeystreamState&, const KeystreamState&) = default;

private:
    std::uint64_t state_{0};
    std::uint64_t counter_{0};
};

inline KeystreamState seed_from_secret(const Secret& secret) {
    return {fnv1a64(secret.bytes()), 0};
}

/// Domain-separated lane: the lane tag byte is hashed ahead of the secret.
inline KeystreamState seed_lane(const Secret& secret, std::uint8_t lane) {
    const std::uint8_t tag[1] = {lane};
    return {fnv1a64(secret.bytes(), fnv1a64(tag)), 0};
}

/// Standard normal variates from a SplitMix64 engine (Box-Muller, both
/// outputs used). Portable, unlike std::normal_distribution.
class GaussianSource {
public:
    explicit GaussianSource(std::uint64_t seed) : state_(seed) {}

    double next() {
        if (spare_) {
            const double v = *spare_;
            spare_.reset();
            return v;
        }
        constexpr double kScale = 0x1.0p-53;
        const double u1 = (static_cast<double>(splitmix64(state_) >> 11) + 1.0) * kScale;
        const double u2 = static_cast<double>(splitmix64(state_) >> 11) * kScale;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        return r * std::cos(a);
    }

    double uniform() { return static_cast<double>(splitmix64(state_) >> 11) * 0x1.0p-53; }

    std::uint64_t next_u64() { return splitmix64(state_); }

private:
    std::uint64_t state_;
    std::optional<double> spare_;
};

}  // namespace qepsd
