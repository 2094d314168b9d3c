#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qepsd/phase_space.hpp"

namespace qepsd {

using BitStream = std::vector<std::uint8_t>;

struct SymbolStream {
    std::vector<PhasePoint> symbols;
    double baud{28e9};

    std::size_t size() const { return symbols.size(); }
};

struct ConstellationSpec {
    std::string name;
    std::vector<PhasePoint> points;
    /// bit_labels[k] is the label of points[k], MSB first.
    std::vector<std::uint32_t> bit_labels;
    unsigned bits_per_symbol{0};
    /// Smallest M with the constellation invariant under rotation by 2pi/M.
    unsigned rotational_symmetry{4};

    double average_energy() const {
        double acc = 0.0;
        for (auto p : points) acc += std::norm(p);
        return acc / static_cast<double>(points.size());
    }

    std::size_t index_of_label(std::uint32_t label) const {
        for (std::size_t k = 0; k < bit_labels.size(); ++k)
            if (bit_labels[k] == label) return k;
        throw std::invalid_argument("label not in constellation " + name);
    }

    /// Euclidean-nearest point, ties to the lowest index.
    std::size_t nearest(PhasePoint s) const {
        std::size_t best = 0;
        double best_d = std::norm(s - points[0]);
        for (std::size_t k = 1; k < points.size(); ++k) {
            const double d = std::norm(s - points[k]);
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        return best;
    }
};

inline ConstellationSpec spec_qpsk() {
    return {"qpsk",
            {{1, 1}, {-1, 1}, {-1, -1}, {1, -1}},
            {0b00, 0b01, 0b11, 0b10},
            2,
            4};
}

inline ConstellationSpec spec_16qam() {
    // per-axis Gray: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3
    constexpr double levels[4] = {-3, -1, 1, 3};
    constexpr std::uint32_t gray[4] = {0b00, 0b01, 0b11, 0b10};
    ConstellationSpec s{"16qam", {}, {}, 4, 4};
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            s.points.emplace_back(levels[a], levels[b]);
            s.bit_labels.push_back(gray[a] << 2 | gray[b]);
        }
    return s;
}

/// 8-PSK on the same radius as QPSK (sqrt 2), Gray labels around the circle.
inline ConstellationSpec spec_8psk() {
    ConstellationSpec s{"8psk", {}, {}, 3, 8};
    for (std::uint32_t k = 0; k < 8; ++k) {
        s.points.push_back(std::polar(std::numbers::sqrt2, std::numbers::pi / 4.0 * k));
        s.bit_labels.push_back(k ^ (k >> 1));
    }
    return s;
}

inline ConstellationSpec spec_by_name(std::string_view name) {
    if (name == "qpsk") return spec_qpsk();
    if (name == "16qam") return spec_16qam();
    if (name == "8psk") return spec_8psk();
    throw std::invalid_argument("unknown modulation '" + std::string(name) + "'");
}

inline SymbolStream modulate(std::span<const std::uint8_t> bits, const ConstellationSpec& spec,
                             double baud = 28e9) {
    const unsigned bps = spec.bits_per_symbol;
    if (bits.size() % bps != 0)
        throw std::invalid_argument("bit count " + std::to_string(bits.size()) +
                                    " not a multiple of " + std::to_string(bps));
    SymbolStream out{{}, baud};
    out.symbols.reserve(bits.size() / bps);
    for (std::size_t i = 0; i < bits.size(); i += bps) {
        std::uint32_t label = 0;
        for (unsigned b = 0; b < bps; ++b) label = label << 1 | (bits[i + b] & 1u);
        out.symbols.push_back(spec.points[spec.index_of_label(label)]);
    }
    return out;
}

inline BitStream demodulate(std::span<const PhasePoint> symbols, const ConstellationSpec& spec) {
    const unsigned bps = spec.bits_per_symbol;
    BitStream bits;
    bits.reserve(symbols.size() * bps);
    for (auto s : symbols) {
        const std::uint32_t label = spec.bit_labels[spec.nearest(s)];
        for (unsigned b = bps; b-- > 0;) bits.push_back(static_cast<std::uint8_t>(label >> b & 1u));
    }
    return bits;
}

inline BitStream demodulate(const SymbolStream& symbols, const ConstellationSpec& spec) {
    return demodulate(std::span<const PhasePoint>(symbols.symbols), spec);
}

}  // namespace qepsd
