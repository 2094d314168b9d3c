#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace qepsd {

/// A coherent-state amplitude in the (in-phase, quadrature) plane.
using PhasePoint = std::complex<double>;

inline double amplitude(PhasePoint p) { return std::abs(p); }

/// Angle in (-pi, pi].
inline double phase(PhasePoint p) { return std::arg(p); }

inline PhasePoint make_polar(double amp, double angle) { return std::polar(amp, angle); }

/// Displacement operator parameterized by its complex argument alpha.
/// Only the reduced (global-phase-free) action is modeled, which is plain
/// complex addition in phase space.
struct Displacement {
    PhasePoint param{};

    friend bool operator==(const Displacement&, const Displacement&) = default;
};

/// Product D(a)D(b) = exp(i*global_phase) D(a+b).
struct ComposedDisplacement {
    Displacement net;
    double global_phase{0.0};
};

/// The exponent a.b* - a*.b multiplying D(a+b) when composing D(a)D(b).
/// Purely imaginary up to rounding.
inline PhasePoint global_phase_exponent(const Displacement& a, const Displacement& b) {
    const PhasePoint x = a.param;
    const PhasePoint y = b.param;
    return x * std::conj(y) - std::conj(x) * y;
}

inline ComposedDisplacement compose_full(const Displacement& a, const Displacement& b) {
    const PhasePoint x = a.param;
    const PhasePoint y = b.param;
    return {Displacement{x + y}, 2.0 * (x * std::conj(y)).imag()};
}

inline Displacement reduce(const ComposedDisplacement& c) { return c.net; }

inline PhasePoint apply_reduced(const Displacement& d, PhasePoint state) { return d.param + state; }

inline Displacement invert(const Displacement& d) { return Displacement{-d.param}; }

enum class SplitRule {
    /// alpha/m for every part but the last.
    equal,
    /// First part snapped to the nearest point of a supplied alphabet,
    /// the remainder split equally over the other parts.
    qam_plus_phase,
};

/// Splits alpha into m >= 2 displacements whose parameters sum to alpha.
/// The last part is always the remainder, so the sum is exact up to the
/// rounding of the subtraction chain. `alphabet` is only consulted by
/// SplitRule::qam_plus_phase.
inline std::vector<Displacement> decompose(PhasePoint alpha, std::size_t parts,
                                           SplitRule rule = SplitRule::equal,
                                           std::span<const PhasePoint> alphabet = {}) {
    if (parts < 2) throw std::invalid_argument("decompose: need at least two parts");
    if (rule == SplitRule::qam_plus_phase && alphabet.empty())
        throw std::invalid_argument("decompose: qam_plus_phase needs a non-empty alphabet");

    std::vector<Displacement> out;
    out.reserve(parts);
    PhasePoint remainder = alpha;
    std::size_t first_free = 0;

    if (rule == SplitRule::qam_plus_phase) {
        PhasePoint best = alphabet.front();
        for (const auto& p : alphabet)
            if (std::norm(alpha - p) < std::norm(alpha - best)) best = p;
        out.push_back({best});
        remainder -= best;
        first_free = 1;
    }

    const PhasePoint share = remainder / static_cast<double>(parts - first_free);
    for (std::size_t k = first_free; k + 1 < parts; ++k) {
        out.push_back({share});
        remainder -= share;
    }
    out.push_back({remainder});
    return out;
}

/// Applies displacements right-to-left, i.e. the operator product as written.
inline PhasePoint apply_sequence(std::span<const Displacement> ops, PhasePoint state) {
    for (auto it = ops.rbegin(); it != ops.rend(); ++it) state = apply_reduced(*it, state);
    return state;
}

}  // namespace qepsd
