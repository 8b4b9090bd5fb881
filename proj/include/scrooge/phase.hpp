#pragma once

#include <cmath>
#include <numbers>

namespace scrooge {

/// Principal value in [-pi, pi). The high endpoint maps to -pi.
inline double wrap_phase(double phi) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double y = std::fmod(phi + std::numbers::pi, two_pi);
    if (y < 0.0) y += two_pi;
    if (y >= two_pi) y = 0.0;  // fmod can land exactly on 2*pi after the add
    return y - std::numbers::pi;
}

/// Discrete phase of state s out of `levels` equally spaced states.
inline double state_phase(int s, int levels) {
    return wrap_phase(2.0 * std::numbers::pi * s / levels);
}

/// Nearest discrete state to phi by circular distance; ties resolve to the
/// lowest state index.
inline int quantize_phase(double phi, int levels) {
    int best = 0;
    double best_dist = std::abs(wrap_phase(phi - state_phase(0, levels)));
    for (int s = 1; s < levels; ++s) {
        const double dist = std::abs(wrap_phase(phi - state_phase(s, levels)));
        if (dist < best_dist) {
            best = s;
            best_dist = dist;
        }
    }
    return best;
}

}  // namespace scrooge
