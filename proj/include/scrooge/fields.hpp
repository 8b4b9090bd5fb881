#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "scrooge/error.hpp"
#include "scrooge/geometry.hpp"
#include "scrooge/scene.hpp"
#include "scrooge/vec3.hpp"

namespace scrooge {

using Complex = std::complex<double>;

/// Per-element surface configuration. An OFF element reflects nothing.
struct RisState {
    std::vector<double> phases;    // radians
    std::vector<unsigned char> on; // 1 = reflecting, 0 = off

    static RisState all_on(std::size_t n) {
        RisState s;
        s.phases.assign(n, 0.0);
        s.on.assign(n, 1);
        return s;
    }

    Complex reflection(std::size_t i) const {
        return on[i] ? std::polar(1.0, phases[i]) : Complex(0.0, 0.0);
    }
};

namespace detail {

/// Spherical wave e^{jkr}/r from src sampled at p, weighted by the transmit
/// beam pattern (exponent m, skipped when m == 0) and the element incidence
/// cosine (exponent p_exp, skipped when p_exp == 0). Back-illumination clamps
/// to zero.
inline Complex source_contribution(const Vec3& src, const Vec3& src_dir, double beam_exp,
                                   const Vec3& p, const Vec3& normal, double angle_exp, double k) {
    const double r = distance(src, p);
    Complex value = std::polar(1.0 / r, k * r);
    if (beam_exp > 0) {
        const Vec3 to_elem = normalized(p - src);
        const double c = dot(normalized(src_dir), to_elem);
        if (c <= 0.0) return Complex(0.0, 0.0);
        value *= std::pow(c, beam_exp);
    }
    if (angle_exp > 0) {
        const Vec3 to_src = normalized(src - p);
        const double c = dot(to_src, normal);
        if (c <= 0.0) return Complex(0.0, 0.0);
        value *= std::pow(c, angle_exp);
    }
    return value;
}

}  // namespace detail

/// Direct transmitter illumination at every element.
inline std::vector<Complex> direct_field(const SceneConfig& scene, const RisGeometry& geom) {
    const double k = geom.wavenumber;
    std::vector<Complex> e(geom.size());
    for (std::size_t n = 0; n < geom.size(); ++n) {
        e[n] = detail::source_contribution(scene.tx_position, scene.tx_direction, scene.tx_beam_exponent,
                                           geom.element_positions[n], geom.element_normals[n],
                                           scene.element_angle_exponent, k);
    }
    return e;
}

/// Single-bounce wall multipath: one mirrored transmitter per reflective wall,
/// scaled by that wall's reflectivity. The mirrored beam direction has its
/// wall-axis component flipped.
inline std::vector<Complex> secondary_field(const SceneConfig& scene, const RisGeometry& geom) {
    const double k = geom.wavenumber;
    std::vector<Complex> e(geom.size(), Complex(0.0, 0.0));
    for (const ImageSource& img : geom.image_sources) {
        Vec3 mirrored_dir = scene.tx_direction;
        mirrored_dir[wall_axis(img.wall)] = -mirrored_dir[wall_axis(img.wall)];
        for (std::size_t n = 0; n < geom.size(); ++n) {
            e[n] += img.reflectivity *
                    detail::source_contribution(img.position, mirrored_dir, scene.tx_beam_exponent,
                                                geom.element_positions[n], geom.element_normals[n],
                                                scene.element_angle_exponent, k);
        }
    }
    return e;
}

/// Converged per-element incident field plus solver diagnostics.
struct IncidentField {
    std::vector<Complex> e;
    double residual = 0.0;
    int iterations = 0;
};

inline constexpr double kSolveTolerance = 1e-9;
inline constexpr double kSolveFailThreshold = 1e-6;
inline constexpr int kSolveMaxIterations = 100;

/// Fixed-point solve of E = E_dir + E_sec + alpha * K * Gamma * E where K
/// holds the precomputed neighbor kernels and Gamma the per-element reflection
/// coefficients of `state` (an OFF neighbor feeds nothing back). Converges
/// whenever the coupling operator is a contraction; throws SolverError if the
/// relative update is still above 1e-6 after the iteration cap.
inline IncidentField solve_incident_field(const SceneConfig& scene, const RisGeometry& geom,
                                          const RisState& state) {
    const std::size_t n_elems = geom.size();
    if (state.phases.size() != n_elems || state.on.size() != n_elems) {
        throw GeometryError("state size does not match element count");
    }
    const double alpha = scene.coupling_strength;

    std::vector<Complex> base = direct_field(scene, geom);
    {
        const std::vector<Complex> sec = secondary_field(scene, geom);
        for (std::size_t n = 0; n < n_elems; ++n) base[n] += sec[n];
    }

    IncidentField out;
    out.e = base;
    if (alpha == 0.0 || geom.neighbor_indices.empty()) return out;

    std::vector<Complex> gamma(n_elems);
    for (std::size_t n = 0; n < n_elems; ++n) gamma[n] = state.reflection(n);

    std::vector<Complex> next(n_elems);
    for (int it = 1; it <= kSolveMaxIterations; ++it) {
        double max_delta = 0.0;
        double max_value = 0.0;
        for (std::size_t n = 0; n < n_elems; ++n) {
            Complex acc(0.0, 0.0);
            for (std::size_t j = geom.neighbor_begin(n); j < geom.neighbor_end(n); ++j) {
                const std::uint32_t m = geom.neighbor_indices[j];
                acc += geom.neighbor_kernels[j] * gamma[m] * out.e[m];
            }
            next[n] = base[n] + alpha * acc;
            max_delta = std::max(max_delta, std::abs(next[n] - out.e[n]));
            max_value = std::max(max_value, std::abs(next[n]));
        }
        out.e.swap(next);
        out.iterations = it;
        out.residual = max_delta / std::max(max_value, 1e-300);
        if (out.residual < kSolveTolerance) return out;
    }
    if (out.residual > kSolveFailThreshold) {
        throw SolverError("incident field iteration did not converge: relative update " +
                          std::to_string(out.residual) + " after " +
                          std::to_string(kSolveMaxIterations) + " iterations");
    }
    return out;
}

/// Incident field under the neutral all-on, zero-phase surface.
inline IncidentField solve_incident_field(const SceneConfig& scene, const RisGeometry& geom) {
    return solve_incident_field(scene, geom, RisState::all_on(geom.size()));
}

/// Coherent superposition of all ON element re-radiations at observation point r.
inline Complex total_field(const RisGeometry& geom, const RisState& state,
                           const std::vector<Complex>& e_inc, const Vec3& r) {
    const double k = geom.wavenumber;
    Complex acc(0.0, 0.0);
    for (std::size_t n = 0; n < geom.size(); ++n) {
        if (!state.on[n]) continue;
        const double dist = distance(r, geom.element_positions[n]);
        acc += std::polar(1.0, state.phases[n]) * e_inc[n] * std::polar(1.0 / dist, k * dist);
    }
    return acc;
}

inline constexpr double kSnrPowerFloor = 1e-30;
inline constexpr double kSnrFloorDb = -300.0;

/// 10*log10(|E|^2), floored at -300 dB so a dead zone never produces -inf.
inline double snr_db(Complex field) {
    const double power = std::norm(field);
    if (power < kSnrPowerFloor) return kSnrFloorDb;
    return 10.0 * std::log10(power);
}

/// Axis-aligned planar slice through the room, sampled at pixel centers.
struct GridSpec {
    int slice_axis = 2;        // 0=x, 1=y, 2=z
    double slice_coord = 0.0;  // position of the plane along slice_axis
    int nu = 64;               // samples along the lower remaining axis
    int nv = 64;               // samples along the higher remaining axis
};

struct SnrRaster {
    int nu = 0;
    int nv = 0;
    int axis_u = 0;
    int axis_v = 1;
    std::vector<double> values;  // row-major: v rows of nu samples, dB

    double at(int iu, int iv) const { return values[static_cast<std::size_t>(iv) * nu + iu]; }
};

/// SNR over one slice of the room for a fixed surface state. Pixel (iu, iv)
/// samples the cell center ((iu+0.5)/nu * L, (iv+0.5)/nv * L) in plane axes.
inline SnrRaster snr_map(const SceneConfig& scene, const RisGeometry& geom, const RisState& state,
                         const std::vector<Complex>& e_inc, const GridSpec& grid) {
    if (grid.slice_axis < 0 || grid.slice_axis > 2) throw ConfigError("slice axis must be 0, 1 or 2");
    if (grid.nu < 1 || grid.nv < 1) throw ConfigError("raster resolution must be at least 1x1");
    if (grid.slice_coord < 0.0 || grid.slice_coord > scene.room_side) {
        throw ConfigError("slice coordinate outside the room");
    }
    SnrRaster raster;
    raster.nu = grid.nu;
    raster.nv = grid.nv;
    raster.axis_u = grid.slice_axis == 0 ? 1 : 0;
    raster.axis_v = grid.slice_axis == 2 ? 1 : 2;
    raster.values.resize(static_cast<std::size_t>(grid.nu) * grid.nv);
    const double L = scene.room_side;
    for (int iv = 0; iv < grid.nv; ++iv) {
        for (int iu = 0; iu < grid.nu; ++iu) {
            Vec3 p{};
            p[grid.slice_axis] = grid.slice_coord;
            p[raster.axis_u] = (iu + 0.5) / grid.nu * L;
            p[raster.axis_v] = (iv + 0.5) / grid.nv * L;
            raster.values[static_cast<std::size_t>(iv) * grid.nu + iu] =
                snr_db(total_field(geom, state, e_inc, p));
        }
    }
    return raster;
}

}  // namespace scrooge
