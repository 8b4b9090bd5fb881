#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "scrooge/error.hpp"
#include "scrooge/vec3.hpp"

namespace scrooge {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

/// The six faces of the cubic room.
enum class Wall : int { XLo = 0, XHi, YLo, YHi, ZLo, ZHi };

inline constexpr int kWallCount = 6;

inline const char* wall_name(Wall w) {
    switch (w) {
        case Wall::XLo: return "x0";
        case Wall::XHi: return "xL";
        case Wall::YLo: return "y0";
        case Wall::YHi: return "yL";
        case Wall::ZLo: return "z0";
        case Wall::ZHi: return "zL";
    }
    return "?";
}

inline Wall parse_wall(const std::string& name) {
    for (int i = 0; i < kWallCount; ++i) {
        if (name == wall_name(static_cast<Wall>(i))) return static_cast<Wall>(i);
    }
    throw ConfigError("unknown wall id '" + name + "' (expected one of x0 xL y0 yL z0 zL)");
}

/// Axis the wall plane is orthogonal to: 0=x, 1=y, 2=z.
inline int wall_axis(Wall w) { return static_cast<int>(w) / 2; }

/// True for the wall at coordinate L, false for the wall at 0.
inline bool wall_at_high_side(Wall w) { return static_cast<int>(w) % 2 == 1; }

/// Unit normal pointing from the wall into the room.
inline Vec3 wall_normal(Wall w) {
    Vec3 n{};
    n[wall_axis(w)] = wall_at_high_side(w) ? -1.0 : 1.0;
    return n;
}

/// In-plane axes of a wall; rows run along `v_axis`, columns along `u_axis`.
inline void wall_plane_axes(Wall w, int& u_axis, int& v_axis) {
    switch (wall_axis(w)) {
        case 0: u_axis = 1; v_axis = 2; break;  // x walls: u=y, v=z
        case 1: u_axis = 0; v_axis = 2; break;  // y walls: u=x, v=z
        default: u_axis = 0; v_axis = 1; break; // z walls: u=x, v=y
    }
}

/// One rectangular grid of elements mounted on a wall.
struct Panel {
    Wall wall = Wall::XLo;
    int rows = 0;
    int cols = 0;
};

/// Full electromagnetic scenario: room, carrier, transmitter, surface layout,
/// coupling and multipath knobs. Immutable once validated.
struct SceneConfig {
    double room_side = 1.5;           // L, meters
    double frequency = 6e9;           // f, Hz
    double element_spacing = 0.0;     // d, meters; 0 resolves to wavelength/4
    Vec3 tx_position{0.3, 0.375, 0.75};
    Vec3 tx_direction{1.0, 0.0, 0.0};
    double tx_beam_exponent = 0.0;    // m, >= 0
    double element_angle_exponent = 1.0;  // p, >= 0
    double coupling_strength = 0.15;  // alpha_cpl in [0, 1]
    int coupling_neighborhood = 4;    // 4 or 8
    std::array<double, kWallCount> wall_reflectivity{0.6, 0.6, 0.6, 0.6, 0.6, 0.6};
    std::vector<Panel> panels;

    double wavelength() const { return kSpeedOfLight / frequency; }
    double wavenumber() const { return 2.0 * M_PI / wavelength(); }
    double spacing() const { return element_spacing > 0.0 ? element_spacing : wavelength() / 4.0; }

    bool wall_covered(Wall w) const {
        for (const Panel& p : panels) {
            if (p.wall == w) return true;
        }
        return false;
    }

    /// Walls contributing image-source multipath: uncovered and reflective.
    std::vector<Wall> reflective_walls() const {
        std::vector<Wall> out;
        for (int i = 0; i < kWallCount; ++i) {
            const Wall w = static_cast<Wall>(i);
            if (!wall_covered(w) && wall_reflectivity[i] > 0.0) out.push_back(w);
        }
        return out;
    }

    /// Throws ConfigError on hard violations; returns human-readable warnings
    /// for soft ones (currently only d > lambda/4).
    std::vector<std::string> validate() const {
        if (!(room_side > 0.0)) throw ConfigError("room_side must be > 0");
        if (!(frequency > 0.0)) throw ConfigError("frequency must be > 0");
        if (element_spacing < 0.0) throw ConfigError("element_spacing must be >= 0");
        for (int i = 0; i < 3; ++i) {
            if (!(tx_position[i] > 0.0 && tx_position[i] < room_side))
                throw ConfigError("tx_position must lie strictly inside the room");
        }
        if (std::abs(norm(tx_direction) - 1.0) > 1e-12)
            throw ConfigError("tx_direction must be a unit vector");
        if (tx_beam_exponent < 0.0) throw ConfigError("tx_beam_exponent must be >= 0");
        if (element_angle_exponent < 0.0) throw ConfigError("element_angle_exponent must be >= 0");
        if (coupling_strength < 0.0 || coupling_strength > 1.0)
            throw ConfigError("coupling_strength must be in [0, 1]");
        if (coupling_neighborhood != 4 && coupling_neighborhood != 8)
            throw ConfigError("coupling_neighborhood must be 4 or 8");
        for (double b : wall_reflectivity) {
            if (b < 0.0) throw ConfigError("wall_reflectivity must be >= 0");
        }
        if (panels.empty()) throw ConfigError("at least one panel is required");
        for (const Panel& p : panels) {
            if (p.rows < 1 || p.cols < 1) throw ConfigError("panel rows/cols must be >= 1");
        }
        std::vector<std::string> warnings;
        if (spacing() > wavelength() / 4.0 + 1e-15) {
            char buf[160];
            std::snprintf(buf, sizeof(buf),
                          "element_spacing %.6g m exceeds lambda/4 = %.6g m; spatial sampling may alias",
                          spacing(), wavelength() / 4.0);
            warnings.emplace_back(buf);
        }
        return warnings;
    }

    /// Canonical key=value echo; doubles printed round-trip exact. Used for
    /// manifests and as the fingerprint preimage.
    std::string canonical_text() const {
        auto num = [](double v) {
            char buf[48];
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            return std::string(buf);
        };
        std::string s;
        s += "room_side = " + num(room_side) + "\n";
        s += "frequency = " + num(frequency) + "\n";
        s += "element_spacing = " + num(spacing()) + "\n";
        s += "tx_position = " + num(tx_position.x) + " " + num(tx_position.y) + " " + num(tx_position.z) + "\n";
        s += "tx_direction = " + num(tx_direction.x) + " " + num(tx_direction.y) + " " + num(tx_direction.z) + "\n";
        s += "tx_beam_exponent = " + num(tx_beam_exponent) + "\n";
        s += "element_angle_exponent = " + num(element_angle_exponent) + "\n";
        s += "coupling_strength = " + num(coupling_strength) + "\n";
        s += "coupling_neighborhood = " + std::to_string(coupling_neighborhood) + "\n";
        for (int i = 0; i < kWallCount; ++i) {
            s += std::string("wall_reflectivity_") + wall_name(static_cast<Wall>(i)) + " = " +
                 num(wall_reflectivity[i]) + "\n";
        }
        for (const Panel& p : panels) {
            s += std::string("panel = ") + wall_name(p.wall) + " " + std::to_string(p.rows) + " " +
                 std::to_string(p.cols) + "\n";
        }
        return s;
    }
};

}  // namespace scrooge
