#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "scrooge/error.hpp"
#include "scrooge/scene.hpp"
#include "scrooge/vec3.hpp"

namespace scrooge {

/// Placed panel: grid dimensions plus the index of its first element in the
/// flat panel-major, row-major element ordering.
struct PanelLayout {
    Wall wall = Wall::XLo;
    int rows = 0;
    int cols = 0;
    std::size_t first = 0;

    std::size_t count() const { return static_cast<std::size_t>(rows) * cols; }
};

/// Mirrored transmitter copy modeling one specular wall reflection.
struct ImageSource {
    Wall wall = Wall::XLo;
    Vec3 position;
    double reflectivity = 0.0;
};

/// Element placement, adjacency and precomputed coupling kernels for one scene.
/// Immutable after build_geometry and safe to share across threads.
struct RisGeometry {
    std::vector<Vec3> element_positions;
    std::vector<Vec3> element_normals;  // unit, pointing into the room
    std::vector<PanelLayout> panels;
    std::vector<ImageSource> image_sources;
    // Adjacency in CSR form; kernel[j] is the dimensionless spherical-wave
    // factor e^{jkr}/(kr) for the pair (n, neighbor_indices[j]).
    std::vector<std::uint32_t> neighbor_offsets;
    std::vector<std::uint32_t> neighbor_indices;
    std::vector<std::complex<double>> neighbor_kernels;
    double wavenumber = 0.0;
    double spacing = 0.0;

    std::size_t size() const { return element_positions.size(); }

    std::size_t neighbor_begin(std::size_t n) const { return neighbor_offsets[n]; }
    std::size_t neighbor_end(std::size_t n) const { return neighbor_offsets[n + 1]; }
};

/// Lays out one centered grid per configured panel (spacing d, element centers
/// strictly inside the wall), records 4- or 8-adjacency within each panel, and
/// mirrors the transmitter across every reflective wall. Element order is
/// panel-major, then row-major; the ordering every persisted array uses.
inline RisGeometry build_geometry(const SceneConfig& scene) {
    scene.validate();
    const double L = scene.room_side;
    const double d = scene.spacing();
    const double k = scene.wavenumber();

    RisGeometry geom;
    geom.wavenumber = k;
    geom.spacing = d;

    std::size_t total = 0;
    for (const Panel& p : scene.panels) {
        if (p.rows * d > L || p.cols * d > L) {
            throw ConfigError(std::string("panel on wall ") + wall_name(p.wall) + " does not fit: " +
                              std::to_string(p.rows) + "x" + std::to_string(p.cols) + " at spacing " +
                              std::to_string(d) + " m exceeds wall side " + std::to_string(L) + " m");
        }
        total += static_cast<std::size_t>(p.rows) * p.cols;
    }
    geom.element_positions.reserve(total);
    geom.element_normals.reserve(total);

    for (const Panel& p : scene.panels) {
        PanelLayout layout;
        layout.wall = p.wall;
        layout.rows = p.rows;
        layout.cols = p.cols;
        layout.first = geom.element_positions.size();
        geom.panels.push_back(layout);

        int u_axis = 0, v_axis = 0;
        wall_plane_axes(p.wall, u_axis, v_axis);
        const int plane_axis = wall_axis(p.wall);
        const double plane_coord = wall_at_high_side(p.wall) ? L : 0.0;
        const Vec3 normal = wall_normal(p.wall);

        for (int i = 0; i < p.rows; ++i) {
            for (int j = 0; j < p.cols; ++j) {
                Vec3 pos{};
                pos[plane_axis] = plane_coord;
                pos[u_axis] = L / 2.0 + (j - (p.cols - 1) / 2.0) * d;
                pos[v_axis] = L / 2.0 + (i - (p.rows - 1) / 2.0) * d;
                geom.element_positions.push_back(pos);
                geom.element_normals.push_back(normal);
            }
        }
    }

    // Adjacency: same-panel grid neighbors only.
    const bool diagonal = scene.coupling_neighborhood == 8;
    geom.neighbor_offsets.assign(total + 1, 0);
    std::vector<std::uint32_t> flat;
    flat.reserve(total * (diagonal ? 8 : 4));
    for (const PanelLayout& p : geom.panels) {
        for (int i = 0; i < p.rows; ++i) {
            for (int j = 0; j < p.cols; ++j) {
                const std::size_t n = p.first + static_cast<std::size_t>(i) * p.cols + j;
                auto push = [&](int ii, int jj) {
                    if (ii < 0 || jj < 0 || ii >= p.rows || jj >= p.cols) return;
                    flat.push_back(static_cast<std::uint32_t>(p.first + static_cast<std::size_t>(ii) * p.cols + jj));
                };
                push(i - 1, j);
                push(i + 1, j);
                push(i, j - 1);
                push(i, j + 1);
                if (diagonal) {
                    push(i - 1, j - 1);
                    push(i - 1, j + 1);
                    push(i + 1, j - 1);
                    push(i + 1, j + 1);
                }
                geom.neighbor_offsets[n + 1] = static_cast<std::uint32_t>(flat.size());
            }
        }
    }
    geom.neighbor_indices = std::move(flat);

    geom.neighbor_kernels.resize(geom.neighbor_indices.size());
    for (std::size_t n = 0; n < total; ++n) {
        for (std::size_t j = geom.neighbor_begin(n); j < geom.neighbor_end(n); ++j) {
            const double r = distance(geom.element_positions[n], geom.element_positions[geom.neighbor_indices[j]]);
            geom.neighbor_kernels[j] = std::polar(1.0 / (k * r), k * r);
        }
    }

    for (Wall w : scene.reflective_walls()) {
        ImageSource img;
        img.wall = w;
        img.position = scene.tx_position;
        const int axis = wall_axis(w);
        const double plane_coord = wall_at_high_side(w) ? L : 0.0;
        img.position[axis] = 2.0 * plane_coord - scene.tx_position[axis];
        img.reflectivity = scene.wall_reflectivity[static_cast<int>(w)];
        geom.image_sources.push_back(img);
    }

    return geom;
}

/// FNV-1a 64-bit over the scene echo plus the element ordering; ties a
/// codebook to the exact scene and layout it was compiled for.
inline std::string scene_fingerprint(const SceneConfig& scene, const RisGeometry& geom) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto feed = [&](const char* data, std::size_t len) {
        for (std::size_t i = 0; i < len; ++i) {
            h ^= static_cast<unsigned char>(data[i]);
            h *= 0x100000001b3ull;
        }
    };
    const std::string scene_text = scene.canonical_text();
    feed(scene_text.data(), scene_text.size());
    char buf[96];
    int len = std::snprintf(buf, sizeof(buf), "|N=%zu|", geom.size());
    feed(buf, static_cast<std::size_t>(len));
    for (const Vec3& p : geom.element_positions) {
        len = std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g;", p.x, p.y, p.z);
        feed(buf, static_cast<std::size_t>(len));
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return std::string(out);
}

}  // namespace scrooge
