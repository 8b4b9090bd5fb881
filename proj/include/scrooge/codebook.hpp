#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "scrooge/error.hpp"
#include "scrooge/fields.hpp"
#include "scrooge/geometry.hpp"
#include "scrooge/parallel.hpp"
#include "scrooge/phase.hpp"
#include "scrooge/scene.hpp"
#include "scrooge/vec3.hpp"
#include "scrooge/version.hpp"

namespace scrooge {

/// Precomputed serving configuration for one user location.
struct CodebookEntry {
    Vec3 location;
    std::vector<double> phases;     // continuous conjugation phases, wrapped
    std::vector<double> influence;  // smoothed, globally normalized to peak 1
    double optimal_snr = 0.0;       // dB at location under phases, all elements on
};

struct Codebook {
    std::string fingerprint;
    std::size_t elements = 0;
    std::vector<CodebookEntry> entries;
};

/// 3x3 box filter applied within each panel grid (cells outside the panel do
/// not enter the average), then normalized so the global peak is 1.
inline std::vector<double> smooth_influence(const std::vector<double>& raw,
                                            const std::vector<PanelLayout>& panels) {
    std::vector<double> out(raw.size(), 0.0);
    for (const PanelLayout& p : panels) {
        for (int i = 0; i < p.rows; ++i) {
            for (int j = 0; j < p.cols; ++j) {
                double sum = 0.0;
                int count = 0;
                for (int ii = i - 1; ii <= i + 1; ++ii) {
                    for (int jj = j - 1; jj <= j + 1; ++jj) {
                        if (ii < 0 || jj < 0 || ii >= p.rows || jj >= p.cols) continue;
                        sum += raw[p.first + static_cast<std::size_t>(ii) * p.cols + jj];
                        ++count;
                    }
                }
                out[p.first + static_cast<std::size_t>(i) * p.cols + j] = sum / count;
            }
        }
    }
    double peak = 0.0;
    for (double v : out) peak = std::max(peak, v);
    if (peak > 0.0) {
        for (double& v : out) v /= peak;
    }
    return out;
}

/// Near-field phase conjugation toward `location`: two conjugation rounds so
/// the phases used for coupling match the phases being derived, then a final
/// solve under those phases for influence and the stored SNR.
inline CodebookEntry compile_entry(const SceneConfig& scene, const RisGeometry& geom,
                                   const Vec3& location) {
    const double L = scene.room_side;
    for (int a = 0; a < 3; ++a) {
        if (!(location[a] > 0.0 && location[a] < L)) {
            throw GeometryError("user location must lie strictly inside the room");
        }
    }
    const double k = geom.wavenumber;
    const std::size_t n_elems = geom.size();

    RisState state = RisState::all_on(n_elems);
    IncidentField inc = solve_incident_field(scene, geom, state);
    for (int round = 0; round < 2; ++round) {
        for (std::size_t n = 0; n < n_elems; ++n) {
            const double path = k * distance(location, geom.element_positions[n]);
            state.phases[n] = wrap_phase(-std::arg(inc.e[n]) - path);
        }
        inc = solve_incident_field(scene, geom, state);
    }

    CodebookEntry entry;
    entry.location = location;
    entry.phases = state.phases;
    std::vector<double> raw(n_elems);
    for (std::size_t n = 0; n < n_elems; ++n) {
        raw[n] = std::abs(inc.e[n]) / distance(location, geom.element_positions[n]);
    }
    entry.influence = smooth_influence(raw, geom.panels);
    entry.optimal_snr = snr_db(total_field(geom, state, inc.e, location));
    return entry;
}

/// Compiles every location, preserving input order regardless of worker count.
inline Codebook compile_codebook(const SceneConfig& scene, const RisGeometry& geom,
                                 const std::vector<Vec3>& locations, int workers = 1) {
    Codebook book;
    book.fingerprint = scene_fingerprint(scene, geom);
    book.elements = geom.size();
    book.entries.resize(locations.size());
    parallel_for(locations.size(), workers, [&](std::size_t i) {
        book.entries[i] = compile_entry(scene, geom, locations[i]);
    });
    return book;
}

/// Throws FingerprintMismatch unless the codebook was compiled for exactly
/// this scene and element layout.
inline void ensure_fingerprint(const Codebook& book, const SceneConfig& scene,
                               const RisGeometry& geom) {
    const std::string expected = scene_fingerprint(scene, geom);
    if (book.fingerprint != expected) {
        throw FingerprintMismatch("codebook fingerprint " + book.fingerprint +
                                  " does not match scene fingerprint " + expected);
    }
}

namespace detail {

inline void put_double(std::vector<unsigned char>& buf, double v) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xff));
}

inline double get_double(const std::vector<unsigned char>& buf, std::size_t offset) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[offset + i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

inline std::size_t entry_payload_bytes(std::size_t n_elems) {
    return (3 + 2 * n_elems + 1) * 8;
}

}  // namespace detail

inline constexpr const char* kManifestName = "codebook.manifest";
inline constexpr const char* kPayloadName = "payload.bin";
inline constexpr const char* kManifestFormat = "scrooge-codebook-v1";

/// Writes <dir>/codebook.manifest and <dir>/payload.bin. The payload stores,
/// per entry: location (3 doubles), phases (N doubles), influence (N doubles),
/// optimal SNR (1 double), all little-endian; round trips are bit exact.
inline void save_codebook(const std::filesystem::path& dir, const SceneConfig& scene,
                          const Codebook& book) {
    std::filesystem::create_directories(dir);

    std::ofstream manifest(dir / kManifestName);
    if (!manifest) throw FormatError("cannot write " + (dir / kManifestName).string());
    manifest << "format=" << kManifestFormat << "\n";
    manifest << "version=" << kVersionTag << "\n";
    manifest << "fingerprint=" << book.fingerprint << "\n";
    manifest << "elements=" << book.elements << "\n";
    manifest << "entries=" << book.entries.size() << "\n";
    manifest << "scene-begin\n" << scene.canonical_text() << "scene-end\n";
    manifest.close();
    if (!manifest) throw FormatError("failed writing " + (dir / kManifestName).string());

    std::vector<unsigned char> buf;
    buf.reserve(book.entries.size() * detail::entry_payload_bytes(book.elements));
    for (const CodebookEntry& e : book.entries) {
        detail::put_double(buf, e.location.x);
        detail::put_double(buf, e.location.y);
        detail::put_double(buf, e.location.z);
        for (double v : e.phases) detail::put_double(buf, v);
        for (double v : e.influence) detail::put_double(buf, v);
        detail::put_double(buf, e.optimal_snr);
    }
    std::ofstream payload(dir / kPayloadName, std::ios::binary);
    if (!payload) throw FormatError("cannot write " + (dir / kPayloadName).string());
    payload.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    payload.close();
    if (!payload) throw FormatError("failed writing " + (dir / kPayloadName).string());
}

/// Codebook plus the scene echo recorded at save time.
struct LoadedCodebook {
    Codebook book;
    std::string scene_echo;
};

inline LoadedCodebook load_codebook(const std::filesystem::path& dir) {
    const std::filesystem::path manifest_path = dir / kManifestName;
    std::ifstream manifest(manifest_path);
    if (!manifest) throw FormatError("cannot open " + manifest_path.string());

    LoadedCodebook out;
    std::size_t n_entries = 0;
    bool have_fp = false, have_elems = false, have_entries = false;
    std::string line;
    if (!std::getline(manifest, line) || line != std::string("format=") + kManifestFormat) {
        throw FormatError(manifest_path.string() + ": not a " + kManifestFormat + " manifest");
    }
    bool in_scene = false;
    while (std::getline(manifest, line)) {
        if (in_scene) {
            if (line == "scene-end") {
                in_scene = false;
            } else {
                out.scene_echo += line;
                out.scene_echo += '\n';
            }
            continue;
        }
        if (line == "scene-begin") {
            in_scene = true;
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError(manifest_path.string() + ": malformed line \"" + line + "\"");
        }
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "version") {
            continue;
        } else if (key == "fingerprint") {
            out.book.fingerprint = value;
            have_fp = true;
        } else if (key == "elements") {
            out.book.elements = std::stoull(value);
            have_elems = true;
        } else if (key == "entries") {
            n_entries = std::stoull(value);
            have_entries = true;
        } else {
            throw FormatError(manifest_path.string() + ": unknown key \"" + key + "\"");
        }
    }
    if (in_scene) throw FormatError(manifest_path.string() + ": unterminated scene block");
    if (!have_fp || !have_elems || !have_entries) {
        throw FormatError(manifest_path.string() + ": missing fingerprint, elements or entries");
    }

    const std::filesystem::path payload_path = dir / kPayloadName;
    std::ifstream payload(payload_path, std::ios::binary);
    if (!payload) throw FormatError("cannot open " + payload_path.string());
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(payload)),
                                   std::istreambuf_iterator<char>());

    const std::size_t n_elems = out.book.elements;
    const std::size_t entry_bytes = detail::entry_payload_bytes(n_elems);
    const std::size_t expected = n_entries * entry_bytes;
    if (buf.size() < expected) {
        throw FormatError(payload_path.string() + ": truncated, expected " + std::to_string(expected) +
                          " bytes but file ends at byte " + std::to_string(buf.size()));
    }
    if (buf.size() > expected) {
        throw FormatError(payload_path.string() + ": " + std::to_string(buf.size() - expected) +
                          " trailing bytes after offset " + std::to_string(expected));
    }

    out.book.entries.resize(n_entries);
    std::size_t off = 0;
    for (CodebookEntry& e : out.book.entries) {
        e.location.x = detail::get_double(buf, off); off += 8;
        e.location.y = detail::get_double(buf, off); off += 8;
        e.location.z = detail::get_double(buf, off); off += 8;
        e.phases.resize(n_elems);
        for (std::size_t n = 0; n < n_elems; ++n) { e.phases[n] = detail::get_double(buf, off); off += 8; }
        e.influence.resize(n_elems);
        for (std::size_t n = 0; n < n_elems; ++n) { e.influence[n] = detail::get_double(buf, off); off += 8; }
        e.optimal_snr = detail::get_double(buf, off); off += 8;
    }
    return out;
}

}  // namespace scrooge
