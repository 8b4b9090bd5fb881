#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>

#include "scrooge/codebook.hpp"
#include "scrooge/fields.hpp"
#include "scrooge/geometry.hpp"
#include "scrooge/rng.hpp"

using namespace scrooge;

namespace {

SceneConfig panel_scene(int rows, int cols) {
    SceneConfig scene;
    scene.panels = {{Wall::XLo, rows, cols}};
    return scene;
}

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("influence smoothing") {
    SECTION("delta at a panel corner") {
        std::vector<PanelLayout> panels{{Wall::XLo, 3, 3, 0}};
        std::vector<double> raw(9, 0.0);
        raw[0] = 1.0;
        const std::vector<double> out = smooth_influence(raw, panels);
        CHECK(out[0] == Catch::Approx(1.0));          // 1/4 window, normalized by itself
        CHECK(out[1] == Catch::Approx(2.0 / 3.0));    // 1/6
        CHECK(out[3] == Catch::Approx(2.0 / 3.0));
        CHECK(out[4] == Catch::Approx(4.0 / 9.0));    // 1/9
        CHECK(out[2] == 0.0);
        CHECK(out[8] == 0.0);
    }
    SECTION("uniform input stays uniform") {
        std::vector<PanelLayout> panels{{Wall::XLo, 4, 5, 0}};
        std::vector<double> raw(20, 0.7);
        for (double v : smooth_influence(raw, panels)) CHECK(v == Catch::Approx(1.0));
    }
    SECTION("no leakage across panels") {
        std::vector<PanelLayout> panels{{Wall::XLo, 2, 2, 0}, {Wall::YLo, 2, 2, 4}};
        std::vector<double> raw(8, 0.0);
        raw[0] = 1.0;
        const std::vector<double> out = smooth_influence(raw, panels);
        for (std::size_t n = 4; n < 8; ++n) CHECK(out[n] == 0.0);
    }
}

TEST_CASE("compile_entry") {
    SceneConfig scene = panel_scene(4, 4);
    const RisGeometry geom = build_geometry(scene);
    const Vec3 loc{0.9, 0.7, 0.8};
    const CodebookEntry entry = compile_entry(scene, geom, loc);

    SECTION("shape and ranges") {
        CHECK(entry.location == loc);
        REQUIRE(entry.phases.size() == geom.size());
        REQUIRE(entry.influence.size() == geom.size());
        double peak = 0.0;
        for (double v : entry.influence) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            peak = std::max(peak, v);
        }
        CHECK(peak == Catch::Approx(1.0));
        for (double p : entry.phases) {
            CHECK(p >= -M_PI);
            CHECK(p < M_PI);
        }
    }

    SECTION("stored snr is reproduced under the entry's own state") {
        RisState state;
        state.phases = entry.phases;
        state.on.assign(geom.size(), 1);
        const IncidentField inc = solve_incident_field(scene, geom, state);
        const double again = snr_db(total_field(geom, state, inc.e, loc));
        CHECK(again == Catch::Approx(entry.optimal_snr).margin(1e-12));
    }

    SECTION("coherent alignment without coupling or multipath") {
        SceneConfig clean = scene;
        clean.coupling_strength = 0.0;
        clean.wall_reflectivity.fill(0.0);
        const RisGeometry cg = build_geometry(clean);
        const CodebookEntry e = compile_entry(clean, cg, loc);
        RisState state;
        state.phases = e.phases;
        state.on.assign(cg.size(), 1);
        const IncidentField inc = solve_incident_field(clean, cg, state);
        double magnitude_sum = 0.0;
        for (std::size_t n = 0; n < cg.size(); ++n) {
            magnitude_sum += std::abs(inc.e[n]) / distance(loc, cg.element_positions[n]);
        }
        const Complex total = total_field(cg, state, inc.e, loc);
        CHECK(std::abs(total) == Catch::Approx(magnitude_sum).epsilon(1e-12));
        CHECK(e.optimal_snr == Catch::Approx(10.0 * std::log10(magnitude_sum * magnitude_sum)));
    }

    SECTION("dominates random configurations without coupling") {
        SceneConfig clean = scene;
        clean.coupling_strength = 0.0;
        const RisGeometry cg = build_geometry(clean);
        const CodebookEntry e = compile_entry(clean, cg, loc);
        CounterRng rng(123);
        for (int trial = 0; trial < 20; ++trial) {
            RisState random_state = RisState::all_on(cg.size());
            for (double& p : random_state.phases) p = -M_PI + 2.0 * M_PI * rng.next_double();
            const IncidentField inc = solve_incident_field(clean, cg, random_state);
            const double snr = snr_db(total_field(cg, random_state, inc.e, loc));
            CHECK(snr <= e.optimal_snr + 1e-9);
        }
    }

    SECTION("rejects locations outside the room") {
        CHECK_THROWS_AS(compile_entry(scene, geom, Vec3{1.6, 0.7, 0.8}), GeometryError);
        CHECK_THROWS_AS(compile_entry(scene, geom, Vec3{0.9, 0.0, 0.8}), GeometryError);
    }
}

TEST_CASE("compile_codebook preserves order and is worker-invariant") {
    SceneConfig scene = panel_scene(3, 3);
    const RisGeometry geom = build_geometry(scene);
    const std::vector<Vec3> locations{{0.4, 0.4, 0.4}, {1.1, 0.9, 0.7}, {0.8, 1.2, 1.0}, {0.5, 0.9, 1.1}};

    const Codebook serial = compile_codebook(scene, geom, locations, 1);
    const Codebook parallel = compile_codebook(scene, geom, locations, 3);

    REQUIRE(serial.entries.size() == locations.size());
    CHECK(serial.fingerprint == scene_fingerprint(scene, geom));
    for (std::size_t i = 0; i < locations.size(); ++i) {
        CHECK(serial.entries[i].location == locations[i]);
        CHECK(serial.entries[i].optimal_snr == parallel.entries[i].optimal_snr);
        for (std::size_t n = 0; n < geom.size(); ++n) {
            CHECK(serial.entries[i].phases[n] == parallel.entries[i].phases[n]);
            CHECK(serial.entries[i].influence[n] == parallel.entries[i].influence[n]);
        }
    }
}

TEST_CASE("codebook persistence") {
    SceneConfig scene = panel_scene(3, 4);
    const RisGeometry geom = build_geometry(scene);
    const std::vector<Vec3> locations{{0.4, 0.4, 0.4}, {1.1, 0.9, 0.7}};
    const Codebook book = compile_codebook(scene, geom, locations, 1);

    SECTION("round trip is bit exact") {
        const auto dir = fresh_dir("scrooge-cb-roundtrip");
        save_codebook(dir, scene, book);
        const LoadedCodebook loaded = load_codebook(dir);
        CHECK(loaded.book.fingerprint == book.fingerprint);
        CHECK(loaded.book.elements == book.elements);
        CHECK(loaded.scene_echo == scene.canonical_text());
        REQUIRE(loaded.book.entries.size() == book.entries.size());
        for (std::size_t i = 0; i < book.entries.size(); ++i) {
            const CodebookEntry& a = book.entries[i];
            const CodebookEntry& b = loaded.book.entries[i];
            CHECK(a.location == b.location);
            CHECK(a.optimal_snr == b.optimal_snr);
            for (std::size_t n = 0; n < geom.size(); ++n) {
                CHECK(a.phases[n] == b.phases[n]);
                CHECK(a.influence[n] == b.influence[n]);
            }
        }
        CHECK_NOTHROW(ensure_fingerprint(loaded.book, scene, geom));
    }

    SECTION("saving twice produces identical payload bytes") {
        const auto dir1 = fresh_dir("scrooge-cb-bytes1");
        const auto dir2 = fresh_dir("scrooge-cb-bytes2");
        save_codebook(dir1, scene, book);
        save_codebook(dir2, scene, book);
        std::ifstream f1(dir1 / kPayloadName, std::ios::binary);
        std::ifstream f2(dir2 / kPayloadName, std::ios::binary);
        const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
        const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
        CHECK(b1 == b2);
        CHECK_FALSE(b1.empty());
    }

    SECTION("fingerprint mismatch is rejected") {
        SceneConfig other = scene;
        other.coupling_strength = 0.1;
        const RisGeometry other_geom = build_geometry(other);
        CHECK_THROWS_AS(ensure_fingerprint(book, other, other_geom), FingerprintMismatch);
    }

    SECTION("truncated payload reports the failure offset") {
        const auto dir = fresh_dir("scrooge-cb-truncated");
        save_codebook(dir, scene, book);
        const auto payload = dir / kPayloadName;
        const auto full = std::filesystem::file_size(payload);
        std::filesystem::resize_file(payload, full - 5);
        try {
            load_codebook(dir);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            const std::string what = e.what();
            CHECK(what.find(std::to_string(full)) != std::string::npos);
            CHECK(what.find(std::to_string(full - 5)) != std::string::npos);
        }
    }

    SECTION("trailing bytes are rejected") {
        const auto dir = fresh_dir("scrooge-cb-trailing");
        save_codebook(dir, scene, book);
        std::ofstream extend(dir / kPayloadName, std::ios::binary | std::ios::app);
        extend << "junk";
        extend.close();
        CHECK_THROWS_AS(load_codebook(dir), FormatError);
    }

    SECTION("missing directory") {
        CHECK_THROWS_AS(load_codebook(fresh_dir("scrooge-cb-missing")), FormatError);
    }

    SECTION("manifest with an unknown key is rejected") {
        const auto dir = fresh_dir("scrooge-cb-badkey");
        save_codebook(dir, scene, book);
        std::ofstream extend(dir / kManifestName, std::ios::app);
        extend << "mystery=1\n";
        extend.close();
        CHECK_THROWS_AS(load_codebook(dir), FormatError);
    }
}
