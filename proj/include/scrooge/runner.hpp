#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "scrooge/codebook.hpp"
#include "scrooge/config.hpp"
#include "scrooge/error.hpp"
#include "scrooge/evaluation.hpp"
#include "scrooge/fields.hpp"
#include "scrooge/geometry.hpp"
#include "scrooge/parallel.hpp"
#include "scrooge/version.hpp"

namespace scrooge {

struct CommandOptions {
    std::filesystem::path config_path;
    std::optional<std::filesystem::path> out_override;
    int workers = 0;  // 0 = machine parallelism
    std::string experiment = "all";
    std::optional<std::uint64_t> seed_override;
    std::optional<std::size_t> entry_index;              // snrmap source
    std::optional<std::filesystem::path> state_path;     // snrmap source
};

namespace detail {

struct LoadedRun {
    RunConfig cfg;
    RisGeometry geom;
};

inline LoadedRun load_and_prepare(const CommandOptions& opts, std::ostream& err) {
    LoadedRun run;
    run.cfg = load_run_config(opts.config_path);
    if (opts.out_override) run.cfg.output_dir = *opts.out_override;
    if (opts.seed_override) run.cfg.experiment.seed = *opts.seed_override;
    for (const std::string& w : run.cfg.scene.validate()) err << "warning: " << w << "\n";
    run.geom = build_geometry(run.cfg.scene);
    return run;
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

}  // namespace detail

inline std::filesystem::path codebook_dir(const RunConfig& cfg) {
    return cfg.output_dir / "codebook";
}

inline void cmd_compile(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
    detail::Timer timer;
    detail::LoadedRun run = detail::load_and_prepare(opts, err);
    const int workers = resolve_workers(opts.workers);
    const Codebook book = compile_codebook(run.cfg.scene, run.geom, run.cfg.locations, workers);
    save_codebook(codebook_dir(run.cfg), run.cfg.scene, book);
    err << "compiled " << book.entries.size() << " entries in " << timer.seconds() << " s\n";
    out << "compile ok entries=" << book.entries.size() << " elements=" << book.elements
        << " fingerprint=" << book.fingerprint << " dir=" << codebook_dir(run.cfg).string() << "\n";
}

inline void cmd_run(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
    detail::Timer timer;
    detail::LoadedRun run = detail::load_and_prepare(opts, err);
    const std::string& experiment = opts.experiment;
    if (experiment != "alloc" && experiment != "ee" && experiment != "admission" &&
        experiment != "all") {
        throw ConfigError("unknown experiment \"" + experiment + "\" (alloc, ee, admission, all)");
    }

    const std::filesystem::path book_dir = codebook_dir(run.cfg);
    if (!std::filesystem::exists(book_dir / kManifestName)) {
        throw ConfigError("no codebook at " + book_dir.string() + "; run the compile command first");
    }
    LoadedCodebook loaded = load_codebook(book_dir);
    try {
        ensure_fingerprint(loaded.book, run.cfg.scene, run.geom);
    } catch (const FingerprintMismatch& e) {
        throw FingerprintMismatch(std::string(e.what()) +
                                  "; recompile the codebook for this config");
    }

    const int workers = resolve_workers(opts.workers);
    const ExperimentConfig& ecfg = run.cfg.experiment;
    std::filesystem::create_directories(run.cfg.output_dir);

    std::vector<std::filesystem::path> written;
    auto cleanup = [&]() {
        for (const std::filesystem::path& p : written) {
            std::error_code ec;
            std::filesystem::remove(p, ec);
        }
    };
    try {
        std::string files;
        auto track = [&](const std::filesystem::path& p) {
            written.push_back(p);
            if (!files.empty()) files += ',';
            files += p.filename().string();
        };
        if (experiment == "alloc" || experiment == "all") {
            const auto rows = run_allocation_mc(ecfg, run.cfg.scene, run.geom, loaded.book, workers);
            const auto path = run.cfg.output_dir / "alloc.csv";
            write_alloc_csv(path, rows);
            track(path);
            err << "alloc done at " << timer.seconds() << " s\n";
        }
        if (experiment == "ee" || experiment == "all") {
            const auto rows = run_ee_mc(ecfg, run.cfg.scene, run.geom, loaded.book, workers);
            const auto path = run.cfg.output_dir / "ee.csv";
            write_ee_csv(path, rows);
            track(path);
            err << "ee done at " << timer.seconds() << " s\n";
        }
        if (experiment == "admission" || experiment == "all") {
            const auto rows = run_admission_mc(ecfg, run.cfg.scene, run.geom, loaded.book, workers);
            const auto path = run.cfg.output_dir / "admission.csv";
            write_admission_csv(path, rows);
            track(path);
            err << "admission done at " << timer.seconds() << " s\n";
        }
        const auto manifest_path = run.cfg.output_dir / "run.manifest";
        write_run_manifest(manifest_path, ecfg.seed, experiment, loaded.book.fingerprint,
                           run.cfg.config_text);
        track(manifest_path);
        out << "run ok experiment=" << experiment << " dir=" << run.cfg.output_dir.string()
            << " files=" << files << "\n";
    } catch (...) {
        cleanup();
        throw;
    }
}

inline void save_ris_state(const std::filesystem::path& path, const RisState& state) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "ris-state-v1\n";
    out << "elements=" << state.phases.size() << "\n";
    char buf[48];
    for (std::size_t n = 0; n < state.phases.size(); ++n) {
        std::snprintf(buf, sizeof(buf), "%.17g %d\n", state.phases[n], state.on[n] ? 1 : 0);
        out << buf;
    }
    out.close();
    if (!out) throw FormatError("failed writing " + path.string());
}

inline RisState load_ris_state(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "ris-state-v1") {
        throw FormatError(path.string() + ": not a ris-state-v1 file");
    }
    if (!std::getline(in, line) || line.rfind("elements=", 0) != 0) {
        throw FormatError(path.string() + ": missing elements count");
    }
    const std::size_t n_elems = std::stoull(line.substr(9));
    RisState state;
    state.phases.resize(n_elems);
    state.on.resize(n_elems);
    for (std::size_t n = 0; n < n_elems; ++n) {
        double phase = 0.0;
        int on = 0;
        if (!(in >> phase >> on)) {
            throw FormatError(path.string() + ": truncated at element " + std::to_string(n));
        }
        state.phases[n] = phase;
        state.on[n] = on ? 1 : 0;
    }
    return state;
}

inline void cmd_snrmap(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
    detail::Timer timer;
    detail::LoadedRun run = detail::load_and_prepare(opts, err);
    if (opts.entry_index.has_value() == opts.state_path.has_value()) {
        throw ConfigError("snrmap needs exactly one state source: an entry index or a state file");
    }

    RisState state;
    if (opts.entry_index) {
        LoadedCodebook loaded = load_codebook(codebook_dir(run.cfg));
        ensure_fingerprint(loaded.book, run.cfg.scene, run.geom);
        if (*opts.entry_index >= loaded.book.entries.size()) {
            throw ConfigError("entry index " + std::to_string(*opts.entry_index) +
                              " out of range (codebook has " +
                              std::to_string(loaded.book.entries.size()) + " entries)");
        }
        state.phases = loaded.book.entries[*opts.entry_index].phases;
        state.on.assign(state.phases.size(), 1);
    } else {
        state = load_ris_state(*opts.state_path);
        if (state.phases.size() != run.geom.size()) {
            throw ConfigError("state file holds " + std::to_string(state.phases.size()) +
                              " elements, scene has " + std::to_string(run.geom.size()));
        }
    }

    const IncidentField inc = solve_incident_field(run.cfg.scene, run.geom, state);
    const SnrRaster raster = snr_map(run.cfg.scene, run.geom, state, inc.e, run.cfg.snrmap);

    std::filesystem::create_directories(run.cfg.output_dir);
    const auto path = run.cfg.output_dir / "snrmap.csv";
    std::ofstream file(path);
    if (!file) throw FormatError("cannot write " + path.string());
    file << "iu,iv,u,v,snr_db\n";
    const double L = run.cfg.scene.room_side;
    double max_db = kSnrFloorDb;
    int max_iu = 0, max_iv = 0;
    char buf[120];
    for (int iv = 0; iv < raster.nv; ++iv) {
        for (int iu = 0; iu < raster.nu; ++iu) {
            const double u = (iu + 0.5) / raster.nu * L;
            const double v = (iv + 0.5) / raster.nv * L;
            const double db = raster.at(iu, iv);
            std::snprintf(buf, sizeof(buf), "%d,%d,%.10g,%.10g,%.10g\n", iu, iv, u, v, db);
            file << buf;
            if (db > max_db) {
                max_db = db;
                max_iu = iu;
                max_iv = iv;
            }
        }
    }
    file.close();
    if (!file) throw FormatError("failed writing " + path.string());
    err << "snrmap done in " << timer.seconds() << " s\n";
    out << "snrmap ok file=" << path.string() << " nu=" << raster.nu << " nv=" << raster.nv
        << " max_db=" << detail::csv_double(max_db) << " max_iu=" << max_iu << " max_iv=" << max_iv
        << "\n";
}

}  // namespace scrooge
