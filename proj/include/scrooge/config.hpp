#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "scrooge/error.hpp"
#include "scrooge/evaluation.hpp"
#include "scrooge/fields.hpp"
#include "scrooge/rng.hpp"
#include "scrooge/scene.hpp"
#include "scrooge/vec3.hpp"

namespace scrooge {

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> tokens(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream iss(s);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(where + ": not a number: \"" + s + "\"");
    }
}

inline long long parse_int(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(where + ": not an integer: \"" + s + "\"");
    }
}

inline std::uint64_t parse_u64(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(where + ": not an unsigned integer: \"" + s + "\"");
    }
}

}  // namespace detail

/// Parsed key=value file: [section] headers, # comments, repeatable keys.
struct RawConfig {
    struct Item {
        std::string key;
        std::string value;
        int line = 0;
        mutable bool consumed = false;
    };
    std::map<std::string, std::vector<Item>> sections;
    std::string text;  // verbatim file contents
    std::string path;
};

inline RawConfig parse_config_text(const std::string& text, const std::string& path) {
    RawConfig cfg;
    cfg.text = text;
    cfg.path = path;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed section header");
            }
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                throw ConfigError(path + ":" + std::to_string(lineno) + ": empty section name");
            }
            cfg.sections[section];
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        if (section.empty()) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": key outside any section");
        }
        RawConfig::Item item;
        item.key = detail::trim(line.substr(0, eq));
        item.value = detail::trim(line.substr(eq + 1));
        item.line = lineno;
        if (item.key.empty()) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
        }
        cfg.sections[section].push_back(std::move(item));
    }
    return cfg;
}

inline RawConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path.string());
}

/// Typed accessor over one section; every key must be consumed exactly once
/// (or via list access), and leftovers are reported as unknown keys.
class SectionReader {
public:
    SectionReader(const RawConfig& cfg, const std::string& section)
        : cfg_(cfg), name_(section) {
        auto it = cfg.sections.find(section);
        items_ = it == cfg.sections.end() ? nullptr : &it->second;
    }

    bool present() const { return items_ != nullptr; }

    std::optional<std::string> get(const std::string& key) const {
        if (!items_) return std::nullopt;
        const RawConfig::Item* found = nullptr;
        for (const RawConfig::Item& item : *items_) {
            if (item.key != key) continue;
            if (found) {
                throw ConfigError(where(item) + ": key \"" + key + "\" repeated");
            }
            found = &item;
        }
        if (!found) return std::nullopt;
        found->consumed = true;
        return found->value;
    }

    std::vector<std::string> get_list(const std::string& key) const {
        std::vector<std::string> out;
        if (!items_) return out;
        for (const RawConfig::Item& item : *items_) {
            if (item.key != key) continue;
            item.consumed = true;
            out.push_back(item.value);
        }
        return out;
    }

    double get_double(const std::string& key, double fallback) const {
        auto v = get(key);
        return v ? detail::parse_double(*v, ctx(key)) : fallback;
    }

    long long get_int(const std::string& key, long long fallback) const {
        auto v = get(key);
        return v ? detail::parse_int(*v, ctx(key)) : fallback;
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        auto v = get(key);
        return v ? detail::parse_u64(*v, ctx(key)) : fallback;
    }

    std::vector<double> get_doubles(const std::string& key) const {
        std::vector<double> out;
        auto v = get(key);
        if (!v) return out;
        for (const std::string& tok : detail::tokens(*v)) {
            out.push_back(detail::parse_double(tok, ctx(key)));
        }
        return out;
    }

    std::vector<int> get_ints(const std::string& key) const {
        std::vector<int> out;
        auto v = get(key);
        if (!v) return out;
        for (const std::string& tok : detail::tokens(*v)) {
            out.push_back(static_cast<int>(detail::parse_int(tok, ctx(key))));
        }
        return out;
    }

    Vec3 get_vec3(const std::string& key, const Vec3& fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        const std::vector<std::string> toks = detail::tokens(*v);
        if (toks.size() != 3) throw ConfigError(ctx(key) + ": expected 3 numbers");
        return Vec3{detail::parse_double(toks[0], ctx(key)), detail::parse_double(toks[1], ctx(key)),
                    detail::parse_double(toks[2], ctx(key))};
    }

    std::string ctx(const std::string& key) const {
        return cfg_.path + ": [" + name_ + "] " + key;
    }

    void finish() const {
        if (!items_) return;
        for (const RawConfig::Item& item : *items_) {
            if (!item.consumed) {
                throw ConfigError(where(item) + ": unknown key \"" + item.key + "\" in [" + name_ + "]");
            }
        }
    }

private:
    std::string where(const RawConfig::Item& item) const {
        return cfg_.path + ":" + std::to_string(item.line);
    }

    const RawConfig& cfg_;
    std::string name_;
    const std::vector<RawConfig::Item>* items_ = nullptr;
};

inline SceneConfig load_scene(const RawConfig& raw) {
    SectionReader sec(raw, "scene");
    SceneConfig scene;
    scene.room_side = sec.get_double("room_side", scene.room_side);
    scene.frequency = sec.get_double("frequency", scene.frequency);
    scene.element_spacing = sec.get_double("element_spacing", scene.element_spacing);
    scene.tx_position = sec.get_vec3("tx_position", scene.tx_position);
    scene.tx_direction = sec.get_vec3("tx_direction", scene.tx_direction);
    scene.tx_beam_exponent = sec.get_double("tx_beam_exponent", scene.tx_beam_exponent);
    scene.element_angle_exponent =
        sec.get_double("element_angle_exponent", scene.element_angle_exponent);
    scene.coupling_strength = sec.get_double("coupling_strength", scene.coupling_strength);
    scene.coupling_neighborhood =
        static_cast<int>(sec.get_int("coupling_neighborhood", scene.coupling_neighborhood));
    if (auto refl = sec.get("wall_reflectivity")) {
        const std::vector<std::string> toks = detail::tokens(*refl);
        const std::string ctx = sec.ctx("wall_reflectivity");
        if (toks.size() == 1) {
            scene.wall_reflectivity.fill(detail::parse_double(toks[0], ctx));
        } else if (toks.size() == kWallCount) {
            for (int w = 0; w < kWallCount; ++w) {
                scene.wall_reflectivity[w] = detail::parse_double(toks[w], ctx);
            }
        } else {
            throw ConfigError(ctx + ": expected 1 or 6 values");
        }
    }
    scene.panels.clear();
    for (const std::string& spec : sec.get_list("panel")) {
        const std::vector<std::string> toks = detail::tokens(spec);
        const std::string ctx = sec.ctx("panel");
        if (toks.size() != 3) throw ConfigError(ctx + ": expected \"wall rows cols\"");
        Panel p;
        p.wall = parse_wall(toks[0]);
        p.rows = static_cast<int>(detail::parse_int(toks[1], ctx));
        p.cols = static_cast<int>(detail::parse_int(toks[2], ctx));
        scene.panels.push_back(p);
    }
    sec.finish();
    return scene;
}

/// Uniform draws inside the margin-inset cube, one stream per config seed.
inline constexpr std::uint64_t kLocationStreamDomain = 3;

inline std::vector<Vec3> sample_locations_random(double room_side, int count, std::uint64_t seed,
                                                 double margin_fraction) {
    if (count < 1) throw ConfigError("location count must be at least 1");
    if (!(margin_fraction >= 0.0 && margin_fraction < 0.5)) {
        throw ConfigError("margin_fraction must be in [0, 0.5)");
    }
    CounterRng rng(seed, kLocationStreamDomain << 40);
    const double lo = margin_fraction * room_side;
    const double span = (1.0 - 2.0 * margin_fraction) * room_side;
    std::vector<Vec3> out(static_cast<std::size_t>(count));
    for (Vec3& p : out) {
        p.x = lo + rng.next_double() * span;
        p.y = lo + rng.next_double() * span;
        p.z = lo + rng.next_double() * span;
    }
    return out;
}

inline std::vector<Vec3> sample_locations_grid(double room_side, int nx, int ny, int nz,
                                               double margin_fraction) {
    if (nx < 1 || ny < 1 || nz < 1) throw ConfigError("grid counts must be at least 1");
    if (!(margin_fraction >= 0.0 && margin_fraction < 0.5)) {
        throw ConfigError("margin_fraction must be in [0, 0.5)");
    }
    const double lo = margin_fraction * room_side;
    const double span = (1.0 - 2.0 * margin_fraction) * room_side;
    std::vector<Vec3> out;
    out.reserve(static_cast<std::size_t>(nx) * ny * nz);
    for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) {
            for (int k = 0; k < nz; ++k) {
                out.push_back(Vec3{lo + (i + 0.5) / nx * span, lo + (j + 0.5) / ny * span,
                                   lo + (k + 0.5) / nz * span});
            }
        }
    }
    return out;
}

inline std::vector<Vec3> load_locations(const RawConfig& raw, const SceneConfig& scene) {
    SectionReader sec(raw, "codebook");
    std::vector<Vec3> locations;
    for (const std::string& spec : sec.get_list("location")) {
        const std::vector<std::string> toks = detail::tokens(spec);
        const std::string ctx = sec.ctx("location");
        if (toks.size() != 3) throw ConfigError(ctx + ": expected \"x y z\"");
        locations.push_back(Vec3{detail::parse_double(toks[0], ctx), detail::parse_double(toks[1], ctx),
                                 detail::parse_double(toks[2], ctx)});
    }
    const auto sampler = sec.get("sampler");
    if (!locations.empty() && sampler) {
        throw ConfigError(raw.path + ": [codebook] gives both explicit locations and a sampler");
    }
    if (locations.empty() && !sampler) {
        throw ConfigError(raw.path + ": [codebook] needs location lines or a sampler");
    }
    if (sampler) {
        const double margin = sec.get_double("margin_fraction", 0.1);
        if (*sampler == "random") {
            const int count = static_cast<int>(sec.get_int("count", 0));
            const std::uint64_t seed = sec.get_u64("sampler_seed", 42);
            locations = sample_locations_random(scene.room_side, count, seed, margin);
        } else if (*sampler == "grid") {
            const std::vector<int> counts = sec.get_ints("grid_counts");
            if (counts.size() != 3) {
                throw ConfigError(sec.ctx("grid_counts") + ": expected 3 integers");
            }
            locations = sample_locations_grid(scene.room_side, counts[0], counts[1], counts[2], margin);
        } else {
            throw ConfigError(sec.ctx("sampler") + ": unknown sampler \"" + *sampler + "\"");
        }
    }
    sec.finish();
    return locations;
}

inline ExperimentConfig load_experiment(const RawConfig& raw) {
    SectionReader sec(raw, "experiment");
    ExperimentConfig cfg;
    cfg.seed = sec.get_u64("seed", cfg.seed);
    cfg.realizations = static_cast<int>(sec.get_int("realizations", cfg.realizations));
    if (auto v = sec.get("user_counts")) {
        cfg.user_counts.clear();
        for (const std::string& tok : detail::tokens(*v)) {
            cfg.user_counts.push_back(
                static_cast<int>(detail::parse_int(tok, sec.ctx("user_counts"))));
        }
    }
    if (auto v = sec.get("bits")) {
        cfg.bits_list.clear();
        for (const std::string& tok : detail::tokens(*v)) {
            cfg.bits_list.push_back(static_cast<int>(detail::parse_int(tok, sec.ctx("bits"))));
        }
    }
    cfg.alloc.tau_low = sec.get_double("tau_low", cfg.alloc.tau_low);
    cfg.alloc.tau_high = sec.get_double("tau_high", cfg.alloc.tau_high);
    cfg.alloc.alpha_tier = sec.get_double("alpha_tier", cfg.alloc.alpha_tier);
    cfg.alloc.beta_influence = sec.get_double("beta_influence", cfg.alloc.beta_influence);
    cfg.alloc.epsilon_influence = sec.get_double("epsilon_influence", cfg.alloc.epsilon_influence);
    {
        const std::vector<double> priority = sec.get_doubles("priority");
        if (!priority.empty()) {
            if (priority.size() != kTierCount) {
                throw ConfigError(sec.ctx("priority") + ": expected 5 values");
            }
            for (int t = 0; t < kTierCount; ++t) cfg.alloc.priority[t] = priority[t];
        }
    }
    cfg.ee.tau_off = sec.get_double("tau_off", cfg.ee.tau_off);
    {
        const std::vector<double> tol = sec.get_doubles("tolerance");
        if (!tol.empty()) {
            if (tol.size() != kTierCount) throw ConfigError(sec.ctx("tolerance") + ": expected 5 values");
            for (int t = 0; t < kTierCount; ++t) cfg.admission.tolerance[t] = tol[t];
        }
    }
    cfg.admission.selection_fraction =
        sec.get_double("selection_fraction", cfg.admission.selection_fraction);
    cfg.admission.acceptance_fraction =
        sec.get_double("acceptance_fraction", cfg.admission.acceptance_fraction);
    {
        const std::vector<double> base = sec.get_doubles("baselines");
        if (!base.empty()) {
            if (base.size() != kTierCount) throw ConfigError(sec.ctx("baselines") + ": expected 5 values");
            for (int t = 0; t < kTierCount; ++t) cfg.tier_baselines[t] = base[t];
        }
    }
    if (auto v = sec.get("correlation")) {
        if (*v == "pearson") {
            cfg.correlation = CorrelationKind::Pearson;
        } else if (*v == "spearman") {
            cfg.correlation = CorrelationKind::Spearman;
        } else {
            throw ConfigError(sec.ctx("correlation") + ": expected pearson or spearman");
        }
    }
    sec.finish();
    return cfg;
}

inline GridSpec load_snrmap(const RawConfig& raw) {
    SectionReader sec(raw, "snrmap");
    GridSpec grid;
    if (auto v = sec.get("axis")) {
        if (*v == "x" || *v == "0") {
            grid.slice_axis = 0;
        } else if (*v == "y" || *v == "1") {
            grid.slice_axis = 1;
        } else if (*v == "z" || *v == "2") {
            grid.slice_axis = 2;
        } else {
            throw ConfigError(sec.ctx("axis") + ": expected x, y or z");
        }
    }
    grid.slice_coord = sec.get_double("coord", 0.75);
    grid.nu = static_cast<int>(sec.get_int("nu", grid.nu));
    grid.nv = static_cast<int>(sec.get_int("nv", grid.nv));
    sec.finish();
    return grid;
}

/// Everything one command invocation needs, resolved from a single file.
struct RunConfig {
    SceneConfig scene;
    std::vector<Vec3> locations;
    ExperimentConfig experiment;
    GridSpec snrmap;
    std::filesystem::path output_dir = "out";
    std::string config_text;
};

inline RunConfig load_run_config(const RawConfig& raw) {
    for (const auto& [name, items] : raw.sections) {
        if (name != "scene" && name != "codebook" && name != "experiment" && name != "snrmap" &&
            name != "output") {
            throw ConfigError(raw.path + ": unknown section [" + name + "]");
        }
    }
    RunConfig cfg;
    cfg.scene = load_scene(raw);
    cfg.scene.validate();
    cfg.locations = load_locations(raw, cfg.scene);
    cfg.experiment = load_experiment(raw);
    cfg.snrmap = load_snrmap(raw);
    SectionReader out_sec(raw, "output");
    if (auto v = out_sec.get("dir")) cfg.output_dir = *v;
    out_sec.finish();
    cfg.config_text = raw.text;
    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    return load_run_config(parse_config_file(path));
}

}  // namespace scrooge
