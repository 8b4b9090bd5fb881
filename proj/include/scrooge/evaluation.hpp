#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "scrooge/codebook.hpp"
#include "scrooge/error.hpp"
#include "scrooge/fields.hpp"
#include "scrooge/orchestrator.hpp"
#include "scrooge/parallel.hpp"
#include "scrooge/rng.hpp"
#include "scrooge/scene.hpp"
#include "scrooge/version.hpp"

namespace scrooge {

struct UserDraw {
    std::size_t entry_index = 0;
    int tier = 1;
};

enum class CorrelationKind { Pearson, Spearman };

struct ExperimentConfig {
    std::uint64_t seed = 42;
    int realizations = 200;
    std::vector<int> user_counts{4, 6, 8, 10, 12, 14, 16, 18};
    std::vector<int> bits_list{1, 2, 3, 4};
    AllocParams alloc;  // bits field is overridden per cell
    EEParams ee;
    AdmissionPolicy admission;
    std::array<double, kTierCount> tier_baselines{7.81, 10.35, 13.48, 17.00, 19.92};
    CorrelationKind correlation = CorrelationKind::Pearson;

    void validate() const {
        if (realizations < 1) throw ConfigError("realizations must be at least 1");
        if (user_counts.empty()) throw ConfigError("user count list is empty");
        for (int k : user_counts) {
            if (k < 1) throw ConfigError("user count must be at least 1");
        }
        if (bits_list.empty()) throw ConfigError("bits list is empty");
        for (int b : bits_list) {
            if (b < 1 || b > 16) throw ConfigError("bits must be in [1, 16]");
        }
        alloc.validate();
    }
};

// Substream layout: one stream per realization, shared by every bits setting
// of the same (experiment, K, r) cell so draws are paired across bits.
inline constexpr std::uint64_t kAllocStreamDomain = 0;
inline constexpr std::uint64_t kEeStreamDomain = 1;
inline constexpr std::uint64_t kAdmissionStreamDomain = 2;

inline std::uint64_t realization_stream(std::uint64_t domain, std::size_t k_index, std::size_t r,
                                        std::size_t realizations) {
    return (domain << 40) | (k_index * realizations + r);
}

namespace detail {

/// Draw order is the contract: K entry indices by partial Fisher-Yates, then
/// K uniform tiers, then (optionally) one more distinct index and one tier.
inline std::vector<UserDraw> draw_realization(CounterRng& rng, std::size_t n_entries, int users,
                                              UserDraw* candidate) {
    const std::size_t extra = candidate ? 1 : 0;
    if (users < 1 || static_cast<std::size_t>(users) + extra > n_entries) {
        throw ConfigError("cannot draw " + std::to_string(users + static_cast<int>(extra)) +
                          " distinct entries from a codebook of " + std::to_string(n_entries));
    }
    std::vector<std::size_t> pool(n_entries);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    std::vector<UserDraw> draws(static_cast<std::size_t>(users));
    for (int i = 0; i < users; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_index(n_entries - i));
        std::swap(pool[i], pool[j]);
        draws[i].entry_index = pool[i];
    }
    for (int i = 0; i < users; ++i) draws[i].tier = 1 + static_cast<int>(rng.next_index(kTierCount));
    if (candidate) {
        const std::size_t i = static_cast<std::size_t>(users);
        const std::size_t j = i + static_cast<std::size_t>(rng.next_index(n_entries - i));
        std::swap(pool[i], pool[j]);
        candidate->entry_index = pool[i];
        candidate->tier = 1 + static_cast<int>(rng.next_index(kTierCount));
    }
    return draws;
}

}  // namespace detail

inline std::vector<UserDraw> sample_realization(CounterRng& rng, std::size_t n_entries, int users) {
    return detail::draw_realization(rng, n_entries, users, nullptr);
}

struct RealizationWithCandidate {
    std::vector<UserDraw> users;
    UserDraw candidate;
};

inline RealizationWithCandidate sample_with_candidate(CounterRng& rng, std::size_t n_entries,
                                                      int users) {
    RealizationWithCandidate out;
    out.users = detail::draw_realization(rng, n_entries, users, &out.candidate);
    return out;
}

/// SNR a location actually sees under the shared configuration: the incident
/// field is re-solved with OFF elements silenced before the far sum.
inline double achieved_snr(const SceneConfig& scene, const RisGeometry& geom,
                           const CommonConfig& cc, const Vec3& location) {
    const RisState state = to_ris_state(cc);
    const IncidentField inc = solve_incident_field(scene, geom, state);
    return snr_db(total_field(geom, state, inc.e, location));
}

inline double snr_loss(const CodebookEntry& entry, double achieved_db) {
    return entry.optimal_snr - achieved_db;
}

namespace detail {

inline std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
        i = j + 1;
    }
    return ranks;
}

inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace detail

/// Correlation between tier index and loss across one realization's users.
/// Degenerate realizations (fewer than 2 users, a single distinct tier, or
/// zero loss variance) yield no value and are skipped by the aggregators.
inline std::optional<double> tier_consistency(const std::vector<UserDraw>& users,
                                              const std::vector<double>& losses,
                                              CorrelationKind kind = CorrelationKind::Pearson) {
    if (users.size() != losses.size()) throw ConfigError("user/loss length mismatch");
    if (users.size() < 2) return std::nullopt;
    std::vector<double> tiers(users.size());
    for (std::size_t i = 0; i < users.size(); ++i) tiers[i] = static_cast<double>(users[i].tier);
    if (kind == CorrelationKind::Spearman) {
        return detail::pearson(detail::average_ranks(tiers), detail::average_ranks(losses));
    }
    return detail::pearson(tiers, losses);
}

/// Per (method, K, bits) aggregates. Absent aggregates stay disengaged.
struct AllocRow {
    std::string method;
    int user_count = 0;
    int bits = 0;
    std::optional<double> corr_mean;
    std::optional<double> corr_std;
    std::size_t corr_n = 0;
    std::array<std::optional<double>, kTierCount> tier_mean_loss{};
    std::array<std::size_t, kTierCount> tier_n{};
};

struct EeRow {
    int user_count = 0;
    int bits = 0;
    double off_fraction_mean = 0.0;
    double loss_with_db = 0.0;
    double loss_without_db = 0.0;
    std::size_t n = 0;  // realizations
};

struct AdmissionRow {
    int tier = 1;
    std::size_t accepted = 0;
    std::size_t total = 0;
    std::optional<double> mean_acc, std_acc, max_acc;
    std::optional<double> mean_rej, std_rej, min_rej;
    double baseline_db = 0.0;
};

struct MetricsReport {
    std::uint64_t seed = 0;
    std::string version = kVersionTag;
    std::vector<AllocRow> alloc;
    std::vector<EeRow> ee;
    std::vector<AdmissionRow> admission;
};

namespace detail {

struct MeanVar {
    std::size_t n = 0;
    double sum = 0.0;
    double sumsq = 0.0;
    double max = -1e300;
    double min = 1e300;

    void add(double v) {
        ++n;
        sum += v;
        sumsq += v * v;
        max = std::max(max, v);
        min = std::min(min, v);
    }

    std::optional<double> mean() const {
        if (n == 0) return std::nullopt;
        return sum / static_cast<double>(n);
    }

    std::optional<double> sample_std() const {
        if (n < 2) return std::nullopt;
        const double m = sum / static_cast<double>(n);
        const double var = (sumsq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
        return std::sqrt(std::max(0.0, var));
    }
};

inline std::vector<ServedUser> to_served(const Codebook& book, const std::vector<UserDraw>& draws) {
    std::vector<ServedUser> served(draws.size());
    for (std::size_t i = 0; i < draws.size(); ++i) {
        served[i].entry = &book.entries[draws[i].entry_index];
        served[i].tier = draws[i].tier;
    }
    return served;
}

/// One shared-state solve, then per-user losses against their own optima.
inline std::vector<double> config_losses(const SceneConfig& scene, const RisGeometry& geom,
                                         const Codebook& book, const CommonConfig& cc,
                                         const std::vector<UserDraw>& draws) {
    const RisState state = to_ris_state(cc);
    const IncidentField inc = solve_incident_field(scene, geom, state);
    std::vector<double> losses(draws.size());
    for (std::size_t i = 0; i < draws.size(); ++i) {
        const CodebookEntry& e = book.entries[draws[i].entry_index];
        losses[i] = e.optimal_snr - snr_db(total_field(geom, state, inc.e, e.location));
    }
    return losses;
}

}  // namespace detail

/// Voting allocation experiment (tier consistency + per-tier loss), SCROOGE
/// against the priority-only baseline on identical draws.
inline std::vector<AllocRow> run_allocation_mc(const ExperimentConfig& cfg, const SceneConfig& scene,
                                               const RisGeometry& geom, const Codebook& book,
                                               int workers = 1) {
    cfg.validate();
    const std::size_t R = static_cast<std::size_t>(cfg.realizations);
    const std::size_t n_bits = cfg.bits_list.size();

    struct MethodSlot {
        std::optional<double> corr;
        std::array<double, kTierCount> tier_sum{};
        std::array<std::size_t, kTierCount> tier_n{};
    };
    struct Slot {
        std::vector<MethodSlot> per_bits;  // [bits][method: 0=scrooge, 1=baseline]
    };

    std::vector<AllocRow> rows;
    for (std::size_t ki = 0; ki < cfg.user_counts.size(); ++ki) {
        const int K = cfg.user_counts[ki];
        std::vector<Slot> slots(R);
        parallel_for(R, workers, [&](std::size_t r) {
            CounterRng rng(cfg.seed, realization_stream(kAllocStreamDomain, ki, r, R));
            const std::vector<UserDraw> draws = sample_realization(rng, book.entries.size(), K);
            const std::vector<ServedUser> served = detail::to_served(book, draws);
            Slot& slot = slots[r];
            slot.per_bits.resize(n_bits * 2);
            for (std::size_t bi = 0; bi < n_bits; ++bi) {
                AllocParams params = cfg.alloc;
                params.bits = cfg.bits_list[bi];
                const CommonConfig ccs[2] = {allocate(served, geom.size(), params),
                                             allocate_baseline(served, geom.size(), params)};
                for (int m = 0; m < 2; ++m) {
                    const std::vector<double> losses =
                        detail::config_losses(scene, geom, book, ccs[m], draws);
                    MethodSlot& ms = slot.per_bits[bi * 2 + m];
                    ms.corr = tier_consistency(draws, losses, cfg.correlation);
                    for (std::size_t i = 0; i < draws.size(); ++i) {
                        ms.tier_sum[draws[i].tier - 1] += losses[i];
                        ms.tier_n[draws[i].tier - 1] += 1;
                    }
                }
            }
        });

        for (std::size_t bi = 0; bi < n_bits; ++bi) {
            for (int m = 0; m < 2; ++m) {
                AllocRow row;
                row.method = m == 0 ? "scrooge" : "baseline";
                row.user_count = K;
                row.bits = cfg.bits_list[bi];
                detail::MeanVar corr;
                std::array<double, kTierCount> tier_sum{};
                std::array<std::size_t, kTierCount> tier_n{};
                for (std::size_t r = 0; r < R; ++r) {
                    const MethodSlot& ms = slots[r].per_bits[bi * 2 + m];
                    if (ms.corr) corr.add(*ms.corr);
                    for (int t = 0; t < kTierCount; ++t) {
                        tier_sum[t] += ms.tier_sum[t];
                        tier_n[t] += ms.tier_n[t];
                    }
                }
                row.corr_mean = corr.mean();
                row.corr_std = corr.sample_std();
                row.corr_n = corr.n;
                for (int t = 0; t < kTierCount; ++t) {
                    row.tier_n[t] = tier_n[t];
                    if (tier_n[t] > 0) row.tier_mean_loss[t] = tier_sum[t] / static_cast<double>(tier_n[t]);
                }
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

/// Energy-saving experiment: paired with/without OFF on the same draws.
inline std::vector<EeRow> run_ee_mc(const ExperimentConfig& cfg, const SceneConfig& scene,
                                    const RisGeometry& geom, const Codebook& book, int workers = 1) {
    cfg.validate();
    const std::size_t R = static_cast<std::size_t>(cfg.realizations);
    const std::size_t n_bits = cfg.bits_list.size();

    struct CellSlot {
        double off_fraction = 0.0;
        double loss_with_sum = 0.0;
        double loss_without_sum = 0.0;
        std::size_t users = 0;
    };

    std::vector<EeRow> rows;
    for (std::size_t ki = 0; ki < cfg.user_counts.size(); ++ki) {
        const int K = cfg.user_counts[ki];
        std::vector<std::vector<CellSlot>> slots(R);
        parallel_for(R, workers, [&](std::size_t r) {
            CounterRng rng(cfg.seed, realization_stream(kEeStreamDomain, ki, r, R));
            const std::vector<UserDraw> draws = sample_realization(rng, book.entries.size(), K);
            const std::vector<ServedUser> served = detail::to_served(book, draws);
            slots[r].resize(n_bits);
            for (std::size_t bi = 0; bi < n_bits; ++bi) {
                AllocParams params = cfg.alloc;
                params.bits = cfg.bits_list[bi];
                CommonConfig cc = allocate(served, geom.size(), params);
                CellSlot& cs = slots[r][bi];
                cs.users = draws.size();
                for (double v : detail::config_losses(scene, geom, book, cc, draws)) {
                    cs.loss_without_sum += v;
                }
                apply_energy_off(cc, served, cfg.ee);
                std::size_t off = 0;
                for (unsigned char on : cc.on) off += on ? 0 : 1;
                cs.off_fraction = static_cast<double>(off) / static_cast<double>(geom.size());
                for (double v : detail::config_losses(scene, geom, book, cc, draws)) {
                    cs.loss_with_sum += v;
                }
            }
        });

        for (std::size_t bi = 0; bi < n_bits; ++bi) {
            EeRow row;
            row.user_count = K;
            row.bits = cfg.bits_list[bi];
            double off_sum = 0.0, with_sum = 0.0, without_sum = 0.0;
            std::size_t users = 0;
            for (std::size_t r = 0; r < R; ++r) {
                off_sum += slots[r][bi].off_fraction;
                with_sum += slots[r][bi].loss_with_sum;
                without_sum += slots[r][bi].loss_without_sum;
                users += slots[r][bi].users;
            }
            row.off_fraction_mean = off_sum / static_cast<double>(R);
            row.loss_with_db = with_sum / static_cast<double>(users);
            row.loss_without_db = without_sum / static_cast<double>(users);
            row.n = R;
            rows.push_back(row);
        }
    }
    return rows;
}

/// Admission experiment: per realization one candidate is judged against the
/// deployed configuration; losses are predicted under that configuration
/// without re-allocating. Rows aggregate per candidate tier across all cells.
inline std::vector<AdmissionRow> run_admission_mc(const ExperimentConfig& cfg,
                                                  const SceneConfig& scene, const RisGeometry& geom,
                                                  const Codebook& book, int workers = 1) {
    cfg.validate();
    const std::size_t R = static_cast<std::size_t>(cfg.realizations);
    const std::size_t n_bits = cfg.bits_list.size();

    struct Outcome {
        int tier = 1;
        bool admitted = false;
        double loss = 0.0;
    };

    std::array<std::size_t, kTierCount> accepted{}, total{};
    std::array<detail::MeanVar, kTierCount> acc_stats{}, rej_stats{};

    for (std::size_t ki = 0; ki < cfg.user_counts.size(); ++ki) {
        const int K = cfg.user_counts[ki];
        std::vector<std::vector<Outcome>> slots(R);
        parallel_for(R, workers, [&](std::size_t r) {
            CounterRng rng(cfg.seed, realization_stream(kAdmissionStreamDomain, ki, r, R));
            const RealizationWithCandidate draw = sample_with_candidate(rng, book.entries.size(), K);
            const std::vector<ServedUser> served = detail::to_served(book, draw.users);
            const CodebookEntry& cand = book.entries[draw.candidate.entry_index];
            slots[r].resize(n_bits);
            for (std::size_t bi = 0; bi < n_bits; ++bi) {
                AllocParams params = cfg.alloc;
                params.bits = cfg.bits_list[bi];
                CommonConfig cc = allocate(served, geom.size(), params);
                apply_energy_off(cc, served, cfg.ee);
                Outcome& oc = slots[r][bi];
                oc.tier = draw.candidate.tier;
                oc.admitted = admit(cc, cand, draw.candidate.tier, cfg.admission).admitted;
                oc.loss = snr_loss(cand, achieved_snr(scene, geom, cc, cand.location));
            }
        });

        for (std::size_t r = 0; r < R; ++r) {
            for (const Outcome& oc : slots[r]) {
                const int t = oc.tier - 1;
                total[t] += 1;
                if (oc.admitted) {
                    accepted[t] += 1;
                    acc_stats[t].add(oc.loss);
                } else {
                    rej_stats[t].add(oc.loss);
                }
            }
        }
    }

    std::vector<AdmissionRow> rows;
    for (int t = 0; t < kTierCount; ++t) {
        AdmissionRow row;
        row.tier = t + 1;
        row.accepted = accepted[t];
        row.total = total[t];
        row.mean_acc = acc_stats[t].mean();
        row.std_acc = acc_stats[t].sample_std();
        if (acc_stats[t].n > 0) row.max_acc = acc_stats[t].max;
        row.mean_rej = rej_stats[t].mean();
        row.std_rej = rej_stats[t].sample_std();
        if (rej_stats[t].n > 0) row.min_rej = rej_stats[t].min;
        row.baseline_db = cfg.tier_baselines[t];
        rows.push_back(row);
    }
    return rows;
}

namespace detail {

inline std::string csv_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

inline std::string csv_opt(const std::optional<double>& v) {
    return v ? csv_double(*v) : std::string();
}

}  // namespace detail

/// alloc.csv: tier 0 carries the per-cell correlation aggregate (n =
/// realizations that produced a correlation); tiers 1..5 carry mean loss with
/// n = user samples of that tier.
inline void write_alloc_csv(const std::filesystem::path& path, const std::vector<AllocRow>& rows) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "method,K,bits,tier,mean_loss_db,corr_mean,corr_std,n\n";
    for (const AllocRow& row : rows) {
        out << row.method << ',' << row.user_count << ',' << row.bits << ",0,,"
            << detail::csv_opt(row.corr_mean) << ',' << detail::csv_opt(row.corr_std) << ','
            << row.corr_n << '\n';
        for (int t = 0; t < kTierCount; ++t) {
            out << row.method << ',' << row.user_count << ',' << row.bits << ',' << (t + 1) << ','
                << detail::csv_opt(row.tier_mean_loss[t]) << ",,," << row.tier_n[t] << '\n';
        }
    }
    out.close();
    if (!out) throw FormatError("failed writing " + path.string());
}

inline void write_ee_csv(const std::filesystem::path& path, const std::vector<EeRow>& rows) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "K,bits,off_fraction_mean,loss_with_db,loss_without_db,n\n";
    for (const EeRow& row : rows) {
        out << row.user_count << ',' << row.bits << ',' << detail::csv_double(row.off_fraction_mean)
            << ',' << detail::csv_double(row.loss_with_db) << ','
            << detail::csv_double(row.loss_without_db) << ',' << row.n << '\n';
    }
    out.close();
    if (!out) throw FormatError("failed writing " + path.string());
}

inline void write_admission_csv(const std::filesystem::path& path,
                                const std::vector<AdmissionRow>& rows) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "tier,accepted,total,ratio,mean_acc_db,std_acc_db,max_acc_db,mean_rej_db,std_rej_db,"
           "min_rej_db,baseline_db\n";
    for (const AdmissionRow& row : rows) {
        std::string ratio;
        if (row.total > 0) {
            ratio = detail::csv_double(static_cast<double>(row.accepted) /
                                       static_cast<double>(row.total));
        }
        out << row.tier << ',' << row.accepted << ',' << row.total << ',' << ratio << ','
            << detail::csv_opt(row.mean_acc) << ',' << detail::csv_opt(row.std_acc) << ','
            << detail::csv_opt(row.max_acc) << ',' << detail::csv_opt(row.mean_rej) << ','
            << detail::csv_opt(row.std_rej) << ',' << detail::csv_opt(row.min_rej) << ','
            << detail::csv_double(row.baseline_db) << '\n';
    }
    out.close();
    if (!out) throw FormatError("failed writing " + path.string());
}

/// Seed, version, fingerprint and the verbatim config text; worker count is
/// deliberately absent because it never affects any output.
inline void write_run_manifest(const std::filesystem::path& path, std::uint64_t seed,
                               const std::string& experiment, const std::string& fingerprint,
                               const std::string& config_text) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "run-manifest-v1\n";
    out << "version=" << kVersionTag << "\n";
    out << "seed=" << seed << "\n";
    out << "experiment=" << experiment << "\n";
    out << "fingerprint=" << fingerprint << "\n";
    out << "config-begin\n" << config_text;
    if (!config_text.empty() && config_text.back() != '\n') out << '\n';
    out << "config-end\n";
    out.close();
    if (!out) throw FormatError("failed writing " + path.string());
}

}  // namespace scrooge
