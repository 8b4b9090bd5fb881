#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "scrooge/codebook.hpp"
#include "scrooge/error.hpp"
#include "scrooge/fields.hpp"
#include "scrooge/phase.hpp"

namespace scrooge {

inline constexpr int kTierCount = 5;

/// Largest index count selected by a fraction: ceil(y*n) with a guard against
/// products like 0.1*1600 landing a hair above the exact integer.
inline std::size_t ceil_fraction(double y, std::size_t n) {
    if (y <= 0.0) return 0;
    const double v = std::ceil(y * static_cast<double>(n) - 1e-9);
    return static_cast<std::size_t>(std::max(0.0, v));
}

struct AllocParams {
    double tau_low = 0.3;
    double tau_high = 0.8;
    double alpha_tier = 1.0;
    double beta_influence = 1.5;
    double epsilon_influence = 1e-3;
    int bits = 2;
    std::array<double, kTierCount> priority{5.0, 4.0, 3.0, 2.0, 1.0};

    int levels() const { return 1 << bits; }

    void validate() const {
        if (bits < 1 || bits > 16) throw ConfigError("bits must be in [1, 16]");
        if (!(tau_low <= tau_high)) throw ConfigError("tau_low must not exceed tau_high");
        if (!(epsilon_influence > 0.0)) throw ConfigError("epsilon_influence must be positive");
    }

    double priority_of(int tier) const {
        if (tier < 1 || tier > kTierCount) {
            throw ConfigError("tier must be in [1, " + std::to_string(kTierCount) + "], got " +
                              std::to_string(tier));
        }
        return priority[tier - 1];
    }
};

struct EEParams {
    double tau_off = 0.25;
};

struct AdmissionPolicy {
    std::array<double, kTierCount> tolerance{0.15, 0.25, 0.30, 0.45, 0.60};  // fractions of 2*pi
    double selection_fraction = 0.10;   // of all elements, by candidate influence
    double acceptance_fraction = 0.10;  // of the selected set

    double tolerance_of(int tier) const {
        if (tier < 1 || tier > kTierCount) {
            throw ConfigError("tier must be in [1, " + std::to_string(kTierCount) + "], got " +
                              std::to_string(tier));
        }
        return tolerance[tier - 1];
    }
};

/// One user admitted to a serving round: a codebook entry plus its tier.
struct ServedUser {
    const CodebookEntry* entry = nullptr;
    int tier = 1;
};

/// Shared surface configuration produced by allocation.
struct CommonConfig {
    std::vector<int> state;            // discrete state index per element
    std::vector<unsigned char> on;     // 1 until energy saving turns it off
    std::vector<double> induced_phase; // wrapped phase of each state
    int levels = 4;
};

inline RisState to_ris_state(const CommonConfig& cc) {
    RisState s;
    s.phases = cc.induced_phase;
    s.on = cc.on;
    return s;
}

/// 0 below tau_low, 1 above tau_high, linear in between.
inline double blending_factor(double max_influence, double tau_low, double tau_high) {
    if (max_influence <= tau_low) return 0.0;
    if (max_influence >= tau_high) return 1.0;
    return (max_influence - tau_low) / (tau_high - tau_low);
}

/// Per-user vote weight at one element: priority raised to alpha, scaled
/// toward the influence term as the blend approaches 1.
inline double vote_weight(double priority, double influence, double blend, const AllocParams& p) {
    const double base = std::pow(priority, p.alpha_tier);
    const double boost = std::pow(p.epsilon_influence + influence, p.beta_influence);
    return (1.0 - blend) * base + blend * base * boost;
}

namespace detail {

inline void check_users(const std::vector<ServedUser>& users, std::size_t n_elems) {
    for (const ServedUser& u : users) {
        if (u.entry == nullptr) throw ConfigError("user without codebook entry");
        if (u.entry->phases.size() != n_elems || u.entry->influence.size() != n_elems) {
            throw ConfigError("codebook entry element count does not match the surface");
        }
    }
}

/// Weighted per-element vote over each user's desired discrete state.
/// physics_aware=false pins every blend to 0, which reduces the weight to the
/// pure priority term.
inline CommonConfig allocate_impl(const std::vector<ServedUser>& users, std::size_t n_elems,
                                  const AllocParams& params, bool physics_aware) {
    params.validate();
    check_users(users, n_elems);
    const int levels = params.levels();

    CommonConfig cc;
    cc.levels = levels;
    cc.state.assign(n_elems, 0);
    cc.on.assign(n_elems, 1);
    cc.induced_phase.assign(n_elems, state_phase(0, levels));

    std::vector<double> priority(users.size());
    for (std::size_t k = 0; k < users.size(); ++k) priority[k] = params.priority_of(users[k].tier);

    std::vector<double> score(static_cast<std::size_t>(levels));
    for (std::size_t n = 0; n < n_elems; ++n) {
        double max_influence = 0.0;
        for (const ServedUser& u : users) {
            max_influence = std::max(max_influence, u.entry->influence[n]);
        }
        const double blend =
            physics_aware ? blending_factor(max_influence, params.tau_low, params.tau_high) : 0.0;

        std::fill(score.begin(), score.end(), 0.0);
        for (std::size_t k = 0; k < users.size(); ++k) {
            const int s = quantize_phase(users[k].entry->phases[n], levels);
            score[s] += vote_weight(priority[k], users[k].entry->influence[n], blend, params);
        }
        int best = 0;
        for (int s = 1; s < levels; ++s) {
            if (score[s] > score[best]) best = s;
        }
        cc.state[n] = best;
        cc.induced_phase[n] = state_phase(best, levels);
    }
    return cc;
}

}  // namespace detail

inline CommonConfig allocate(const std::vector<ServedUser>& users, std::size_t n_elems,
                             const AllocParams& params) {
    return detail::allocate_impl(users, n_elems, params, true);
}

/// Priority-only voting; identical mechanics with the influence blend disabled.
inline CommonConfig allocate_baseline(const std::vector<ServedUser>& users, std::size_t n_elems,
                                      const AllocParams& params) {
    return detail::allocate_impl(users, n_elems, params, false);
}

/// Turns off every element no served user meaningfully reaches. Depends only
/// on influence values, never on the chosen states.
inline void apply_energy_off(CommonConfig& cc, const std::vector<ServedUser>& users,
                             const EEParams& params) {
    detail::check_users(users, cc.state.size());
    for (std::size_t n = 0; n < cc.state.size(); ++n) {
        double max_influence = 0.0;
        for (const ServedUser& u : users) {
            max_influence = std::max(max_influence, u.entry->influence[n]);
        }
        if (max_influence < params.tau_off) cc.on[n] = 0;
    }
}

struct AdmissionResult {
    bool admitted = false;
    std::size_t selected = 0;  // |T|
    std::size_t matched = 0;   // elements within tolerance
    std::size_t required = 0;  // matches needed to admit
    std::vector<std::size_t> selected_indices;
    std::vector<double> deltas;  // |wrapped phase gap| per selected element
};

/// Compatibility check of a candidate against the current shared config: on
/// the candidate's top influence cells, count elements whose induced phase is
/// within the tier tolerance of the candidate's desired phase. An OFF element
/// counts as maximally mismatched.
inline AdmissionResult admit(const CommonConfig& cc, const CodebookEntry& candidate, int tier,
                             const AdmissionPolicy& policy) {
    const std::size_t n_elems = cc.state.size();
    if (candidate.phases.size() != n_elems || candidate.influence.size() != n_elems) {
        throw ConfigError("candidate entry element count does not match the surface");
    }
    AdmissionResult res;
    res.selected = ceil_fraction(policy.selection_fraction, n_elems);
    if (res.selected == 0) {
        res.required = 0;
        res.admitted = true;
        return res;
    }

    std::vector<std::size_t> order(n_elems);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (candidate.influence[a] != candidate.influence[b]) {
            return candidate.influence[a] > candidate.influence[b];
        }
        return a < b;
    });
    order.resize(res.selected);
    res.selected_indices = order;

    const double tolerance = policy.tolerance_of(tier) * 2.0 * std::numbers::pi;
    res.deltas.reserve(res.selected);
    for (std::size_t n : order) {
        const double delta = cc.on[n]
                                 ? std::abs(wrap_phase(cc.induced_phase[n] - candidate.phases[n]))
                                 : std::numbers::pi;
        res.deltas.push_back(delta);
        if (delta <= tolerance) ++res.matched;
    }
    res.required = ceil_fraction(policy.acceptance_fraction, res.selected);
    res.admitted = res.matched >= res.required;
    return res;
}

}  // namespace scrooge
