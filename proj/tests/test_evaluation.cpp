#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "scrooge/codebook.hpp"
#include "scrooge/config.hpp"
#include "scrooge/evaluation.hpp"
#include "scrooge/geometry.hpp"

using namespace scrooge;

namespace {

struct SmallWorld {
    SceneConfig scene;
    RisGeometry geom;
    Codebook book;
};

SmallWorld make_world(double coupling = 0.15) {
    SmallWorld w;
    w.scene.panels = {{Wall::XLo, 4, 4}, {Wall::YLo, 4, 4}};
    w.scene.coupling_strength = coupling;
    w.geom = build_geometry(w.scene);
    const auto locations = sample_locations_random(w.scene.room_side, 6, 9, 0.1);
    w.book = compile_codebook(w.scene, w.geom, locations, 1);
    return w;
}

ExperimentConfig small_experiment() {
    ExperimentConfig cfg;
    cfg.seed = 5;
    cfg.realizations = 8;
    cfg.user_counts = {2, 3};
    cfg.bits_list = {1, 2};
    return cfg;
}

}  // namespace

TEST_CASE("realization sampling") {
    SECTION("exhaustive draw is a permutation") {
        CounterRng rng(1, 10);
        const auto draws = sample_realization(rng, 5, 5);
        std::set<std::size_t> seen;
        for (const UserDraw& d : draws) {
            seen.insert(d.entry_index);
            CHECK(d.tier >= 1);
            CHECK(d.tier <= 5);
        }
        CHECK(seen == std::set<std::size_t>{0, 1, 2, 3, 4});
    }
    SECTION("same stream, same draws") {
        CounterRng a(7, 3), b(7, 3);
        const auto da = sample_realization(a, 50, 10);
        const auto db = sample_realization(b, 50, 10);
        for (std::size_t i = 0; i < da.size(); ++i) {
            CHECK(da[i].entry_index == db[i].entry_index);
            CHECK(da[i].tier == db[i].tier);
        }
    }
    SECTION("different seeds diverge somewhere") {
        bool differ = false;
        for (std::size_t r = 0; r < 100 && !differ; ++r) {
            CounterRng a(1, r), b(2, r);
            const auto da = sample_realization(a, 20, 5);
            const auto db = sample_realization(b, 20, 5);
            for (std::size_t i = 0; i < da.size(); ++i) {
                if (da[i].entry_index != db[i].entry_index || da[i].tier != db[i].tier) differ = true;
            }
        }
        CHECK(differ);
    }
    SECTION("candidate draw extends the user draw") {
        CounterRng a(7, 3), b(7, 3);
        const auto plain = sample_realization(a, 50, 10);
        const auto with_cand = sample_with_candidate(b, 50, 10);
        for (std::size_t i = 0; i < plain.size(); ++i) {
            CHECK(plain[i].entry_index == with_cand.users[i].entry_index);
            CHECK(plain[i].tier == with_cand.users[i].tier);
        }
        for (const UserDraw& d : with_cand.users) {
            CHECK(d.entry_index != with_cand.candidate.entry_index);
        }
        CHECK(with_cand.candidate.tier >= 1);
        CHECK(with_cand.candidate.tier <= 5);
    }
    SECTION("oversized draws are rejected") {
        CounterRng rng(1);
        CHECK_THROWS_AS(sample_realization(rng, 4, 5), ConfigError);
        CounterRng rng2(1);
        CHECK_THROWS_AS(sample_with_candidate(rng2, 4, 4), ConfigError);
    }
}

TEST_CASE("achieved snr") {
    SmallWorld w = make_world(0.0);
    const CodebookEntry& entry = w.book.entries[0];
    const std::size_t n_elems = w.geom.size();

    SECTION("all-off surface hits the floor") {
        CommonConfig cc;
        cc.state.assign(n_elems, 0);
        cc.on.assign(n_elems, 0);
        cc.induced_phase.assign(n_elems, 0.0);
        CHECK(achieved_snr(w.scene, w.geom, cc, entry.location) == kSnrFloorDb);
    }

    SECTION("the entry's own continuous phases reproduce its optimum") {
        CommonConfig cc;
        cc.state.assign(n_elems, 0);
        cc.on.assign(n_elems, 1);
        cc.induced_phase = entry.phases;
        const double achieved = achieved_snr(w.scene, w.geom, cc, entry.location);
        CHECK(achieved == Catch::Approx(entry.optimal_snr).margin(1e-9));
        CHECK(snr_loss(entry, achieved) == Catch::Approx(0.0).margin(1e-9));
    }

    SECTION("quantized self-service cannot beat the coherent optimum") {
        ServedUser self{&entry, 1};
        AllocParams params;
        params.bits = 1;
        const CommonConfig cc = allocate({self}, n_elems, params);
        const double achieved = achieved_snr(w.scene, w.geom, cc, entry.location);
        CHECK(achieved <= entry.optimal_snr + 1e-9);
        CHECK(snr_loss(entry, achieved) >= -1e-9);
    }
}

TEST_CASE("tier consistency correlation") {
    auto users_with_tiers = [](std::vector<int> tiers) {
        std::vector<UserDraw> users(tiers.size());
        for (std::size_t i = 0; i < tiers.size(); ++i) users[i].tier = tiers[i];
        return users;
    };

    CHECK(*tier_consistency(users_with_tiers({1, 2, 3}), {1.0, 2.0, 3.0}) == Catch::Approx(1.0));
    CHECK(*tier_consistency(users_with_tiers({1, 2, 3}), {9.0, 5.0, 1.0}) == Catch::Approx(-1.0));
    CHECK_FALSE(tier_consistency(users_with_tiers({2, 2, 2}), {1.0, 2.0, 3.0}).has_value());
    CHECK_FALSE(tier_consistency(users_with_tiers({1, 2, 3}), {5.0, 5.0, 5.0}).has_value());
    CHECK_FALSE(tier_consistency(users_with_tiers({1}), {5.0}).has_value());
    CHECK_THROWS_AS(tier_consistency(users_with_tiers({1, 2}), {5.0}), ConfigError);

    SECTION("spearman sees through monotone warping") {
        const auto users = users_with_tiers({1, 2, 3, 4});
        const std::vector<double> losses{1.0, 10.0, 11.0, 1000.0};
        CHECK(*tier_consistency(users, losses, CorrelationKind::Spearman) == Catch::Approx(1.0));
        CHECK(*tier_consistency(users, losses, CorrelationKind::Pearson) < 1.0);
    }
}

TEST_CASE("allocation experiment") {
    const SmallWorld w = make_world();
    const ExperimentConfig cfg = small_experiment();
    const auto rows = run_allocation_mc(cfg, w.scene, w.geom, w.book, 1);

    REQUIRE(rows.size() == 2 * 2 * 2);  // K x bits x method
    for (const AllocRow& row : rows) {
        CHECK((row.method == "scrooge" || row.method == "baseline"));
        if (row.corr_mean) {
            CHECK(*row.corr_mean >= -1.0);
            CHECK(*row.corr_mean <= 1.0);
        }
        CHECK(row.corr_n <= static_cast<std::size_t>(cfg.realizations));
        std::size_t users = 0;
        for (int t = 0; t < kTierCount; ++t) {
            users += row.tier_n[t];
            if (row.tier_n[t] > 0) CHECK(row.tier_mean_loss[t].has_value());
        }
        CHECK(users == static_cast<std::size_t>(cfg.realizations) * row.user_count);
    }

    SECTION("worker count never changes the report") {
        const auto rows4 = run_allocation_mc(cfg, w.scene, w.geom, w.book, 4);
        REQUIRE(rows4.size() == rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            CHECK(rows[i].method == rows4[i].method);
            CHECK(rows[i].corr_mean == rows4[i].corr_mean);
            CHECK(rows[i].corr_std == rows4[i].corr_std);
            CHECK(rows[i].corr_n == rows4[i].corr_n);
            for (int t = 0; t < kTierCount; ++t) {
                CHECK(rows[i].tier_mean_loss[t] == rows4[i].tier_mean_loss[t]);
                CHECK(rows[i].tier_n[t] == rows4[i].tier_n[t]);
            }
        }
    }

    SECTION("single-user cells have no correlation samples") {
        ExperimentConfig solo = cfg;
        solo.user_counts = {1};
        solo.bits_list = {1};
        const auto solo_rows = run_allocation_mc(solo, w.scene, w.geom, w.book, 1);
        REQUIRE(solo_rows.size() == 2);
        CHECK(solo_rows[0].corr_n == 0);
        CHECK_FALSE(solo_rows[0].corr_mean.has_value());
    }
}

TEST_CASE("energy experiment") {
    const SmallWorld w = make_world();
    const ExperimentConfig cfg = small_experiment();
    const auto rows = run_ee_mc(cfg, w.scene, w.geom, w.book, 1);

    REQUIRE(rows.size() == 4);
    for (const EeRow& row : rows) {
        CHECK(row.off_fraction_mean >= 0.0);
        CHECK(row.off_fraction_mean <= 1.0);
        CHECK(row.n == static_cast<std::size_t>(cfg.realizations));
    }

    SECTION("off fraction is independent of bits") {
        CHECK(rows[0].off_fraction_mean == rows[1].off_fraction_mean);  // K=2, bits 1 vs 2
        CHECK(rows[2].off_fraction_mean == rows[3].off_fraction_mean);
    }

    SECTION("tau_off 0 keeps the surface intact") {
        ExperimentConfig intact = cfg;
        intact.ee.tau_off = 0.0;
        for (const EeRow& row : run_ee_mc(intact, w.scene, w.geom, w.book, 1)) {
            CHECK(row.off_fraction_mean == 0.0);
            CHECK(row.loss_with_db == row.loss_without_db);
        }
    }

    SECTION("tau_off above 1 darkens everything") {
        ExperimentConfig dark = cfg;
        dark.ee.tau_off = 1.1;
        for (const EeRow& row : run_ee_mc(dark, w.scene, w.geom, w.book, 1)) {
            CHECK(row.off_fraction_mean == 1.0);
            CHECK(row.loss_with_db > row.loss_without_db + 100.0);  // everyone at the floor
        }
    }

    SECTION("worker count never changes the report") {
        const auto rows3 = run_ee_mc(cfg, w.scene, w.geom, w.book, 3);
        REQUIRE(rows3.size() == rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            CHECK(rows[i].off_fraction_mean == rows3[i].off_fraction_mean);
            CHECK(rows[i].loss_with_db == rows3[i].loss_with_db);
            CHECK(rows[i].loss_without_db == rows3[i].loss_without_db);
        }
    }
}

TEST_CASE("admission experiment") {
    const SmallWorld w = make_world();
    const ExperimentConfig cfg = small_experiment();
    const auto rows = run_admission_mc(cfg, w.scene, w.geom, w.book, 1);

    REQUIRE(rows.size() == kTierCount);
    std::size_t total = 0, accepted = 0;
    for (const AdmissionRow& row : rows) {
        total += row.total;
        accepted += row.accepted;
        CHECK(row.accepted <= row.total);
        CHECK(row.baseline_db == cfg.tier_baselines[row.tier - 1]);
        if (row.mean_acc && row.mean_rej) {
            CHECK(row.max_acc.has_value());
            CHECK(row.min_rej.has_value());
        }
    }
    // every (realization, bits) pair judges exactly one candidate
    CHECK(total == static_cast<std::size_t>(cfg.realizations) * cfg.user_counts.size() *
                       cfg.bits_list.size());
    CHECK(accepted <= total);

    SECTION("vacuous tolerance accepts everyone") {
        ExperimentConfig loose = cfg;
        loose.admission.tolerance.fill(1.0);
        for (const AdmissionRow& row : run_admission_mc(loose, w.scene, w.geom, w.book, 1)) {
            CHECK(row.accepted == row.total);
            CHECK_FALSE(row.mean_rej.has_value());
        }
    }

    SECTION("worker count never changes the report") {
        const auto rows2 = run_admission_mc(cfg, w.scene, w.geom, w.book, 2);
        REQUIRE(rows2.size() == rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            CHECK(rows[i].accepted == rows2[i].accepted);
            CHECK(rows[i].total == rows2[i].total);
            CHECK(rows[i].mean_acc == rows2[i].mean_acc);
            CHECK(rows[i].mean_rej == rows2[i].mean_rej);
        }
    }
}

TEST_CASE("csv emission") {
    const auto dir = std::filesystem::temp_directory_path() / "scrooge-csv-test";
    std::filesystem::create_directories(dir);

    SECTION("alloc csv layout") {
        AllocRow row;
        row.method = "scrooge";
        row.user_count = 4;
        row.bits = 2;
        row.corr_mean = 0.5;
        row.corr_std = 0.125;
        row.corr_n = 7;
        row.tier_mean_loss[0] = 1.5;
        row.tier_n[0] = 3;
        write_alloc_csv(dir / "alloc.csv", {row});
        std::ifstream in(dir / "alloc.csv");
        std::string line;
        std::getline(in, line);
        CHECK(line == "method,K,bits,tier,mean_loss_db,corr_mean,corr_std,n");
        std::getline(in, line);
        CHECK(line == "scrooge,4,2,0,,0.5,0.125,7");
        std::getline(in, line);
        CHECK(line == "scrooge,4,2,1,1.5,,,3");
        std::getline(in, line);
        CHECK(line == "scrooge,4,2,2,,,,0");  // absent aggregate stays empty
    }

    SECTION("ee csv layout") {
        EeRow row;
        row.user_count = 4;
        row.bits = 1;
        row.off_fraction_mean = 0.25;
        row.loss_with_db = 3.5;
        row.loss_without_db = 3.25;
        row.n = 10;
        write_ee_csv(dir / "ee.csv", {row});
        std::ifstream in(dir / "ee.csv");
        std::string line;
        std::getline(in, line);
        CHECK(line == "K,bits,off_fraction_mean,loss_with_db,loss_without_db,n");
        std::getline(in, line);
        CHECK(line == "4,1,0.25,3.5,3.25,10");
    }

    SECTION("admission csv layout with empty aggregates") {
        AdmissionRow row;
        row.tier = 2;
        row.accepted = 0;
        row.total = 4;
        row.mean_rej = 6.5;
        row.std_rej = 0.5;
        row.min_rej = 6.0;
        row.baseline_db = 10.35;
        write_admission_csv(dir / "admission.csv", {row});
        std::ifstream in(dir / "admission.csv");
        std::string line;
        std::getline(in, line);
        CHECK(line ==
              "tier,accepted,total,ratio,mean_acc_db,std_acc_db,max_acc_db,mean_rej_db,std_rej_db,"
              "min_rej_db,baseline_db");
        std::getline(in, line);
        CHECK(line == "2,0,4,0,,,,6.5,0.5,6,10.35");
    }

    SECTION("run manifest echoes the config verbatim") {
        write_run_manifest(dir / "run.manifest", 42, "all", "00ff", "[scene]\nroom_side = 1.5\n");
        std::ifstream in(dir / "run.manifest");
        std::stringstream buf;
        buf << in.rdbuf();
        const std::string text = buf.str();
        CHECK(text.find("seed=42\n") != std::string::npos);
        CHECK(text.find("experiment=all\n") != std::string::npos);
        CHECK(text.find("fingerprint=00ff\n") != std::string::npos);
        CHECK(text.find("config-begin\n[scene]\nroom_side = 1.5\nconfig-end\n") != std::string::npos);
    }
}

TEST_CASE("stream layout separates experiments") {
    std::set<std::uint64_t> ids;
    for (std::uint64_t domain : {kAllocStreamDomain, kEeStreamDomain, kAdmissionStreamDomain}) {
        for (std::size_t ki = 0; ki < 8; ++ki) {
            for (std::size_t r = 0; r < 16; ++r) {
                ids.insert(realization_stream(domain, ki, r, 16));
            }
        }
    }
    CHECK(ids.size() == 3 * 8 * 16);
}
