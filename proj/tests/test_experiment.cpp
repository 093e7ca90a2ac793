#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "core/experiment.hpp"

using namespace stdrive;

TEST_CASE("summarize computes mean and sample stddev") {
    auto st = expt::summarize({2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0});
    CHECK(st.mean == doctest::Approx(5.0));
    CHECK(st.stddev == doctest::Approx(std::sqrt(32.0 / 7.0)));
    CHECK(st.per_seed.size() == 8);

    auto one = expt::summarize({3.5});
    CHECK(one.mean == 3.5);
    CHECK(one.stddev == 0.0);

    CHECK_THROWS_AS(expt::summarize({}), std::invalid_argument);
}

TEST_CASE("parallel_seeds runs every slot exactly once") {
    for (int threads : {1, 2, 3}) {
        CAPTURE(threads);
        std::vector<std::atomic<int>> hits(17);
        expt::parallel_seeds(17, threads, [&](int s) { hits[s].fetch_add(1); });
        for (auto& h : hits) CHECK(h.load() == 1);
    }
    expt::parallel_seeds(0, 2, [](int) { FAIL("should not run"); });
}

TEST_CASE("parallel_seeds rethrows a worker exception naming the seed") {
    std::atomic<int> ran{0};
    CHECK_THROWS_WITH_AS(expt::parallel_seeds(8, 2,
                                              [&](int s) {
                                                  if (s == 3) throw std::runtime_error("boom");
                                                  ran.fetch_add(1);
                                              }),
                         "seed 3: boom", std::runtime_error);
    CHECK(ran.load() < 8);

    CHECK_THROWS_WITH_AS(expt::parallel_seeds(2, 1, [&](int) { throw 42; }),
                         "seed 0: unknown error", std::runtime_error);
}

namespace {

expt::TransferOrderingOptions tiny_ordering() {
    expt::TransferOrderingOptions o;
    o.train_n = 10;
    o.test_n = 6;
    o.frame_h = 16;
    o.frame_w = 16;
    o.seq_len = 3;
    o.phase1_epochs = 1;
    o.phase2_epochs = 1;
    o.batch = 4;
    o.seeds = 2;
    o.root_seed = 77;
    o.threads = 1;
    return o;
}

}  // namespace

TEST_CASE("transfer ordering smoke run has the expected shape") {
    auto res = expt::run_transfer_ordering(tiny_ordering());
    REQUIRE(res.variants.size() == 3);
    CHECK(res.variants[0].name == "baseline");
    CHECK(res.variants[1].name == "weights-only");
    CHECK(res.variants[2].name == "full");
    for (const auto& v : res.variants) {
        CHECK(v.shifted.per_seed.size() == 2);
        CHECK(v.shifted.mean >= 0.0);
        CHECK(v.shifted.mean <= 1.0);
        CHECK(v.in_domain.mean >= 0.0);
        CHECK(v.in_domain.mean <= 1.0);
    }
    auto tsv = res.tsv();
    CHECK(tsv.find("variant\tshifted_mean") == 0);
    CHECK(tsv.find("full") != std::string::npos);
    CHECK(res.table().find("baseline") != std::string::npos);
}

TEST_CASE("transfer ordering is deterministic across re-runs and thread counts") {
    auto opt = tiny_ordering();
    auto a = expt::run_transfer_ordering(opt).tsv();
    auto b = expt::run_transfer_ordering(opt).tsv();
    CHECK(a == b);

    opt.threads = 2;
    auto c = expt::run_transfer_ordering(opt).tsv();
    CHECK(a == c);
}

TEST_CASE("transfer ordering rejects bad options") {
    auto opt = tiny_ordering();
    opt.seeds = 0;
    CHECK_THROWS_AS(expt::run_transfer_ordering(opt), std::invalid_argument);
    opt = tiny_ordering();
    opt.train_n = 0;
    CHECK_THROWS_AS(expt::run_transfer_ordering(opt), std::invalid_argument);
}

TEST_CASE("convergence smoke run charges unreached seeds max+1") {
    expt::ConvergenceOptions o;
    o.train_n = 8;
    o.frame_h = 16;
    o.frame_w = 16;
    o.seq_len = 3;
    o.phase1_epochs = 1;
    o.max_epochs = 1;
    o.batch = 4;
    o.seeds = 1;
    o.root_seed = 5;
    o.threads = 1;
    auto res = expt::run_convergence(o);
    REQUIRE(res.variants.size() == 4);
    CHECK(res.variants[0].name == "full");
    CHECK(res.variants[1].name == "no-lstm");
    CHECK(res.variants[2].name == "no-cnn");
    CHECK(res.variants[3].name == "no-aug");
    CHECK(res.max_epochs == 1);
    for (const auto& v : res.variants) {
        CHECK(v.epochs_to_95.mean >= 1.0);
        CHECK(v.epochs_to_95.mean <= 2.0);
        if (v.unreached == 1) CHECK(v.epochs_to_95.mean == 2.0);
    }
    auto tsv = res.tsv();
    CHECK(tsv.find("variant\tepochs_to_95_mean") == 0);

    auto again = expt::run_convergence(o);
    CHECK(res.tsv() == again.tsv());
}

TEST_CASE("similarity table ranks a resample of the reference above noise") {
    expt::SimilarityTableOptions o;
    // wide enough frames that the inception maps keep spatial extent
    o.ref_n = 12;
    o.cand_n = 12;
    o.n_pairs = 120;
    o.frame_h = 24;
    o.frame_w = 32;
    o.seq_len = 3;
    o.encoder_train_n = 8;
    o.encoder_epochs = 1;
    o.batch = 4;
    o.root_seed = 9;
    o.threads = 1;
    auto res = expt::run_similarity_table(o);
    REQUIRE(res.rows.size() == 4);
    CHECK(res.reference == "townA");
    CHECK(res.rows[0].name == "townA-resampled");
    CHECK(res.rows[1].name == "townB");
    CHECK(res.rows[2].name == "townC");
    CHECK(res.rows[3].name == "noise");
    for (const auto& r : res.rows) {
        CHECK(r.sim.pairs == 120);
        CHECK(r.sim.used + r.sim.skipped == 120);
        CHECK(std::isfinite(r.sim.fid));
    }
    // even an undertrained encoder separates the reference from pure noise
    CHECK(res.rows[0].sim.mean_cosine > res.rows[3].sim.mean_cosine);

    auto tsv = res.tsv();
    CHECK(tsv.find("candidate\tmean_cosine") == 0);
    auto again = expt::run_similarity_table(o);
    CHECK(tsv == again.tsv());

    o.threads = 2;
    CHECK(tsv == expt::run_similarity_table(o).tsv());
}

TEST_CASE("steering smoke run reports three finite maes") {
    expt::SteeringOptions o;
    o.source_n = 8;
    o.target_n = 8;
    o.test_n = 6;
    o.frame_h = 16;
    o.frame_w = 16;
    o.seq_len = 3;
    o.phase1_epochs = 1;
    o.phase2_epochs = 1;
    o.batch = 4;
    o.seeds = 2;
    o.root_seed = 3;
    o.threads = 1;
    auto res = expt::run_steering(o);
    CHECK(res.source_in_domain.per_seed.size() == 2);
    CHECK(std::isfinite(res.source_in_domain.mean));
    CHECK(std::isfinite(res.scratch_shifted.mean));
    CHECK(std::isfinite(res.transfer_shifted.mean));
    CHECK(res.source_in_domain.mean >= 0.0);

    auto tsv = res.tsv();
    CHECK(tsv.find("model\tmae_mean") == 0);
    CHECK(tsv.find("transfer-shifted") != std::string::npos);
    CHECK(res.tsv() == expt::run_steering(o).tsv());
}

TEST_CASE("scenario smoke run yields four severity rows") {
    expt::ScenarioOptions o;
    o.ref_n = 4;
    o.probe_n = 4;
    o.train_n = 8;
    o.epochs = 1;
    o.batch = 4;
    o.frame_h = 16;
    o.frame_w = 16;
    o.seq_len = 3;
    o.root_seed = 11;
    auto res = expt::run_scenario(o);
    REQUIRE(res.rows.size() == 4);
    for (const auto& r : res.rows) {
        CHECK(r.probes == 4);
        CHECK(r.mean_cosine >= -1.0);
        CHECK(r.mean_cosine <= 1.0);
        CHECK(r.mean_collision >= 0.0);
        CHECK(r.mean_collision <= 1.0);
    }
    CHECK(res.rows[0].name.find("0.25") != std::string::npos);
    CHECK(res.rows[3].name.find("0.95") != std::string::npos);
    auto tsv = res.tsv();
    CHECK(tsv.find("level\tmean_cosine") == 0);
    CHECK(res.tsv() == expt::run_scenario(o).tsv());
}
