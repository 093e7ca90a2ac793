#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/network.hpp"
#include "core/ops.hpp"
#include "core/rng.hpp"
#include "core/salient.hpp"
#include "core/transfer.hpp"

using namespace stdrive;

namespace {

net::NetworkConfig tiny_config(int channels = 3) {
    net::NetworkConfig cfg;
    cfg.input_channels = channels;
    cfg.frame_height = 8;
    cfg.frame_width = 8;
    cfg.sequence_length = 2;
    cfg.conv1 = {4, 5, 1, 2};
    cfg.conv2 = {6, 3, 1, 1};
    cfg.incep1 = {2, 3, 2, 2};
    cfg.incep2 = {3, 4, 2, 3};
    cfg.embed_dim = 6;
    cfg.lstm_hidden = 5;
    cfg.fc1 = 7;
    cfg.fc2 = 5;
    return cfg;
}

data::Dataset brightness_set(int n, const net::NetworkConfig& cfg, std::uint64_t seed) {
    data::Dataset ds;
    ds.kind = data::DatasetKind::Classification;
    ds.T = cfg.sequence_length;
    ds.H = cfg.frame_height;
    ds.W = cfg.frame_width;
    rng::Engine eng(seed);
    for (int i = 0; i < n; ++i) {
        data::SequenceRecord rec;
        rec.label = i % 2;
        rec.domain_id = "toy";
        const int base = rec.label ? 190 : 70;
        rec.pixels.resize(ds.pixels_per_seq());
        for (auto& p : rec.pixels) {
            const int v = base + static_cast<int>(eng.uniform(-25.0, 25.0));
            p = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
        }
        ds.seqs.push_back(std::move(rec));
    }
    return ds;
}

net::HiddenState<run_scalar> zero_hidden(const net::NetworkConfig& cfg) {
    net::HiddenState<run_scalar> hs;
    for (int l = 0; l < net::NetworkConfig::lstm_layers; ++l) {
        hs.h.emplace_back(cfg.lstm_hidden, run_scalar(0));
        hs.c.emplace_back(cfg.lstm_hidden, run_scalar(0));
    }
    return hs;
}

bool same_params(const net::Parameters<run_scalar>& a, const net::Parameters<run_scalar>& b) {
    for (std::size_t i = 0; i < a.items().size(); ++i) {
        auto va = a.items()[i].second.data();
        auto vb = b.items()[i].second.data();
        for (std::size_t j = 0; j < va.size(); ++j)
            if (va[j] != vb[j]) return false;
    }
    return a.tensor_count() == b.tensor_count();
}

bool same_hidden(const net::HiddenState<run_scalar>& a, const net::HiddenState<run_scalar>& b) {
    return a.h == b.h && a.c == b.c;
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name)
        : path((std::filesystem::temp_directory_path() / name).string()) {}
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("cnn and lstm weight sets partition every parameter") {
    const auto cfg = tiny_config();
    auto params = net::init_parameters<run_scalar>(cfg, 1);
    int cnn = 0, lstm = 0;
    for (const auto& [name, t] : params.items())
        (xfer::is_cnn_param(name) ? cnn : lstm) += 1;
    CHECK(cnn > 0);
    CHECK(lstm > 0);
    CHECK(cnn + lstm == static_cast<int>(params.tensor_count()));
    CHECK(xfer::is_cnn_param("conv1.w"));
    CHECK(xfer::is_cnn_param("incep2.b5.b"));
    CHECK(xfer::is_cnn_param("bridge.w"));
    CHECK(!xfer::is_cnn_param("lstm1.w_ih"));
    CHECK(!xfer::is_cnn_param("fc3.b"));
}

TEST_CASE("harvest of a single sequence equals its final state") {
    const auto cfg = tiny_config();
    auto ds = brightness_set(1, cfg, 3);
    auto params = net::init_parameters<run_scalar>(cfg, 3);

    auto bundle = xfer::harvest_bundle(cfg, params, ds, {});
    net::ForwardOut<run_scalar> out;
    {
        ag::NoGradGuard ng;
        auto seq = data::sequence_tensor<run_scalar>(ds, 0, false);
        out = net::forward(cfg, params, seq, zero_hidden(cfg));
    }
    for (int l = 0; l < net::NetworkConfig::lstm_layers; ++l)
        for (int j = 0; j < cfg.lstm_hidden; ++j) {
            CHECK(bundle.harvested.h[l][j] == out.hT.h[l][j]);
            CHECK(bundle.harvested.c[l][j] == out.hT.c[l][j]);
        }
    CHECK(bundle.source_digest == ckpt::config_digest(cfg));
    CHECK(same_params(bundle.params, params));
}

TEST_CASE("harvest is invariant under dataset duplication") {
    const auto cfg = tiny_config();
    auto ds = brightness_set(5, cfg, 4);
    auto params = net::init_parameters<run_scalar>(cfg, 4);

    auto doubled = ds;
    for (const auto& rec : ds.seqs) doubled.seqs.push_back(rec);

    auto b1 = xfer::harvest_bundle(cfg, params, ds, {});
    auto b2 = xfer::harvest_bundle(cfg, params, doubled, {});
    for (int l = 0; l < net::NetworkConfig::lstm_layers; ++l)
        for (int j = 0; j < cfg.lstm_hidden; ++j) {
            CHECK(b1.harvested.h[l][j] == doctest::Approx(b2.harvested.h[l][j]).epsilon(1e-6));
            CHECK(b1.harvested.c[l][j] == doctest::Approx(b2.harvested.c[l][j]).epsilon(1e-6));
        }
}

TEST_CASE("harvest of the whole set averages the two halves") {
    const auto cfg = tiny_config();
    auto ds = brightness_set(8, cfg, 5);
    auto params = net::init_parameters<run_scalar>(cfg, 5);

    data::Dataset first = ds, second = ds;
    first.seqs.assign(ds.seqs.begin(), ds.seqs.begin() + 4);
    second.seqs.assign(ds.seqs.begin() + 4, ds.seqs.end());

    auto whole = xfer::harvest_bundle(cfg, params, ds, {});
    auto ha = xfer::harvest_bundle(cfg, params, first, {});
    auto hb = xfer::harvest_bundle(cfg, params, second, {});
    for (int l = 0; l < net::NetworkConfig::lstm_layers; ++l)
        for (int j = 0; j < cfg.lstm_hidden; ++j) {
            const double mean_h = 0.5 * (ha.harvested.h[l][j] + hb.harvested.h[l][j]);
            const double mean_c = 0.5 * (ha.harvested.c[l][j] + hb.harvested.c[l][j]);
            CHECK(whole.harvested.h[l][j] == doctest::Approx(mean_h).epsilon(1e-6));
            CHECK(whole.harvested.c[l][j] == doctest::Approx(mean_c).epsilon(1e-6));
        }
}

TEST_CASE("init_phase2 honors every ablation flag combination") {
    const auto cfg = tiny_config();
    auto ds = brightness_set(4, cfg, 6);
    auto params = net::init_parameters<run_scalar>(cfg, 6);
    auto bundle = xfer::harvest_bundle(cfg, params, ds, {true, true, true});
    const std::uint64_t seed = 123;

    SUBCASE("all flags off reproduces a fresh initialization") {
        bundle.flags = {false, false, false};
        auto [p, h] = xfer::init_phase2(bundle, cfg, seed);
        CHECK(same_params(p, net::init_parameters<run_scalar>(cfg, seed)));
        CHECK(same_hidden(h, net::init_hidden_random<run_scalar>(cfg, seed)));
    }
    SUBCASE("all flags on reproduces the bundle exactly") {
        auto [p, h] = xfer::init_phase2(bundle, cfg, seed);
        CHECK(same_params(p, bundle.params));
        CHECK(same_hidden(h, bundle.harvested));
    }
    SUBCASE("cnn-only copies the frame encoder and keeps the rest fresh") {
        bundle.flags = {true, false, false};
        auto [p, h] = xfer::init_phase2(bundle, cfg, seed);
        auto fresh = net::init_parameters<run_scalar>(cfg, seed);
        for (const auto& [name, t] : p.items()) {
            const auto& want = xfer::is_cnn_param(name) ? bundle.params.at(name) : fresh.at(name);
            auto a = t.data();
            auto b = want.data();
            for (std::size_t j = 0; j < a.size(); ++j) REQUIRE(a[j] == b[j]);
        }
        CHECK(same_hidden(h, net::init_hidden_random<run_scalar>(cfg, seed)));
    }
    SUBCASE("lstm-only keeps the encoder fresh") {
        bundle.flags = {false, true, false};
        auto [p, h] = xfer::init_phase2(bundle, cfg, seed);
        auto fresh = net::init_parameters<run_scalar>(cfg, seed);
        for (const auto& [name, t] : p.items()) {
            const auto& want = xfer::is_cnn_param(name) ? fresh.at(name) : bundle.params.at(name);
            auto a = t.data();
            auto b = want.data();
            for (std::size_t j = 0; j < a.size(); ++j) REQUIRE(a[j] == b[j]);
        }
    }
}

TEST_CASE("init_phase2 reports digest drift as a warning") {
    const auto cfg = tiny_config();
    auto ds = brightness_set(3, cfg, 7);
    auto params = net::init_parameters<run_scalar>(cfg, 7);
    auto bundle = xfer::harvest_bundle(cfg, params, ds, {});

    std::string warning = "stale";
    xfer::init_phase2(bundle, cfg, 1, &warning);
    CHECK(warning.empty());

    bundle.source_digest ^= 0xdeadbeef;
    xfer::init_phase2(bundle, cfg, 1, &warning);
    CHECK(warning.find("digest") != std::string::npos);
}

TEST_CASE("init_phase2 rejects incompatible targets") {
    const auto cfg = tiny_config();
    auto ds = brightness_set(3, cfg, 8);
    auto params = net::init_parameters<run_scalar>(cfg, 8);
    auto bundle = xfer::harvest_bundle(cfg, params, ds, {});

    auto bad = cfg;
    bad.lstm_hidden = 6;
    CHECK_THROWS_AS(xfer::init_phase2(bundle, bad, 1), std::invalid_argument);
    bad = cfg;
    bad.frame_width = 12;
    CHECK_THROWS_AS(xfer::init_phase2(bundle, bad, 1), std::invalid_argument);
    bad = cfg;
    bad.head = net::Head::Regression;
    CHECK_THROWS_AS(xfer::init_phase2(bundle, bad, 1), std::invalid_argument);
}

TEST_CASE("channel growth zero-fills the new kernels and preserves forwards") {
    const auto cfg3 = tiny_config(3);
    const auto cfg6 = tiny_config(6);
    auto ds = brightness_set(4, cfg3, 9);
    auto params = net::init_parameters<run_scalar>(cfg3, 9);
    auto bundle = xfer::harvest_bundle(cfg3, params, ds, {true, true, true});

    auto [p6, h6] = xfer::init_phase2(bundle, cfg6, 55);

    const auto& grown = p6.at("conv1.w");
    const auto& src = bundle.params.at("conv1.w");
    const auto gs = grown.shape();
    REQUIRE(gs[1] == 6);
    const std::size_t k2 = static_cast<std::size_t>(gs[2]) * gs[3];
    auto gv = grown.data();
    auto sv = src.data();
    for (int co = 0; co < gs[0]; ++co)
        for (int ci = 0; ci < 6; ++ci)
            for (std::size_t q = 0; q < k2; ++q) {
                const auto got = gv[(static_cast<std::size_t>(co) * 6 + ci) * k2 + q];
                if (ci < 3)
                    REQUIRE(got == sv[(static_cast<std::size_t>(co) * 3 + ci) * k2 + q]);
                else
                    REQUIRE(got == run_scalar(0));
            }

    // unaugmented sequences (zero aux channels) must match the source net
    ag::NoGradGuard ng;
    for (std::size_t i = 0; i < ds.seqs.size(); ++i) {
        auto seq3 = data::sequence_tensor<run_scalar>(ds, i, false);
        auto seq6 = data::sequence_tensor<run_scalar>(ds, i, true);
        auto out3 = net::forward(cfg3, params, seq3, bundle.harvested);
        auto out6 = net::forward(cfg6, p6, seq6, h6);
        auto l3 = out3.logits.data();
        auto l6 = out6.logits.data();
        for (std::size_t j = 0; j < l3.size(); ++j)
            CHECK(std::abs(static_cast<double>(l3[j]) - l6[j]) < 1e-6);
    }
}

TEST_CASE("bundle round trip through disk preserves phase-2 initialization") {
    const auto cfg = tiny_config();
    auto ds = brightness_set(5, cfg, 10);
    auto params = net::init_parameters<run_scalar>(cfg, 10);
    auto bundle = xfer::harvest_bundle(cfg, params, ds, {true, true, true});

    TempFile f("stdrive_test_bundle_rt.bin");
    ckpt::save_bundle(f.path, bundle);
    auto loaded = ckpt::load_bundle(f.path);

    auto [p1, h1] = xfer::init_phase2(bundle, tiny_config(6), 77);
    auto [p2, h2] = xfer::init_phase2(loaded, tiny_config(6), 77);
    CHECK(same_params(p1, p2));
    CHECK(same_hidden(h1, h2));
}

TEST_CASE("degenerate phase 2 reproduces phase 1 exactly") {
    const auto cfg = tiny_config();
    auto ds = brightness_set(10, cfg, 12);
    train::TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 4;
    tc.seed = 12;
    tc.salient_ratio = 0.0;

    auto phase1 = xfer::train_phase1(cfg, ds, nullptr, tc);

    // bundle contents are arbitrary here; all-false flags must ignore them
    auto donor_params = net::init_parameters<run_scalar>(cfg, 999);
    auto bundle = xfer::harvest_bundle(cfg, donor_params, ds, {false, false, false});
    std::string warning;
    auto phase2 = xfer::train_phase2(bundle, cfg, ds, nullptr, tc, &warning);

    CHECK(warning.empty());
    CHECK(same_params(phase1.params, phase2.params));
    CHECK(same_hidden(phase1.h0, phase2.h0));
    REQUIRE(phase1.history.epochs.size() == phase2.history.epochs.size());
    for (std::size_t i = 0; i < phase1.history.epochs.size(); ++i) {
        CHECK(phase1.history.epochs[i].loss == phase2.history.epochs[i].loss);
        CHECK(phase1.history.epochs[i].train_metric == phase2.history.epochs[i].train_metric);
    }
}

TEST_CASE("train_phase1 rejects a six-channel source") {
    auto cfg = tiny_config(6);
    auto ds = brightness_set(4, cfg, 13);
    train::TrainConfig tc;
    CHECK_THROWS_WITH_AS(xfer::train_phase1(cfg, ds, nullptr, tc), doctest::Contains("3-channel"),
                         std::invalid_argument);
}

TEST_CASE("train_phase2 enforces salient map coverage") {
    const auto cfg3 = tiny_config(3);
    const auto cfg6 = tiny_config(6);
    auto ds = brightness_set(10, cfg3, 14);
    auto params = net::init_parameters<run_scalar>(cfg3, 14);
    auto bundle = xfer::harvest_bundle(cfg3, params, ds, {true, true, true});

    train::TrainConfig tc;
    tc.epochs = 1;
    tc.seed = 14;
    tc.salient_ratio = 0.5;

    // no maps attached yet: expected 5, found 0
    CHECK_THROWS_WITH_AS(xfer::train_phase2(bundle, cfg6, ds, nullptr, tc),
                         doctest::Contains("expected 5"), std::invalid_argument);

    auto chosen = sal::attach_salient_maps(cfg3, params, ds, 0.5, 14, {});
    CHECK(chosen.size() == 5);

    // right coverage, wrong channel count
    CHECK_THROWS_WITH_AS(xfer::train_phase2(bundle, cfg3, ds, nullptr, tc),
                         doctest::Contains("6-channel"), std::invalid_argument);

    auto out = xfer::train_phase2(bundle, cfg6, ds, nullptr, tc);
    CHECK(out.history.epochs.size() == 1);

    // coverage mismatch in the other direction
    tc.salient_ratio = 0.2;
    CHECK_THROWS_WITH_AS(xfer::train_phase2(bundle, cfg6, ds, nullptr, tc),
                         doctest::Contains("expected 2"), std::invalid_argument);
}

TEST_CASE("transferred start beats a cold start on a shifted toy domain") {
    const auto cfg = tiny_config();
    auto source = brightness_set(24, cfg, 15);
    train::TrainConfig tc;
    tc.epochs = 12;
    tc.batch_size = 8;
    tc.lr = 5e-3;
    tc.seed = 15;
    tc.track_train_metric = false;
    auto phase1 = xfer::train_phase1(cfg, source, nullptr, tc);
    auto bundle = xfer::harvest_bundle(cfg, phase1.params, source, {true, true, true});

    // same task, new noise draw: a transferred net should start ahead
    auto target = brightness_set(16, cfg, 16);
    auto [p_warm, h_warm] = xfer::init_phase2(bundle, cfg, 77);
    auto cold_p = net::init_parameters<run_scalar>(cfg, 77);
    auto cold_h = net::init_hidden_random<run_scalar>(cfg, 77);

    const auto warm = train::evaluate(cfg, p_warm, h_warm, target);
    const auto cold = train::evaluate(cfg, cold_p, cold_h, target);
    CHECK(warm.metric >= cold.metric);
    CHECK(warm.metric >= 0.9);
}
