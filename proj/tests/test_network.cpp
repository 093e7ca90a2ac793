#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <numeric>

#include "core/network.hpp"
#include "fd_check.hpp"

using namespace stdrive;
using namespace stdrive::net;
using ag::Tensor;

namespace {

// small config whose every stage stays >= 1 pixel on 8x8 frames
NetworkConfig tiny_config() {
    NetworkConfig cfg;
    cfg.input_channels = 3;
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

template <class T>
Tensor<T> random_sequence(const NetworkConfig& cfg, std::uint64_t seed, bool requires_grad = false) {
    rng::Engine eng(seed);
    std::vector<T> pix(static_cast<std::size_t>(cfg.sequence_length) * cfg.input_channels *
                       cfg.frame_height * cfg.frame_width);
    for (auto& p : pix) p = static_cast<T>(eng.uniform());
    return Tensor<T>::leaf({cfg.sequence_length, cfg.input_channels, cfg.frame_height, cfg.frame_width},
                           std::move(pix), requires_grad);
}

double cosine(std::span<const double> a, std::span<const double> b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

TEST_CASE("config validation rejects out-of-contract settings") {
    auto bad = [](auto&& tweak) {
        NetworkConfig cfg = tiny_config();
        tweak(cfg);
        CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
    };
    bad([](NetworkConfig& c) { c.input_channels = 4; });
    bad([](NetworkConfig& c) { c.sequence_length = 0; });
    bad([](NetworkConfig& c) { c.lstm_hidden = 0; });
    bad([](NetworkConfig& c) { c.conv1.stride = 0; });
    bad([](NetworkConfig& c) { c.frame_height = 3; });   // collapses below 1 px
    bad([](NetworkConfig& c) { c.incep2.b5 = 0; });
    CHECK_NOTHROW(validate_config(tiny_config()));
    CHECK_NOTHROW(validate_config(NetworkConfig{}));
}

TEST_CASE("init_parameters is deterministic with zero biases") {
    auto cfg = tiny_config();
    auto a = init_parameters<double>(cfg, 42);
    auto b = init_parameters<double>(cfg, 42);
    auto c = init_parameters<double>(cfg, 43);
    REQUIRE(a.tensor_count() == b.tensor_count());
    bool any_diff = false;
    for (std::size_t i = 0; i < a.items().size(); ++i) {
        const auto& ta = a.items()[i].second;
        const auto& tb = b.items()[i].second;
        CHECK(std::memcmp(ta.data().data(), tb.data().data(), ta.size() * sizeof(double)) == 0);
        if (std::memcmp(ta.data().data(), c.items()[i].second.data().data(), ta.size() * sizeof(double)) != 0)
            any_diff = true;
    }
    CHECK(any_diff);
    for (const auto& [name, t] : a.items())
        if (name.ends_with(".b"))
            for (auto v : t.data()) CHECK(v == 0.0);
}

TEST_CASE("xavier variance close to 2/(fan_in+fan_out) on a 64x64 matrix") {
    NetworkConfig cfg;
    cfg.lstm_hidden = 64;
    cfg.fc1 = 64;
    validate_config(cfg);
    auto params = init_parameters<double>(cfg, 7);
    auto w = params.at("fc1.w");
    REQUIRE(w.shape() == ag::Shape{64, 64});
    double mean = 0;
    for (auto v : w.data()) mean += v;
    mean /= static_cast<double>(w.size());
    double var = 0;
    for (auto v : w.data()) var += (v - mean) * (v - mean);
    var /= static_cast<double>(w.size() - 1);
    const double want = 2.0 / (64 + 64);
    CHECK(var > 0.8 * want);
    CHECK(var < 1.2 * want);
}

TEST_CASE("init_hidden_random determinism, dimensions, and spread") {
    NetworkConfig cfg;
    auto h1 = init_hidden_random<double>(cfg, 5);
    auto h2 = init_hidden_random<double>(cfg, 5);
    REQUIRE(h1.h.size() == 2);
    REQUIRE(h1.c.size() == 2);
    CHECK(h1.h[0].size() == 32);
    CHECK(h1.c[1].size() == 32);
    CHECK(h1.h[0] == h2.h[0]);
    CHECK(h1.c[1] == h2.c[1]);

    NetworkConfig wide = cfg;
    wide.lstm_hidden = 2500;
    auto hw = init_hidden_random<double>(wide, 9);
    std::vector<double> all;
    for (const auto& v : hw.h) all.insert(all.end(), v.begin(), v.end());
    for (const auto& v : hw.c) all.insert(all.end(), v.begin(), v.end());
    REQUIRE(all.size() == 10000);
    double mean = std::accumulate(all.begin(), all.end(), 0.0) / static_cast<double>(all.size());
    double var = 0;
    for (auto v : all) var += (v - mean) * (v - mean);
    var /= static_cast<double>(all.size() - 1);
    const double sd = std::sqrt(var);
    CHECK(sd > 0.09);
    CHECK(sd < 0.11);
}

TEST_CASE("forward emits normalized probabilities and consistent shapes") {
    auto cfg = tiny_config();
    auto params = init_parameters<double>(cfg, 1);
    auto h0 = init_hidden_random<double>(cfg, 2);
    auto seq = random_sequence<double>(cfg, 3);
    ag::NoGradGuard ng;
    auto out = forward(cfg, params, seq, h0);
    REQUIRE(out.probs.valid());
    CHECK(out.probs.shape() == ag::Shape{1, 2});
    CHECK(out.probs.data()[0] + out.probs.data()[1] == doctest::Approx(1.0).epsilon(1e-6));
    const auto d = stage_dims(cfg);
    CHECK(out.features.shape() == ag::Shape{cfg.sequence_length, d.feature_dim});
    CHECK(out.inception_maps.size() == 2);
    CHECK(out.inception_maps[0].shape() == ag::Shape{1, cfg.incep2.total(), d.incep_h, d.incep_w});
    REQUIRE(out.hT.h.size() == 2);
    CHECK(out.hT.h[1].size() == 5);
    for (int l = 0; l < 2; ++l)
        for (int i = 0; i < cfg.lstm_hidden; ++i)
            CHECK(out.hT.h[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)] ==
                  out.h_final[static_cast<std::size_t>(l)].data()[static_cast<std::size_t>(i)]);
}

TEST_CASE("forward is deterministic and rejects shape mismatches") {
    auto cfg = tiny_config();
    auto params = init_parameters<double>(cfg, 10);
    auto h0 = init_hidden_random<double>(cfg, 11);
    auto seq = random_sequence<double>(cfg, 12);
    ag::NoGradGuard ng;
    auto a = forward(cfg, params, seq, h0);
    auto b = forward(cfg, params, seq, h0);
    CHECK(std::memcmp(a.logits.data().data(), b.logits.data().data(), 2 * sizeof(double)) == 0);
    CHECK(a.hT.h[1] == b.hT.h[1]);

    auto wrong = Tensor<double>::zeros({1, 3, 8, 8});
    CHECK_THROWS_AS(forward(cfg, params, wrong, h0), std::invalid_argument);
    auto badh = h0;
    badh.h[0].pop_back();
    CHECK_THROWS_AS(forward(cfg, params, seq, badh), std::invalid_argument);
}

TEST_CASE("permuting frames changes the final hidden state") {
    auto cfg = tiny_config();
    cfg.sequence_length = 4;
    auto params = init_parameters<double>(cfg, 20);
    auto h0 = init_hidden_random<double>(cfg, 21);
    auto seq = random_sequence<double>(cfg, 22);
    const int frame = cfg.input_channels * cfg.frame_height * cfg.frame_width;
    std::vector<double> rev(seq.data().begin(), seq.data().end());
    for (int t = 0; t < cfg.sequence_length / 2; ++t)
        for (int i = 0; i < frame; ++i)
            std::swap(rev[static_cast<std::size_t>(t) * frame + i],
                      rev[static_cast<std::size_t>(cfg.sequence_length - 1 - t) * frame + i]);
    auto perm = Tensor<double>::leaf(seq.shape(), std::move(rev));
    ag::NoGradGuard ng;
    auto a = forward(cfg, params, seq, h0);
    auto b = forward(cfg, params, perm, h0);
    double diff = 0;
    for (std::size_t i = 0; i < a.hT.h[1].size(); ++i) diff = std::max(diff, std::abs(a.hT.h[1][i] - b.hT.h[1][i]));
    CHECK(diff > 1e-9);
}

TEST_CASE("classification tie breaks toward Safe") {
    auto cfg = tiny_config();
    auto params = init_parameters<double>(cfg, 30);
    // zero the head so logits are exactly [0,0]
    for (auto* name : {"fc3.w", "fc3.b"}) {
        auto vals = params.at(name).raw_data();
        std::fill(vals.begin(), vals.end(), 0.0);
    }
    auto h0 = init_hidden_random<double>(cfg, 31);
    auto seq = random_sequence<double>(cfg, 32);
    CHECK(classify(cfg, params, seq, h0) == Label::Safe);

    NetworkConfig reg = cfg;
    reg.head = Head::Regression;
    auto rparams = init_parameters<double>(reg, 33);
    CHECK_THROWS_AS(classify(reg, rparams, seq, h0), std::invalid_argument);
}

TEST_CASE("brightness doubling shifts inception features") {
    auto cfg = tiny_config();
    cfg.sequence_length = 1;
    auto params = init_parameters<double>(cfg, 40);
    auto h0 = init_hidden_random<double>(cfg, 41);
    auto seq = random_sequence<double>(cfg, 42);
    std::vector<double> bright(seq.data().begin(), seq.data().end());
    for (auto& p : bright) p = std::min(1.0, 2.0 * p);
    auto seq2 = Tensor<double>::leaf(seq.shape(), std::move(bright));
    ag::NoGradGuard ng;
    auto a = forward(cfg, params, seq, h0);
    auto b = forward(cfg, params, seq2, h0);
    CHECK(cosine(a.features.data(), b.features.data()) < 1.0 - 1e-6);
}

TEST_CASE("regression head emits one scalar") {
    auto cfg = tiny_config();
    cfg.head = Head::Regression;
    auto params = init_parameters<double>(cfg, 50);
    auto h0 = init_hidden_random<double>(cfg, 51);
    auto seq = random_sequence<double>(cfg, 52);
    ag::NoGradGuard ng;
    auto out = forward(cfg, params, seq, h0);
    CHECK(out.logits.shape() == ag::Shape{1, 1});
    CHECK_FALSE(out.probs.valid());
}

TEST_CASE("full network gradients match finite differences on 2-frame 8x8 input") {
    auto cfg = tiny_config();
    double worst = 0;
    std::size_t checked = 0;
    for (std::uint64_t trial = 0; trial < 2; ++trial) {
        auto params = init_parameters<double>(cfg, 100 + trial);
        // jitter every parameter (biases included) so no relu input sits
        // exactly on the kink, where one-sided finite differences disagree
        // with the subgradient by construction
        rng::Engine jitter(rng::mix_seed(400 + trial, "jitter"));
        for (auto& [name, t] : params.items())
            for (auto& v : t.raw_data()) v += jitter.uniform(-0.05, 0.05);
        auto h0 = init_hidden_random<double>(cfg, 200 + trial);
        auto seq = random_sequence<double>(cfg, 300 + trial, true);
        std::vector<Tensor<double>> leaves{seq};
        for (auto& [name, t] : params.items()) leaves.push_back(t);
        std::vector<int> target{static_cast<int>(trial % 2)};
        auto rep = fd::compare<double>(leaves, [&] {
            auto out = forward(cfg, params, seq, h0);
            return ag::ops::cross_entropy(out.logits, target);
        }, 1e-5);
        worst = std::max(worst, rep.max_rel);
        checked += rep.checked;
    }
    CHECK(checked > 1000);
    CHECK(worst < 1e-4);
}

TEST_CASE("6-channel model with zero aux kernels matches the 3-channel model") {
    auto cfg3 = tiny_config();
    NetworkConfig cfg6 = cfg3;
    cfg6.input_channels = 6;
    auto p3 = init_parameters<double>(cfg3, 60);
    auto p6 = init_parameters<double>(cfg6, 61);
    // copy everything; conv1 kernels get the 3-channel weights on the first
    // three input channels and zeros on the rest
    for (auto& [name, t6] : p6.items()) {
        const auto& t3 = p3.at(name);
        auto dst = t6.raw_data();
        if (name == "conv1.w") {
            const int co = cfg3.conv1.out_channels, k = cfg3.conv1.kernel;
            std::fill(dst.begin(), dst.end(), 0.0);
            for (int o = 0; o < co; ++o)
                for (int c = 0; c < 3; ++c)
                    for (int i = 0; i < k * k; ++i)
                        dst[(static_cast<std::size_t>(o) * 6 + c) * k * k + i] =
                            t3.data()[(static_cast<std::size_t>(o) * 3 + c) * k * k + i];
        } else {
            std::copy(t3.data().begin(), t3.data().end(), dst.begin());
        }
    }
    auto h0 = init_hidden_random<double>(cfg3, 62);
    auto seq3 = random_sequence<double>(cfg3, 63);
    std::vector<double> six(static_cast<std::size_t>(cfg3.sequence_length) * 6 * 8 * 8, 0.0);
    const int plane = 8 * 8;
    for (int t = 0; t < cfg3.sequence_length; ++t)
        for (int c = 0; c < 3; ++c)
            std::copy_n(seq3.data().data() + (static_cast<std::size_t>(t) * 3 + c) * plane, plane,
                        six.data() + (static_cast<std::size_t>(t) * 6 + c) * plane);
    auto seq6 = Tensor<double>::leaf({cfg3.sequence_length, 6, 8, 8}, std::move(six));
    ag::NoGradGuard ng;
    auto out3 = forward(cfg3, p3, seq3, h0);
    auto out6 = forward(cfg6, p6, seq6, h0);
    for (int i = 0; i < 2; ++i)
        CHECK(std::abs(out3.logits.data()[static_cast<std::size_t>(i)] -
                       out6.logits.data()[static_cast<std::size_t>(i)]) < 1e-6);
    for (std::size_t i = 0; i < out3.hT.h[1].size(); ++i)
        CHECK(std::abs(out3.hT.h[1][i] - out6.hT.h[1][i]) < 1e-6);
}

TEST_CASE("parameter casting preserves values across precisions") {
    auto cfg = tiny_config();
    auto pd = init_parameters<double>(cfg, 70);
    auto pf = cast_parameters<float>(pd);
    auto pd2 = cast_parameters<double>(pf);
    for (std::size_t i = 0; i < pd.items().size(); ++i) {
        const auto& a = pd.items()[i].second;
        const auto& b = pd2.items()[i].second;
        for (std::size_t j = 0; j < a.size(); ++j)
            CHECK(b.data()[j] == doctest::Approx(a.data()[j]).epsilon(1e-6));
    }
}
