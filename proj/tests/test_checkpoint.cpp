#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <string>

#include "core/checkpoint.hpp"
#include "core/container.hpp"
#include "core/network.hpp"

using namespace stdrive;

namespace {

net::NetworkConfig tiny_config() {
    net::NetworkConfig cfg;
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

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name)
        : path((std::filesystem::temp_directory_path() / name).string()) {}
    ~TempFile() { std::remove(path.c_str()); }
};

bool same_params(const net::Parameters<run_scalar>& a, const net::Parameters<run_scalar>& b) {
    if (a.tensor_count() != b.tensor_count()) return false;
    for (std::size_t i = 0; i < a.items().size(); ++i) {
        if (a.items()[i].first != b.items()[i].first) return false;
        auto va = a.items()[i].second.data();
        auto vb = b.items()[i].second.data();
        if (va.size() != vb.size()) return false;
        for (std::size_t j = 0; j < va.size(); ++j)
            if (va[j] != vb[j]) return false;
    }
    return true;
}

bool same_hidden(const net::HiddenState<run_scalar>& a, const net::HiddenState<run_scalar>& b) {
    return a.h == b.h && a.c == b.c;
}

}  // namespace

TEST_CASE("config text round trip") {
    const auto cfg = tiny_config();
    const auto text = ckpt::config_to_text(cfg);
    const auto back = ckpt::config_from_text(text);
    CHECK(ckpt::config_to_text(back) == text);
    CHECK(back.incep2.bpool == 3);
    CHECK(back.head == net::Head::Classification);

    net::NetworkConfig reg = cfg;
    reg.head = net::Head::Regression;
    CHECK(ckpt::config_from_text(ckpt::config_to_text(reg)).head == net::Head::Regression);
}

TEST_CASE("config text rejects malformed input") {
    const auto cfg = tiny_config();
    auto text = ckpt::config_to_text(cfg);
    CHECK_THROWS_WITH_AS(ckpt::config_from_text(text + "bogus=1\n"), doctest::Contains("unknown key"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(ckpt::config_from_text(text + "fc1=9\n"), doctest::Contains("duplicate key"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(ckpt::config_from_text("fc1=9\n"), doctest::Contains("missing key"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(ckpt::config_from_text(text + "junk line\n"), doctest::Contains("malformed"),
                         std::invalid_argument);
    std::string bad = text;
    bad.replace(bad.find("conv1=4,5,1,2"), 13, "conv1=4,5,1,x");
    CHECK_THROWS_AS(ckpt::config_from_text(bad), std::invalid_argument);
}

TEST_CASE("config digest tracks every field") {
    const auto cfg = tiny_config();
    const auto base = ckpt::config_digest(cfg);
    CHECK(ckpt::config_digest(cfg) == base);

    auto variant = cfg;
    variant.lstm_hidden = 6;
    CHECK(ckpt::config_digest(variant) != base);
    variant = cfg;
    variant.conv2.padding = 0;
    CHECK(ckpt::config_digest(variant) != base);
    variant = cfg;
    variant.head = net::Head::Regression;
    CHECK(ckpt::config_digest(variant) != base);
}

TEST_CASE("checkpoint save and load round trip") {
    const auto cfg = tiny_config();
    ckpt::Checkpoint c;
    c.cfg = cfg;
    c.params = net::init_parameters<run_scalar>(cfg, 77);
    c.h0 = net::init_hidden_random<run_scalar>(cfg, 77);

    TempFile f("stdrive_test_ckpt.bin");
    ckpt::save_checkpoint(f.path, c);
    const auto back = ckpt::load_checkpoint(f.path);

    CHECK(ckpt::config_to_text(back.cfg) == ckpt::config_to_text(cfg));
    CHECK(same_params(back.params, c.params));
    CHECK(same_hidden(back.h0, c.h0));
    CHECK(back.params.seed == 77);
    CHECK(back.params.scheme == c.params.scheme);
}

TEST_CASE("checkpoint file kind is enforced") {
    const auto cfg = tiny_config();
    ckpt::Checkpoint c;
    c.cfg = cfg;
    c.params = net::init_parameters<run_scalar>(cfg, 3);
    c.h0 = net::init_hidden_random<run_scalar>(cfg, 3);
    TempFile f("stdrive_test_kind.bin");
    ckpt::save_checkpoint(f.path, c);
    CHECK_THROWS_WITH_AS(ckpt::load_bundle(f.path), doctest::Contains("kind"), std::runtime_error);
}

TEST_CASE("bundle save and load round trip") {
    const auto cfg = tiny_config();
    ckpt::TransferBundle b;
    b.source_cfg = cfg;
    b.params = net::init_parameters<run_scalar>(cfg, 9);
    b.flags = {true, false, true};
    b.source_digest = ckpt::config_digest(cfg);
    for (int l = 0; l < net::NetworkConfig::lstm_layers; ++l) {
        std::vector<run_scalar> h(cfg.lstm_hidden), c(cfg.lstm_hidden);
        for (int j = 0; j < cfg.lstm_hidden; ++j) {
            h[j] = static_cast<run_scalar>(0.01 * (l + 1) * (j + 1));
            c[j] = static_cast<run_scalar>(-0.02 * (l + 1) * (j + 1));
        }
        b.harvested.h.push_back(h);
        b.harvested.c.push_back(c);
    }

    TempFile f("stdrive_test_bundle.bin");
    ckpt::save_bundle(f.path, b);
    const auto back = ckpt::load_bundle(f.path);

    CHECK(ckpt::config_to_text(back.source_cfg) == ckpt::config_to_text(cfg));
    CHECK(same_params(back.params, b.params));
    CHECK(same_hidden(back.harvested, b.harvested));
    CHECK(back.flags.cnn == true);
    CHECK(back.flags.lstm == false);
    CHECK(back.flags.hidden == true);
    CHECK(back.source_digest == b.source_digest);
}

TEST_CASE("repeated checkpoint saves are byte identical") {
    const auto cfg = tiny_config();
    ckpt::Checkpoint c;
    c.cfg = cfg;
    c.params = net::init_parameters<run_scalar>(cfg, 11);
    c.h0 = net::init_hidden_random<run_scalar>(cfg, 11);
    TempFile f1("stdrive_test_rep1.bin");
    TempFile f2("stdrive_test_rep2.bin");
    ckpt::save_checkpoint(f1.path, c);
    ckpt::save_checkpoint(f2.path, c);

    auto slurp = [](const std::string& p) {
        std::FILE* fp = std::fopen(p.c_str(), "rb");
        REQUIRE(fp);
        std::string out;
        char buf[4096];
        std::size_t got;
        while ((got = std::fread(buf, 1, sizeof buf, fp)) > 0) out.append(buf, got);
        std::fclose(fp);
        return out;
    };
    CHECK(slurp(f1.path) == slurp(f2.path));
}
