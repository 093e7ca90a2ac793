#include "transfer.hpp"

#include <cmath>
#include <stdexcept>

#include "ops.hpp"
#include "rng.hpp"

namespace stdrive::xfer {

namespace {

// everything except input_channels must match for a bundle to apply
void check_target_compatible(const net::NetworkConfig& src, const net::NetworkConfig& dst) {
    auto src_text = ckpt::config_to_text(src);
    auto dst_text = ckpt::config_to_text(dst);
    auto strip_channels = [](std::string text) {
        const auto pos = text.find('\n');
        return text.substr(pos + 1);  // input_channels is the first line
    };
    if (strip_channels(src_text) != strip_channels(dst_text))
        throw std::invalid_argument("init_phase2: target config differs from the bundle beyond input_channels");
    if (src.input_channels != 3)
        throw std::invalid_argument("init_phase2: bundle must come from a 3-channel source network");
    if (dst.input_channels != 3 && dst.input_channels != 6)
        throw std::invalid_argument("init_phase2: target input_channels must be 3 or 6");
}

void copy_tensor(ag::Tensor<run_scalar>& dst, const ag::Tensor<run_scalar>& src) {
    auto in = src.data();
    auto out = dst.raw_data();
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i];
}

// conv1.w is [Co, Cin, k, k]; copy the source channels, zero the added ones
void copy_conv1_grown(ag::Tensor<run_scalar>& dst, const ag::Tensor<run_scalar>& src) {
    const auto& ds = dst.shape();
    const auto& ss = src.shape();
    const std::size_t k2 = static_cast<std::size_t>(ds[2]) * ds[3];
    auto in = src.data();
    auto out = dst.raw_data();
    for (int co = 0; co < ds[0]; ++co)
        for (int ci = 0; ci < ds[1]; ++ci) {
            run_scalar* d = out.data() + (static_cast<std::size_t>(co) * ds[1] + ci) * k2;
            if (ci < ss[1]) {
                const run_scalar* s = in.data() + (static_cast<std::size_t>(co) * ss[1] + ci) * k2;
                for (std::size_t q = 0; q < k2; ++q) d[q] = s[q];
            } else {
                for (std::size_t q = 0; q < k2; ++q) d[q] = run_scalar(0);
            }
        }
}

}  // namespace

bool is_cnn_param(const std::string& name) {
    for (const char* prefix : {"conv1.", "conv2.", "incep1.", "incep2.", "bridge."})
        if (name.rfind(prefix, 0) == 0) return true;
    return false;
}

TrainOutput train_phase1(const net::NetworkConfig& cfg, const data::Dataset& ds,
                         const data::Dataset* val, const train::TrainConfig& tc) {
    if (cfg.input_channels != 3)
        throw std::invalid_argument("train_phase1: source network must take 3-channel input");
    TrainOutput out;
    out.params = net::init_parameters<run_scalar>(cfg, tc.seed);
    out.h0 = net::init_hidden_random<run_scalar>(cfg, tc.seed);
    out.history = train::train(cfg, out.params, out.h0, ds, val, tc);
    return out;
}

TransferBundle harvest_bundle(const net::NetworkConfig& cfg, net::Parameters<run_scalar>& params,
                              const data::Dataset& ds, AblationFlags flags) {
    ds.validate();
    if (ds.seqs.empty()) throw std::invalid_argument("harvest_bundle: dataset is empty");
    if (ds.T != cfg.sequence_length || ds.H != cfg.frame_height || ds.W != cfg.frame_width)
        throw std::invalid_argument("harvest_bundle: dataset geometry does not match the network config");

    const int H = cfg.lstm_hidden;
    const int L = net::NetworkConfig::lstm_layers;
    std::vector<std::vector<double>> sum_h(L, std::vector<double>(H, 0.0));
    std::vector<std::vector<double>> sum_c(L, std::vector<double>(H, 0.0));
    net::HiddenState<run_scalar> zero;
    for (int l = 0; l < L; ++l) {
        zero.h.emplace_back(H, run_scalar(0));
        zero.c.emplace_back(H, run_scalar(0));
    }

    {
        ag::NoGradGuard ng;
        const bool with_maps = cfg.input_channels == 6;
        for (std::size_t i = 0; i < ds.seqs.size(); ++i) {
            auto seq = data::sequence_tensor<run_scalar>(ds, i, with_maps);
            auto out = net::forward(cfg, params, seq, zero);
            for (int l = 0; l < L; ++l)
                for (int j = 0; j < H; ++j) {
                    sum_h[l][j] += static_cast<double>(out.hT.h[l][j]);
                    sum_c[l][j] += static_cast<double>(out.hT.c[l][j]);
                }
        }
    }

    TransferBundle b;
    b.source_cfg = cfg;
    b.params = net::cast_parameters<run_scalar>(params);
    b.flags = flags;
    b.source_digest = ckpt::config_digest(cfg);
    const double inv = 1.0 / static_cast<double>(ds.seqs.size());
    for (int l = 0; l < L; ++l) {
        std::vector<run_scalar> h(H), c(H);
        for (int j = 0; j < H; ++j) {
            h[j] = static_cast<run_scalar>(sum_h[l][j] * inv);
            c[j] = static_cast<run_scalar>(sum_c[l][j] * inv);
        }
        b.harvested.h.push_back(std::move(h));
        b.harvested.c.push_back(std::move(c));
    }
    return b;
}

std::pair<net::Parameters<run_scalar>, net::HiddenState<run_scalar>> init_phase2(
    const TransferBundle& bundle, const net::NetworkConfig& target_cfg, std::uint64_t seed,
    std::string* warning) {
    net::validate_config(bundle.source_cfg);
    net::validate_config(target_cfg);
    check_target_compatible(bundle.source_cfg, target_cfg);
    if (warning) warning->clear();
    if (ckpt::config_digest(bundle.source_cfg) != bundle.source_digest && warning)
        *warning = "bundle config digest mismatch; the source config may have drifted";

    auto params = net::init_parameters<run_scalar>(target_cfg, seed);
    for (auto& [name, t] : params.items()) {
        const bool transfer = is_cnn_param(name) ? bundle.flags.cnn : bundle.flags.lstm;
        if (!transfer) continue;
        const auto& src = bundle.params.at(name);
        if (name == "conv1.w" && target_cfg.input_channels != bundle.source_cfg.input_channels)
            copy_conv1_grown(t, src);
        else
            copy_tensor(t, src);
    }

    net::HiddenState<run_scalar> h0 = bundle.flags.hidden
                                          ? bundle.harvested
                                          : net::init_hidden_random<run_scalar>(target_cfg, seed);
    return {std::move(params), std::move(h0)};
}

TrainOutput train_phase2(const TransferBundle& bundle, const net::NetworkConfig& target_cfg,
                         const data::Dataset& ds, const data::Dataset* val,
                         const train::TrainConfig& tc, std::string* warning) {
    ds.validate();
    std::size_t with_maps = 0;
    for (const auto& rec : ds.seqs)
        if (!rec.maps.empty()) ++with_maps;
    const std::size_t want = static_cast<std::size_t>(std::floor(tc.salient_ratio * static_cast<double>(ds.seqs.size())));
    if (with_maps != want)
        throw std::invalid_argument("train_phase2: salient maps cover " + std::to_string(with_maps) +
                                    " sequences, expected " + std::to_string(want) + " for ratio " +
                                    std::to_string(tc.salient_ratio));
    if (want > 0 && target_cfg.input_channels != 6)
        throw std::invalid_argument("train_phase2: salient augmentation needs a 6-channel target network");

    TrainOutput out;
    auto [params, h0] = init_phase2(bundle, target_cfg, tc.seed, warning);
    out.params = std::move(params);
    out.h0 = std::move(h0);
    out.history = train::train(target_cfg, out.params, out.h0, ds, val, tc);
    return out;
}

}  // namespace stdrive::xfer
