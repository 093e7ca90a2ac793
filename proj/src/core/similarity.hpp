#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "network.hpp"

namespace stdrive::sim {

template <class T>
double cosine(const std::vector<T>& a, const std::vector<T>& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("cosine: dimension mismatch (" + std::to_string(a.size()) +
                                    " vs " + std::to_string(b.size()) + ")");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
        na += static_cast<double>(a[i]) * static_cast<double>(a[i]);
        nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
    }
    if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine: zero-norm vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

// standard SSIM, uniform 8x8 sliding window, dynamic range L = 1
double ssim(const float* x, const float* y, int H, int W);
double ssim(const std::vector<float>& x, const std::vector<float>& y, int H, int W);

struct Moments {
    std::vector<double> mu;   // [dim]
    std::vector<double> cov;  // [dim*dim] row-major, normalized by n-1
};

Moments feature_moments(const std::vector<std::vector<float>>& feats);
double fid_from_moments(const Moments& a, const Moments& b);
double fid(const std::vector<std::vector<float>>& a, const std::vector<std::vector<float>>& b);

// flattened second-inception output of one frame, recorded nowhere
template <class T>
std::vector<float> frame_features(const net::NetworkConfig& cfg, net::Parameters<T>& params,
                                  const data::Dataset& ds, std::size_t seq, int frame) {
    ag::NoGradGuard ng;
    const std::size_t plane = static_cast<std::size_t>(ds.H) * ds.W;
    const std::size_t stride = 3 * plane;
    const std::uint8_t* px = ds.seqs.at(seq).pixels.data() + static_cast<std::size_t>(frame) * stride;
    std::vector<T> vals(stride);
    for (std::size_t i = 0; i < stride; ++i) vals[i] = static_cast<T>(px[i]) / T(255);
    auto x = ag::Tensor<T>::leaf({1, 3, ds.H, ds.W}, std::move(vals), false);
    auto m = net::encode_frame(cfg, params, x);
    std::vector<float> out(m.size());
    auto d = m.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(d[i]);
    return out;
}

struct PairSimilarity {
    double mean_cosine = 0.0;
    double mean_ssim = 0.0;
    double fid = 0.0;
    int pairs = 0;    // requested
    int used = 0;     // pairs entering mean_cosine
    int skipped = 0;  // zero-norm feature pairs
};

// n_pairs independent (frame from a, frame from b) draws, uniform with replacement.
// Cosines are taken after subtracting the mean feature of the reference set a:
// raw relu features share a dominant positive direction, so uncentered cosines
// crowd toward 1 for any input and stop ranking domains.
template <class T>
PairSimilarity dataset_similarity(const net::NetworkConfig& cfg, net::Parameters<T>& params,
                                  const data::Dataset& a, const data::Dataset& b, int n_pairs,
                                  std::uint64_t seed) {
    if (a.seqs.empty() || b.seqs.empty())
        throw std::invalid_argument("dataset_similarity: empty dataset");
    if (a.H != b.H || a.W != b.W)
        throw std::invalid_argument("dataset_similarity: frame size mismatch");
    if (n_pairs < 2) throw std::invalid_argument("dataset_similarity: need at least 2 pairs");

    std::vector<double> center;
    for (std::size_t s = 0; s < a.seqs.size(); ++s)
        for (int t = 0; t < a.T; ++t) {
            auto f = frame_features(cfg, params, a, s, t);
            if (center.empty()) center.resize(f.size(), 0.0);
            for (std::size_t i = 0; i < f.size(); ++i) center[i] += f[i];
        }
    for (auto& c : center) c /= static_cast<double>(a.frame_count());

    rng::Engine eng(rng::mix_seed(seed, "simpairs"));
    const std::size_t plane = static_cast<std::size_t>(a.H) * a.W;
    std::vector<std::vector<float>> feats_a, feats_b;
    feats_a.reserve(static_cast<std::size_t>(n_pairs));
    feats_b.reserve(static_cast<std::size_t>(n_pairs));
    PairSimilarity rep;
    rep.pairs = n_pairs;
    double cos_sum = 0.0, ssim_sum = 0.0;
    std::vector<float> gray_a(plane), gray_b(plane);
    for (int p = 0; p < n_pairs; ++p) {
        const auto sa = static_cast<std::size_t>(eng.below(a.seqs.size()));
        const int fa = static_cast<int>(eng.below(static_cast<std::uint64_t>(a.T)));
        const auto sb = static_cast<std::size_t>(eng.below(b.seqs.size()));
        const int fb = static_cast<int>(eng.below(static_cast<std::uint64_t>(b.T)));
        auto va = frame_features(cfg, params, a, sa, fa);
        auto vb = frame_features(cfg, params, b, sb, fb);

        const std::uint8_t* pa = a.seqs[sa].pixels.data() + static_cast<std::size_t>(fa) * 3 * plane;
        const std::uint8_t* pb = b.seqs[sb].pixels.data() + static_cast<std::size_t>(fb) * 3 * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            gray_a[i] = (0.299f * pa[i] + 0.587f * pa[plane + i] + 0.114f * pa[2 * plane + i]) / 255.0f;
            gray_b[i] = (0.299f * pb[i] + 0.587f * pb[plane + i] + 0.114f * pb[2 * plane + i]) / 255.0f;
        }
        ssim_sum += ssim(gray_a.data(), gray_b.data(), a.H, a.W);

        double na = 0.0, nb = 0.0;
        for (float v : va) na += static_cast<double>(v) * v;
        for (float v : vb) nb += static_cast<double>(v) * v;
        if (na == 0.0 || nb == 0.0) {
            ++rep.skipped;
        } else {
            std::vector<float> ca(va.size()), cb(vb.size());
            double nca = 0.0, ncb = 0.0;
            for (std::size_t i = 0; i < va.size(); ++i) {
                ca[i] = static_cast<float>(va[i] - center[i]);
                cb[i] = static_cast<float>(vb[i] - center[i]);
                nca += static_cast<double>(ca[i]) * ca[i];
                ncb += static_cast<double>(cb[i]) * cb[i];
            }
            if (nca == 0.0 || ncb == 0.0) {
                ++rep.skipped;
            } else {
                cos_sum += cosine(ca, cb);
                ++rep.used;
            }
        }
        feats_a.push_back(std::move(va));
        feats_b.push_back(std::move(vb));
    }
    rep.mean_cosine = rep.used > 0 ? cos_sum / rep.used : 0.0;
    rep.mean_ssim = ssim_sum / n_pairs;
    rep.fid = fid(feats_a, feats_b);
    return rep;
}

// final hidden state of the last LSTM layer after a full rollout
template <class T>
std::vector<float> final_hidden(const net::NetworkConfig& cfg, net::Parameters<T>& params,
                                const ag::Tensor<T>& seq, const net::HiddenState<T>& h0,
                                double* collision_conf = nullptr) {
    ag::NoGradGuard ng;
    auto out = net::forward(cfg, params, seq, h0);
    if (collision_conf) {
        if (cfg.head != net::Head::Classification)
            throw std::invalid_argument("final_hidden: confidence requires a classification head");
        *collision_conf = static_cast<double>(out.probs.data()[1]);
    }
    auto h = out.h_final.back().data();
    return std::vector<float>(h.begin(), h.end());
}

struct ScenarioRow {
    std::string name;
    double mean_cosine = 0.0;
    double sigma = 0.0;            // std of the per-probe cosines
    double norm_sigma = 0.0;       // sigma / mean
    double mean_collision = 0.0;   // mean softmax confidence of the collision class
    int probes = 0;
};

// Each probe's final hidden state is compared against the mean final hidden
// state of the reference sequences.
template <class T>
ScenarioRow scenario_row(const net::NetworkConfig& cfg, net::Parameters<T>& params,
                         const net::HiddenState<T>& h0, const std::string& name,
                         const data::Dataset& reference, const data::Dataset& probes) {
    if (reference.seqs.empty() || probes.seqs.empty())
        throw std::invalid_argument("scenario_row: empty dataset");
    std::vector<float> ref;
    for (std::size_t i = 0; i < reference.seqs.size(); ++i) {
        auto seq = data::sequence_tensor<T>(reference, i, cfg.input_channels == 6, false);
        auto h = final_hidden(cfg, params, seq, h0);
        if (ref.empty()) ref.assign(h.size(), 0.0f);
        for (std::size_t j = 0; j < h.size(); ++j) ref[j] += h[j];
    }
    for (auto& v : ref) v /= static_cast<float>(reference.seqs.size());

    ScenarioRow row;
    row.name = name;
    std::vector<double> cosines;
    double conf_sum = 0.0;
    for (std::size_t i = 0; i < probes.seqs.size(); ++i) {
        auto seq = data::sequence_tensor<T>(probes, i, cfg.input_channels == 6, false);
        double conf = 0.0;
        auto h = final_hidden(cfg, params, seq, h0, cfg.head == net::Head::Classification ? &conf : nullptr);
        cosines.push_back(cosine(h, ref));
        conf_sum += conf;
    }
    row.probes = static_cast<int>(cosines.size());
    double mean = 0.0;
    for (double c : cosines) mean += c;
    mean /= row.probes;
    double var = 0.0;
    for (double c : cosines) var += (c - mean) * (c - mean);
    row.mean_cosine = mean;
    row.sigma = row.probes > 1 ? std::sqrt(var / (row.probes - 1)) : 0.0;
    row.norm_sigma = mean != 0.0 ? row.sigma / mean : 0.0;
    row.mean_collision = conf_sum / row.probes;
    return row;
}

}  // namespace stdrive::sim
