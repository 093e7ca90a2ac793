#pragma once

#include <cstdint>
#include <vector>

#include "dataset.hpp"
#include "network.hpp"

namespace stdrive::sal {

struct CannyConfig {
    double sigma = 1.4;   // 5x5 Gaussian
    double low = 0.1;     // fractions of the max gradient magnitude
    double high = 0.3;
};

// Full pipeline: Gaussian blur, Sobel, 4-direction non-maximum suppression,
// relative double threshold, 8-connected hysteresis. Returns {0,1} per pixel.
std::vector<float> canny(const float* gray, int H, int W, const CannyConfig& cfg = {});

// 0.299/0.587/0.114 luminance from planar RGB bytes (value = byte/255).
std::vector<float> luminance(const std::uint8_t* rgb_planes, int H, int W);

template <class T>
struct SalientMaps {
    int frames = 0, H = 0, W = 0;
    std::vector<T> saliency;    // [T][H][W], vanilla input-gradient maps in [0,1]
    std::vector<T> gradcam;     // [T][H][W] in [0,1]
    std::vector<float> edges;   // [T][H][W] binary
};

namespace detail {

// min-max to [0,1]; a flat plane maps to zeros
template <class T>
void normalize_plane(T* p, std::size_t n) {
    T lo = p[0], hi = p[0];
    for (std::size_t i = 1; i < n; ++i) {
        lo = std::min(lo, p[i]);
        hi = std::max(hi, p[i]);
    }
    const T range = hi - lo;
    if (!(range > T(0))) {
        for (std::size_t i = 0; i < n; ++i) p[i] = T(0);
        return;
    }
    for (std::size_t i = 0; i < n; ++i) p[i] = (p[i] - lo) / range;
}

template <class T>
void bilinear_upsample(const T* src, int h, int w, T* dst, int H, int W) {
    for (int y = 0; y < H; ++y) {
        const double sy = (y + 0.5) * h / H - 0.5;
        const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, h - 1);
        const int y1 = std::min(y0 + 1, h - 1);
        const double fy = std::clamp(sy - y0, 0.0, 1.0);
        for (int x = 0; x < W; ++x) {
            const double sx = (x + 0.5) * w / W - 0.5;
            const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, w - 1);
            const int x1 = std::min(x0 + 1, w - 1);
            const double fx = std::clamp(sx - x0, 0.0, 1.0);
            const double v = (1 - fy) * ((1 - fx) * src[y0 * w + x0] + fx * src[y0 * w + x1]) +
                             fy * ((1 - fx) * src[y1 * w + x0] + fx * src[y1 * w + x1]);
            dst[y * W + x] = static_cast<T>(v);
        }
    }
}

}  // namespace detail

// Saliency and GradCAM from one forward/backward on the sequence logit;
// edges from the raw pixels. target_class -1 uses the predicted class.
// Parameter values are left untouched; gradients are zeroed on exit.
template <class T>
SalientMaps<T> compute_maps(const net::NetworkConfig& cfg, net::Parameters<T>& params,
                            ag::Tensor<T> seq, int target_class, const CannyConfig& canny_cfg = {}) {
    using namespace ag;
    if (cfg.head != net::Head::Classification)
        throw std::invalid_argument("compute_maps: classification model required");
    if (target_class < -1 || target_class > 1)
        throw std::invalid_argument("compute_maps: target class must be 0, 1, or -1 for predicted");
    if (!seq.requires_grad())
        seq = Tensor<T>::leaf(seq.shape(), std::vector<T>(seq.data().begin(), seq.data().end()), true);
    auto h0 = net::HiddenState<T>{};  // zero rollout state, maps depend on pixels only
    h0.h.assign(2, std::vector<T>(static_cast<std::size_t>(cfg.lstm_hidden), T(0)));
    h0.c.assign(2, std::vector<T>(static_cast<std::size_t>(cfg.lstm_hidden), T(0)));

    auto out = net::forward(cfg, params, seq, h0);
    int target = target_class;
    if (target < 0) target = out.probs.data()[1] > out.probs.data()[0] ? 1 : 0;
    auto score = ops::reshape(ops::narrow(out.logits, 1, target, 1), {1});
    backward(score);

    const int TT = cfg.sequence_length, C = cfg.input_channels, H = cfg.frame_height, W = cfg.frame_width;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    SalientMaps<T> maps;
    maps.frames = TT;
    maps.H = H;
    maps.W = W;
    maps.saliency.resize(static_cast<std::size_t>(TT) * plane);
    maps.gradcam.resize(static_cast<std::size_t>(TT) * plane);
    maps.edges.resize(static_cast<std::size_t>(TT) * plane);

    const auto& g = seq.node()->grad;
    if (g.size() != seq.size()) throw std::runtime_error("compute_maps: input gradient missing");
    for (T v : g)
        if (!std::isfinite(v)) throw std::runtime_error("compute_maps: non-finite input gradient");

    const auto d = net::stage_dims(cfg);
    std::vector<T> heat(static_cast<std::size_t>(d.incep_h) * d.incep_w);
    for (int t = 0; t < TT; ++t) {
        // saliency: per-pixel max over channels of |d score / d pixel|
        T* sal = maps.saliency.data() + static_cast<std::size_t>(t) * plane;
        const T* gt = g.data() + static_cast<std::size_t>(t) * C * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            T best = T(0);
            for (int c = 0; c < C; ++c) best = std::max(best, std::abs(gt[static_cast<std::size_t>(c) * plane + i]));
            sal[i] = best;
        }
        detail::normalize_plane(sal, plane);

        // GradCAM on the second inception output
        const auto& node = *out.inception_maps[static_cast<std::size_t>(t)].node();
        if (node.grad.size() != node.value.size())
            throw std::runtime_error("compute_maps: inception gradient missing");
        const int Cf = cfg.incep2.total();
        const std::size_t fplane = static_cast<std::size_t>(d.incep_h) * d.incep_w;
        std::fill(heat.begin(), heat.end(), T(0));
        for (int c = 0; c < Cf; ++c) {
            const T* av = node.value.data() + static_cast<std::size_t>(c) * fplane;
            const T* gv = node.grad.data() + static_cast<std::size_t>(c) * fplane;
            T alpha = T(0);
            for (std::size_t i = 0; i < fplane; ++i) alpha += gv[i];
            alpha /= static_cast<T>(fplane);
            for (std::size_t i = 0; i < fplane; ++i) heat[i] += alpha * av[i];
        }
        for (auto& v : heat) v = std::max(v, T(0));
        T* cam = maps.gradcam.data() + static_cast<std::size_t>(t) * plane;
        detail::bilinear_upsample(heat.data(), d.incep_h, d.incep_w, cam, H, W);
        detail::normalize_plane(cam, plane);

        // edges from the luminance of the raw frame
        std::vector<float> gray(plane);
        const T* px = seq.data().data() + static_cast<std::size_t>(t) * C * plane;
        for (std::size_t i = 0; i < plane; ++i)
            gray[i] = static_cast<float>(0.299 * px[i] + 0.587 * px[plane + i] + 0.114 * px[2 * plane + i]);
        auto e = canny(gray.data(), H, W, canny_cfg);
        std::copy(e.begin(), e.end(), maps.edges.begin() + static_cast<std::ptrdiff_t>(t) * static_cast<std::ptrdiff_t>(plane));
    }

    params.zero_grad_all();
    seq.zero_grad();
    return maps;
}

// Attaches maps to floor(ratio*N) sequences chosen without replacement.
// Targets use the model's own prediction so labels never leak into inputs.
// Returns the chosen indices in ascending order.
template <class T>
std::vector<std::size_t> attach_salient_maps(const net::NetworkConfig& cfg, net::Parameters<T>& params,
                                             data::Dataset& ds, double ratio, std::uint64_t seed,
                                             const CannyConfig& canny_cfg = {}) {
    if (ratio < 0.0 || ratio > 1.0) throw std::invalid_argument("attach_salient_maps: ratio must be in [0,1]");
    const auto n = ds.seqs.size();
    const auto k = static_cast<std::size_t>(ratio * static_cast<double>(n));
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    rng::Engine eng(rng::mix_seed(seed, "salient"));
    eng.shuffle(idx);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());

    const std::size_t plane = static_cast<std::size_t>(ds.H) * ds.W;
    for (std::size_t i : idx) {
        auto seq = data::sequence_tensor<T>(ds, i, false, true);
        auto maps = compute_maps(cfg, params, seq, -1, canny_cfg);
        auto& rec = ds.seqs[i];
        rec.maps.resize(ds.maps_per_seq());
        for (int t = 0; t < ds.T; ++t) {
            float* dst = rec.maps.data() + static_cast<std::size_t>(t) * 3 * plane;
            const std::size_t off = static_cast<std::size_t>(t) * plane;
            for (std::size_t p = 0; p < plane; ++p) {
                dst[p] = static_cast<float>(maps.saliency[off + p]);
                dst[plane + p] = static_cast<float>(maps.gradcam[off + p]);
                dst[2 * plane + p] = maps.edges[off + p];
            }
        }
    }
    return idx;
}

}  // namespace stdrive::sal
