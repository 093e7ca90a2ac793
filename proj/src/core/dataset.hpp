#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "container.hpp"
#include "tensor.hpp"

namespace stdrive::data {

enum class DatasetKind { Classification, Steering };

// One sequence. Pixels are stored quantized (value = byte / 255) so disk
// round-trips are bit-exact. Salient maps, when attached, ride along as
// three float planes per frame in [0,1].
struct SequenceRecord {
    std::vector<std::uint8_t> pixels;  // [T][3][H][W]
    int label = 0;                     // 0 = safe, 1 = collision
    float steering_deg = 0.0f;
    std::string domain_id;
    std::vector<float> maps;           // empty, or [T][3][H][W]
};

struct Dataset {
    DatasetKind kind = DatasetKind::Classification;
    int T = 0, H = 0, W = 0;
    static constexpr int channels = 3;
    static constexpr int map_channels = 3;
    std::vector<SequenceRecord> seqs;

    std::size_t frame_count() const { return seqs.size() * static_cast<std::size_t>(T); }
    std::size_t pixels_per_seq() const {
        return static_cast<std::size_t>(T) * channels * H * W;
    }
    std::size_t maps_per_seq() const {
        return static_cast<std::size_t>(T) * map_channels * H * W;
    }
    void validate() const;
};

void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

// Builds the model input for one sequence: 3 channels from the quantized
// pixels, or 6 channels with the salient maps (zeros when absent).
template <class T>
ag::Tensor<T> sequence_tensor(const Dataset& ds, std::size_t idx, bool with_map_channels,
                              bool requires_grad = false) {
    const auto& rec = ds.seqs.at(idx);
    const int C = with_map_channels ? 6 : 3;
    const std::size_t plane = static_cast<std::size_t>(ds.H) * ds.W;
    std::vector<T> v(static_cast<std::size_t>(ds.T) * C * plane);
    for (int t = 0; t < ds.T; ++t) {
        const std::uint8_t* src = rec.pixels.data() + static_cast<std::size_t>(t) * 3 * plane;
        T* dst = v.data() + static_cast<std::size_t>(t) * C * plane;
        for (std::size_t i = 0; i < 3 * plane; ++i) dst[i] = static_cast<T>(src[i]) / T(255);
        if (with_map_channels && !rec.maps.empty()) {
            const float* m = rec.maps.data() + static_cast<std::size_t>(t) * 3 * plane;
            T* aux = dst + 3 * plane;
            for (std::size_t i = 0; i < 3 * plane; ++i) aux[i] = static_cast<T>(m[i]);
        }
    }
    return ag::Tensor<T>::leaf({ds.T, C, ds.H, ds.W}, std::move(v), requires_grad);
}

// PPM (P6) export of one stored frame for eyeballing datasets.
void write_ppm(const std::string& path, const Dataset& ds, std::size_t seq, int frame);

}  // namespace stdrive::data
