#include "salient.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stdrive::sal {

std::vector<float> luminance(const std::uint8_t* rgb_planes, int H, int W) {
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    std::vector<float> gray(plane);
    for (std::size_t i = 0; i < plane; ++i) {
        const float r = rgb_planes[i] / 255.0f;
        const float g = rgb_planes[plane + i] / 255.0f;
        const float b = rgb_planes[2 * plane + i] / 255.0f;
        gray[i] = 0.299f * r + 0.587f * g + 0.114f * b;
    }
    return gray;
}

namespace {

// separable Gaussian with edge clamping
std::vector<float> gaussian_blur(const float* img, int H, int W, double sigma, int k) {
    const int r = k / 2;
    std::vector<double> w(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
        const double d = i - r;
        w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += w[static_cast<std::size_t>(i)];
    }
    for (auto& v : w) v /= sum;

    std::vector<float> tmp(static_cast<std::size_t>(H) * W), out(static_cast<std::size_t>(H) * W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i)
                acc += w[static_cast<std::size_t>(i + r)] * img[y * W + std::clamp(x + i, 0, W - 1)];
            tmp[static_cast<std::size_t>(y) * W + x] = static_cast<float>(acc);
        }
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i)
                acc += w[static_cast<std::size_t>(i + r)] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, H - 1)) * W + x];
            out[static_cast<std::size_t>(y) * W + x] = static_cast<float>(acc);
        }
    return out;
}

}  // namespace

std::vector<float> canny(const float* gray, int H, int W, const CannyConfig& cfg) {
    if (H < 3 || W < 3) throw std::invalid_argument("canny: image must be at least 3x3");
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    auto blur = gaussian_blur(gray, H, W, cfg.sigma, 5);

    // Sobel with clamped borders
    std::vector<float> mag(plane), gx(plane), gy(plane);
    float max_mag = 0.0f;
    auto at = [&](int y, int x) { return blur[static_cast<std::size_t>(std::clamp(y, 0, H - 1)) * W + std::clamp(x, 0, W - 1)]; };
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const float sx = (at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1)) -
                             (at(y - 1, x - 1) + 2 * at(y, x - 1) + at(y + 1, x - 1));
            const float sy = (at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1)) -
                             (at(y - 1, x - 1) + 2 * at(y - 1, x) + at(y - 1, x + 1));
            const std::size_t i = static_cast<std::size_t>(y) * W + x;
            gx[i] = sx;
            gy[i] = sy;
            mag[i] = std::sqrt(sx * sx + sy * sy);
            max_mag = std::max(max_mag, mag[i]);
        }
    std::vector<float> out(plane, 0.0f);
    if (max_mag <= 0.0f) return out;  // flat image, no edges

    // non-maximum suppression along one of four quantized directions;
    // ties keep the pixel so 2px-wide plateaus survive to hysteresis
    std::vector<std::uint8_t> cls(plane, 0);  // 0 none, 1 weak, 2 strong
    const float low = static_cast<float>(cfg.low) * max_mag;
    const float high = static_cast<float>(cfg.high) * max_mag;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * W + x;
            if (mag[i] < low) continue;
            double ang = std::atan2(gy[i], gx[i]) * 180.0 / 3.14159265358979323846;
            if (ang < 0) ang += 180.0;
            int dy1, dx1;
            if (ang < 22.5 || ang >= 157.5) {
                dy1 = 0; dx1 = 1;            // horizontal gradient, compare left/right
            } else if (ang < 67.5) {
                dy1 = 1; dx1 = 1;            // 45 degrees
            } else if (ang < 112.5) {
                dy1 = 1; dx1 = 0;            // vertical gradient, compare up/down
            } else {
                dy1 = 1; dx1 = -1;           // 135 degrees
            }
            auto m = [&](int yy, int xx) -> float {
                if (yy < 0 || yy >= H || xx < 0 || xx >= W) return 0.0f;
                return mag[static_cast<std::size_t>(yy) * W + xx];
            };
            if (mag[i] >= m(y + dy1, x + dx1) && mag[i] >= m(y - dy1, x - dx1))
                cls[i] = mag[i] >= high ? 2 : 1;
        }

    // hysteresis: flood from strong pixels through 8-connected weak ones
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < plane; ++i)
        if (cls[i] == 2) {
            out[i] = 1.0f;
            stack.push_back(i);
        }
    while (!stack.empty()) {
        const std::size_t i = stack.back();
        stack.pop_back();
        const int y = static_cast<int>(i) / W, x = static_cast<int>(i) % W;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int yy = y + dy, xx = x + dx;
                if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
                const std::size_t j = static_cast<std::size_t>(yy) * W + xx;
                if (cls[j] == 1 && out[j] == 0.0f) {
                    out[j] = 1.0f;
                    stack.push_back(j);
                }
            }
    }
    return out;
}

}  // namespace stdrive::sal
