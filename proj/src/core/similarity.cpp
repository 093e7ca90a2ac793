#include "similarity.hpp"

#include <Eigen/Dense>

namespace stdrive::sim {

double ssim(const float* x, const float* y, int H, int W) {
    constexpr int K = 8;
    constexpr double C1 = 0.01 * 0.01;  // (k1 L)^2 with L = 1
    constexpr double C2 = 0.03 * 0.03;
    if (H < K || W < K) throw std::invalid_argument("ssim: image smaller than the 8x8 window");
    double total = 0.0;
    long windows = 0;
    for (int y0 = 0; y0 + K <= H; ++y0)
        for (int x0 = 0; x0 + K <= W; ++x0) {
            double mx = 0, my = 0;
            for (int dy = 0; dy < K; ++dy)
                for (int dx = 0; dx < K; ++dx) {
                    mx += x[(y0 + dy) * W + x0 + dx];
                    my += y[(y0 + dy) * W + x0 + dx];
                }
            mx /= K * K;
            my /= K * K;
            double vx = 0, vy = 0, cxy = 0;
            for (int dy = 0; dy < K; ++dy)
                for (int dx = 0; dx < K; ++dx) {
                    const double a = x[(y0 + dy) * W + x0 + dx] - mx;
                    const double b = y[(y0 + dy) * W + x0 + dx] - my;
                    vx += a * a;
                    vy += b * b;
                    cxy += a * b;
                }
            vx /= K * K;
            vy /= K * K;
            cxy /= K * K;
            total += ((2 * mx * my + C1) * (2 * cxy + C2)) / ((mx * mx + my * my + C1) * (vx + vy + C2));
            ++windows;
        }
    return total / static_cast<double>(windows);
}

double ssim(const std::vector<float>& x, const std::vector<float>& y, int H, int W) {
    const auto n = static_cast<std::size_t>(H) * static_cast<std::size_t>(W);
    if (x.size() != n || y.size() != n) throw std::invalid_argument("ssim: shape mismatch");
    return ssim(x.data(), y.data(), H, W);
}

Moments feature_moments(const std::vector<std::vector<float>>& feats) {
    if (feats.size() < 2) throw std::invalid_argument("fid: at least two feature vectors required");
    const std::size_t n = feats.size(), dim = feats[0].size();
    for (const auto& f : feats)
        if (f.size() != dim) throw std::invalid_argument("fid: inconsistent feature dimensions");
    Moments m;
    m.mu.assign(dim, 0.0);
    for (const auto& f : feats)
        for (std::size_t j = 0; j < dim; ++j) m.mu[j] += f[j];
    for (auto& v : m.mu) v /= static_cast<double>(n);
    m.cov.assign(dim * dim, 0.0);
    std::vector<double> d(dim);
    for (const auto& f : feats) {
        for (std::size_t j = 0; j < dim; ++j) d[j] = f[j] - m.mu[j];
        for (std::size_t r = 0; r < dim; ++r)
            for (std::size_t c = r; c < dim; ++c) m.cov[r * dim + c] += d[r] * d[c];
    }
    for (std::size_t r = 0; r < dim; ++r)
        for (std::size_t c = r; c < dim; ++c) {
            m.cov[r * dim + c] /= static_cast<double>(n - 1);
            m.cov[c * dim + r] = m.cov[r * dim + c];
        }
    return m;
}

double fid_from_moments(const Moments& a, const Moments& b) {
    if (a.mu.size() != b.mu.size()) throw std::invalid_argument("fid: dimension mismatch");
    const auto dim = static_cast<Eigen::Index>(a.mu.size());
    using Mat = Eigen::MatrixXd;
    Mat ca = Eigen::Map<const Mat>(a.cov.data(), dim, dim);
    Mat cb = Eigen::Map<const Mat>(b.cov.data(), dim, dim);
    ca.diagonal().array() += 1e-6;
    cb.diagonal().array() += 1e-6;

    Eigen::SelfAdjointEigenSolver<Mat> es_a(ca);
    if (es_a.info() != Eigen::Success) throw std::runtime_error("fid: covariance eigendecomposition failed");
    Mat sqrt_ca = es_a.eigenvectors() *
                  es_a.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                  es_a.eigenvectors().transpose();

    // tr((CA CB)^1/2) = tr((CA^1/2 CB CA^1/2)^1/2) and the latter is symmetric PSD
    Mat prod = sqrt_ca * cb * sqrt_ca;
    prod = 0.5 * (prod + prod.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es_p(prod);
    if (es_p.info() != Eigen::Success) throw std::runtime_error("fid: product eigendecomposition failed");
    const double tr_sqrt = es_p.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

    double mean_dist = 0.0;
    for (std::size_t i = 0; i < a.mu.size(); ++i) {
        const double d = a.mu[i] - b.mu[i];
        mean_dist += d * d;
    }
    return std::max(0.0, mean_dist + ca.trace() + cb.trace() - 2.0 * tr_sqrt);
}

double fid(const std::vector<std::vector<float>>& a, const std::vector<std::vector<float>>& b) {
    auto ma = feature_moments(a);
    auto mb = feature_moments(b);
    return fid_from_moments(ma, mb);
}

}  // namespace stdrive::sim
