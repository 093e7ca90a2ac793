#include "synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stdrive::synth {

namespace {

constexpr double kHorizonFrac = 0.42;
constexpr double kHalfWidthHorizon = 0.06;  // road half-width at the horizon, frac of W
constexpr double kHalfWidthBottom = 0.46;
constexpr double kLaneInner = 0.50;         // lane line band, frac of half-width
constexpr double kLaneOuter = 0.58;
constexpr double kBendFrac = 0.30;          // lateral bend of the road centerline
constexpr double kDashRate = 0.37;          // dash phase advance per frame
constexpr double kCollisionU = collision_height_frac / obstacle_base_height;  // 0.5

std::uint8_t quantize(float v) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

}  // namespace

DomainSpec town_a(int h, int w) {
    DomainSpec s;
    s.domain_id = "townA";
    s.sky = {0.55f, 0.75f, 0.95f};
    s.road = {0.25f, 0.25f, 0.28f};
    s.offroad = {0.20f, 0.50f, 0.20f};
    s.lane = {0.92f, 0.92f, 0.85f};
    s.obstacle = {0.80f, 0.15f, 0.10f};
    s.noise = 0.02f;
    s.camera_jitter = 0.4f;
    s.frame_h = h;
    s.frame_w = w;
    return s;
}

DomainSpec town_b(int h, int w) {
    DomainSpec s;
    s.domain_id = "townB";
    s.sky = {0.70f, 0.70f, 0.75f};
    s.road = {0.36f, 0.31f, 0.28f};
    s.offroad = {0.55f, 0.50f, 0.30f};
    s.lane = {0.85f, 0.80f, 0.30f};
    s.obstacle = {0.15f, 0.20f, 0.70f};
    s.noise = 0.04f;
    s.obstacle_speed_min = 0.4f;
    s.camera_jitter = 0.7f;
    s.frame_h = h;
    s.frame_w = w;
    return s;
}

DomainSpec town_c(int h, int w) {
    DomainSpec s;
    s.domain_id = "townC";
    s.sky = {0.85f, 0.60f, 0.40f};
    s.road = {0.18f, 0.18f, 0.30f};
    s.offroad = {0.15f, 0.35f, 0.20f};
    s.lane = {0.95f, 0.90f, 0.90f};
    s.obstacle = {0.90f, 0.80f, 0.20f};
    s.noise = 0.06f;
    s.obstacle_speed_min = 0.5f;
    s.camera_jitter = 0.9f;
    s.frame_h = h;
    s.frame_w = w;
    return s;
}

DomainSpec noise_domain(int h, int w) {
    DomainSpec s;
    s.domain_id = "noise";
    s.noise = 1.0f;
    s.pure_noise = true;
    s.frame_h = h;
    s.frame_w = w;
    return s;
}

DomainSpec domain_by_name(const std::string& name, int h, int w) {
    if (name == "townA") return town_a(h, w);
    if (name == "townB") return town_b(h, w);
    if (name == "townC") return town_c(h, w);
    if (name == "noise") return noise_domain(h, w);
    throw std::invalid_argument("unknown domain '" + name + "' (townA, townB, townC, noise)");
}

SceneState make_scene(const DomainSpec& spec, int forced_label, int T, rng::Engine& eng) {
    if (T < 2) throw std::invalid_argument("make_scene: need at least 2 frames");
    SceneState sc;
    sc.curvature = static_cast<float>(eng.uniform(-0.5, 0.5));
    sc.dash0 = static_cast<float>(eng.uniform());
    sc.noise_seed = eng.next_u64();
    sc.label = forced_label;
    for (int t = 0; t < T; ++t) {
        sc.horizon_jit.push_back(static_cast<float>(eng.uniform(-spec.camera_jitter, spec.camera_jitter)));
        sc.vx_jit.push_back(static_cast<float>(eng.uniform(-spec.camera_jitter, spec.camera_jitter)));
    }
    const double speed = eng.uniform(spec.obstacle_speed_min, spec.obstacle_speed_max);
    double us = 0, uf = 0;
    if (forced_label == 1) {
        // start small, end past the threshold with margin on both sides
        us = kCollisionU * eng.uniform(0.12, 0.25);
        uf = kCollisionU * (1.25 + 0.45 * speed);
        sc.has_obstacle = true;
    } else if (eng.uniform() < 0.6) {
        uf = kCollisionU * (0.35 + 0.45 * speed);
        us = uf * eng.uniform(0.25, 0.6);
        sc.has_obstacle = true;
    }
    if (sc.has_obstacle) {
        const double d0 = 1.0 / us, df = 1.0 / uf;
        const double lat0 = eng.uniform(-0.25, 0.25);
        const double latf = lat0 * eng.uniform(0.3, 0.8);
        for (int t = 0; t < T; ++t) {
            const double a = static_cast<double>(t) / (T - 1);
            sc.obs_u.push_back(static_cast<float>(1.0 / (d0 + (df - d0) * a)));
            sc.obs_lat.push_back(static_cast<float>(lat0 + (latf - lat0) * a));
        }
    } else {
        sc.obs_u.assign(static_cast<std::size_t>(T), 0.0f);
        sc.obs_lat.assign(static_cast<std::size_t>(T), 0.0f);
    }
    return sc;
}

int derive_label(const SceneState& scene) {
    if (!scene.has_obstacle || scene.obs_u.empty()) return 0;
    return projected_height_frac(scene.obs_u.back()) > collision_height_frac ? 1 : 0;
}

void render_sequence(const DomainSpec& spec, const SceneState& scene, std::uint8_t* out) {
    const int H = spec.frame_h, W = spec.frame_w;
    const int T = static_cast<int>(scene.obs_u.size());
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    rng::Engine noise(scene.noise_seed);
    std::vector<float> frame(3 * plane);

    for (int t = 0; t < T; ++t) {
        if (spec.pure_noise) {
            for (std::size_t i = 0; i < 3 * plane; ++i) frame[i] = static_cast<float>(noise.uniform());
        } else {
            const double horizon = kHorizonFrac * H + scene.horizon_jit[static_cast<std::size_t>(t)];
            const double vx = 0.5 * W + scene.curvature * kBendFrac * W +
                              scene.vx_jit[static_cast<std::size_t>(t)];
            const double dash_phase = scene.dash0 + kDashRate * t;
            for (int y = 0; y < H; ++y) {
                const double yc = y + 0.5;
                float* r = frame.data() + static_cast<std::size_t>(y) * W;
                float* g = frame.data() + plane + static_cast<std::size_t>(y) * W;
                float* b = frame.data() + 2 * plane + static_cast<std::size_t>(y) * W;
                if (yc < horizon) {
                    for (int x = 0; x < W; ++x) {
                        r[x] = spec.sky[0];
                        g[x] = spec.sky[1];
                        b[x] = spec.sky[2];
                    }
                    continue;
                }
                const double tr = std::min(1.0, (yc - horizon) / (H - horizon));
                const double xc = vx * (1.0 - tr) + 0.5 * W * tr +
                                  scene.curvature * kBendFrac * W * ((1.0 - tr) * (1.0 - tr) - (1.0 - tr));
                const double hw = (kHalfWidthHorizon + (kHalfWidthBottom - kHalfWidthHorizon) * tr) * W;
                const bool dash_on = std::fmod(tr * 6.0 + dash_phase, 1.0) < 0.62;
                for (int x = 0; x < W; ++x) {
                    const double dx = std::abs(x + 0.5 - xc);
                    const Color* c;
                    if (dx > hw)
                        c = &spec.offroad;
                    else if (dash_on && dx > kLaneInner * hw && dx < kLaneOuter * hw)
                        c = &spec.lane;
                    else
                        c = &spec.road;
                    r[x] = (*c)[0];
                    g[x] = (*c)[1];
                    b[x] = (*c)[2];
                }
            }
            const double u = scene.obs_u[static_cast<std::size_t>(t)];
            if (scene.has_obstacle && u > 0.0) {
                const double h_px = projected_height_frac(u) * H;
                const double tr_obs = std::min(1.0, u);
                const double yb = std::min(static_cast<double>(H), horizon + tr_obs * (H - horizon));
                const double xc = vx * (1.0 - tr_obs) + 0.5 * W * tr_obs +
                                  scene.curvature * kBendFrac * W *
                                      ((1.0 - tr_obs) * (1.0 - tr_obs) - (1.0 - tr_obs));
                const double hw = (kHalfWidthHorizon + (kHalfWidthBottom - kHalfWidthHorizon) * tr_obs) * W;
                const double cx = xc + scene.obs_lat[static_cast<std::size_t>(t)] * hw;
                const double w_px = 0.9 * h_px * W / H;
                const int y0 = std::max(0, static_cast<int>(std::floor(yb - h_px)));
                const int y1 = std::min(H, static_cast<int>(std::lround(yb)));
                const int x0 = std::max(0, static_cast<int>(std::floor(cx - 0.5 * w_px)));
                const int x1 = std::min(W, static_cast<int>(std::ceil(cx + 0.5 * w_px)));
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x) {
                        frame[static_cast<std::size_t>(y) * W + x] = spec.obstacle[0];
                        frame[plane + static_cast<std::size_t>(y) * W + x] = spec.obstacle[1];
                        frame[2 * plane + static_cast<std::size_t>(y) * W + x] = spec.obstacle[2];
                    }
            }
            if (spec.noise > 0.0f) {
                for (std::size_t i = 0; i < plane; ++i) {
                    const float n = static_cast<float>(noise.uniform(-spec.noise, spec.noise));
                    frame[i] += n;
                    frame[plane + i] += n;
                    frame[2 * plane + i] += n;
                }
            }
        }
        std::uint8_t* dst = out + static_cast<std::size_t>(t) * 3 * plane;
        for (std::size_t i = 0; i < 3 * plane; ++i) dst[i] = quantize(frame[i]);
    }
}

namespace {

data::Dataset make_empty(const DomainSpec& spec, data::DatasetKind kind, int T) {
    data::Dataset ds;
    ds.kind = kind;
    ds.T = T;
    ds.H = spec.frame_h;
    ds.W = spec.frame_w;
    return ds;
}

}  // namespace

data::Dataset generate_dataset(const DomainSpec& spec, int n, double collision_ratio, int T,
                               std::uint64_t seed) {
    if (n <= 0) throw std::invalid_argument("generate_dataset: n must be positive");
    if (collision_ratio < 0.0 || collision_ratio > 1.0)
        throw std::invalid_argument("generate_dataset: collision_ratio must be in [0,1]");
    if (T < 2) throw std::invalid_argument("generate_dataset: T must be >= 2");

    const int n_coll = static_cast<int>(std::lround(n * collision_ratio));
    std::vector<int> labels(static_cast<std::size_t>(n), 0);
    std::fill(labels.begin(), labels.begin() + n_coll, 1);
    rng::Engine order(rng::mix_seed(seed, "labels"));
    order.shuffle(labels);

    data::Dataset ds = make_empty(spec, data::DatasetKind::Classification, T);
    ds.seqs.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        rng::Engine eng(rng::mix_seed(seed, "seq", static_cast<std::uint64_t>(i)));
        SceneState sc = make_scene(spec, labels[static_cast<std::size_t>(i)], T, eng);
        auto& rec = ds.seqs[static_cast<std::size_t>(i)];
        rec.pixels.resize(ds.pixels_per_seq());
        render_sequence(spec, sc, rec.pixels.data());
        rec.label = sc.label;
        rec.domain_id = spec.domain_id;
    }
    return ds;
}

data::Dataset generate_steering_dataset(const DomainSpec& spec, int n, int T, std::uint64_t seed) {
    if (n <= 0) throw std::invalid_argument("generate_steering_dataset: n must be positive");
    if (T < 2) throw std::invalid_argument("generate_steering_dataset: T must be >= 2");
    data::Dataset ds = make_empty(spec, data::DatasetKind::Steering, T);
    ds.seqs.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        rng::Engine eng(rng::mix_seed(seed, "steer", static_cast<std::uint64_t>(i)));
        SceneState sc = make_scene(spec, 0, T, eng);
        sc.has_obstacle = false;
        std::fill(sc.obs_u.begin(), sc.obs_u.end(), 0.0f);
        sc.curvature = static_cast<float>(eng.uniform(-1.0, 1.0));
        sc.steering_deg = 30.0f * sc.curvature * spec.steer_gain;
        auto& rec = ds.seqs[static_cast<std::size_t>(i)];
        rec.pixels.resize(ds.pixels_per_seq());
        render_sequence(spec, sc, rec.pixels.data());
        rec.label = 0;
        rec.steering_deg = sc.steering_deg;
        rec.domain_id = spec.domain_id;
    }
    return ds;
}

data::Dataset generate_approach_set(const DomainSpec& spec, int n, int T, double uf_lo,
                                    double uf_hi, std::uint64_t seed) {
    if (n <= 0) throw std::invalid_argument("generate_approach_set: n must be positive");
    if (T < 2) throw std::invalid_argument("generate_approach_set: T must be >= 2");
    if (uf_lo <= 0.0 || uf_hi < uf_lo) throw std::invalid_argument("generate_approach_set: bad proximity range");
    data::Dataset ds = make_empty(spec, data::DatasetKind::Classification, T);
    ds.seqs.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        rng::Engine eng(rng::mix_seed(seed, "probe", static_cast<std::uint64_t>(i)));
        SceneState sc = make_scene(spec, 0, T, eng);
        sc.has_obstacle = true;
        const double uf = eng.uniform(uf_lo, uf_hi);
        const double us = 0.08 + 0.04 * eng.uniform();
        const double d0 = 1.0 / us, df = 1.0 / uf;
        const double lat = eng.uniform(-0.15, 0.15);
        for (int t = 0; t < T; ++t) {
            const double a = static_cast<double>(t) / (T - 1);
            sc.obs_u[static_cast<std::size_t>(t)] = static_cast<float>(1.0 / (d0 + (df - d0) * a));
            sc.obs_lat[static_cast<std::size_t>(t)] = static_cast<float>(lat * (1.0 - 0.5 * a));
        }
        sc.label = derive_label(sc);
        auto& rec = ds.seqs[static_cast<std::size_t>(i)];
        rec.pixels.resize(ds.pixels_per_seq());
        render_sequence(spec, sc, rec.pixels.data());
        rec.label = sc.label;
        rec.domain_id = spec.domain_id;
    }
    return ds;
}

}  // namespace stdrive::synth
