#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "rng.hpp"

// Procedural driving-like scenes: horizon, converging lane lines, optional
// approaching obstacle. Domains differ in palette, texture noise, and
// obstacle dynamics so cross-domain transfer has something to bridge.
namespace stdrive::synth {

using Color = std::array<float, 3>;

struct DomainSpec {
    std::string domain_id;
    Color sky{}, road{}, offroad{}, lane{}, obstacle{};
    float noise = 0.02f;           // per-pixel brightness noise amplitude
    float obstacle_speed_min = 0.3f;  // relative approach-rate scale in (0,1]
    float obstacle_speed_max = 1.0f;
    float camera_jitter = 0.5f;    // px jitter of horizon and vanishing point
    float steer_gain = 1.0f;       // angle = 30 deg * curvature * steer_gain
    int frame_h = 48;
    int frame_w = 64;
    bool pure_noise = false;       // ignore geometry, emit uniform noise frames
};

DomainSpec town_a(int h = 48, int w = 64);
DomainSpec town_b(int h = 48, int w = 64);
DomainSpec town_c(int h = 48, int w = 64);
DomainSpec noise_domain(int h = 48, int w = 64);
DomainSpec domain_by_name(const std::string& name, int h = 48, int w = 64);

// Obstacle proximity u is inverse distance: projected height = 0.8*H*u,
// so u = 0.5 puts the obstacle exactly at the 40% collision threshold.
inline constexpr double obstacle_base_height = 0.8;
inline constexpr double collision_height_frac = 0.4;
inline double projected_height_frac(double u) { return obstacle_base_height * u; }

struct SceneState {
    float curvature = 0.0f;
    bool has_obstacle = false;
    std::vector<float> obs_u;        // proximity per frame
    std::vector<float> obs_lat;      // lateral offset per frame, fraction of half-width
    std::vector<float> horizon_jit;  // px per frame
    std::vector<float> vx_jit;       // px per frame
    float dash0 = 0.0f;
    std::uint64_t noise_seed = 0;
    int label = 0;
    float steering_deg = 0.0f;
};

SceneState make_scene(const DomainSpec& spec, int forced_label, int T, rng::Engine& eng);
int derive_label(const SceneState& scene);
void render_sequence(const DomainSpec& spec, const SceneState& scene, std::uint8_t* out);

data::Dataset generate_dataset(const DomainSpec& spec, int n, double collision_ratio, int T,
                               std::uint64_t seed);
data::Dataset generate_steering_dataset(const DomainSpec& spec, int n, int T, std::uint64_t seed);

// Approach scenarios for hidden-state studies: obstacle always present,
// proximity ramping into [uf_lo, uf_hi] at the final frame.
data::Dataset generate_approach_set(const DomainSpec& spec, int n, int T, double uf_lo,
                                    double uf_hi, std::uint64_t seed);

}  // namespace stdrive::synth
