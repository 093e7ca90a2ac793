#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ops.hpp"
#include "rng.hpp"

namespace stdrive {

// Training runs in 32-bit; verification code instantiates the same templates
// with double. Flip this alias to retrain everything in 64-bit.
using run_scalar = float;

}  // namespace stdrive

namespace stdrive::net {

struct ConvSpec {
    int out_channels = 0;
    int kernel = 0;
    int stride = 1;
    int padding = 0;
};

struct InceptionSpec {
    int b1 = 0;    // 1x1 branch
    int b3 = 0;    // 1x1 reduce -> 3x3 branch
    int b5 = 0;    // 1x1 reduce -> 5x5 branch
    int bpool = 0; // 3x3 max-pool -> 1x1 branch
    int total() const { return b1 + b3 + b5 + bpool; }
    int reduce3() const { return std::max(1, b3 / 2); }
    int reduce5() const { return std::max(1, b5 / 2); }
};

enum class Head { Classification, Regression };

struct NetworkConfig {
    int input_channels = 3;
    int frame_height = 48;
    int frame_width = 64;
    int sequence_length = 15;
    ConvSpec conv1{16, 5, 2, 2};
    ConvSpec conv2{32, 3, 2, 1};
    InceptionSpec incep1{8, 16, 8, 8};
    InceptionSpec incep2{16, 24, 12, 12};
    int embed_dim = 64;
    int lstm_hidden = 32;
    int fc1 = 64;
    int fc2 = 16;
    Head head = Head::Classification;

    static constexpr int lstm_layers = 2;
    int head_outputs() const { return head == Head::Classification ? 2 : 1; }
};

// Spatial extents after each stage of the frame encoder.
struct StageDims {
    int conv1_h = 0, conv1_w = 0;
    int pool1_h = 0, pool1_w = 0;
    int conv2_h = 0, conv2_w = 0;
    int pool2_h = 0, pool2_w = 0;
    int incep_h = 0, incep_w = 0;   // inception modules preserve spatial size
    int feature_dim = 0;            // flattened second-inception output
};

inline StageDims stage_dims(const NetworkConfig& cfg) {
    auto conv_out = [](int in, int k, int s, int p) {
        const int span = in + 2 * p - k;
        return span < 0 ? 0 : span / s + 1;  // guard: C++ division truncates toward zero
    };
    StageDims d;
    d.conv1_h = conv_out(cfg.frame_height, cfg.conv1.kernel, cfg.conv1.stride, cfg.conv1.padding);
    d.conv1_w = conv_out(cfg.frame_width, cfg.conv1.kernel, cfg.conv1.stride, cfg.conv1.padding);
    d.pool1_h = conv_out(d.conv1_h, 2, 2, 0);
    d.pool1_w = conv_out(d.conv1_w, 2, 2, 0);
    d.conv2_h = conv_out(d.pool1_h, cfg.conv2.kernel, cfg.conv2.stride, cfg.conv2.padding);
    d.conv2_w = conv_out(d.pool1_w, cfg.conv2.kernel, cfg.conv2.stride, cfg.conv2.padding);
    d.pool2_h = conv_out(d.conv2_h, 2, 2, 0);
    d.pool2_w = conv_out(d.conv2_w, 2, 2, 0);
    d.incep_h = d.pool2_h;
    d.incep_w = d.pool2_w;
    d.feature_dim = cfg.incep2.total() * d.incep_h * d.incep_w;
    return d;
}

inline void validate_config(const NetworkConfig& cfg) {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("network config: " + msg); };
    if (cfg.input_channels != 3 && cfg.input_channels != 6) fail("input_channels must be 3 or 6");
    if (cfg.frame_height < 1 || cfg.frame_width < 1) fail("frame size must be positive");
    if (cfg.sequence_length < 1) fail("sequence_length must be >= 1");
    if (cfg.lstm_hidden < 1) fail("lstm_hidden must be >= 1");
    if (cfg.embed_dim < 1) fail("embed_dim must be >= 1");
    if (cfg.fc1 < 1 || cfg.fc2 < 1) fail("fc widths must be >= 1");
    for (const auto* c : {&cfg.conv1, &cfg.conv2}) {
        if (c->out_channels < 1) fail("conv out_channels must be >= 1");
        if (c->kernel < 1) fail("conv kernel must be >= 1");
        if (c->stride < 1) fail("conv stride must be >= 1");
        if (c->padding < 0) fail("conv padding must be >= 0");
    }
    for (const auto* m : {&cfg.incep1, &cfg.incep2})
        if (m->b1 < 1 || m->b3 < 1 || m->b5 < 1 || m->bpool < 1)
            fail("inception branch channels must be >= 1");
    const StageDims d = stage_dims(cfg);
    if (d.conv1_h < 1 || d.conv1_w < 1) fail("frame too small for conv1");
    if (d.pool1_h < 1 || d.pool1_w < 1) fail("frame too small for pool1");
    if (d.conv2_h < 1 || d.conv2_w < 1) fail("frame too small for conv2");
    if (d.pool2_h < 1 || d.pool2_w < 1) fail("frame too small for pool2");
    if (d.incep_h + 2 < 3 || d.incep_w + 2 < 3) fail("frame too small for inception pooling");
}

template <class T>
class Parameters {
public:
    using Entry = std::pair<std::string, ag::Tensor<T>>;

    void add(std::string name, ag::Shape shape) {
        if (index_.count(name)) throw std::logic_error("duplicate parameter " + name);
        index_[name] = items_.size();
        items_.emplace_back(std::move(name), ag::Tensor<T>::zeros(std::move(shape), true));
    }
    ag::Tensor<T>& at(std::string_view name) {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) throw std::invalid_argument("unknown parameter " + std::string(name));
        return items_[it->second].second;
    }
    const ag::Tensor<T>& at(std::string_view name) const {
        return const_cast<Parameters*>(this)->at(name);
    }
    bool has(std::string_view name) const { return index_.count(std::string(name)) > 0; }
    std::vector<Entry>& items() { return items_; }
    const std::vector<Entry>& items() const { return items_; }
    std::size_t tensor_count() const { return items_.size(); }
    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& e : items_) n += e.second.size();
        return n;
    }
    void zero_grad_all() {
        for (auto& e : items_) e.second.zero_grad();
    }

    std::uint64_t seed = 0;
    std::string scheme = "xavier_uniform";

private:
    std::vector<Entry> items_;
    std::unordered_map<std::string, std::size_t> index_;
};

template <class T>
struct HiddenState {
    std::vector<std::vector<T>> h, c;  // [layers][lstm_hidden]
};

namespace detail {

inline void add_inception_params(std::vector<std::pair<std::string, ag::Shape>>& out,
                                 const std::string& prefix, int cin, const InceptionSpec& m) {
    auto conv = [&](const std::string& name, int co, int ci, int k) {
        out.push_back({prefix + "." + name + ".w", {co, ci, k, k}});
        out.push_back({prefix + "." + name + ".b", {co}});
    };
    conv("b1", m.b1, cin, 1);
    conv("r3", m.reduce3(), cin, 1);
    conv("b3", m.b3, m.reduce3(), 3);
    conv("r5", m.reduce5(), cin, 1);
    conv("b5", m.b5, m.reduce5(), 5);
    conv("pp", m.bpool, cin, 1);
}

inline std::vector<std::pair<std::string, ag::Shape>> parameter_shapes(const NetworkConfig& cfg) {
    std::vector<std::pair<std::string, ag::Shape>> out;
    const StageDims d = stage_dims(cfg);
    out.push_back({"conv1.w", {cfg.conv1.out_channels, cfg.input_channels, cfg.conv1.kernel, cfg.conv1.kernel}});
    out.push_back({"conv1.b", {cfg.conv1.out_channels}});
    out.push_back({"conv2.w", {cfg.conv2.out_channels, cfg.conv1.out_channels, cfg.conv2.kernel, cfg.conv2.kernel}});
    out.push_back({"conv2.b", {cfg.conv2.out_channels}});
    add_inception_params(out, "incep1", cfg.conv2.out_channels, cfg.incep1);
    add_inception_params(out, "incep2", cfg.incep1.total(), cfg.incep2);
    out.push_back({"bridge.w", {cfg.incep2.total(), cfg.embed_dim}});
    out.push_back({"bridge.b", {1, cfg.embed_dim}});
    const int H = cfg.lstm_hidden;
    for (int l = 0; l < NetworkConfig::lstm_layers; ++l) {
        const std::string p = "lstm" + std::to_string(l + 1);
        const int in = l == 0 ? cfg.embed_dim : H;
        out.push_back({p + ".w_ih", {in, 4 * H}});
        out.push_back({p + ".w_hh", {H, 4 * H}});
        out.push_back({p + ".b", {1, 4 * H}});
    }
    out.push_back({"fc1.w", {H, cfg.fc1}});
    out.push_back({"fc1.b", {1, cfg.fc1}});
    out.push_back({"fc2.w", {cfg.fc1, cfg.fc2}});
    out.push_back({"fc2.b", {1, cfg.fc2}});
    out.push_back({"fc3.w", {cfg.fc2, cfg.head_outputs()}});
    out.push_back({"fc3.b", {1, cfg.head_outputs()}});
    (void)d;
    return out;
}

// fan_in/fan_out for the Xavier bound. Conv weights are [Co,Ci,kh,kw];
// linear weights are stored [in,out].
inline std::pair<int, int> fans(const ag::Shape& s) {
    if (s.size() == 4) {
        const int rf = s[2] * s[3];
        return {s[1] * rf, s[0] * rf};
    }
    return {s[0], s[1]};
}

}  // namespace detail

template <class T>
Parameters<T> init_parameters(const NetworkConfig& cfg, std::uint64_t seed) {
    validate_config(cfg);
    Parameters<T> params;
    params.seed = seed;
    rng::Engine eng(rng::mix_seed(seed, "xavier"));
    for (auto& [name, shape] : detail::parameter_shapes(cfg)) {
        params.add(name, shape);
        auto& t = params.at(name);
        const bool is_bias = name.size() > 2 && name.compare(name.size() - 2, 2, ".b") == 0;
        if (is_bias) continue;  // zeros already
        auto [fan_in, fan_out] = detail::fans(shape);
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        auto vals = t.raw_data();
        for (auto& v : vals) v = static_cast<T>(eng.uniform(-bound, bound));
    }
    return params;
}

template <class T>
HiddenState<T> init_hidden_random(const NetworkConfig& cfg, std::uint64_t seed) {
    validate_config(cfg);
    rng::Engine eng(rng::mix_seed(seed, "hidden"));
    HiddenState<T> hs;
    for (int l = 0; l < NetworkConfig::lstm_layers; ++l) {
        std::vector<T> h(cfg.lstm_hidden), c(cfg.lstm_hidden);
        for (auto& v : h) v = static_cast<T>(eng.normal(0.0, 0.1));
        for (auto& v : c) v = static_cast<T>(eng.normal(0.0, 0.1));
        hs.h.push_back(std::move(h));
        hs.c.push_back(std::move(c));
    }
    return hs;
}

template <class U, class T>
Parameters<U> cast_parameters(const Parameters<T>& src) {
    Parameters<U> dst;
    dst.seed = src.seed;
    dst.scheme = src.scheme;
    for (const auto& [name, t] : src.items()) {
        dst.add(name, t.shape());
        auto out = dst.at(name).raw_data();
        auto in = t.data();
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = static_cast<U>(in[i]);
    }
    return dst;
}

template <class U, class T>
HiddenState<U> cast_hidden(const HiddenState<T>& src) {
    HiddenState<U> dst;
    for (const auto& v : src.h) dst.h.emplace_back(v.begin(), v.end());
    for (const auto& v : src.c) dst.c.emplace_back(v.begin(), v.end());
    return dst;
}

template <class T>
struct ForwardOut {
    ag::Tensor<T> input;                        // [T,C,H,W] leaf the graph reads
    ag::Tensor<T> logits;                       // [1,2] or [1,1]
    ag::Tensor<T> probs;                        // classification head only
    ag::Tensor<T> features;                     // [T, D] flattened inception-2 outputs
    std::vector<ag::Tensor<T>> inception_maps;  // per frame, [1,C,h,w] inception-2 output
    std::vector<ag::Tensor<T>> h_final;         // per layer, [1,H]
    HiddenState<T> hT;
};

namespace detail {

template <class T>
void check_finite(const ag::Tensor<T>& t, const char* layer) {
    for (T v : t.data())
        if (!std::isfinite(v))
            throw std::runtime_error(std::string("non-finite activation in ") + layer);
}

template <class T>
ag::Tensor<T> inception_forward(Parameters<T>& P, const std::string& prefix, const ag::Tensor<T>& x) {
    using namespace ag::ops;
    auto branch = [&](const char* name, const ag::Tensor<T>& in, int pad) {
        return relu(conv2d(in, P.at(prefix + "." + name + ".w"), P.at(prefix + "." + name + ".b"), 1, pad));
    };
    auto b1 = branch("b1", x, 0);
    auto b3 = branch("b3", branch("r3", x, 0), 1);
    auto b5 = branch("b5", branch("r5", x, 0), 2);
    auto bp = branch("pp", max_pool2d(x, 3, 1, 1), 0);
    return concat<T>({b1, b3, b5, bp}, 1);
}

template <class T>
ag::Tensor<T> linear(Parameters<T>& P, const std::string& prefix, const ag::Tensor<T>& x) {
    using namespace ag::ops;
    return add(matmul(x, P.at(prefix + ".w")), P.at(prefix + ".b"));
}

}  // namespace detail

// Spatial half of the model: one [1,C,H,W] frame to the second inception
// module's activation map.
template <class T>
ag::Tensor<T> encode_frame(const NetworkConfig& cfg, Parameters<T>& params, const ag::Tensor<T>& frame) {
    using namespace ag::ops;
    auto c1 = relu(conv2d(frame, params.at("conv1.w"), params.at("conv1.b"), cfg.conv1.stride, cfg.conv1.padding));
    detail::check_finite(c1, "conv1");
    auto p1 = max_pool2d(c1, 2, 2, 0);
    auto c2 = relu(conv2d(p1, params.at("conv2.w"), params.at("conv2.b"), cfg.conv2.stride, cfg.conv2.padding));
    detail::check_finite(c2, "conv2");
    auto p2 = max_pool2d(c2, 2, 2, 0);
    auto i1 = detail::inception_forward(params, "incep1", p2);
    detail::check_finite(i1, "incep1");
    auto i2 = detail::inception_forward(params, "incep2", i1);
    detail::check_finite(i2, "incep2");
    return i2;
}

// Runs the whole sequence model. `seq` must be a [T,C,H,W] tensor; pass a
// leaf with requires_grad=true to obtain input-pixel gradients.
template <class T>
ForwardOut<T> forward(const NetworkConfig& cfg, Parameters<T>& params, const ag::Tensor<T>& seq,
                      const HiddenState<T>& h0) {
    using namespace ag::ops;
    const ag::Shape want{cfg.sequence_length, cfg.input_channels, cfg.frame_height, cfg.frame_width};
    if (seq.shape() != want)
        ag::shape_error("forward", "sequence shape " + ag::shape_str(seq.shape()) + " does not match config " + ag::shape_str(want));
    if (static_cast<int>(h0.h.size()) != NetworkConfig::lstm_layers ||
        static_cast<int>(h0.c.size()) != NetworkConfig::lstm_layers)
        ag::shape_error("forward", "hidden state must have 2 layers");
    for (int l = 0; l < NetworkConfig::lstm_layers; ++l)
        if (static_cast<int>(h0.h[l].size()) != cfg.lstm_hidden || static_cast<int>(h0.c[l].size()) != cfg.lstm_hidden)
            ag::shape_error("forward", "hidden state dimension does not match lstm_hidden");

    ForwardOut<T> out;
    out.input = seq;
    const int H = cfg.lstm_hidden;

    std::vector<ag::Tensor<T>> h(NetworkConfig::lstm_layers), c(NetworkConfig::lstm_layers);
    for (int l = 0; l < NetworkConfig::lstm_layers; ++l) {
        h[l] = ag::Tensor<T>::leaf({1, H}, h0.h[l], false);
        c[l] = ag::Tensor<T>::leaf({1, H}, h0.c[l], false);
    }

    std::vector<ag::Tensor<T>> feature_rows;
    for (int t = 0; t < cfg.sequence_length; ++t) {
        auto frame = narrow(seq, 0, t, 1);  // [1,C,H,W]
        auto i2 = encode_frame(cfg, params, frame);
        out.inception_maps.push_back(i2);
        feature_rows.push_back(reshape(i2, {1, static_cast<int>(i2.size())}));

        auto emb = relu(detail::linear(params, "bridge", global_avg_pool(i2)));
        detail::check_finite(emb, "bridge");

        ag::Tensor<T> x = emb;
        for (int l = 0; l < NetworkConfig::lstm_layers; ++l) {
            const std::string p = "lstm" + std::to_string(l + 1);
            auto gates = add(add(matmul(x, params.at(p + ".w_ih")), matmul(h[l], params.at(p + ".w_hh"))),
                             params.at(p + ".b"));
            auto ig = sigmoid(narrow(gates, 1, 0, H));
            auto fg = sigmoid(narrow(gates, 1, H, H));
            auto gg = tanh_(narrow(gates, 1, 2 * H, H));
            auto og = sigmoid(narrow(gates, 1, 3 * H, H));
            c[l] = add(mul(fg, c[l]), mul(ig, gg));
            h[l] = mul(og, tanh_(c[l]));
            detail::check_finite(h[l], l == 0 ? "lstm1" : "lstm2");
            x = h[l];
        }
    }

    out.features = concat(feature_rows, 0);
    auto y = relu(detail::linear(params, "fc1", h[NetworkConfig::lstm_layers - 1]));
    y = relu(detail::linear(params, "fc2", y));
    out.logits = detail::linear(params, "fc3", y);
    detail::check_finite(out.logits, "fc3");
    if (cfg.head == Head::Classification) out.probs = softmax(out.logits);

    out.h_final = h;
    for (int l = 0; l < NetworkConfig::lstm_layers; ++l) {
        auto hv = h[l].data();
        auto cv = c[l].data();
        out.hT.h.emplace_back(hv.begin(), hv.end());
        out.hT.c.emplace_back(cv.begin(), cv.end());
    }
    return out;
}

enum class Label : int { Safe = 0, Collision = 1 };

// Argmax of the class probabilities; an exact tie counts as Safe.
template <class T>
Label classify(const NetworkConfig& cfg, Parameters<T>& params, const ag::Tensor<T>& seq,
               const HiddenState<T>& h0) {
    if (cfg.head != Head::Classification)
        throw std::invalid_argument("classify requires a classification head");
    ag::NoGradGuard ng;
    auto out = forward(cfg, params, seq, h0);
    auto p = out.probs.data();
    return p[1] > p[0] ? Label::Collision : Label::Safe;
}

}  // namespace stdrive::net
