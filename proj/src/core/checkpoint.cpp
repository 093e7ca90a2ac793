#include "checkpoint.hpp"

#include <charconv>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "rng.hpp"

namespace stdrive::ckpt {

namespace {

std::string head_name(net::Head h) {
    return h == net::Head::Classification ? "classification" : "regression";
}

net::Head head_from(const std::string& s) {
    if (s == "classification") return net::Head::Classification;
    if (s == "regression") return net::Head::Regression;
    throw std::invalid_argument("config: unknown head '" + s + "'");
}

std::vector<int> parse_ints(const std::string& key, const std::string& s, std::size_t want) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        int v = 0;
        auto [p, ec] = std::from_chars(s.data() + pos, s.data() + comma, v);
        if (ec != std::errc{} || p != s.data() + comma)
            throw std::invalid_argument("config: bad integer list for " + key);
        out.push_back(v);
        pos = comma + 1;
    }
    if (out.size() != want)
        throw std::invalid_argument("config: " + key + " expects " + std::to_string(want) + " values");
    return out;
}

int parse_int(const std::string& key, const std::string& s) {
    return parse_ints(key, s, 1)[0];
}

std::string join_ints(std::initializer_list<int> vs) {
    std::string out;
    for (int v : vs) {
        if (!out.empty()) out += ',';
        out += std::to_string(v);
    }
    return out;
}

// hidden state blobs are named hidden.h.<layer> / hidden.c.<layer>
void add_hidden_blobs(io::Container& c, const net::HiddenState<run_scalar>& hs) {
    for (std::size_t l = 0; l < hs.h.size(); ++l) {
        const auto tag = std::to_string(l);
        c.add(io::Blob::from_f32("hidden.h." + tag, {static_cast<std::int64_t>(hs.h[l].size())}, hs.h[l]));
        c.add(io::Blob::from_f32("hidden.c." + tag, {static_cast<std::int64_t>(hs.c[l].size())}, hs.c[l]));
    }
}

net::HiddenState<run_scalar> read_hidden_blobs(const io::Container& c, const net::NetworkConfig& cfg,
                                               const std::string& path) {
    net::HiddenState<run_scalar> hs;
    for (int l = 0; l < net::NetworkConfig::lstm_layers; ++l) {
        const auto tag = std::to_string(l);
        for (const char* part : {"h", "c"}) {
            const auto& b = c.blob("hidden." + std::string(part) + "." + tag);
            auto v = b.f32();
            if (static_cast<int>(v.size()) != cfg.lstm_hidden)
                throw std::runtime_error(path + ": hidden blob size mismatch");
            auto& dst = *part == 'h' ? hs.h : hs.c;
            dst.emplace_back(v.begin(), v.end());
        }
    }
    return hs;
}

void add_param_blobs(io::Container& c, const net::Parameters<run_scalar>& params) {
    for (const auto& [name, t] : params.items()) {
        std::vector<std::int64_t> dims(t.shape().begin(), t.shape().end());
        c.add(io::Blob::from_f32("param." + name, std::move(dims), t.data()));
    }
}

// manifests append bookkeeping keys after the config block; keep only the
// config lines before handing off to the strict parser
net::NetworkConfig config_from_manifest(const std::string& manifest) {
    static const char* keys[] = {"input_channels", "frame_height", "frame_width", "sequence_length",
                                 "conv1", "conv2", "incep1", "incep2", "embed_dim", "lstm_hidden",
                                 "fc1", "fc2", "head"};
    std::string filtered;
    std::size_t pos = 0;
    while (pos < manifest.size()) {
        std::size_t nl = manifest.find('\n', pos);
        if (nl == std::string::npos) nl = manifest.size();
        const std::string line = manifest.substr(pos, nl - pos);
        pos = nl + 1;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        for (const char* k : keys)
            if (key == k) {
                filtered += line;
                filtered += '\n';
                break;
            }
    }
    return config_from_text(filtered);
}

net::Parameters<run_scalar> read_param_blobs(const io::Container& c, const net::NetworkConfig& cfg,
                                             const std::string& path) {
    auto params = net::init_parameters<run_scalar>(cfg, 0);
    for (auto& [name, t] : params.items()) {
        const auto& b = c.blob("param." + name);
        if (b.dtype != io::Dtype::F32) throw std::runtime_error(path + ": param " + name + " is not f32");
        std::vector<std::int64_t> want(t.shape().begin(), t.shape().end());
        if (b.dims != want) throw std::runtime_error(path + ": param " + name + " shape mismatch");
        auto src = b.f32();
        auto dst = t.raw_data();
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i];
    }
    return params;
}

}  // namespace

std::string config_to_text(const net::NetworkConfig& cfg) {
    std::ostringstream os;
    os << "input_channels=" << cfg.input_channels << '\n'
       << "frame_height=" << cfg.frame_height << '\n'
       << "frame_width=" << cfg.frame_width << '\n'
       << "sequence_length=" << cfg.sequence_length << '\n'
       << "conv1=" << join_ints({cfg.conv1.out_channels, cfg.conv1.kernel, cfg.conv1.stride, cfg.conv1.padding}) << '\n'
       << "conv2=" << join_ints({cfg.conv2.out_channels, cfg.conv2.kernel, cfg.conv2.stride, cfg.conv2.padding}) << '\n'
       << "incep1=" << join_ints({cfg.incep1.b1, cfg.incep1.b3, cfg.incep1.b5, cfg.incep1.bpool}) << '\n'
       << "incep2=" << join_ints({cfg.incep2.b1, cfg.incep2.b3, cfg.incep2.b5, cfg.incep2.bpool}) << '\n'
       << "embed_dim=" << cfg.embed_dim << '\n'
       << "lstm_hidden=" << cfg.lstm_hidden << '\n'
       << "fc1=" << cfg.fc1 << '\n'
       << "fc2=" << cfg.fc2 << '\n'
       << "head=" << head_name(cfg.head) << '\n';
    return os.str();
}

net::NetworkConfig config_from_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        const std::string line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("config: malformed line '" + line + "'");
        if (!kv.emplace(line.substr(0, eq), line.substr(eq + 1)).second)
            throw std::invalid_argument("config: duplicate key '" + line.substr(0, eq) + "'");
    }

    net::NetworkConfig cfg;
    auto take = [&](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw std::invalid_argument("config: missing key '" + key + "'");
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    cfg.input_channels = parse_int("input_channels", take("input_channels"));
    cfg.frame_height = parse_int("frame_height", take("frame_height"));
    cfg.frame_width = parse_int("frame_width", take("frame_width"));
    cfg.sequence_length = parse_int("sequence_length", take("sequence_length"));
    auto conv = [&](const std::string& key) {
        auto v = parse_ints(key, take(key), 4);
        return net::ConvSpec{v[0], v[1], v[2], v[3]};
    };
    cfg.conv1 = conv("conv1");
    cfg.conv2 = conv("conv2");
    auto incep = [&](const std::string& key) {
        auto v = parse_ints(key, take(key), 4);
        return net::InceptionSpec{v[0], v[1], v[2], v[3]};
    };
    cfg.incep1 = incep("incep1");
    cfg.incep2 = incep("incep2");
    cfg.embed_dim = parse_int("embed_dim", take("embed_dim"));
    cfg.lstm_hidden = parse_int("lstm_hidden", take("lstm_hidden"));
    cfg.fc1 = parse_int("fc1", take("fc1"));
    cfg.fc2 = parse_int("fc2", take("fc2"));
    cfg.head = head_from(take("head"));
    if (!kv.empty()) throw std::invalid_argument("config: unknown key '" + kv.begin()->first + "'");
    net::validate_config(cfg);
    return cfg;
}

std::uint64_t config_digest(const net::NetworkConfig& cfg) {
    return rng::fnv1a(config_to_text(cfg));
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
    net::validate_config(c.cfg);
    io::Container out;
    out.kind = io::kind_checkpoint;
    out.manifest = config_to_text(c.cfg);
    io::manifest_set(out.manifest, "init_seed", std::to_string(c.params.seed));
    io::manifest_set(out.manifest, "init_scheme", c.params.scheme);
    add_param_blobs(out, c.params);
    add_hidden_blobs(out, c.h0);
    save_container(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
    const io::Container in = io::load_container(path, io::kind_checkpoint);
    Checkpoint c;
    c.cfg = config_from_manifest(in.manifest);
    c.params = read_param_blobs(in, c.cfg, path);
    c.params.seed = std::stoull(io::manifest_get(in.manifest, "init_seed"));
    c.params.scheme = io::manifest_get(in.manifest, "init_scheme");
    c.h0 = read_hidden_blobs(in, c.cfg, path);
    return c;
}

void save_bundle(const std::string& path, const TransferBundle& b) {
    net::validate_config(b.source_cfg);
    io::Container out;
    out.kind = io::kind_bundle;
    out.manifest = config_to_text(b.source_cfg);
    io::manifest_set(out.manifest, "init_seed", std::to_string(b.params.seed));
    io::manifest_set(out.manifest, "init_scheme", b.params.scheme);
    io::manifest_set(out.manifest, "transfer_cnn", b.flags.cnn ? "1" : "0");
    io::manifest_set(out.manifest, "transfer_lstm", b.flags.lstm ? "1" : "0");
    io::manifest_set(out.manifest, "transfer_hidden", b.flags.hidden ? "1" : "0");
    io::manifest_set(out.manifest, "source_digest", std::to_string(b.source_digest));
    add_param_blobs(out, b.params);
    add_hidden_blobs(out, b.harvested);
    save_container(path, out);
}

TransferBundle load_bundle(const std::string& path) {
    const io::Container in = io::load_container(path, io::kind_bundle);
    TransferBundle b;
    b.source_cfg = config_from_manifest(in.manifest);
    b.params = read_param_blobs(in, b.source_cfg, path);
    b.params.seed = std::stoull(io::manifest_get(in.manifest, "init_seed"));
    b.params.scheme = io::manifest_get(in.manifest, "init_scheme");
    b.harvested = read_hidden_blobs(in, b.source_cfg, path);
    auto flag = [&](const char* key) { return io::manifest_get(in.manifest, key) == "1"; };
    b.flags = {flag("transfer_cnn"), flag("transfer_lstm"), flag("transfer_hidden")};
    b.source_digest = std::stoull(io::manifest_get(in.manifest, "source_digest"));
    return b;
}

}  // namespace stdrive::ckpt
