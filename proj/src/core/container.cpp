#include "container.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace stdrive::io {

namespace {

std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        t[i] = c;
    }
    return t;
}

const std::array<std::uint32_t, 256> kCrcTable = make_crc_table();

[[noreturn]] void file_error(const std::string& path, const std::string& what) {
    throw std::runtime_error(path + ": " + what);
}

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    void str(std::string_view s) {
        u64(s.size());
        raw(s.data(), s.size());
    }
    const std::vector<std::uint8_t>& bytes() const { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    Reader(const std::string& path, std::vector<std::uint8_t> data)
        : path_(path), data_(std::move(data)) {}

    std::uint8_t u8() { return take(1)[0]; }
    std::uint32_t u32() {
        const auto* p = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        const auto* p = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        return v;
    }
    std::string str() {
        const std::uint64_t n = u64();
        const auto* p = take(n);
        return std::string(reinterpret_cast<const char*>(p), n);
    }
    const std::uint8_t* take(std::uint64_t n) {
        if (pos_ + n > data_.size()) file_error(path_, "truncated container");
        const auto* p = data_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::size_t pos() const { return pos_; }
    const std::vector<std::uint8_t>& data() const { return data_; }

private:
    std::string path_;
    std::vector<std::uint8_t> data_;
    std::size_t pos_ = 0;
};

Blob make_blob(std::string name, std::vector<std::int64_t> dims, Dtype dtype, const void* p,
               std::size_t count) {
    std::int64_t n = 1;
    for (auto d : dims) {
        if (d <= 0) throw std::invalid_argument("blob " + name + ": non-positive dimension");
        n *= d;
    }
    if (static_cast<std::size_t>(n) != count)
        throw std::invalid_argument("blob " + name + ": dims do not match element count");
    Blob b;
    b.name = std::move(name);
    b.dtype = dtype;
    b.dims = std::move(dims);
    b.bytes.resize(count * dtype_size(dtype));
    std::memcpy(b.bytes.data(), p, b.bytes.size());
    return b;
}

}  // namespace

std::size_t dtype_size(Dtype d) {
    switch (d) {
        case Dtype::U8: return 1;
        case Dtype::F32: return 4;
        case Dtype::F64: return 8;
        case Dtype::I32: return 4;
    }
    throw std::invalid_argument("unknown dtype");
}

const char* dtype_name(Dtype d) {
    switch (d) {
        case Dtype::U8: return "u8";
        case Dtype::F32: return "f32";
        case Dtype::F64: return "f64";
        case Dtype::I32: return "i32";
    }
    return "?";
}

std::size_t Blob::count() const { return bytes.size() / dtype_size(dtype); }

Blob Blob::from_u8(std::string name, std::vector<std::int64_t> dims, std::span<const std::uint8_t> v) {
    return make_blob(std::move(name), std::move(dims), Dtype::U8, v.data(), v.size());
}
Blob Blob::from_f32(std::string name, std::vector<std::int64_t> dims, std::span<const float> v) {
    return make_blob(std::move(name), std::move(dims), Dtype::F32, v.data(), v.size());
}
Blob Blob::from_f64(std::string name, std::vector<std::int64_t> dims, std::span<const double> v) {
    return make_blob(std::move(name), std::move(dims), Dtype::F64, v.data(), v.size());
}
Blob Blob::from_i32(std::string name, std::vector<std::int64_t> dims, std::span<const std::int32_t> v) {
    return make_blob(std::move(name), std::move(dims), Dtype::I32, v.data(), v.size());
}

namespace {

template <class T>
std::span<const T> typed_view(const Blob& b, Dtype want) {
    if (b.dtype != want)
        throw std::runtime_error("blob " + b.name + ": dtype is " + dtype_name(b.dtype) + ", expected " +
                                 dtype_name(want));
    return {reinterpret_cast<const T*>(b.bytes.data()), b.count()};
}

}  // namespace

std::span<const std::uint8_t> Blob::u8() const { return typed_view<std::uint8_t>(*this, Dtype::U8); }
std::span<const float> Blob::f32() const { return typed_view<float>(*this, Dtype::F32); }
std::span<const double> Blob::f64() const { return typed_view<double>(*this, Dtype::F64); }
std::span<const std::int32_t> Blob::i32() const { return typed_view<std::int32_t>(*this, Dtype::I32); }

void Container::add(Blob b) {
    if (has(b.name)) throw std::invalid_argument("duplicate blob " + b.name);
    blobs.push_back(std::move(b));
}

bool Container::has(std::string_view name) const {
    for (const auto& b : blobs)
        if (b.name == name) return true;
    return false;
}

const Blob& Container::blob(std::string_view name) const {
    for (const auto& b : blobs)
        if (b.name == name) return b;
    throw std::runtime_error("missing blob " + std::string(name));
}

std::uint32_t crc32(const std::uint8_t* data, std::size_t n, std::uint32_t crc) {
    crc = ~crc;
    for (std::size_t i = 0; i < n; ++i) crc = kCrcTable[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    return ~crc;
}

void save_container(const std::string& path, const Container& c) {
    Writer w;
    w.raw(kMagic, 4);
    w.u32(kFormatVersion);
    w.u32(c.kind);
    w.str(c.manifest);
    w.u32(static_cast<std::uint32_t>(c.blobs.size()));
    for (const auto& b : c.blobs) {
        w.str(b.name);
        w.u8(static_cast<std::uint8_t>(b.dtype));
        w.u32(static_cast<std::uint32_t>(b.dims.size()));
        for (auto d : b.dims) w.u64(static_cast<std::uint64_t>(d));
        w.u64(b.bytes.size());
        w.raw(b.bytes.data(), b.bytes.size());
    }
    const std::uint32_t crc = crc32(w.bytes().data(), w.bytes().size());
    Writer tail;
    tail.u32(crc);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) file_error(path, "cannot open for writing");
    f.write(reinterpret_cast<const char*>(w.bytes().data()), static_cast<std::streamsize>(w.bytes().size()));
    f.write(reinterpret_cast<const char*>(tail.bytes().data()), 4);
    if (!f) file_error(path, "write failed");
}

Container load_container(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) file_error(path, "cannot open");
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (data.size() < 16) file_error(path, "truncated container");

    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(data[data.size() - 4 + i]) << (8 * i);
    if (crc32(data.data(), data.size() - 4) != stored) file_error(path, "checksum mismatch");
    data.resize(data.size() - 4);

    Reader r(path, std::move(data));
    if (std::memcmp(r.take(4), kMagic, 4) != 0) file_error(path, "bad magic, not a container file");
    const std::uint32_t version = r.u32();
    if (version != kFormatVersion)
        file_error(path, "unsupported container version " + std::to_string(version));
    Container c;
    c.kind = r.u32();
    c.manifest = r.str();
    const std::uint32_t nblobs = r.u32();
    for (std::uint32_t i = 0; i < nblobs; ++i) {
        Blob b;
        b.name = r.str();
        const std::uint8_t dt = r.u8();
        if (dt < 1 || dt > 4) file_error(path, "blob " + b.name + ": unknown dtype");
        b.dtype = static_cast<Dtype>(dt);
        const std::uint32_t nd = r.u32();
        std::int64_t n = 1;
        for (std::uint32_t d = 0; d < nd; ++d) {
            b.dims.push_back(static_cast<std::int64_t>(r.u64()));
            if (b.dims.back() <= 0) file_error(path, "blob " + b.name + ": bad dimension");
            n *= b.dims.back();
        }
        const std::uint64_t nbytes = r.u64();
        if (nbytes != static_cast<std::uint64_t>(n) * dtype_size(b.dtype))
            file_error(path, "blob " + b.name + ": payload size does not match dims");
        const auto* p = r.take(nbytes);
        b.bytes.assign(p, p + nbytes);
        c.add(std::move(b));
    }
    return c;
}

Container load_container(const std::string& path, std::uint32_t want_kind) {
    Container c = load_container(path);
    if (c.kind != want_kind)
        file_error(path, "container kind " + std::to_string(c.kind) + ", expected " + std::to_string(want_kind));
    return c;
}

std::string manifest_get(const std::string& manifest, std::string_view key) {
    std::size_t pos = 0;
    while (pos < manifest.size()) {
        std::size_t eol = manifest.find('\n', pos);
        if (eol == std::string::npos) eol = manifest.size();
        const std::string_view line(manifest.data() + pos, eol - pos);
        const std::size_t eq = line.find('=');
        if (eq != std::string_view::npos && line.substr(0, eq) == key)
            return std::string(line.substr(eq + 1));
        pos = eol + 1;
    }
    return "";
}

void manifest_set(std::string& manifest, std::string_view key, std::string_view value) {
    std::string out;
    std::size_t pos = 0;
    bool replaced = false;
    while (pos < manifest.size()) {
        std::size_t eol = manifest.find('\n', pos);
        if (eol == std::string::npos) eol = manifest.size();
        const std::string_view line(manifest.data() + pos, eol - pos);
        const std::size_t eq = line.find('=');
        if (eq != std::string_view::npos && line.substr(0, eq) == key) {
            out.append(key).append("=").append(value).push_back('\n');
            replaced = true;
        } else if (!line.empty()) {
            out.append(line).push_back('\n');
        }
        pos = eol + 1;
    }
    if (!replaced) out.append(key).append("=").append(value).push_back('\n');
    manifest = std::move(out);
}

}  // namespace stdrive::io
