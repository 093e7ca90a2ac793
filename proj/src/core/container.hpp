#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Versioned binary container: magic, version, kind tag, free-form text
// manifest, named typed blobs, trailing CRC32. All integers little-endian.
// Every artifact file (dataset, checkpoint, transfer bundle) uses this
// layout so tooling can sanity-check files without knowing their payload.
namespace stdrive::io {

inline constexpr char kMagic[4] = {'S', 'T', 'D', 'C'};
inline constexpr std::uint32_t kFormatVersion = 1;

inline constexpr std::uint32_t kind_dataset = 1;
inline constexpr std::uint32_t kind_checkpoint = 2;
inline constexpr std::uint32_t kind_bundle = 3;

enum class Dtype : std::uint8_t { U8 = 1, F32 = 2, F64 = 3, I32 = 4 };

std::size_t dtype_size(Dtype d);
const char* dtype_name(Dtype d);

struct Blob {
    std::string name;
    Dtype dtype = Dtype::U8;
    std::vector<std::int64_t> dims;
    std::vector<std::uint8_t> bytes;

    std::size_t count() const;

    static Blob from_u8(std::string name, std::vector<std::int64_t> dims, std::span<const std::uint8_t> v);
    static Blob from_f32(std::string name, std::vector<std::int64_t> dims, std::span<const float> v);
    static Blob from_f64(std::string name, std::vector<std::int64_t> dims, std::span<const double> v);
    static Blob from_i32(std::string name, std::vector<std::int64_t> dims, std::span<const std::int32_t> v);

    std::span<const std::uint8_t> u8() const;
    std::span<const float> f32() const;
    std::span<const double> f64() const;
    std::span<const std::int32_t> i32() const;
};

struct Container {
    std::uint32_t kind = 0;
    std::string manifest;
    std::vector<Blob> blobs;

    void add(Blob b);
    bool has(std::string_view name) const;
    const Blob& blob(std::string_view name) const;
};

void save_container(const std::string& path, const Container& c);
Container load_container(const std::string& path);
Container load_container(const std::string& path, std::uint32_t want_kind);

std::uint32_t crc32(const std::uint8_t* data, std::size_t n, std::uint32_t crc = 0);

// manifest text is newline-separated key=value pairs
std::string manifest_get(const std::string& manifest, std::string_view key);
void manifest_set(std::string& manifest, std::string_view key, std::string_view value);

}  // namespace stdrive::io
