#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "core/container.hpp"

using namespace stdrive;

namespace {

std::string tmp_path(const char* name) {
    return std::string("/tmp/stdrive_test_") + name;
}

std::vector<std::uint8_t> slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(static_cast<bool>(f));
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void dump(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// corrupt a byte and fix the trailing checksum so only the field change is visible
void patch_and_reseal(std::vector<std::uint8_t>& bytes, std::size_t at, std::uint8_t value) {
    bytes.at(at) = value;
    const std::uint32_t crc = io::crc32(bytes.data(), bytes.size() - 4);
    for (int i = 0; i < 4; ++i) bytes[bytes.size() - 4 + static_cast<std::size_t>(i)] =
        static_cast<std::uint8_t>(crc >> (8 * i));
}

io::Container sample_container() {
    io::Container c;
    c.kind = io::kind_dataset;
    io::manifest_set(c.manifest, "purpose", "test");
    io::manifest_set(c.manifest, "count", "3");

    const std::vector<std::uint8_t> u8v{0, 1, 2, 255, 128, 7};
    const std::vector<float> f32v{0.0f, -1.5f, 3.25e-9f, 1e20f};
    const std::vector<double> f64v{1.0, -2.0, 3.141592653589793};
    const std::vector<std::int32_t> i32v{-1, 0, 2147483647, -2147483648};
    c.add(io::Blob::from_u8("bytes", {2, 3}, u8v));
    c.add(io::Blob::from_f32("floats", {4}, f32v));
    c.add(io::Blob::from_f64("doubles", {3, 1}, f64v));
    c.add(io::Blob::from_i32("ints", {1, 4}, i32v));
    return c;
}

}  // namespace

TEST_CASE("crc32 matches the published check value") {
    const char* msg = "123456789";
    CHECK(io::crc32(reinterpret_cast<const std::uint8_t*>(msg), 9) == 0xCBF43926u);
    CHECK(io::crc32(nullptr, 0) == 0u);
}

TEST_CASE("round trip preserves every blob bitwise") {
    const auto path = tmp_path("roundtrip.stdc");
    const auto c = sample_container();
    io::save_container(path, c);
    const auto r = io::load_container(path);

    CHECK(r.kind == io::kind_dataset);
    CHECK(io::manifest_get(r.manifest, "purpose") == "test");
    CHECK(io::manifest_get(r.manifest, "count") == "3");
    CHECK(io::manifest_get(r.manifest, "absent") == "");
    REQUIRE(r.blobs.size() == c.blobs.size());
    for (std::size_t i = 0; i < c.blobs.size(); ++i) {
        CHECK(r.blobs[i].name == c.blobs[i].name);
        CHECK(r.blobs[i].dtype == c.blobs[i].dtype);
        CHECK(r.blobs[i].dims == c.blobs[i].dims);
        REQUIRE(r.blobs[i].bytes.size() == c.blobs[i].bytes.size());
        CHECK(std::memcmp(r.blobs[i].bytes.data(), c.blobs[i].bytes.data(), r.blobs[i].bytes.size()) == 0);
    }
    CHECK(r.blob("floats").f32()[3] == 1e20f);
    CHECK(r.blob("ints").i32()[2] == 2147483647);
    std::remove(path.c_str());
}

TEST_CASE("save is byte-identical across repeated calls") {
    const auto p1 = tmp_path("rep1.stdc"), p2 = tmp_path("rep2.stdc");
    io::save_container(p1, sample_container());
    io::save_container(p2, sample_container());
    CHECK(slurp(p1) == slurp(p2));
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("container with no blobs still round trips") {
    const auto path = tmp_path("empty.stdc");
    io::Container c;
    c.kind = io::kind_checkpoint;
    io::save_container(path, c);
    const auto r = io::load_container(path, io::kind_checkpoint);
    CHECK(r.blobs.empty());
    CHECK(r.manifest.empty());
    std::remove(path.c_str());
}

TEST_CASE("blob construction rejects mismatched dims") {
    const std::vector<float> v{1, 2, 3};
    CHECK_THROWS_AS((void)io::Blob::from_f32("x", {2, 2}, v), std::invalid_argument);
    CHECK_THROWS_AS((void)io::Blob::from_f32("x", {0, 3}, v), std::invalid_argument);
}

TEST_CASE("duplicate and missing blob names are rejected") {
    io::Container c;
    const std::vector<float> v{1};
    c.add(io::Blob::from_f32("a", {1}, v));
    CHECK_THROWS_AS(c.add(io::Blob::from_f32("a", {1}, v)), std::invalid_argument);
    CHECK(c.has("a"));
    CHECK_FALSE(c.has("b"));
    CHECK_THROWS_WITH_AS((void)c.blob("b"), "missing blob b", std::runtime_error);
}

TEST_CASE("typed views enforce the stored dtype") {
    const std::vector<float> v{1, 2};
    const auto b = io::Blob::from_f32("x", {2}, v);
    CHECK(b.f32().size() == 2);
    CHECK_THROWS_AS((void)b.f64(), std::runtime_error);
    CHECK_THROWS_AS((void)b.i32(), std::runtime_error);
}

TEST_CASE("flipped payload byte fails the checksum") {
    const auto path = tmp_path("corrupt.stdc");
    io::save_container(path, sample_container());
    auto bytes = slurp(path);
    bytes[bytes.size() / 2] ^= 0x40;
    dump(path, bytes);
    CHECK_THROWS_WITH_AS((void)io::load_container(path), (path + ": checksum mismatch").c_str(),
                         std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("truncated file is reported as truncated or corrupt") {
    const auto path = tmp_path("trunc.stdc");
    io::save_container(path, sample_container());
    auto bytes = slurp(path);
    bytes.resize(bytes.size() - 9);
    dump(path, bytes);
    // the cut lands mid-payload so the trailing checksum cannot match
    CHECK_THROWS_AS((void)io::load_container(path), std::runtime_error);
    bytes.resize(8);
    dump(path, bytes);
    CHECK_THROWS_WITH_AS((void)io::load_container(path), (path + ": truncated container").c_str(),
                         std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("bad magic is detected even with a valid checksum") {
    const auto path = tmp_path("magic.stdc");
    io::save_container(path, sample_container());
    auto bytes = slurp(path);
    patch_and_reseal(bytes, 0, 'X');
    dump(path, bytes);
    CHECK_THROWS_WITH_AS((void)io::load_container(path),
                         (path + ": bad magic, not a container file").c_str(), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("future format versions are refused") {
    const auto path = tmp_path("ver.stdc");
    io::save_container(path, sample_container());
    auto bytes = slurp(path);
    patch_and_reseal(bytes, 4, 9);  // version field sits right after the magic
    dump(path, bytes);
    CHECK_THROWS_WITH_AS((void)io::load_container(path),
                         (path + ": unsupported container version 9").c_str(), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("kind check on load") {
    const auto path = tmp_path("kind.stdc");
    io::save_container(path, sample_container());
    CHECK(io::load_container(path, io::kind_dataset).kind == io::kind_dataset);
    CHECK_THROWS_AS((void)io::load_container(path, io::kind_checkpoint), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("missing file reports cleanly") {
    CHECK_THROWS_AS((void)io::load_container("/tmp/stdrive_no_such_file.stdc"), std::runtime_error);
}

TEST_CASE("manifest set replaces and appends") {
    std::string m;
    io::manifest_set(m, "a", "1");
    io::manifest_set(m, "b", "two");
    CHECK(m == "a=1\nb=two\n");
    io::manifest_set(m, "a", "3");
    CHECK(io::manifest_get(m, "a") == "3");
    CHECK(io::manifest_get(m, "b") == "two");
    CHECK(m == "a=3\nb=two\n");
}
