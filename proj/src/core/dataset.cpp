#include "dataset.hpp"

#include <fstream>
#include <map>
#include <stdexcept>

namespace stdrive::data {

void Dataset::validate() const {
    if (T < 1 || H < 1 || W < 1) throw std::invalid_argument("dataset: empty geometry");
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        const auto& s = seqs[i];
        if (s.pixels.size() != pixels_per_seq())
            throw std::invalid_argument("dataset: sequence " + std::to_string(i) + " has wrong pixel count");
        if (!s.maps.empty() && s.maps.size() != maps_per_seq())
            throw std::invalid_argument("dataset: sequence " + std::to_string(i) + " has wrong map count");
        if (s.label != 0 && s.label != 1)
            throw std::invalid_argument("dataset: sequence " + std::to_string(i) + " has label outside {0,1}");
    }
}

void save_dataset(const std::string& path, const Dataset& ds) {
    ds.validate();
    const auto n = static_cast<std::int64_t>(ds.seqs.size());
    if (n == 0) throw std::invalid_argument("dataset: refusing to save an empty dataset");

    io::Container c;
    c.kind = io::kind_dataset;
    io::manifest_set(c.manifest, "kind", ds.kind == DatasetKind::Classification ? "classification" : "steering");
    io::manifest_set(c.manifest, "sequences", std::to_string(n));
    io::manifest_set(c.manifest, "frames_per_sequence", std::to_string(ds.T));
    io::manifest_set(c.manifest, "height", std::to_string(ds.H));
    io::manifest_set(c.manifest, "width", std::to_string(ds.W));

    std::vector<std::uint8_t> pixels;
    pixels.reserve(static_cast<std::size_t>(n) * ds.pixels_per_seq());
    std::vector<std::int32_t> labels;
    std::vector<float> steering;
    std::vector<std::int32_t> domain_idx;
    std::map<std::string, std::int32_t> domain_ids;
    std::vector<float> maps;
    std::vector<std::int32_t> map_index;
    for (std::size_t i = 0; i < ds.seqs.size(); ++i) {
        const auto& s = ds.seqs[i];
        pixels.insert(pixels.end(), s.pixels.begin(), s.pixels.end());
        labels.push_back(s.label);
        steering.push_back(s.steering_deg);
        auto [it, fresh] = domain_ids.try_emplace(s.domain_id, static_cast<std::int32_t>(domain_ids.size()));
        (void)fresh;
        domain_idx.push_back(it->second);
        if (!s.maps.empty()) {
            map_index.push_back(static_cast<std::int32_t>(i));
            maps.insert(maps.end(), s.maps.begin(), s.maps.end());
        }
    }
    std::string domains;
    std::vector<std::string> ordered(domain_ids.size());
    for (const auto& [name, idx] : domain_ids) ordered[static_cast<std::size_t>(idx)] = name;
    for (const auto& name : ordered) {
        if (!domains.empty()) domains += ',';
        domains += name;
    }
    io::manifest_set(c.manifest, "domains", domains);

    c.add(io::Blob::from_u8("pixels", {n, ds.T, Dataset::channels, ds.H, ds.W}, pixels));
    c.add(io::Blob::from_i32("labels", {n}, labels));
    if (ds.kind == DatasetKind::Steering) c.add(io::Blob::from_f32("steering", {n}, steering));
    c.add(io::Blob::from_i32("domain_idx", {n}, domain_idx));
    if (!map_index.empty()) {
        c.add(io::Blob::from_i32("map_index", {static_cast<std::int64_t>(map_index.size())}, map_index));
        c.add(io::Blob::from_f32("maps",
                                 {static_cast<std::int64_t>(map_index.size()), ds.T, Dataset::map_channels, ds.H, ds.W},
                                 maps));
    }
    io::save_container(path, c);
}

Dataset load_dataset(const std::string& path) {
    io::Container c = io::load_container(path, io::kind_dataset);
    Dataset ds;
    const std::string kind = io::manifest_get(c.manifest, "kind");
    if (kind == "classification")
        ds.kind = DatasetKind::Classification;
    else if (kind == "steering")
        ds.kind = DatasetKind::Steering;
    else
        throw std::runtime_error(path + ": unknown dataset kind '" + kind + "'");

    const auto& pixels = c.blob("pixels");
    if (pixels.dims.size() != 5 || pixels.dims[2] != Dataset::channels)
        throw std::runtime_error(path + ": pixels blob has unexpected layout");
    const auto n = static_cast<std::size_t>(pixels.dims[0]);
    ds.T = static_cast<int>(pixels.dims[1]);
    ds.H = static_cast<int>(pixels.dims[3]);
    ds.W = static_cast<int>(pixels.dims[4]);

    auto labels = c.blob("labels").i32();
    auto domain_idx = c.blob("domain_idx").i32();
    if (labels.size() != n || domain_idx.size() != n)
        throw std::runtime_error(path + ": metadata blobs disagree with pixel count");
    std::span<const float> steering;
    if (ds.kind == DatasetKind::Steering) steering = c.blob("steering").f32();

    std::vector<std::string> domains;
    const std::string joined = io::manifest_get(c.manifest, "domains");
    for (std::size_t pos = 0; pos <= joined.size();) {
        std::size_t comma = joined.find(',', pos);
        if (comma == std::string::npos) comma = joined.size();
        domains.push_back(joined.substr(pos, comma - pos));
        pos = comma + 1;
    }

    auto px = pixels.u8();
    const std::size_t per = static_cast<std::size_t>(ds.T) * Dataset::channels * ds.H * ds.W;
    ds.seqs.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& s = ds.seqs[i];
        s.pixels.assign(px.begin() + static_cast<std::ptrdiff_t>(i * per),
                        px.begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
        s.label = labels[i];
        if (ds.kind == DatasetKind::Steering) s.steering_deg = steering[i];
        const auto di = static_cast<std::size_t>(domain_idx[i]);
        if (di >= domains.size()) throw std::runtime_error(path + ": domain index out of range");
        s.domain_id = domains[di];
    }
    if (c.has("map_index")) {
        auto idx = c.blob("map_index").i32();
        auto maps = c.blob("maps").f32();
        const std::size_t mper = ds.maps_per_seq();
        if (maps.size() != idx.size() * mper) throw std::runtime_error(path + ": maps blob size mismatch");
        for (std::size_t m = 0; m < idx.size(); ++m) {
            const auto si = static_cast<std::size_t>(idx[m]);
            if (si >= n) throw std::runtime_error(path + ": map index out of range");
            ds.seqs[si].maps.assign(maps.begin() + static_cast<std::ptrdiff_t>(m * mper),
                                    maps.begin() + static_cast<std::ptrdiff_t>((m + 1) * mper));
        }
    }
    ds.validate();
    return ds;
}

void write_ppm(const std::string& path, const Dataset& ds, std::size_t seq, int frame) {
    if (seq >= ds.seqs.size() || frame < 0 || frame >= ds.T)
        throw std::invalid_argument("write_ppm: sequence or frame out of range");
    const std::size_t plane = static_cast<std::size_t>(ds.H) * ds.W;
    const std::uint8_t* src = ds.seqs[seq].pixels.data() + static_cast<std::size_t>(frame) * 3 * plane;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error(path + ": cannot open for writing");
    f << "P6\n" << ds.W << " " << ds.H << "\n255\n";
    for (std::size_t i = 0; i < plane; ++i) {
        const char rgb[3] = {static_cast<char>(src[i]), static_cast<char>(src[plane + i]),
                             static_cast<char>(src[2 * plane + i])};
        f.write(rgb, 3);
    }
}

}  // namespace stdrive::data
