// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddlab/data.hpp"
#include "ddlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ddlab {

namespace fs = std::filesystem;

std::size_t noisy_count_for(double p, std::size_t n) {
    if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("noise ratio p must lie in [0, 1], got " + format_real(p));
    // The slack absorbs representation error in products such as 0.29 * 100.
    return std::min(n, static_cast<std::size_t>(std::floor(p * static_cast<double>(n) + 1e-9)));
}

std::pair<LabeledDataset, NoiseMap> inject_label_noise(const LabeledDataset& ds, double p, std::uint64_t seed) {
    const std::size_t flagged = noisy_count_for(p, ds.size());
    if (ds.split != Split::train) throw ArgumentError("label noise is only injected into a train split");
    if (ds.noise_injected()) throw ArgumentError("dataset already carries injected label noise");

    // Two independent streams: which rows, then which labels.
    Rng pick(derive_seed(seed, 0x1u));
    Rng draw(derive_seed(seed, 0x2u));
    auto rows = pick.sample_without_replacement(ds.size(), flagged);
    std::sort(rows.begin(), rows.end());

    NoiseMap map;
    map.seed = seed;
    map.p = p;
    map.dataset_size = ds.size();
    map.class_count = ds.class_count;
    map.dataset = ds.name;
    map.entries.reserve(rows.size());
    for (auto r : rows) {
        const auto label = static_cast<Label>(draw.uniform_index(ds.class_count));
        map.entries.push_back({r, ds.true_labels[r], label});
    }
    return {apply_noise_map(ds, map), std::move(map)};
}

LabeledDataset apply_noise_map(const LabeledDataset& clean, const NoiseMap& map) {
    if (clean.noise_injected()) throw ArgumentError("noise map must be applied to a clean dataset");
    if (map.dataset_size != clean.size())
        throw DataError("noise map was drawn for " + std::to_string(map.dataset_size) + " samples, dataset has " +
                        std::to_string(clean.size()));
    if (map.class_count != clean.class_count) throw DataError("noise map class count does not match dataset");
    LabeledDataset out = clean;
    for (const auto& e : map.entries) {
        if (e.index >= clean.size())
            throw DataError("noise map index " + std::to_string(e.index) + " out of range for dataset of " +
                            std::to_string(clean.size()));
        if (clean.true_labels[e.index] != e.true_label)
            throw DataError("noise map true label disagrees with dataset at index " + std::to_string(e.index));
        if (e.assigned_label < 0 || static_cast<std::size_t>(e.assigned_label) >= clean.class_count)
            throw DataError("noise map assigned label out of range at index " + std::to_string(e.index));
        if (out.noise_mask[e.index]) throw DataError("duplicate noise map index " + std::to_string(e.index));
        out.noise_mask[e.index] = 1;
        out.assigned_labels[e.index] = e.assigned_label;
    }
    return out;
}

namespace {

constexpr const char* kHeader = "ddlab-noise-map";

std::string body_text(const NoiseMap& m) {
    std::ostringstream os;
    os << kHeader << '\n'
       << "format_version " << NoiseMap::kFormatVersion << '\n'
       << "convention " << m.convention << '\n'
       << "dataset " << (m.dataset.empty() ? "-" : m.dataset) << '\n'
       << "seed " << m.seed << '\n'
       << "subsample_seed " << m.subsample_seed << '\n'
       << "p " << format_real(m.p) << '\n'
       << "n " << m.dataset_size << '\n'
       << "class_count " << m.class_count << '\n'
       << "entries " << m.entries.size() << '\n'
       << "index,true,assigned\n";
    for (const auto& e : m.entries) os << e.index << ',' << e.true_label << ',' << e.assigned_label << '\n';
    return os.str();
}

template <typename T>
T parse_number(const std::string& s, const char* field) {
    std::istringstream is(s);
    T v{};
    is >> v;
    if (!is || !is.eof()) throw DataError(std::string("noise map: bad value for ") + field + ": '" + s + "'");
    return v;
}

} // namespace

std::string NoiseMap::digest() const { return hex64(fnv1a64(body_text(*this))); }

std::string serialize_noise_map(const NoiseMap& map) {
    const std::string body = body_text(map);
    return body + "checksum fnv1a64:" + hex64(fnv1a64(body)) + '\n';
}

NoiseMap parse_noise_map(const std::string& text) {
    const auto cpos = text.rfind("checksum fnv1a64:");
    if (cpos == std::string::npos || (cpos > 0 && text[cpos - 1] != '\n'))
        throw DataError("noise map: missing checksum line");
    const std::string body = text.substr(0, cpos);
    std::string stored = text.substr(cpos + 17);
    while (!stored.empty() && (stored.back() == '\n' || stored.back() == '\r')) stored.pop_back();
    if (stored != hex64(fnv1a64(body))) throw DataError("noise map: checksum failure");

    std::istringstream in(body);
    std::string line;
    if (!std::getline(in, line) || line != kHeader) throw DataError("noise map: not a ddlab noise map");

    NoiseMap m;
    std::size_t declared_entries = 0;
    auto field = [&](const char* key) -> std::string {
        if (!std::getline(in, line)) throw DataError(std::string("noise map: missing ") + key);
        const std::string prefix = std::string(key) + ' ';
        if (line.rfind(prefix, 0) != 0) throw DataError(std::string("noise map: expected ") + key + ", got '" + line + "'");
        return line.substr(prefix.size());
    };
    const int version = parse_number<int>(field("format_version"), "format_version");
    if (version != NoiseMap::kFormatVersion)
        throw DataError("noise map: unsupported format version " + std::to_string(version));
    m.convention = field("convention");
    m.dataset = field("dataset");
    if (m.dataset == "-") m.dataset.clear();
    m.seed = parse_number<std::uint64_t>(field("seed"), "seed");
    m.subsample_seed = parse_number<std::uint64_t>(field("subsample_seed"), "subsample_seed");
    m.p = std::strtod(field("p").c_str(), nullptr);
    m.dataset_size = parse_number<std::size_t>(field("n"), "n");
    m.class_count = parse_number<std::size_t>(field("class_count"), "class_count");
    declared_entries = parse_number<std::size_t>(field("entries"), "entries");
    if (!std::getline(in, line) || line != "index,true,assigned") throw DataError("noise map: missing column header");

    m.entries.reserve(declared_entries);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        NoiseEntry e;
        char c1 = 0, c2 = 0;
        std::istringstream ls(line);
        if (!(ls >> e.index >> c1 >> e.true_label >> c2 >> e.assigned_label) || c1 != ',' || c2 != ',')
            throw DataError("noise map: malformed entry '" + line + "'");
        m.entries.push_back(e);
    }
    if (m.entries.size() != declared_entries) throw DataError("noise map: entry count mismatch");
    for (std::size_t i = 1; i < m.entries.size(); ++i)
        if (m.entries[i].index <= m.entries[i - 1].index)
            throw DataError("noise map: indices must be distinct and ascending");
    return m;
}

void save_noise_map(const NoiseMap& map, const fs::path& path) { write_file_atomic(path, serialize_noise_map(map)); }

NoiseMap load_noise_map(const fs::path& path) { return parse_noise_map(read_text_file(path)); }

} // namespace ddlab
