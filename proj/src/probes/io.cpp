// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddlab/probes.hpp"

#include <cstring>
#include <sstream>

namespace ddlab::probes {

namespace fs = std::filesystem;

// Text header, one "key value" per line, terminated by "data\n"; then
// rows * u64 sample ids and rows * dim f64 values, little-endian.

namespace {

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::string& in, std::size_t off) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<unsigned char>(in[off + i])} << (8 * i);
    return v;
}

} // namespace

void save_features(const FeatureMatrix& f, const fs::path& path) {
    f.validate();
    std::ostringstream header;
    header << "ddlab-features v1\n"
           << "rows " << f.rows() << '\n'
           << "dim " << f.dim << '\n'
           << "split " << to_string(f.split) << '\n'
           << "model " << (f.model.empty() ? "-" : f.model) << '\n'
           << "endian little\n"
           << "data\n";
    std::string out = header.str();
    out.reserve(out.size() + 8 * (f.rows() + f.values.size()));
    for (auto id : f.sample_ids) put_u64(out, id);
    for (double v : f.values) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        put_u64(out, bits);
    }
    write_file_atomic(path, out);
}

FeatureMatrix load_features(const fs::path& path) {
    const std::string data = read_text_file(path);
    std::size_t pos = 0;
    auto next_line = [&]() {
        const auto nl = data.find('\n', pos);
        if (nl == std::string::npos) throw DataError(path.string() + ": truncated feature header");
        std::string line = data.substr(pos, nl - pos);
        pos = nl + 1;
        return line;
    };
    if (next_line() != "ddlab-features v1") throw DataError(path.string() + ": not a ddlab feature file (v1)");
    FeatureMatrix f;
    std::size_t rows = 0;
    for (;;) {
        const std::string line = next_line();
        if (line == "data") break;
        const auto sp = line.find(' ');
        const std::string key = line.substr(0, sp), value = sp == std::string::npos ? "" : line.substr(sp + 1);
        if (key == "rows") rows = std::stoull(value);
        else if (key == "dim") f.dim = std::stoull(value);
        else if (key == "split") f.split = parse_split(value);
        else if (key == "model") f.model = value == "-" ? "" : value;
        else if (key == "endian" && value != "little") throw DataError(path.string() + ": unsupported endianness");
    }
    if (data.size() - pos != 8 * (rows + rows * f.dim)) throw DataError(path.string() + ": feature block size mismatch");
    f.sample_ids.resize(rows);
    for (std::size_t i = 0; i < rows; ++i, pos += 8) f.sample_ids[i] = get_u64(data, pos);
    f.values.resize(rows * f.dim);
    for (auto& v : f.values) {
        const std::uint64_t bits = get_u64(data, pos);
        std::memcpy(&v, &bits, 8);
        pos += 8;
    }
    f.validate();
    return f;
}

void save_features_csv(const FeatureMatrix& f, const fs::path& path) {
    std::string out = "sample_id";
    for (std::size_t d = 0; d < f.dim; ++d) out += ",f" + std::to_string(d);
    out += '\n';
    for (std::size_t i = 0; i < f.rows(); ++i) {
        out += std::to_string(f.sample_ids[i]);
        for (double v : f.row(i)) out += ',' + format_real(v);
        out += '\n';
    }
    write_file_atomic(path, out);
}

void save_embedding_csv(const TsneResult& r, const FeatureMatrix& f, const LabeledDataset& ds, const fs::path& path) {
    if (r.rows != f.rows()) throw ShapeError("embedding and feature rows differ");
    std::string out = "#schema=ddlab.embedding.v1\nsample_id,x,y,true_label,assigned_label,is_noisy\n";
    for (std::size_t i = 0; i < r.rows; ++i) {
        const std::size_t id = f.sample_ids[i];
        if (id >= ds.size()) throw ShapeError("embedding sample id outside the dataset");
        out += std::to_string(id) + ',' + format_real(r.embedding[2 * i]) + ',' + format_real(r.embedding[2 * i + 1]) +
               ',' + std::to_string(ds.true_labels[id]) + ',' + std::to_string(ds.assigned_labels[id]) + ',' +
               (ds.noise_mask[id] ? "1" : "0") + '\n';
    }
    write_file_atomic(path, out);
}

} // namespace ddlab::probes
