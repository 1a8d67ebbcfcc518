// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddlab/data.hpp"
#include "ddlab/rng.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ddlab {

namespace fs = std::filesystem;

const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    throw ArgumentError("unknown split '" + s + "'");
}

std::size_t LabeledDataset::noisy_count() const noexcept {
    return static_cast<std::size_t>(std::count(noise_mask.begin(), noise_mask.end(), std::uint8_t{1}));
}

Shape LabeledDataset::sample_shape() const {
    const Shape& s = images.shape();
    return Shape(s.begin() + 1, s.end());
}

void LabeledDataset::validate() const {
    const std::size_t n = true_labels.size();
    if (images.rank() != 4 || images.dim(0) != n || assigned_labels.size() != n || noise_mask.size() != n ||
        source_index.size() != n)
        throw DataError("dataset '" + name + "': per-sample sequences disagree in length");
    for (std::size_t i = 0; i < n; ++i) {
        if (true_labels[i] < 0 || static_cast<std::size_t>(true_labels[i]) >= class_count ||
            assigned_labels[i] < 0 || static_cast<std::size_t>(assigned_labels[i]) >= class_count)
            throw DataError("dataset '" + name + "': label out of range at row " + std::to_string(i));
        if (!noise_mask[i] && assigned_labels[i] != true_labels[i])
            throw DataError("dataset '" + name + "': unflagged row " + std::to_string(i) + " has a changed label");
    }
}

LabeledDataset LabeledDataset::select(std::span<const std::size_t> rows) const {
    LabeledDataset out;
    out.name = name;
    out.split = split;
    out.class_count = class_count;
    out.images = images.gather_rows(rows);
    out.true_labels.reserve(rows.size());
    out.assigned_labels.reserve(rows.size());
    out.noise_mask.reserve(rows.size());
    out.source_index.reserve(rows.size());
    for (auto r : rows) {
        out.true_labels.push_back(true_labels[r]);
        out.assigned_labels.push_back(assigned_labels[r]);
        out.noise_mask.push_back(noise_mask[r]);
        out.source_index.push_back(source_index[r]);
    }
    return out;
}

std::vector<std::uint8_t> read_maybe_gzip(const fs::path& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw DataError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes;
    std::array<std::uint8_t, 1 << 16> buf{};
    for (;;) {
        const int got = gzread(f, buf.data(), static_cast<unsigned>(buf.size()));
        if (got < 0) {
            int errnum = 0;
            std::string msg = gzerror(f, &errnum);
            gzclose(f);
            throw DataError("read error in " + path.string() + ": " + msg);
        }
        if (got == 0) break;
        bytes.insert(bytes.end(), buf.begin(), buf.begin() + got);
    }
    gzclose(f);
    return bytes;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw DataError("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off) {
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
           std::uint32_t{b[off + 3]};
}

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

fs::path find_idx(const fs::path& dir, const std::string& stem) {
    for (const auto& candidate : {stem, stem + ".gz"}) {
        if (fs::exists(dir / candidate)) return dir / candidate;
    }
    // Some mirrors use a dot before "idx".
    std::string dotted = stem;
    if (auto pos = dotted.find("-idx"); pos != std::string::npos) dotted[pos] = '.';
    for (const auto& candidate : {dotted, dotted + ".gz"}) {
        if (fs::exists(dir / candidate)) return dir / candidate;
    }
    throw DataError("missing MNIST file " + (dir / stem).string() + "[.gz]");
}

} // namespace

LabeledDataset load_mnist(const fs::path& dir, Split split) {
    const std::string prefix = split == Split::train ? "train" : "t10k";
    const fs::path image_path = find_idx(dir, prefix + "-images-idx3-ubyte");
    const fs::path label_path = find_idx(dir, prefix + "-labels-idx1-ubyte");
    const auto images = read_maybe_gzip(image_path);
    const auto labels = read_maybe_gzip(label_path);

    if (images.size() < 16) throw DataError("truncated header in " + image_path.string());
    if (labels.size() < 8) throw DataError("truncated header in " + label_path.string());
    if (read_be32(images, 0) != kIdxImagesMagic)
        throw DataError("wrong magic in " + image_path.string() + ": expected 0x00000803");
    if (read_be32(labels, 0) != kIdxLabelsMagic)
        throw DataError("wrong magic in " + label_path.string() + ": expected 0x00000801");

    const std::size_t n = read_be32(images, 4);
    const std::size_t rows = read_be32(images, 8), cols = read_be32(images, 12);
    const std::size_t n_labels = read_be32(labels, 4);
    if (n != n_labels)
        throw DataError("image/label count mismatch: " + std::to_string(n) + " images, " + std::to_string(n_labels) +
                        " labels");
    if (rows != 28 || cols != 28) throw DataError("unexpected MNIST image size in " + image_path.string());
    const std::size_t pix = rows * cols;
    if (images.size() < 16 + n * pix) throw DataError("truncated file " + image_path.string());
    if (labels.size() < 8 + n) throw DataError("truncated file " + label_path.string());

    LabeledDataset ds;
    ds.name = "mnist";
    ds.split = split;
    ds.class_count = 10;
    ds.images = Tensor({n, 1, rows, cols});
    Real* px = ds.images.data();
    for (std::size_t i = 0; i < n * pix; ++i) px[i] = static_cast<Real>(images[16 + i]) / Real{255};
    ds.true_labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t l = labels[8 + i];
        if (l >= 10) throw DataError("label byte " + std::to_string(l) + " out of range in " + label_path.string());
        ds.true_labels[i] = l;
    }
    ds.assigned_labels = ds.true_labels;
    ds.noise_mask.assign(n, 0);
    ds.source_index.resize(n);
    for (std::size_t i = 0; i < n; ++i) ds.source_index[i] = i;
    return ds;
}

namespace {

constexpr std::size_t kCifarRecord = 3073;
constexpr std::size_t kCifarPixels = 3072;

fs::path cifar_root(const fs::path& dir) {
    if (fs::exists(dir / "test_batch.bin") || fs::exists(dir / "data_batch_1.bin")) return dir;
    if (fs::exists(dir / "cifar-10-batches-bin")) return dir / "cifar-10-batches-bin";
    throw DataError("no CIFAR-10 binary batches under " + dir.string());
}

} // namespace

LabeledDataset load_cifar10(const fs::path& dir, Split split) {
    const fs::path root = cifar_root(dir);
    std::vector<fs::path> files;
    if (split == Split::train) {
        for (int b = 1; b <= 5; ++b) files.push_back(root / ("data_batch_" + std::to_string(b) + ".bin"));
    } else {
        files.push_back(root / "test_batch.bin");
    }

    std::vector<std::uint8_t> all;
    for (const auto& f : files) {
        if (!fs::exists(f)) throw DataError("missing CIFAR-10 batch " + f.string());
        auto bytes = read_maybe_gzip(f);
        if (bytes.size() % kCifarRecord != 0)
            throw DataError(f.string() + ": size " + std::to_string(bytes.size()) +
                            " is not a multiple of the 3073-byte record");
        all.insert(all.end(), bytes.begin(), bytes.end());
    }
    const std::size_t n = all.size() / kCifarRecord;

    LabeledDataset ds;
    ds.name = "cifar10";
    ds.split = split;
    ds.class_count = 10;
    ds.images = Tensor({n, 3, 32, 32});
    ds.true_labels.resize(n);
    Real* px = ds.images.data();
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* rec = all.data() + i * kCifarRecord;
        if (rec[0] >= 10) throw DataError("CIFAR-10 label byte " + std::to_string(rec[0]) + " at record " +
                                          std::to_string(i));
        ds.true_labels[i] = rec[0];
        for (std::size_t j = 0; j < kCifarPixels; ++j)
            px[i * kCifarPixels + j] = (static_cast<Real>(rec[1 + j]) / Real{255} - Real(0.5)) / Real(0.5);
    }
    ds.assigned_labels = ds.true_labels;
    ds.noise_mask.assign(n, 0);
    ds.source_index.resize(n);
    for (std::size_t i = 0; i < n; ++i) ds.source_index[i] = i;
    return ds;
}

LabeledDataset load_dataset(const std::string& name, const fs::path& dir, Split split) {
    if (name == "mnist") return load_mnist(dir, split);
    if (name == "cifar10") return load_cifar10(dir, split);
    throw ArgumentError("unknown dataset '" + name + "' (expected mnist or cifar10)");
}

LabeledDataset subsample(const LabeledDataset& ds, std::size_t n, std::uint64_t seed) {
    if (n > ds.size())
        throw ArgumentError("subsample size " + std::to_string(n) + " exceeds dataset size " +
                            std::to_string(ds.size()));
    if (ds.noise_injected()) throw ArgumentError("subsample must run before label-noise injection");
    if (n == ds.size()) return ds;
    Rng rng(derive_seed(seed, 0x5u));
    auto rows = rng.sample_without_replacement(ds.size(), n);
    std::sort(rows.begin(), rows.end());
    return ds.select(rows);
}

} // namespace ddlab
