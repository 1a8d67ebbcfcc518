// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"

#include "ddlab/rng.hpp"

#include <zlib.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#ifndef DDLAB_CLI_PATH
#define DDLAB_CLI_PATH "ddlab"
#endif

namespace ddlab::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

RawImages synthetic_images(std::size_t n, std::size_t channels, std::size_t height, std::size_t width,
                           std::uint64_t seed, std::size_t classes, double flip) {
    const std::size_t d = channels * height * width;
    // prototypes depend on the geometry only, so train and test agree
    Rng proto_rng(derive_seed(0xfeed, d, classes));
    std::vector<std::uint8_t> protos(classes * d);
    for (auto& v : protos) v = proto_rng.uniform01() < 0.3 ? 1 : 0;

    Rng rng(seed);
    RawImages raw;
    raw.channels = channels;
    raw.height = height;
    raw.width = width;
    raw.pixels.resize(n * d);
    raw.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::uint8_t>(rng.uniform_index(classes));
        raw.labels[i] = c;
        for (std::size_t j = 0; j < d; ++j) {
            bool on = protos[c * d + j];
            if (rng.uniform01() < flip) on = !on;
            const int base = on ? 200 : 20;
            raw.pixels[i * d + j] = static_cast<std::uint8_t>(base + static_cast<int>(rng.uniform_index(40)));
        }
    }
    return raw;
}

namespace {

void put_be32(std::string& s, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void write_bytes(const fs::path& p, const std::string& bytes, bool gzip) {
    if (gzip) {
        gzFile f = gzopen((p.string() + ".gz").c_str(), "wb");
        if (!f) throw std::runtime_error("cannot write " + p.string());
        gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
        gzclose(f);
    } else {
        std::ofstream o(p, std::ios::binary);
        o.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
}

} // namespace

void write_idx(const fs::path& dir, const std::string& prefix, const RawImages& raw, bool gzip) {
    fs::create_directories(dir);
    std::string img;
    put_be32(img, 0x00000803);
    put_be32(img, static_cast<std::uint32_t>(raw.size()));
    put_be32(img, static_cast<std::uint32_t>(raw.height));
    put_be32(img, static_cast<std::uint32_t>(raw.width));
    img.append(raw.pixels.begin(), raw.pixels.end());
    write_bytes(dir / (prefix + "-images-idx3-ubyte"), img, gzip);
    std::string lab;
    put_be32(lab, 0x00000801);
    put_be32(lab, static_cast<std::uint32_t>(raw.size()));
    lab.append(raw.labels.begin(), raw.labels.end());
    write_bytes(dir / (prefix + "-labels-idx1-ubyte"), lab, gzip);
}

void write_cifar_batches(const fs::path& dir, const RawImages& train, const RawImages& test) {
    const fs::path root = dir / "cifar-10-batches-bin";
    fs::create_directories(root);
    const std::size_t d = train.channels * train.height * train.width;
    auto record = [&](std::string& s, const RawImages& r, std::size_t i) {
        s.push_back(static_cast<char>(r.labels[i]));
        s.append(r.pixels.begin() + static_cast<std::ptrdiff_t>(i * d),
                 r.pixels.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
    };
    for (std::size_t b = 0; b < 5; ++b) {
        std::string s;
        for (std::size_t i = b * train.size() / 5; i < (b + 1) * train.size() / 5; ++i) record(s, train, i);
        write_bytes(root / ("data_batch_" + std::to_string(b + 1) + ".bin"), s, false);
    }
    std::string s;
    for (std::size_t i = 0; i < test.size(); ++i) record(s, test, i);
    write_bytes(root / "test_batch.bin", s, false);
}

void write_mnist_fixture(const fs::path& dir, std::size_t n_train, std::size_t n_test, std::uint64_t seed,
                         bool gzip) {
    write_idx(dir, "train", synthetic_images(n_train, 1, 28, 28, derive_seed(seed, 1)), gzip);
    write_idx(dir, "t10k", synthetic_images(n_test, 1, 28, 28, derive_seed(seed, 2)), gzip);
}

void write_cifar_fixture(const fs::path& dir, std::size_t n_train, std::size_t n_test, std::uint64_t seed) {
    write_cifar_batches(dir, synthetic_images(n_train, 3, 32, 32, derive_seed(seed, 1)),
                        synthetic_images(n_test, 3, 32, 32, derive_seed(seed, 2)));
}

LabeledDataset synthetic_dataset(std::size_t n, std::size_t channels, std::size_t height, std::size_t width,
                                 std::uint64_t seed, Split split, std::size_t classes) {
    const RawImages raw = synthetic_images(n, channels, height, width, seed, classes);
    LabeledDataset ds;
    ds.name = "synthetic";
    ds.split = split;
    ds.class_count = 10;
    ds.images = Tensor({n, channels, height, width});
    for (std::size_t i = 0; i < raw.pixels.size(); ++i) ds.images[i] = static_cast<Real>(raw.pixels[i] / 255.0);
    for (std::size_t i = 0; i < n; ++i) {
        ds.true_labels.push_back(raw.labels[i]);
        ds.assigned_labels.push_back(raw.labels[i]);
        ds.noise_mask.push_back(0);
        ds.source_index.push_back(i);
    }
    return ds;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

CliResult run_cli(const std::string& args, const fs::path& dir, const std::string& env) {
    static std::atomic<int> counter{0};
    const int id = counter.fetch_add(1);
    const fs::path out = dir / ("cli" + std::to_string(id) + ".out");
    const fs::path err = dir / ("cli" + std::to_string(id) + ".err");
    const std::string cmd = (env.empty() ? "" : env + " ") + "'" + DDLAB_CLI_PATH + "' " + args + " >'" +
                            out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

} // namespace ddlab::testing
