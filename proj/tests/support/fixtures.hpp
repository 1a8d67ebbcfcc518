// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ddlab/data.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ddlab::testing {

class TempDir {
public:
    explicit TempDir(const std::string& tag = "ddlab");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// Raw 8-bit images as they sit in the dataset files.
struct RawImages {
    std::size_t channels = 1, height = 28, width = 28;
    std::vector<std::uint8_t> pixels;  // n * c * h * w
    std::vector<std::uint8_t> labels;
    std::size_t size() const { return labels.size(); }
};

// Each class has a fixed random binary prototype; samples flip a fraction of
// its pixels and add jitter. Learnable by tiny models.
RawImages synthetic_images(std::size_t n, std::size_t channels, std::size_t height, std::size_t width,
                           std::uint64_t seed, std::size_t classes = 10, double flip = 0.08);

void write_idx(const std::filesystem::path& dir, const std::string& prefix, const RawImages& raw, bool gzip);
void write_cifar_batches(const std::filesystem::path& dir, const RawImages& train, const RawImages& test);

// 28x28 single-channel fixture in MNIST file layout.
void write_mnist_fixture(const std::filesystem::path& dir, std::size_t n_train, std::size_t n_test,
                         std::uint64_t seed, bool gzip = false);
// 32x32 three-channel fixture in CIFAR-10 batch layout.
void write_cifar_fixture(const std::filesystem::path& dir, std::size_t n_train, std::size_t n_test,
                         std::uint64_t seed);

// In-memory dataset with MNIST-style scaling, for tests that skip file I/O.
LabeledDataset synthetic_dataset(std::size_t n, std::size_t channels, std::size_t height, std::size_t width,
                                 std::uint64_t seed, Split split = Split::train, std::size_t classes = 10);

std::string slurp(const std::filesystem::path& p);

// Runs the CLI binary with the given argument string; stdout and stderr
// land in files under dir. Returns the exit code.
struct CliResult {
    int code = -1;
    std::string out, err;
};
CliResult run_cli(const std::string& args, const std::filesystem::path& dir, const std::string& env = "");

} // namespace ddlab::testing
