// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ddlab/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace ddlab {

enum class Split { train, test };

const char* to_string(Split s);
Split parse_split(const std::string& s);

using Label = std::int32_t;

// Images plus clean and training labels. Every per-sample vector has one
// entry per leading row of `images`.
struct LabeledDataset {
    std::string name;                       // "mnist", "cifar10", or a test fixture tag
    Split split = Split::train;
    Tensor images;                          // (N, C, H, W)
    std::vector<Label> true_labels;
    std::vector<Label> assigned_labels;     // training targets, possibly noisy
    std::vector<std::uint8_t> noise_mask;   // 1 = flagged as noisy
    std::vector<std::size_t> source_index;  // row index in the file the sample came from
    std::size_t class_count = 10;

    std::size_t size() const noexcept { return true_labels.size(); }
    std::size_t noisy_count() const noexcept;
    bool noise_injected() const noexcept { return noisy_count() > 0; }
    Shape sample_shape() const;

    // Throws DataError when the per-sample vectors disagree in length or labels are out of range.
    void validate() const;

    // Subset in the given row order.
    LabeledDataset select(std::span<const std::size_t> rows) const;
};

// Reads the four IDX files (optionally .gz). Pixels are scaled to [0, 1].
LabeledDataset load_mnist(const std::filesystem::path& dir, Split split);

// Reads the CIFAR-10 binary batches; each channel normalized as (x - 0.5) / 0.5.
LabeledDataset load_cifar10(const std::filesystem::path& dir, Split split);

// Dispatch on "mnist" / "cifar10".
LabeledDataset load_dataset(const std::string& name, const std::filesystem::path& dir, Split split);

// Uniform random subset of n rows without replacement, rows kept in ascending
// original order. Must run before noise injection.
LabeledDataset subsample(const LabeledDataset& ds, std::size_t n, std::uint64_t seed);

// Number of samples flagged for noise ratio p on N samples.
std::size_t noisy_count_for(double p, std::size_t n);

struct NoiseEntry {
    std::size_t index = 0;
    Label true_label = 0;
    Label assigned_label = 0;

    friend bool operator==(const NoiseEntry&, const NoiseEntry&) = default;
};

// Persistent record of one label-noise draw. Indices refer to rows of the
// (subsampled) training set the noise was drawn for.
struct NoiseMap {
    static constexpr int kFormatVersion = 1;
    static constexpr const char* kInclusiveUniform = "inclusive_uniform";

    std::uint64_t seed = 0;
    double p = 0.0;
    std::size_t dataset_size = 0;
    std::size_t class_count = 10;
    std::string convention = kInclusiveUniform;
    std::string dataset;               // dataset name, informational
    std::uint64_t subsample_seed = 0;  // seed used to pick the rows, informational
    std::vector<NoiseEntry> entries;   // ascending by index

    // Content digest of the canonical text form.
    std::string digest() const;

    friend bool operator==(const NoiseMap&, const NoiseMap&) = default;
};

// Flags exactly noisy_count_for(p, N) rows and draws each flagged row's label
// uniformly over all classes (the draw may reproduce the true label).
std::pair<LabeledDataset, NoiseMap> inject_label_noise(const LabeledDataset& ds, double p, std::uint64_t seed);

// Re-applies a stored map to the clean dataset it was drawn for.
LabeledDataset apply_noise_map(const LabeledDataset& clean, const NoiseMap& map);

std::string serialize_noise_map(const NoiseMap& map);
NoiseMap parse_noise_map(const std::string& text);
void save_noise_map(const NoiseMap& map, const std::filesystem::path& path);
NoiseMap load_noise_map(const std::filesystem::path& path);

// Reads a whole file, transparently gunzipping. Throws DataError.
std::vector<std::uint8_t> read_maybe_gzip(const std::filesystem::path& path);

// Writes via a temporary sibling file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

} // namespace ddlab
