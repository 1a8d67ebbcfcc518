// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ddlab/data.hpp"
#include "ddlab/nn/model.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ddlab::probes {

// Penultimate-layer activations, one row per sample.
struct FeatureMatrix {
    std::size_t dim = 0;
    std::vector<double> values;            // rows * dim, row-major
    std::vector<std::size_t> sample_ids;   // dataset row of each feature row
    Split split = Split::train;
    std::string model;                     // e.g. "simplefc k=10"

    std::size_t rows() const noexcept { return sample_ids.size(); }
    std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
    FeatureMatrix select(std::span<const std::size_t> rows) const;
    void validate() const;
};

// Eval-mode features for every sample of ds, in dataset order.
FeatureMatrix extract_features(const nn::Model& model, const LabeledDataset& ds, std::size_t batch_size = 256);

// Majority vote among the k Euclidean-nearest reference rows.
//   - distance ties: lower reference row wins
//   - vote ties: the tied class whose member is nearest wins
//   - a reference row with the same split and sample id as the query is skipped
std::vector<Label> knn_predict(const FeatureMatrix& query, const FeatureMatrix& reference,
                               std::span<const Label> reference_labels, std::size_t k);

enum class KpMode { in_sample, out_of_sample };

const char* to_string(KpMode m);
KpMode parse_kp_mode(const std::string& s);

struct KpReport {
    double kp = 0;
    std::size_t k_neighbors = 5;
    std::size_t matched_count = 0;
    std::size_t noisy_count = 0;  // denominator: flagged train rows, or test rows out of sample
    KpMode mode = KpMode::in_sample;
    std::string metric = "euclidean";
};

// in_sample: flagged train rows queried against the clean train rows.
// out_of_sample: test rows queried against the clean train rows.
// A query counts as matched when the vote equals its true label.
KpReport compute_kp(const FeatureMatrix& train_features, const LabeledDataset& noisy_train, std::size_t k,
                    KpMode mode, const FeatureMatrix* test_features = nullptr,
                    const LabeledDataset* test_ds = nullptr);

KpReport compute_kp(const nn::Model& model, const LabeledDataset& noisy_train, std::size_t k = 5,
                    KpMode mode = KpMode::in_sample, const LabeledDataset* test_ds = nullptr);

struct TsneOptions {
    double perplexity = 30.0;
    std::size_t iterations = 1000;
    std::uint64_t seed = 0;
    double learning_rate = 200.0;
    double early_exaggeration = 12.0;
    std::size_t exaggeration_iterations = 250;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    std::size_t momentum_switch = 250;
    double entropy_tolerance = 1e-5;
    std::size_t max_bisection_steps = 50;
};

struct TsneResult {
    std::vector<double> embedding;  // rows * 2
    std::vector<double> kl;         // objective before each update, against the unexaggerated affinities
    std::size_t rows = 0;
};

// Exact t-SNE with bandwidths fitted per point by bisection.
TsneResult tsne(const FeatureMatrix& features, const TsneOptions& options = {});

// Uniform rows without replacement, ascending.
std::vector<std::size_t> sample_for_tsne(const LabeledDataset& ds, std::size_t n, std::uint64_t seed);

// Header text + little-endian binary row block.
void save_features(const FeatureMatrix& f, const std::filesystem::path& path);
FeatureMatrix load_features(const std::filesystem::path& path);
void save_features_csv(const FeatureMatrix& f, const std::filesystem::path& path);

// #schema=ddlab.embedding.v1, then sample_id,x,y,true_label,assigned_label,is_noisy
void save_embedding_csv(const TsneResult& r, const FeatureMatrix& f, const LabeledDataset& ds,
                        const std::filesystem::path& path);

} // namespace ddlab::probes
