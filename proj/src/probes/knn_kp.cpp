// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddlab/kernels.hpp"
#include "ddlab/probes.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace ddlab::probes {

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> rows) const {
    FeatureMatrix out;
    out.dim = dim;
    out.split = split;
    out.model = model;
    out.values.reserve(rows.size() * dim);
    for (auto r : rows) {
        if (r >= this->rows()) throw ShapeError("feature row out of range");
        const auto src = row(r);
        out.values.insert(out.values.end(), src.begin(), src.end());
        out.sample_ids.push_back(sample_ids[r]);
    }
    return out;
}

void FeatureMatrix::validate() const {
    if (values.size() != rows() * dim) throw ShapeError("feature matrix: row count does not match id count");
    for (double v : values)
        if (!std::isfinite(v)) throw NumericError("feature matrix contains a non-finite value");
}

FeatureMatrix extract_features(const nn::Model& model, const LabeledDataset& ds, std::size_t batch_size) {
    if (ds.size() > 0 && ds.sample_shape() != model.spec().input_shape)
        throw ShapeError("dataset samples " + shape_to_string(ds.sample_shape()) + " do not fit model input " +
                         shape_to_string(model.spec().input_shape));
    FeatureMatrix f;
    f.dim = model.feature_dim();
    f.split = ds.split;
    f.model = std::string(to_string(model.spec().family)) + " k=" + std::to_string(model.spec().width);
    f.values.reserve(ds.size() * f.dim);
    for (std::size_t begin = 0; begin < ds.size(); begin += batch_size) {
        const std::size_t end = std::min(ds.size(), begin + batch_size);
        const Tensor h = model.features(ds.images.slice_rows(begin, end));
        if (h.rank() != 2 || h.dim(1) != f.dim) throw ShapeError("unexpected penultimate feature shape");
        for (auto v : h.values()) f.values.push_back(static_cast<double>(v));
    }
    f.sample_ids.resize(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) f.sample_ids[i] = i;
    f.validate();
    return f;
}

std::vector<Label> knn_predict(const FeatureMatrix& query, const FeatureMatrix& reference,
                               std::span<const Label> reference_labels, std::size_t k) {
    if (k < 1) throw ArgumentError("knn: k must be at least 1");
    if (reference.rows() == 0) throw ArgumentError("knn: empty reference set");
    if (k > reference.rows())
        throw ArgumentError("knn: k=" + std::to_string(k) + " exceeds reference size " +
                            std::to_string(reference.rows()));
    if (query.dim != reference.dim) throw ShapeError("knn: query and reference dimensions differ");
    if (reference_labels.size() != reference.rows()) throw ShapeError("knn: one label per reference row required");

    const std::size_t q = query.rows(), r = reference.rows();
    const bool same_split = query.split == reference.split;
    if (same_split) {
        std::unordered_map<std::size_t, std::size_t> id_count;
        for (auto id : reference.sample_ids) ++id_count[id];
        for (auto id : query.sample_ids) {
            auto it = id_count.find(id);
            if (it != id_count.end() && r - it->second < k)
                throw ArgumentError("knn: fewer than k reference rows remain after self-exclusion");
        }
    }
    std::vector<Label> out(q);
    // Row blocks bound the distance buffer.
    constexpr std::size_t kBlock = 256;
    std::vector<double> dist;
    for (std::size_t b0 = 0; b0 < q; b0 += kBlock) {
        const std::size_t b1 = std::min(q, b0 + kBlock);
        dist.resize((b1 - b0) * r);
        kernels::pairwise_sq_dist(b1 - b0, r, query.dim, query.values.data() + b0 * query.dim, reference.values.data(),
                                  dist.data());
#pragma omp parallel for schedule(static)
        for (std::int64_t ii = static_cast<std::int64_t>(b0); ii < static_cast<std::int64_t>(b1); ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            const double* d = dist.data() + (i - b0) * r;
            std::vector<std::size_t> cand;
            cand.reserve(r);
            for (std::size_t j = 0; j < r; ++j) {
                if (same_split && reference.sample_ids[j] == query.sample_ids[i]) continue;
                cand.push_back(j);
            }
            auto closer = [d](std::size_t a, std::size_t b) { return d[a] < d[b] || (d[a] == d[b] && a < b); };
            std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end(), closer);

            std::vector<std::size_t> votes;
            std::size_t best = 0;
            for (std::size_t t = 0; t < k; ++t) {
                const auto lbl = static_cast<std::size_t>(reference_labels[cand[t]]);
                if (lbl >= votes.size()) votes.resize(lbl + 1, 0);
                best = std::max(best, ++votes[lbl]);
            }
            // Neighbors are in distance order, so the first with a top count is the nearest among tied classes.
            for (std::size_t t = 0; t < k; ++t) {
                const Label lbl = reference_labels[cand[t]];
                if (votes[static_cast<std::size_t>(lbl)] == best) {
                    out[i] = lbl;
                    break;
                }
            }
        }
    }
    return out;
}

const char* to_string(KpMode m) { return m == KpMode::in_sample ? "in_sample" : "out_of_sample"; }

KpMode parse_kp_mode(const std::string& s) {
    if (s == "in_sample") return KpMode::in_sample;
    if (s == "out_of_sample") return KpMode::out_of_sample;
    throw ArgumentError("unknown Kp mode '" + s + "' (expected in_sample or out_of_sample)");
}

KpReport compute_kp(const FeatureMatrix& train_features, const LabeledDataset& noisy_train, std::size_t k,
                    KpMode mode, const FeatureMatrix* test_features, const LabeledDataset* test_ds) {
    if (train_features.rows() != noisy_train.size()) throw ShapeError("Kp: one feature row per train sample required");

    std::vector<std::size_t> clean_rows, noisy_rows;
    for (std::size_t i = 0; i < noisy_train.size(); ++i) (noisy_train.noise_mask[i] ? noisy_rows : clean_rows).push_back(i);

    const FeatureMatrix reference = train_features.select(clean_rows);
    std::vector<Label> reference_labels;
    reference_labels.reserve(clean_rows.size());
    for (auto i : clean_rows) reference_labels.push_back(noisy_train.assigned_labels[i]);

    KpReport rep;
    rep.k_neighbors = k;
    rep.mode = mode;
    std::vector<Label> predicted, truth;
    if (mode == KpMode::in_sample) {
        if (noisy_rows.empty()) throw ArgumentError("Kp undefined for p=0: no noisy samples");
        predicted = knn_predict(train_features.select(noisy_rows), reference, reference_labels, k);
        for (auto i : noisy_rows) truth.push_back(noisy_train.true_labels[i]);
    } else {
        if (!test_features || !test_ds) throw ArgumentError("out-of-sample Kp needs a test set");
        if (test_features->rows() != test_ds->size()) throw ShapeError("Kp: one feature row per test sample required");
        if (test_ds->size() == 0) throw ArgumentError("out-of-sample Kp needs a non-empty test set");
        predicted = knn_predict(*test_features, reference, reference_labels, k);
        truth = test_ds->true_labels;
    }
    rep.noisy_count = truth.size();
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (predicted[i] == truth[i]) ++rep.matched_count;
    rep.kp = static_cast<double>(rep.matched_count) / static_cast<double>(rep.noisy_count);
    return rep;
}

KpReport compute_kp(const nn::Model& model, const LabeledDataset& noisy_train, std::size_t k, KpMode mode,
                    const LabeledDataset* test_ds) {
    const FeatureMatrix train_features = extract_features(model, noisy_train);
    if (mode == KpMode::in_sample) return compute_kp(train_features, noisy_train, k, mode);
    if (!test_ds) throw ArgumentError("out-of-sample Kp needs a test set");
    const FeatureMatrix test_features = extract_features(model, *test_ds);
    return compute_kp(train_features, noisy_train, k, mode, &test_features, test_ds);
}

std::vector<std::size_t> sample_for_tsne(const LabeledDataset& ds, std::size_t n, std::uint64_t seed) {
    if (n > ds.size())
        throw ArgumentError("t-SNE sample of " + std::to_string(n) + " exceeds dataset size " +
                            std::to_string(ds.size()));
    Rng rng(derive_seed(seed, 0x75));
    auto rows = rng.sample_without_replacement(ds.size(), n);
    std::sort(rows.begin(), rows.end());
    return rows;
}

} // namespace ddlab::probes
