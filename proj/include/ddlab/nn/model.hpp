// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ddlab/model_spec.hpp"
#include "ddlab/nn/layers.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace ddlab::nn {

// Per-parameter gradients, in Model::parameters() order.
using Gradients = std::vector<Tensor>;

struct ForwardCache {
    std::uint64_t model_id = 0;
    std::uint64_t generation = 0;
    std::vector<LayerCache> layers;
};

struct ForwardResult {
    Tensor logits;
    ForwardCache cache;
};

// A sequential network whose last layer is the dense classifier. Everything
// before it produces the penultimate features.
class Model {
public:
    Model(ModelSpec spec, std::vector<std::unique_ptr<Layer>> layers);
    Model(const Model& other);
    Model& operator=(const Model& other);
    Model(Model&&) noexcept = default;
    Model& operator=(Model&&) noexcept = default;

    const ModelSpec& spec() const noexcept { return spec_; }
    const std::vector<std::unique_ptr<Layer>>& layers() const noexcept { return layers_; }

    // Train mode uses batch statistics and folds them into the running
    // statistics; eval mode leaves the model untouched.
    ForwardResult forward(const Tensor& batch, Mode mode);
    Gradients backward(const ForwardCache& cache, const Tensor& grad_logits) const;

    // Eval-mode inference without a cache.
    Tensor infer(const Tensor& batch) const;
    // Eval-mode activations feeding the classifier, (N, feature_dim).
    Tensor features(const Tensor& batch) const;
    // Applies only the classifier layer to penultimate features.
    Tensor classify(const Tensor& features) const;
    std::size_t feature_dim() const;

    void initialize(std::uint64_t seed);

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    std::vector<Buffer*> buffers();
    std::vector<const Buffer*> buffers() const;
    // Scalar learnable parameters (running statistics excluded).
    std::size_t parameter_count() const;

    // Identity used to reject caches from another model or stale parameters.
    std::uint64_t id() const noexcept { return id_; }
    std::uint64_t generation() const noexcept { return generation_; }
    void mark_updated() noexcept { ++generation_; }

private:
    Tensor run(const Tensor& batch, std::size_t layer_count) const;
    void check_input(const Tensor& batch) const;

    ModelSpec spec_;
    std::vector<std::unique_ptr<Layer>> layers_;
    std::uint64_t id_;
    std::uint64_t generation_ = 0;
};

} // namespace ddlab::nn
