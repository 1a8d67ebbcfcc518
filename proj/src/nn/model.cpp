// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddlab/nn/model.hpp"

#include <atomic>

namespace ddlab::nn {

namespace {

std::uint64_t next_model_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
}

} // namespace

Model::Model(ModelSpec spec, std::vector<std::unique_ptr<Layer>> layers)
    : spec_(std::move(spec)), layers_(std::move(layers)), id_(next_model_id()) {
    if (layers_.empty() || layers_.back()->kind() != "dense")
        throw ArgumentError("a model must end in a dense classifier layer");
}

Model::Model(const Model& other) : spec_(other.spec_), id_(next_model_id()), generation_(other.generation_) {
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Model& Model::operator=(const Model& other) {
    if (this != &other) {
        Model tmp(other);
        *this = std::move(tmp);
    }
    return *this;
}

void Model::check_input(const Tensor& batch) const {
    if (batch.rank() != spec_.input_shape.size() + 1 ||
        !std::equal(spec_.input_shape.begin(), spec_.input_shape.end(), batch.shape().begin() + 1))
        throw ShapeError("model expects input (N, " + shape_to_string(spec_.input_shape).substr(1) + ", got " +
                         shape_to_string(batch.shape()));
}

ForwardResult Model::forward(const Tensor& batch, Mode mode) {
    check_input(batch);
    ForwardResult r;
    r.cache.model_id = id_;
    r.cache.layers.resize(layers_.size());
    Tensor h = batch;
    for (std::size_t i = 0; i < layers_.size(); ++i) h = layers_[i]->forward(h, mode, &r.cache.layers[i]);
    if (!h.all_finite()) throw NumericError("non-finite activation in forward pass");
    if (mode == Mode::train) {
        for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->update_state(r.cache.layers[i]);
        // Running statistics changed, but parameters did not; the cache stays valid.
    }
    r.cache.generation = generation_;
    r.logits = std::move(h);
    return r;
}

Gradients Model::backward(const ForwardCache& cache, const Tensor& grad_logits) const {
    if (cache.model_id != id_ || cache.layers.size() != layers_.size())
        throw ArgumentError("backward called with a cache from a different model");
    if (cache.generation != generation_)
        throw ArgumentError("backward called with a stale cache (parameters changed since forward)");
    std::vector<std::size_t> offsets;
    std::size_t total = 0;
    for (const auto& l : layers_) {
        offsets.push_back(total);
        total += l->parameter_tensor_count();
    }
    Gradients grads(total);
    Tensor g = grad_logits;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        g = layers_[i]->backward(g, cache.layers[i],
                                 std::span<Tensor>(grads).subspan(offsets[i], layers_[i]->parameter_tensor_count()));
    }
    return grads;
}

Tensor Model::run(const Tensor& batch, std::size_t layer_count) const {
    check_input(batch);
    Tensor h = batch;
    for (std::size_t i = 0; i < layer_count; ++i) h = layers_[i]->forward(h, Mode::eval, nullptr);
    return h;
}

Tensor Model::infer(const Tensor& batch) const {
    Tensor out = run(batch, layers_.size());
    if (!out.all_finite()) throw NumericError("non-finite activation in forward pass");
    return out;
}

Tensor Model::features(const Tensor& batch) const { return run(batch, layers_.size() - 1); }

Tensor Model::classify(const Tensor& features) const {
    return layers_.back()->forward(features, Mode::eval, nullptr);
}

std::size_t Model::feature_dim() const {
    return static_cast<const Dense&>(*layers_.back()).in_features();
}

void Model::initialize(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& l : layers_) l->initialize(rng);
    ++generation_;
}

std::vector<Parameter*> Model::parameters() {
    std::vector<Parameter*> out;
    for (auto& l : layers_)
        for (auto* p : l->parameters()) out.push_back(p);
    return out;
}

std::vector<const Parameter*> Model::parameters() const {
    auto ps = const_cast<Model*>(this)->parameters();
    return {ps.begin(), ps.end()};
}

std::vector<Buffer*> Model::buffers() {
    std::vector<Buffer*> out;
    for (auto& l : layers_)
        for (auto* b : l->buffers()) out.push_back(b);
    return out;
}

std::vector<const Buffer*> Model::buffers() const {
    auto bs = const_cast<Model*>(this)->buffers();
    return {bs.begin(), bs.end()};
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += p->value.size();
    return n;
}

} // namespace ddlab::nn
