// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ddlab/kernels.hpp"
#include "ddlab/rng.hpp"
#include "ddlab/tensor.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ddlab::nn {

enum class Mode { train, eval };

struct Parameter {
    std::string name;
    Tensor value;
};

// Non-learnable state, e.g. batch-norm running statistics.
struct Buffer {
    std::string name;
    Tensor value;
};

// Whatever a layer's backward pass needs from its forward pass.
struct LayerCache {
    std::vector<Tensor> tensors;
    std::vector<std::size_t> indices;
    std::vector<LayerCache> children;
};

// A layer maps a batch (N, ...) to a batch (N, ...). Forward is const; state
// changes that training implies (running statistics) are applied afterwards
// through update_state so inference can share a model across threads.
class Layer {
public:
    virtual ~Layer() = default;

    virtual std::string kind() const = 0;
    // Per-sample output shape for a per-sample input shape; throws ShapeError.
    virtual Shape output_shape(const Shape& in) const = 0;
    // `cache` may be null when no backward pass will follow.
    virtual Tensor forward(const Tensor& x, Mode mode, LayerCache* cache) const = 0;
    // Fills one gradient per parameter (in parameters() order) and returns dL/dx.
    virtual Tensor backward(const Tensor& grad_out, const LayerCache& cache, std::span<Tensor> param_grads) const = 0;
    virtual void update_state(const LayerCache& /*cache*/) {}
    virtual void initialize(Rng& /*rng*/) {}
    virtual std::unique_ptr<Layer> clone() const = 0;

    virtual std::vector<Parameter*> parameters() { return {}; }
    virtual std::vector<Buffer*> buffers() { return {}; }
    std::vector<const Parameter*> parameters() const;
    std::vector<const Buffer*> buffers() const;
    std::size_t parameter_tensor_count() const { return parameters().size(); }
};

class Dense final : public Layer {
public:
    Dense(std::size_t in, std::size_t out);
    std::string kind() const override { return "dense"; }
    Shape output_shape(const Shape& in) const override;
    Tensor forward(const Tensor& x, Mode mode, LayerCache* cache) const override;
    Tensor backward(const Tensor& grad_out, const LayerCache& cache, std::span<Tensor> param_grads) const override;
    void initialize(Rng& rng) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }
    std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }

    std::size_t in_features() const { return in_; }
    std::size_t out_features() const { return out_; }

private:
    std::size_t in_, out_;
    Parameter weight_;  // (out, in)
    Parameter bias_;    // (out)
};

class Conv2d final : public Layer {
public:
    Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride, std::size_t pad,
           bool bias);
    std::string kind() const override { return "conv2d"; }
    Shape output_shape(const Shape& in) const override;
    Tensor forward(const Tensor& x, Mode mode, LayerCache* cache) const override;
    Tensor backward(const Tensor& grad_out, const LayerCache& cache, std::span<Tensor> param_grads) const override;
    void initialize(Rng& rng) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }
    std::vector<Parameter*> parameters() override;

private:
    kernels::ConvGeometry geometry(const Shape& sample) const;

    std::size_t in_channels_, out_channels_, kernel_, stride_, pad_;
    bool has_bias_;
    Parameter weight_;  // (Co, Ci, k, k)
    Parameter bias_;    // (Co), empty when has_bias_ is false
};

// Batch normalization over (N, H, W) per channel.
class BatchNorm2d final : public Layer {
public:
    static constexpr double kEpsilon = 1e-5;
    static constexpr double kMomentum = 0.1;

    explicit BatchNorm2d(std::size_t channels);
    std::string kind() const override { return "batchnorm2d"; }
    Shape output_shape(const Shape& in) const override;
    Tensor forward(const Tensor& x, Mode mode, LayerCache* cache) const override;
    Tensor backward(const Tensor& grad_out, const LayerCache& cache, std::span<Tensor> param_grads) const override;
    void update_state(const LayerCache& cache) override;
    void initialize(Rng& rng) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNorm2d>(*this); }
    std::vector<Parameter*> parameters() override { return {&scale_, &shift_}; }
    std::vector<Buffer*> buffers() override { return {&running_mean_, &running_var_}; }

private:
    std::size_t channels_;
    Parameter scale_, shift_;
    Buffer running_mean_, running_var_;
};

class ReLU final : public Layer {
public:
    std::string kind() const override { return "relu"; }
    Shape output_shape(const Shape& in) const override { return in; }
    Tensor forward(const Tensor& x, Mode mode, LayerCache* cache) const override;
    Tensor backward(const Tensor& grad_out, const LayerCache& cache, std::span<Tensor> param_grads) const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLU>(*this); }
};

// Non-overlapping max pooling (kernel = stride). Ties go to the first element.
class MaxPool2d final : public Layer {
public:
    explicit MaxPool2d(std::size_t size);
    std::string kind() const override { return "maxpool2d"; }
    Shape output_shape(const Shape& in) const override;
    Tensor forward(const Tensor& x, Mode mode, LayerCache* cache) const override;
    Tensor backward(const Tensor& grad_out, const LayerCache& cache, std::span<Tensor> param_grads) const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2d>(*this); }

private:
    std::size_t size_;
};

// Mean over the spatial map: (N, C, H, W) -> (N, C).
class GlobalAvgPool final : public Layer {
public:
    std::string kind() const override { return "global_avgpool"; }
    Shape output_shape(const Shape& in) const override;
    Tensor forward(const Tensor& x, Mode mode, LayerCache* cache) const override;
    Tensor backward(const Tensor& grad_out, const LayerCache& cache, std::span<Tensor> param_grads) const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }
};

// (N, C, H, W) -> (N, C*H*W).
class Flatten final : public Layer {
public:
    std::string kind() const override { return "flatten"; }
    Shape output_shape(const Shape& in) const override { return {shape_size(in)}; }
    Tensor forward(const Tensor& x, Mode mode, LayerCache* cache) const override;
    Tensor backward(const Tensor& grad_out, const LayerCache& cache, std::span<Tensor> param_grads) const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Flatten>(*this); }
};

// Post-activation residual basic block:
//   relu(bn2(conv2(relu(bn1(conv1(x))))) + shortcut(x))
// where shortcut is identity, or conv1x1 + batch-norm when the shape changes.
class BasicBlock final : public Layer {
public:
    BasicBlock(std::size_t in_channels, std::size_t out_channels, std::size_t stride);
    BasicBlock(const BasicBlock& other);
    BasicBlock& operator=(const BasicBlock&) = delete;

    std::string kind() const override { return "basic_block"; }
    Shape output_shape(const Shape& in) const override;
    Tensor forward(const Tensor& x, Mode mode, LayerCache* cache) const override;
    Tensor backward(const Tensor& grad_out, const LayerCache& cache, std::span<Tensor> param_grads) const override;
    void update_state(const LayerCache& cache) override;
    void initialize(Rng& rng) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<BasicBlock>(*this); }
    std::vector<Parameter*> parameters() override;
    std::vector<Buffer*> buffers() override;

    bool has_projection() const { return !shortcut_.empty(); }

private:
    // conv1, bn1, relu, conv2, bn2
    std::vector<std::unique_ptr<Layer>> main_;
    // conv1x1, bn, or empty for identity
    std::vector<std::unique_ptr<Layer>> shortcut_;
};

} // namespace ddlab::nn
