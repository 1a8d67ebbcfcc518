// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddlab/nn/layers.hpp"

#include <algorithm>
#include <cmath>

namespace ddlab::nn {

namespace {

Shape sample_shape(const Tensor& x) {
    if (x.rank() < 1) throw ShapeError("layer input must have a batch dimension");
    return Shape(x.shape().begin() + 1, x.shape().end());
}

Shape batched(std::size_t n, const Shape& sample) {
    Shape s{n};
    s.insert(s.end(), sample.begin(), sample.end());
    return s;
}

void uniform_fill(Tensor& t, Rng& rng, double bound) {
    for (auto& v : t.values()) v = static_cast<Real>(rng.uniform(-bound, bound));
}

} // namespace

std::vector<const Parameter*> Layer::parameters() const {
    auto ps = const_cast<Layer*>(this)->parameters();
    return {ps.begin(), ps.end()};
}

std::vector<const Buffer*> Layer::buffers() const {
    auto bs = const_cast<Layer*>(this)->buffers();
    return {bs.begin(), bs.end()};
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(std::size_t in, std::size_t out)
    : in_(in), out_(out), weight_{"weight", Tensor({out, in})}, bias_{"bias", Tensor({out})} {}

Shape Dense::output_shape(const Shape& in) const {
    if (in.size() != 1 || in[0] != in_)
        throw ShapeError("dense layer expects " + std::to_string(in_) + " features, got " + shape_to_string(in));
    return {out_};
}

Tensor Dense::forward(const Tensor& x, Mode, LayerCache* cache) const {
    output_shape(sample_shape(x));
    const std::size_t n = x.dim(0);
    Tensor y({n, out_});
    kernels::matmul_nt(n, out_, in_, x.data(), weight_.value.data(), y.data(), false);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < out_; ++j) y[i * out_ + j] += bias_.value[j];
    if (cache) cache->tensors = {x};
    return y;
}

Tensor Dense::backward(const Tensor& grad_out, const LayerCache& cache, std::span<Tensor> param_grads) const {
    const Tensor& x = cache.tensors.at(0);
    const std::size_t n = x.dim(0);
    require_shape(grad_out, {n, out_}, "dense backward");
    Tensor gw({out_, in_});
    kernels::matmul_tn(out_, in_, n, grad_out.data(), x.data(), gw.data(), false);
    Tensor gb({out_});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < out_; ++j) gb[j] += grad_out[i * out_ + j];
    param_grads[0] = std::move(gw);
    param_grads[1] = std::move(gb);
    Tensor gx({n, in_});
    kernels::matmul_nn(n, in_, out_, grad_out.data(), weight_.value.data(), gx.data(), false);
    return gx;
}

void Dense::initialize(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
    uniform_fill(weight_.value, rng, bound);
    uniform_fill(bias_.value, rng, bound);
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
               std::size_t pad, bool bias)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      has_bias_(bias),
      weight_{"weight", Tensor({out_channels, in_channels, kernel, kernel})},
      bias_{"bias", bias ? Tensor({out_channels}) : Tensor()} {}

std::vector<Parameter*> Conv2d::parameters() {
    if (has_bias_) return {&weight_, &bias_};
    return {&weight_};
}

kernels::ConvGeometry Conv2d::geometry(const Shape& sample) const {
    if (sample.size() != 3 || sample[0] != in_channels_)
        throw ShapeError("conv2d expects (" + std::to_string(in_channels_) + ", H, W) input, got " +
                         shape_to_string(sample));
    if (sample[1] + 2 * pad_ < kernel_ || sample[2] + 2 * pad_ < kernel_)
        throw ShapeError("conv2d input " + shape_to_string(sample) + " smaller than the kernel");
    return {in_channels_, sample[1], sample[2], kernel_, stride_, pad_};
}

Shape Conv2d::output_shape(const Shape& in) const {
    const auto g = geometry(in);
    return {out_channels_, g.out_height(), g.out_width()};
}

Tensor Conv2d::forward(const Tensor& x, Mode, LayerCache* cache) const {
    const auto g = geometry(sample_shape(x));
    const std::size_t n = x.dim(0);
    Tensor y({n, out_channels_, g.out_height(), g.out_width()});
    kernels::conv2d_forward(n, g, out_channels_, x.data(), weight_.value.data(),
                            has_bias_ ? bias_.value.data() : nullptr, y.data());
    if (cache) cache->tensors = {x};
    return y;
}

Tensor Conv2d::backward(const Tensor& grad_out, const LayerCache& cache, std::span<Tensor> param_grads) const {
    const Tensor& x = cache.tensors.at(0);
    const auto g = geometry(sample_shape(x));
    const std::size_t n = x.dim(0);
    require_shape(grad_out, {n, out_channels_, g.out_height(), g.out_width()}, "conv2d backward");
    Tensor gw(weight_.value.shape());
    Tensor gb = has_bias_ ? Tensor({out_channels_}) : Tensor();
    kernels::conv2d_backward_params(n, g, out_channels_, x.data(), grad_out.data(), gw.data(),
                                    has_bias_ ? gb.data() : nullptr);
    param_grads[0] = std::move(gw);
    if (has_bias_) param_grads[1] = std::move(gb);
    Tensor gx(x.shape());
    kernels::conv2d_backward_input(n, g, out_channels_, grad_out.data(), weight_.value.data(), gx.data());
    return gx;
}

void Conv2d::initialize(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels_ * kernel_ * kernel_));
    uniform_fill(weight_.value, rng, bound);
    if (has_bias_) uniform_fill(bias_.value, rng, bound);
}

// ---------------------------------------------------------------------------
// BatchNorm2d
//
// Cache layout: tensors = {x_hat, inv_std, batch_mean, batch_var}; indices[0]
// is 1 when batch statistics were used.

BatchNorm2d::BatchNorm2d(std::size_t channels)
    : channels_(channels),
      scale_{"scale", Tensor({channels}, Real{1})},
      shift_{"shift", Tensor({channels})},
      running_mean_{"running_mean", Tensor({channels})},
      running_var_{"running_var", Tensor({channels}, Real{1})} {}

Shape BatchNorm2d::output_shape(const Shape& in) const {
    if (in.size() != 3 || in[0] != channels_)
        throw ShapeError("batchnorm2d expects (" + std::to_string(channels_) + ", H, W) input, got " +
                         shape_to_string(in));
    return in;
}

Tensor BatchNorm2d::forward(const Tensor& x, Mode mode, LayerCache* cache) const {
    output_shape(sample_shape(x));
    const std::size_t n = x.dim(0), hw = x.dim(2) * x.dim(3), c = channels_;
    const std::size_t count = n * hw;
    const bool batch_stats = mode == Mode::train;
    if (batch_stats && count < 2) throw ShapeError("batchnorm2d in train mode needs more than one value per channel");

    Tensor mean({c}), var({c}), inv_std({c});
    for (std::size_t ch = 0; ch < c; ++ch) {
        if (batch_stats) {
            double s = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const Real* p = x.data() + (i * c + ch) * hw;
                for (std::size_t j = 0; j < hw; ++j) s += p[j];
            }
            const double m = s / static_cast<double>(count);
            double ss = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const Real* p = x.data() + (i * c + ch) * hw;
                for (std::size_t j = 0; j < hw; ++j) ss += (p[j] - m) * (p[j] - m);
            }
            mean[ch] = static_cast<Real>(m);
            var[ch] = static_cast<Real>(ss / static_cast<double>(count));
        } else {
            mean[ch] = running_mean_.value[ch];
            var[ch] = running_var_.value[ch];
        }
        inv_std[ch] = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(var[ch]) + kEpsilon));
    }

    Tensor y(x.shape());
    Tensor x_hat = cache ? Tensor(x.shape()) : Tensor();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (i * c + ch) * hw;
            const Real g = scale_.value[ch], b = shift_.value[ch], m = mean[ch], is = inv_std[ch];
            for (std::size_t j = 0; j < hw; ++j) {
                const Real xh = (x[off + j] - m) * is;
                if (cache) x_hat[off + j] = xh;
                y[off + j] = g * xh + b;
            }
        }
    if (cache) {
        cache->tensors = {std::move(x_hat), std::move(inv_std), std::move(mean), std::move(var)};
        cache->indices = {batch_stats ? 1u : 0u, count};
    }
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out, const LayerCache& cache, std::span<Tensor> param_grads) const {
    const Tensor& x_hat = cache.tensors.at(0);
    const Tensor& inv_std = cache.tensors.at(1);
    const bool batch_stats = cache.indices.at(0) == 1;
    require_shape(grad_out, x_hat.shape(), "batchnorm2d backward");
    const std::size_t n = x_hat.dim(0), c = channels_, hw = x_hat.dim(2) * x_hat.dim(3);
    const double count = static_cast<double>(n * hw);

    Tensor g_scale({c}), g_shift({c});
    Tensor gx(x_hat.shape());
    for (std::size_t ch = 0; ch < c; ++ch) {
        double sum_g = 0, sum_gxh = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t off = (i * c + ch) * hw;
            for (std::size_t j = 0; j < hw; ++j) {
                sum_g += grad_out[off + j];
                sum_gxh += grad_out[off + j] * x_hat[off + j];
            }
        }
        g_shift[ch] = static_cast<Real>(sum_g);
        g_scale[ch] = static_cast<Real>(sum_gxh);
        const double gamma = scale_.value[ch], is = inv_std[ch];
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t off = (i * c + ch) * hw;
            for (std::size_t j = 0; j < hw; ++j) {
                if (batch_stats) {
                    // dx = gamma * inv_std / M * (M g - sum g - x_hat sum(g x_hat))
                    gx[off + j] = static_cast<Real>(gamma * is / count *
                                                    (count * grad_out[off + j] - sum_g - x_hat[off + j] * sum_gxh));
                } else {
                    gx[off + j] = static_cast<Real>(gamma * is * grad_out[off + j]);
                }
            }
        }
    }
    param_grads[0] = std::move(g_scale);
    param_grads[1] = std::move(g_shift);
    return gx;
}

void BatchNorm2d::update_state(const LayerCache& cache) {
    if (cache.indices.empty() || cache.indices[0] != 1) return;
    const Tensor& mean = cache.tensors.at(2);
    const Tensor& var = cache.tensors.at(3);
    const double count = static_cast<double>(cache.indices.at(1));
    const double unbias = count > 1 ? count / (count - 1) : 1.0;
    for (std::size_t ch = 0; ch < channels_; ++ch) {
        running_mean_.value[ch] =
            static_cast<Real>((1 - kMomentum) * running_mean_.value[ch] + kMomentum * mean[ch]);
        running_var_.value[ch] =
            static_cast<Real>((1 - kMomentum) * running_var_.value[ch] + kMomentum * var[ch] * unbias);
    }
}

void BatchNorm2d::initialize(Rng&) {
    scale_.value.fill(1);
    shift_.value.fill(0);
    running_mean_.value.fill(0);
    running_var_.value.fill(1);
}

// ---------------------------------------------------------------------------
// ReLU

Tensor ReLU::forward(const Tensor& x, Mode, LayerCache* cache) const {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0 ? x[i] : Real{0};
    if (cache) cache->tensors = {y};
    return y;
}

Tensor ReLU::backward(const Tensor& grad_out, const LayerCache& cache, std::span<Tensor>) const {
    const Tensor& y = cache.tensors.at(0);
    require_shape(grad_out, y.shape(), "relu backward");
    Tensor gx(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] = y[i] > 0 ? grad_out[i] : Real{0};
    return gx;
}

// ---------------------------------------------------------------------------
// MaxPool2d

MaxPool2d::MaxPool2d(std::size_t size) : size_(size) {
    if (size == 0) throw ArgumentError("max-pool size must be positive");
}

Shape MaxPool2d::output_shape(const Shape& in) const {
    if (in.size() != 3) throw ShapeError("maxpool2d expects (C, H, W) input, got " + shape_to_string(in));
    if (in[1] % size_ != 0 || in[2] % size_ != 0)
        throw ShapeError("maxpool2d of size " + std::to_string(size_) + " does not divide spatial size " +
                         shape_to_string(in));
    return {in[0], in[1] / size_, in[2] / size_};
}

Tensor MaxPool2d::forward(const Tensor& x, Mode, LayerCache* cache) const {
    const Shape out_sample = output_shape(sample_shape(x));
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t oh = out_sample[1], ow = out_sample[2];
    Tensor y(batched(n, out_sample));
    std::vector<std::size_t> argmax(y.size());
    for (std::size_t plane = 0; plane < n * c; ++plane) {
        const Real* in = x.data() + plane * h * w;
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox) {
                std::size_t best = (oy * size_) * w + ox * size_;
                for (std::size_t dy = 0; dy < size_; ++dy)
                    for (std::size_t dx = 0; dx < size_; ++dx) {
                        const std::size_t idx = (oy * size_ + dy) * w + ox * size_ + dx;
                        if (in[idx] > in[best]) best = idx;
                    }
                const std::size_t o = plane * oh * ow + oy * ow + ox;
                y[o] = in[best];
                argmax[o] = plane * h * w + best;
            }
    }
    if (cache) {
        cache->indices = std::move(argmax);
        cache->tensors = {Tensor(x.shape())};  // shape carrier only
    }
    return y;
}

Tensor MaxPool2d::backward(const Tensor& grad_out, const LayerCache& cache, std::span<Tensor>) const {
    if (grad_out.size() != cache.indices.size()) throw ShapeError("maxpool2d backward: stale cache");
    Tensor gx(cache.tensors.at(0).shape());
    for (std::size_t o = 0; o < cache.indices.size(); ++o) gx[cache.indices[o]] += grad_out[o];
    return gx;
}

// ---------------------------------------------------------------------------
// GlobalAvgPool

Shape GlobalAvgPool::output_shape(const Shape& in) const {
    if (in.size() != 3) throw ShapeError("global average pool expects (C, H, W) input, got " + shape_to_string(in));
    return {in[0]};
}

Tensor GlobalAvgPool::forward(const Tensor& x, Mode, LayerCache* cache) const {
    output_shape(sample_shape(x));
    const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    Tensor y({n, c});
    for (std::size_t plane = 0; plane < n * c; ++plane) {
        Real s = 0;
        for (std::size_t j = 0; j < hw; ++j) s += x[plane * hw + j];
        y[plane] = s / static_cast<Real>(hw);
    }
    if (cache) cache->indices = {x.dim(0), x.dim(1), x.dim(2), x.dim(3)};
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out, const LayerCache& cache, std::span<Tensor>) const {
    const Shape in(cache.indices.begin(), cache.indices.end());
    require_shape(grad_out, {in[0], in[1]}, "global average pool backward");
    const std::size_t hw = in[2] * in[3];
    Tensor gx(in);
    for (std::size_t plane = 0; plane < in[0] * in[1]; ++plane) {
        const Real g = grad_out[plane] / static_cast<Real>(hw);
        for (std::size_t j = 0; j < hw; ++j) gx[plane * hw + j] = g;
    }
    return gx;
}

// ---------------------------------------------------------------------------
// Flatten

Tensor Flatten::forward(const Tensor& x, Mode, LayerCache* cache) const {
    if (cache) cache->indices = x.shape();
    return x.reshaped({x.dim(0), x.row_size()});
}

Tensor Flatten::backward(const Tensor& grad_out, const LayerCache& cache, std::span<Tensor>) const {
    return grad_out.reshaped(Shape(cache.indices.begin(), cache.indices.end()));
}

// ---------------------------------------------------------------------------
// BasicBlock

BasicBlock::BasicBlock(std::size_t in_channels, std::size_t out_channels, std::size_t stride) {
    main_.push_back(std::make_unique<Conv2d>(in_channels, out_channels, 3, stride, 1, false));
    main_.push_back(std::make_unique<BatchNorm2d>(out_channels));
    main_.push_back(std::make_unique<ReLU>());
    main_.push_back(std::make_unique<Conv2d>(out_channels, out_channels, 3, 1, 1, false));
    main_.push_back(std::make_unique<BatchNorm2d>(out_channels));
    if (stride != 1 || in_channels != out_channels) {
        shortcut_.push_back(std::make_unique<Conv2d>(in_channels, out_channels, 1, stride, 0, false));
        shortcut_.push_back(std::make_unique<BatchNorm2d>(out_channels));
    }
}

BasicBlock::BasicBlock(const BasicBlock& other) {
    for (const auto& l : other.main_) main_.push_back(l->clone());
    for (const auto& l : other.shortcut_) shortcut_.push_back(l->clone());
}

Shape BasicBlock::output_shape(const Shape& in) const {
    Shape s = in;
    for (const auto& l : main_) s = l->output_shape(s);
    Shape t = in;
    for (const auto& l : shortcut_) t = l->output_shape(t);
    if (s != t) throw ShapeError("basic block branches disagree: " + shape_to_string(s) + " vs " + shape_to_string(t));
    return s;
}

// Cache children: main_ (5), shortcut_ (0 or 2), then the output ReLU.
Tensor BasicBlock::forward(const Tensor& x, Mode mode, LayerCache* cache) const {
    if (cache) cache->children.assign(main_.size() + shortcut_.size() + 1, {});
    std::size_t slot = 0;
    Tensor h = x;
    for (const auto& l : main_) {
        h = l->forward(h, mode, cache ? &cache->children[slot] : nullptr);
        ++slot;
    }
    Tensor s = x;
    for (const auto& l : shortcut_) {
        s = l->forward(s, mode, cache ? &cache->children[slot] : nullptr);
        ++slot;
    }
    if (h.shape() != s.shape()) throw ShapeError("basic block residual shapes disagree");
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += s[i];
    static const ReLU relu;
    return relu.forward(h, mode, cache ? &cache->children[slot] : nullptr);
}

Tensor BasicBlock::backward(const Tensor& grad_out, const LayerCache& cache, std::span<Tensor> param_grads) const {
    const std::size_t relu_slot = main_.size() + shortcut_.size();
    if (cache.children.size() != relu_slot + 1) throw ShapeError("basic block backward: mismatched cache");
    static const ReLU relu;
    const Tensor g = relu.backward(grad_out, cache.children[relu_slot], {});

    // Parameter slots follow parameters(): main_ layers, then shortcut_ layers.
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (const auto& l : main_) {
        offsets.push_back(off);
        off += l->parameter_tensor_count();
    }
    for (const auto& l : shortcut_) {
        offsets.push_back(off);
        off += l->parameter_tensor_count();
    }

    Tensor gm = g;
    for (std::size_t i = main_.size(); i-- > 0;) {
        gm = main_[i]->backward(gm, cache.children[i],
                                param_grads.subspan(offsets[i], main_[i]->parameter_tensor_count()));
    }
    Tensor gs = g;
    for (std::size_t i = shortcut_.size(); i-- > 0;) {
        const std::size_t slot = main_.size() + i;
        gs = shortcut_[i]->backward(gs, cache.children[slot],
                                    param_grads.subspan(offsets[slot], shortcut_[i]->parameter_tensor_count()));
    }
    for (std::size_t i = 0; i < gm.size(); ++i) gm[i] += gs[i];
    return gm;
}

void BasicBlock::update_state(const LayerCache& cache) {
    for (std::size_t i = 0; i < main_.size(); ++i) main_[i]->update_state(cache.children.at(i));
    for (std::size_t i = 0; i < shortcut_.size(); ++i)
        shortcut_[i]->update_state(cache.children.at(main_.size() + i));
}

void BasicBlock::initialize(Rng& rng) {
    for (auto& l : main_) l->initialize(rng);
    for (auto& l : shortcut_) l->initialize(rng);
}

std::vector<Parameter*> BasicBlock::parameters() {
    std::vector<Parameter*> out;
    for (auto& l : main_)
        for (auto* p : l->parameters()) out.push_back(p);
    for (auto& l : shortcut_)
        for (auto* p : l->parameters()) out.push_back(p);
    return out;
}

std::vector<Buffer*> BasicBlock::buffers() {
    std::vector<Buffer*> out;
    for (auto& l : main_)
        for (auto* b : l->buffers()) out.push_back(b);
    for (auto& l : shortcut_)
        for (auto* b : l->buffers()) out.push_back(b);
    return out;
}

} // namespace ddlab::nn
