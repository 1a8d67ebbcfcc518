// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddlab/zoo.hpp"

#include <array>

namespace ddlab {

const char* to_string(Family f) {
    switch (f) {
    case Family::simplefc: return "simplefc";
    case Family::cnn5: return "cnn5";
    case Family::resnet18: return "resnet18";
    }
    return "?";
}

Family parse_family(const std::string& s) {
    if (s == "simplefc" || s == "SimpleFC") return Family::simplefc;
    if (s == "cnn5" || s == "CNN5") return Family::cnn5;
    if (s == "resnet18" || s == "ResNet18") return Family::resnet18;
    throw ArgumentError("unknown model family '" + s + "' (expected simplefc, cnn5 or resnet18)");
}

std::size_t max_width(Family f) { return f == Family::simplefc ? 1000 : 64; }

void ModelSpec::validate() const {
    if (width < 1 || width > max_width(family))
        throw ArgumentError(std::string(to_string(family)) + " width " + std::to_string(width) + " outside [1, " +
                            std::to_string(max_width(family)) + "]");
    if (input_shape.size() != 3 || shape_size(input_shape) == 0)
        throw ArgumentError("model input must be a non-empty (C, H, W) shape");
    if (class_count < 2) throw ArgumentError("need at least two classes");
    if (family == Family::cnn5 && (input_shape[1] % 32 != 0 || input_shape[2] % 32 != 0))
        throw ArgumentError("cnn5 input spatial size " + shape_to_string(input_shape) +
                            " is not divisible by the pool chain 2*2*2*4");
    if (family == Family::resnet18 && (input_shape[1] < 8 || input_shape[2] < 8))
        throw ArgumentError("resnet18 input must be at least 8x8");
}

ModelSpec mnist_spec(Family f, std::size_t width) { return {f, width, {1, 28, 28}, 10, true}; }
ModelSpec cifar_spec(Family f, std::size_t width) { return {f, width, {3, 32, 32}, 10, true}; }

} // namespace ddlab

namespace ddlab::zoo {

namespace {

constexpr std::array<std::size_t, 4> kStageMultipliers{1, 2, 4, 8};
constexpr std::array<std::size_t, 4> kCnnPools{2, 2, 2, 4};
constexpr std::array<std::size_t, 4> kResNetStrides{1, 2, 2, 2};

nn::Model finish(const ModelSpec& spec, std::vector<std::unique_ptr<nn::Layer>> layers, std::uint64_t seed) {
    nn::Model m(spec, std::move(layers));
    m.initialize(seed);
    return m;
}

} // namespace

nn::Model build_simplefc(const ModelSpec& spec, std::uint64_t seed) {
    if (spec.family != Family::simplefc) throw ArgumentError("build_simplefc called with another family");
    spec.validate();
    const std::size_t d = shape_size(spec.input_shape), k = spec.width;
    std::vector<std::unique_ptr<nn::Layer>> layers;
    layers.push_back(std::make_unique<nn::Flatten>());
    layers.push_back(std::make_unique<nn::Dense>(d, k));
    layers.push_back(std::make_unique<nn::ReLU>());
    layers.push_back(std::make_unique<nn::Dense>(k, spec.class_count));
    return finish(spec, std::move(layers), seed);
}

nn::Model build_cnn5(const ModelSpec& spec, std::uint64_t seed) {
    if (spec.family != Family::cnn5) throw ArgumentError("build_cnn5 called with another family");
    spec.validate();
    std::vector<std::unique_ptr<nn::Layer>> layers;
    std::size_t in = spec.input_shape[0];
    for (std::size_t s = 0; s < 4; ++s) {
        const std::size_t out = spec.width * kStageMultipliers[s];
        layers.push_back(std::make_unique<nn::Conv2d>(in, out, 3, 1, 1, true));
        if (spec.batchnorm) layers.push_back(std::make_unique<nn::BatchNorm2d>(out));
        layers.push_back(std::make_unique<nn::ReLU>());
        layers.push_back(std::make_unique<nn::MaxPool2d>(kCnnPools[s]));
        in = out;
    }
    layers.push_back(std::make_unique<nn::Flatten>());
    const std::size_t spatial = (spec.input_shape[1] / 32) * (spec.input_shape[2] / 32);
    layers.push_back(std::make_unique<nn::Dense>(in * spatial, spec.class_count));
    return finish(spec, std::move(layers), seed);
}

nn::Model build_resnet18(const ModelSpec& spec, std::uint64_t seed) {
    if (spec.family != Family::resnet18) throw ArgumentError("build_resnet18 called with another family");
    spec.validate();
    const std::size_t k = spec.width;
    std::vector<std::unique_ptr<nn::Layer>> layers;
    layers.push_back(std::make_unique<nn::Conv2d>(spec.input_shape[0], k, 3, 1, 1, false));
    layers.push_back(std::make_unique<nn::BatchNorm2d>(k));
    layers.push_back(std::make_unique<nn::ReLU>());
    std::size_t in = k;
    for (std::size_t s = 0; s < 4; ++s) {
        const std::size_t out = k * kStageMultipliers[s];
        layers.push_back(std::make_unique<nn::BasicBlock>(in, out, kResNetStrides[s]));
        layers.push_back(std::make_unique<nn::BasicBlock>(out, out, 1));
        in = out;
    }
    layers.push_back(std::make_unique<nn::GlobalAvgPool>());
    layers.push_back(std::make_unique<nn::Dense>(in, spec.class_count));
    return finish(spec, std::move(layers), seed);
}

nn::Model build_model(const ModelSpec& spec, std::uint64_t seed) {
    switch (spec.family) {
    case Family::simplefc: return build_simplefc(spec, seed);
    case Family::cnn5: return build_cnn5(spec, seed);
    case Family::resnet18: return build_resnet18(spec, seed);
    }
    throw ArgumentError("unknown family");
}

std::size_t count_params(const ModelSpec& spec) {
    spec.validate();
    const std::size_t k = spec.width, c = spec.class_count, ch = spec.input_shape[0];
    switch (spec.family) {
    case Family::simplefc: {
        const std::size_t d = shape_size(spec.input_shape);
        return d * k + k + k * c + c;
    }
    case Family::cnn5: {
        std::size_t total = 0, in = ch;
        for (auto mult : kStageMultipliers) {
            const std::size_t out = k * mult;
            total += 9 * in * out + out;          // conv weight + bias
            if (spec.batchnorm) total += 2 * out;  // scale + shift
            in = out;
        }
        const std::size_t spatial = (spec.input_shape[1] / 32) * (spec.input_shape[2] / 32);
        return total + in * spatial * c + c;
    }
    case Family::resnet18: {
        std::size_t total = 9 * ch * k + 2 * k;  // stem conv + bn
        std::size_t in = k;
        for (std::size_t s = 0; s < 4; ++s) {
            const std::size_t out = k * kStageMultipliers[s];
            auto block = [](std::size_t i, std::size_t o, std::size_t stride) {
                std::size_t n = 9 * i * o + 2 * o + 9 * o * o + 2 * o;
                if (stride != 1 || i != o) n += i * o + 2 * o;  // projection shortcut
                return n;
            };
            total += block(in, out, kResNetStrides[s]) + block(out, out, 1);
            in = out;
        }
        return total + in * c + c;
    }
    }
    return 0;
}

std::size_t feature_dim(const ModelSpec& spec) {
    if (spec.family == Family::simplefc) return spec.width;
    if (spec.family == Family::cnn5)
        return 8 * spec.width * (spec.input_shape[1] / 32) * (spec.input_shape[2] / 32);
    return 8 * spec.width;
}

std::vector<Shape> stage_shapes(const ModelSpec& spec) {
    spec.validate();
    std::vector<Shape> out;
    if (spec.family == Family::simplefc) {
        out.push_back({spec.width});
        return out;
    }
    std::size_t h = spec.input_shape[1], w = spec.input_shape[2];
    for (std::size_t s = 0; s < 4; ++s) {
        if (spec.family == Family::cnn5) {
            h /= kCnnPools[s];
            w /= kCnnPools[s];
        } else {
            h = (h - 1) / kResNetStrides[s] + 1;
            w = (w - 1) / kResNetStrides[s] + 1;
        }
        out.push_back({spec.width * kStageMultipliers[s], h, w});
    }
    return out;
}

} // namespace ddlab::zoo
