// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ddlab/model_spec.hpp"
#include "ddlab/nn/model.hpp"

#include <cstdint>

namespace ddlab::zoo {

// flatten -> dense(d, k) -> relu -> dense(k, classes)
nn::Model build_simplefc(const ModelSpec& spec, std::uint64_t seed);

// Four stages of conv3x3(s1, p1) [-> batch-norm] -> relu -> max-pool with
// widths [k, 2k, 4k, 8k] and pool sizes [2, 2, 2, 4], then flatten and
// dense(8k, classes).
nn::Model build_cnn5(const ModelSpec& spec, std::uint64_t seed);

// conv3x3(3, k) -> bn -> relu, four stages of two basic blocks with widths
// [k, 2k, 4k, 8k] and first-block strides [1, 2, 2, 2], global average pool,
// dense(8k, classes). Convolutions carry no bias.
nn::Model build_resnet18(const ModelSpec& spec, std::uint64_t seed);

nn::Model build_model(const ModelSpec& spec, std::uint64_t seed);

// Closed form; must agree with build_model(spec).parameter_count().
std::size_t count_params(const ModelSpec& spec);

// k for SimpleFC, 8k for the convolutional families.
std::size_t feature_dim(const ModelSpec& spec);

// Per-sample activation shapes after each stage (stem excluded).
std::vector<Shape> stage_shapes(const ModelSpec& spec);

} // namespace ddlab::zoo
