// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddlab/nn/train.hpp"

#include <algorithm>
#include <cmath>

namespace ddlab::nn {

Tensor softmax(const Tensor& logits) {
    if (logits.rank() != 2) throw ShapeError("softmax expects (N, C) logits");
    const std::size_t n = logits.dim(0), c = logits.dim(1);
    Tensor out(logits.shape());
    for (std::size_t i = 0; i < n; ++i) {
        const Real* row = logits.data() + i * c;
        const double mx = *std::max_element(row, row + c);
        double z = 0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = static_cast<Real>(std::exp(row[j] - mx) / z);
    }
    return out;
}

LossResult cross_entropy(const Tensor& logits, std::span<const Label> labels) {
    if (logits.rank() != 2 || logits.dim(0) != labels.size())
        throw ShapeError("cross_entropy: logits " + shape_to_string(logits.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
    const std::size_t n = logits.dim(0), c = logits.dim(1);
    if (n == 0) throw ShapeError("cross_entropy on an empty batch");
    LossResult r;
    r.grad_logits = Tensor(logits.shape());
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Label y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= c)
            throw ArgumentError("cross_entropy: label " + std::to_string(y) + " out of range");
        const Real* row = logits.data() + i * c;
        const double mx = *std::max_element(row, row + c);
        double z = 0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
        const double log_z = mx + std::log(z);
        total += log_z - row[y];
        for (std::size_t j = 0; j < c; ++j) {
            const double p = std::exp(row[j] - log_z);
            r.grad_logits[i * c + j] =
                static_cast<Real>((p - (static_cast<std::size_t>(y) == j ? 1.0 : 0.0)) / static_cast<double>(n));
        }
    }
    r.loss = total / static_cast<double>(n);
    return r;
}

namespace {

void check_gradients(const std::vector<Parameter*>& params, const Gradients& grads) {
    if (params.size() != grads.size())
        throw ShapeError("sgd: " + std::to_string(grads.size()) + " gradients for " + std::to_string(params.size()) +
                         " parameters");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->value.shape() != grads[i].shape())
            throw ShapeError("sgd: gradient shape " + shape_to_string(grads[i].shape()) + " does not match parameter " +
                             params[i]->name + " " + shape_to_string(params[i]->value.shape()));
        if (!grads[i].all_finite()) throw NumericError("sgd: non-finite gradient for " + params[i]->name);
    }
}

} // namespace

void sgd_step(Model& model, const Gradients& grads, double lr) {
    if (!(lr > 0)) throw ArgumentError("sgd: learning rate must be positive");
    auto params = model.parameters();
    check_gradients(params, grads);
    const auto step = static_cast<Real>(lr);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Real* w = params[i]->value.data();
        const Real* g = grads[i].data();
        for (std::size_t j = 0; j < grads[i].size(); ++j) w[j] -= step * g[j];
    }
    model.mark_updated();
}

void MomentumSgd::step(Model& model, const Gradients& grads, double lr) {
    if (momentum_ == 0.0) {
        sgd_step(model, grads, lr);
        return;
    }
    if (!(lr > 0)) throw ArgumentError("sgd: learning rate must be positive");
    auto params = model.parameters();
    check_gradients(params, grads);
    if (velocity_.empty()) {
        velocity_ = grads;
    } else {
        for (std::size_t i = 0; i < grads.size(); ++i)
            for (std::size_t j = 0; j < grads[i].size(); ++j)
                velocity_[i][j] = static_cast<Real>(momentum_) * velocity_[i][j] + grads[i][j];
    }
    for (std::size_t i = 0; i < params.size(); ++i)
        for (std::size_t j = 0; j < grads[i].size(); ++j)
            params[i]->value[j] -= static_cast<Real>(lr) * velocity_[i][j];
    model.mark_updated();
}

const char* to_string(LrSchedule s) { return s == LrSchedule::simplefc ? "simplefc" : "cnn"; }

LrSchedule parse_schedule(const std::string& s) {
    if (s == "simplefc") return LrSchedule::simplefc;
    if (s == "cnn") return LrSchedule::cnn;
    throw ArgumentError("unknown learning-rate schedule '" + s + "' (expected simplefc or cnn)");
}

double lr_at(LrSchedule schedule, std::size_t epoch, double initial_lr) {
    const double e = static_cast<double>(epoch);
    if (schedule == LrSchedule::simplefc) return initial_lr / std::sqrt(1.0 + std::floor(e / 50.0));
    return initial_lr / std::sqrt(1.0 + e * 10.0);
}

} // namespace ddlab::nn
