// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ddlab/data.hpp"
#include "ddlab/nn/model.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ddlab::nn {

struct LossResult {
    double loss = 0;      // mean over the batch
    Tensor grad_logits;   // (softmax - onehot) / batch
};

// Mean cross-entropy with max-subtracted log-sum-exp.
LossResult cross_entropy(const Tensor& logits, std::span<const Label> labels);

// Row-wise softmax of (N, C) logits.
Tensor softmax(const Tensor& logits);

// theta <- theta - lr * g for every parameter. Rejects mismatched shapes and
// non-finite gradients before touching any parameter.
void sgd_step(Model& model, const Gradients& grads, double lr);

// Heavy-ball variant; only used when momentum is explicitly requested.
class MomentumSgd {
public:
    explicit MomentumSgd(double momentum) : momentum_(momentum) {}
    void step(Model& model, const Gradients& grads, double lr);

private:
    double momentum_;
    Gradients velocity_;
};

enum class LrSchedule { simplefc, cnn };

const char* to_string(LrSchedule s);
LrSchedule parse_schedule(const std::string& s);

// simplefc: lr0 / sqrt(1 + floor(epoch / 50));  cnn: lr0 / sqrt(1 + 10 * epoch).
double lr_at(LrSchedule schedule, std::size_t epoch, double initial_lr = 0.05);

struct TrainConfig {
    std::size_t epochs = 1000;
    std::size_t batch_size = 128;
    LrSchedule lr_schedule = LrSchedule::simplefc;
    double initial_lr = 0.05;
    double momentum = 0.0;
    std::uint64_t seed = 0;
    bool shuffle_per_epoch = true;

    void validate() const;
};

struct EvalResult {
    double loss = 0;
    double error = 0;
};

struct TrainHistory {
    // Running averages over each epoch's mini-batches, against assigned labels.
    std::vector<double> train_loss;
    std::vector<double> train_error;
    std::vector<double> epoch_seconds;
    // Eval-mode pass over the whole train set after the last epoch.
    EvalResult final_train;
    // Eval-mode pass over the test set, against true labels.
    EvalResult final_test;
};

struct BatchEvent {
    std::size_t epoch = 0;
    std::size_t batch = 0;
    double lr = 0;
    double loss = 0;
};

using BatchObserver = std::function<void(const BatchEvent&)>;

// Labels to score against.
enum class Target { assigned, truth };

EvalResult evaluate(const Model& model, const LabeledDataset& ds, Target target, std::size_t batch_size = 256);

// Mini-batch SGD on ds.assigned_labels. The last incomplete batch is kept.
// Throws NumericError naming the epoch when the loss turns non-finite.
TrainHistory train(Model& model, const LabeledDataset& ds, const LabeledDataset& test_ds, const TrainConfig& cfg,
                   const BatchObserver& observer = {});

// Batch order for one epoch; a pure function of (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch, bool shuffle);

// Versioned little-endian container: spec, width, parameter and buffer
// tensors with shapes, and the training seed.
void save_checkpoint(const Model& model, std::uint64_t train_seed, const std::string& path);

struct Checkpoint {
    Model model;
    std::uint64_t train_seed = 0;
};

Checkpoint load_checkpoint(const std::string& path);

} // namespace ddlab::nn
