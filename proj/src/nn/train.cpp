// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddlab/nn/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

namespace ddlab::nn {

void TrainConfig::validate() const {
    if (epochs < 1) throw ArgumentError("training needs at least one epoch");
    if (batch_size < 1) throw ArgumentError("batch size must be at least 1");
    if (!(initial_lr > 0)) throw ArgumentError("initial learning rate must be positive");
    if (momentum < 0 || momentum >= 1) throw ArgumentError("momentum must lie in [0, 1)");
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch, bool shuffle) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (shuffle) {
        Rng rng(derive_seed(seed, 0x7e, epoch));
        rng.shuffle(order);
    }
    return order;
}

namespace {

std::size_t count_errors(const Tensor& logits, std::span<const Label> labels) {
    const std::size_t n = logits.dim(0), c = logits.dim(1);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Real* row = logits.data() + i * c;
        std::size_t best = 0;
        for (std::size_t j = 1; j < c; ++j)
            if (row[j] > row[best]) best = j;
        if (static_cast<Label>(best) != labels[i]) ++wrong;
    }
    return wrong;
}

void check_compatible(const Model& model, const LabeledDataset& ds, const char* what) {
    if (ds.size() == 0) return;
    if (ds.sample_shape() != model.spec().input_shape)
        throw ShapeError(std::string(what) + " samples have shape " + shape_to_string(ds.sample_shape()) +
                         ", model expects " + shape_to_string(model.spec().input_shape));
    if (ds.class_count != model.spec().class_count)
        throw ShapeError(std::string(what) + " class count does not match the model");
}

} // namespace

EvalResult evaluate(const Model& model, const LabeledDataset& ds, Target target, std::size_t batch_size) {
    check_compatible(model, ds, "evaluation");
    if (ds.size() == 0) throw ArgumentError("cannot evaluate on an empty dataset");
    const auto& labels = target == Target::assigned ? ds.assigned_labels : ds.true_labels;
    double loss = 0;
    std::size_t wrong = 0;
    for (std::size_t begin = 0; begin < ds.size(); begin += batch_size) {
        const std::size_t end = std::min(ds.size(), begin + batch_size);
        const Tensor logits = model.infer(ds.images.slice_rows(begin, end));
        const std::span<const Label> y(labels.data() + begin, end - begin);
        loss += cross_entropy(logits, y).loss * static_cast<double>(end - begin);
        wrong += count_errors(logits, y);
    }
    const double n = static_cast<double>(ds.size());
    return {loss / n, static_cast<double>(wrong) / n};
}

TrainHistory train(Model& model, const LabeledDataset& ds, const LabeledDataset& test_ds, const TrainConfig& cfg,
                   const BatchObserver& observer) {
    cfg.validate();
    ds.validate();
    check_compatible(model, ds, "training");
    check_compatible(model, test_ds, "test");
    if (ds.size() == 0) throw ArgumentError("cannot train on an empty dataset");

    MomentumSgd optimizer(cfg.momentum);
    TrainHistory h;
    const std::size_t n = ds.size();
    std::vector<Label> batch_labels;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = lr_at(cfg.lr_schedule, epoch, cfg.initial_lr);
        const auto order = epoch_order(n, cfg.seed, epoch, cfg.shuffle_per_epoch);
        double loss_sum = 0;
        std::size_t wrong = 0, batch_index = 0;
        for (std::size_t begin = 0; begin < n; begin += cfg.batch_size, ++batch_index) {
            const std::size_t end = std::min(n, begin + cfg.batch_size);
            const std::span<const std::size_t> rows(order.data() + begin, end - begin);
            batch_labels.clear();
            for (auto r : rows) batch_labels.push_back(ds.assigned_labels[r]);

            const std::string where = " at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index);
            ForwardResult fr;
            try {
                fr = model.forward(ds.images.gather_rows(rows), Mode::train);
            } catch (const NumericError& e) {
                throw NumericError(std::string("training diverged") + where + ": " + e.what());
            }
            auto loss = cross_entropy(fr.logits, batch_labels);
            if (!std::isfinite(loss.loss)) throw NumericError("training diverged: non-finite loss" + where);
            loss_sum += loss.loss * static_cast<double>(rows.size());
            wrong += count_errors(fr.logits, batch_labels);
            if (observer) observer({epoch, batch_index, lr, loss.loss});

            const auto grads = model.backward(fr.cache, loss.grad_logits);
            optimizer.step(model, grads, lr);
        }
        h.train_loss.push_back(loss_sum / static_cast<double>(n));
        h.train_error.push_back(static_cast<double>(wrong) / static_cast<double>(n));
        h.epoch_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    h.final_train = evaluate(model, ds, Target::assigned);
    if (test_ds.size() > 0) h.final_test = evaluate(model, test_ds, Target::truth);
    return h;
}

} // namespace ddlab::nn
