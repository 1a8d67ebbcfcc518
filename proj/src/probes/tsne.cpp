// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddlab/kernels.hpp"
#include "ddlab/probes.hpp"
#include "ddlab/rng.hpp"

#include <cmath>
#include <limits>

namespace ddlab::probes {

namespace {

using Index = std::int64_t;

// Row i of the conditional affinity matrix, with beta = 1 / (2 sigma^2)
// found by bisection so that the row entropy matches log(perplexity).
void fit_row(const double* dist, std::size_t n, std::size_t self, double target_entropy, const TsneOptions& opt,
             double* row) {
    double beta = 1.0, lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
    for (std::size_t step = 0; step < opt.max_bisection_steps; ++step) {
        double sum = 0, weighted = 0;
        for (std::size_t j = 0; j < n; ++j) {
            row[j] = j == self ? 0.0 : std::exp(-dist[j] * beta);
            sum += row[j];
            weighted += dist[j] * row[j];
        }
        if (sum <= 0) sum = std::numeric_limits<double>::min();
        const double entropy = std::log(sum) + beta * weighted / sum;
        for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
        const double diff = entropy - target_entropy;
        if (std::abs(diff) < opt.entropy_tolerance) break;
        if (diff > 0) {
            lo = beta;
            beta = std::isinf(hi) ? beta * 2 : (beta + hi) / 2;
        } else {
            hi = beta;
            beta = std::isinf(lo) ? beta / 2 : (beta + lo) / 2;
        }
    }
}

} // namespace

TsneResult tsne(const FeatureMatrix& features, const TsneOptions& opt) {
    features.validate();
    const std::size_t n = features.rows();
    if (!(opt.perplexity > 1.0)) throw ArgumentError("t-SNE perplexity must exceed 1");
    if (static_cast<double>(n) < 3.0 * opt.perplexity)
        throw ArgumentError("t-SNE perplexity " + format_real(opt.perplexity) + " infeasible for " +
                            std::to_string(n) + " rows (need at least 3 * perplexity)");

    std::vector<double> dist(n * n);
    kernels::pairwise_sq_dist(n, n, features.dim, features.values.data(), features.values.data(), dist.data());

    // Conditional affinities, then symmetrized joint P.
    std::vector<double> p(n * n);
    const double target = std::log(opt.perplexity);
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < static_cast<Index>(n); ++i) {
        const auto r = static_cast<std::size_t>(i);
        fit_row(dist.data() + r * n, n, r, target, opt, p.data() + r * n);
    }
    std::vector<double> joint(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            joint[i * n + j] = std::max((p[i * n + j] + p[j * n + i]) / (2.0 * static_cast<double>(n)), 1e-12);
    p.clear();
    p.shrink_to_fit();

    TsneResult res;
    res.rows = n;
    res.embedding.resize(n * 2);
    Rng rng(opt.seed);
    for (auto& v : res.embedding) v = rng.normal(0.0, 1e-4);

    std::vector<double> update(n * 2, 0.0), gains(n * 2, 1.0), grad(n * 2);
    std::vector<double> num(n * n), row_sums(n), row_kl(n);

    for (std::size_t it = 0; it < opt.iterations; ++it) {
        const double exaggeration = it < opt.exaggeration_iterations ? opt.early_exaggeration : 1.0;
        const double momentum = it < opt.momentum_switch ? opt.initial_momentum : opt.final_momentum;
        const double* y = res.embedding.data();

#pragma omp parallel for schedule(static)
        for (Index ii = 0; ii < static_cast<Index>(n); ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            double s = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) {
                    num[i * n + j] = 0;
                    continue;
                }
                const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
                const double v = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = v;
                s += v;
            }
            row_sums[i] = s;
        }
        double z = 0;
        for (std::size_t i = 0; i < n; ++i) z += row_sums[i];

#pragma omp parallel for schedule(static)
        for (Index ii = 0; ii < static_cast<Index>(n); ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            double gx = 0, gy = 0, kl = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const double pij = joint[i * n + j];
                const double qij = std::max(num[i * n + j] / z, 1e-12);
                kl += pij * std::log(pij / qij);
                const double mult = (exaggeration * pij - qij) * num[i * n + j];
                gx += mult * (y[2 * i] - y[2 * j]);
                gy += mult * (y[2 * i + 1] - y[2 * j + 1]);
            }
            grad[2 * i] = 4.0 * gx;
            grad[2 * i + 1] = 4.0 * gy;
            row_kl[i] = kl;
        }
        double kl = 0;
        for (std::size_t i = 0; i < n; ++i) kl += row_kl[i];
        res.kl.push_back(kl);

        for (std::size_t t = 0; t < n * 2; ++t) {
            const bool same_sign = (grad[t] > 0) == (update[t] > 0);
            gains[t] = same_sign ? std::max(gains[t] * 0.8, 0.01) : gains[t] + 0.2;
            update[t] = momentum * update[t] - opt.learning_rate * gains[t] * grad[t];
            res.embedding[t] += update[t];
        }
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < n; ++i) {
            mx += res.embedding[2 * i];
            my += res.embedding[2 * i + 1];
        }
        mx /= static_cast<double>(n);
        my /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            res.embedding[2 * i] -= mx;
            res.embedding[2 * i + 1] -= my;
        }
    }
    return res;
}

} // namespace ddlab::probes
