// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace ddlab::testing {

double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    // Below finite-difference resolution both sides are zero in effect; compare absolutely.
    const double denom = std::max(std::sqrt(na) + std::sqrt(nb), 1e-4);
    return std::sqrt(diff) / denom;
}

Tensor normal_input(const Shape& shape, Rng& rng) {
    Tensor t(shape);
    for (auto& v : t.values()) v = static_cast<Real>(rng.normal());
    return t;
}

Tensor kink_free_input(const Shape& shape, Rng& rng) {
    Tensor t(shape);
    for (auto& v : t.values()) v = static_cast<Real>((rng.uniform01() < 0.5 ? -1 : 1) * rng.uniform(0.05, 1.0));
    return t;
}

Tensor distinct_input(const Shape& shape, Rng& rng) {
    Tensor t(shape);
    std::vector<std::size_t> order(t.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (std::size_t i = 0; i < order.size(); ++i) t[order[i]] = static_cast<Real>(0.01 * static_cast<double>(i) - 1.0);
    return t;
}

namespace {

double dot(const Tensor& a, const Tensor& r) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(r[i]);
    return s;
}

std::vector<std::size_t> probe_entries(std::size_t size, std::size_t max_entries, Rng& rng) {
    std::vector<std::size_t> idx;
    if (max_entries == 0 || size <= max_entries) {
        idx.resize(size);
        std::iota(idx.begin(), idx.end(), 0);
    } else {
        idx = rng.sample_without_replacement(size, max_entries);
    }
    return idx;
}

void track(GradCheck& g, const std::vector<double>& a, const std::vector<double>& n, const std::string& name) {
    const double e = relative_error(a, n);
    if (e >= g.worst) {
        g.worst = e;
        g.worst_tensor = name;
    }
}

} // namespace

GradCheck check_layer(nn::Layer& layer, const Tensor& x, nn::Mode mode, Rng& rng, double h, std::size_t max_entries) {
    GradCheck result;
    nn::LayerCache cache;
    const Tensor out = layer.forward(x, mode, &cache);
    const Tensor r = normal_input(out.shape(), rng);
    auto params = layer.parameters();
    std::vector<Tensor> grads(params.size());
    const Tensor gx = layer.backward(r, cache, grads);

    auto loss_at = [&](const Tensor& input) { return dot(layer.forward(input, mode, nullptr), r); };

    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& value = params[p]->value;
        std::vector<double> analytic, numeric;
        for (std::size_t i : probe_entries(value.size(), max_entries, rng)) {
            const Real saved = value[i];
            value[i] = static_cast<Real>(saved + h);
            const double up = loss_at(x);
            value[i] = static_cast<Real>(saved - h);
            const double down = loss_at(x);
            value[i] = saved;
            numeric.push_back((up - down) / (2 * h));
            analytic.push_back(grads[p][i]);
            result.evaluations += 2;
        }
        track(result, analytic, numeric, params[p]->name);
    }
    Tensor xp = x;
    std::vector<double> analytic, numeric;
    for (std::size_t i : probe_entries(x.size(), max_entries, rng)) {
        const Real saved = xp[i];
        xp[i] = static_cast<Real>(saved + h);
        const double up = loss_at(xp);
        xp[i] = static_cast<Real>(saved - h);
        const double down = loss_at(xp);
        xp[i] = saved;
        numeric.push_back((up - down) / (2 * h));
        analytic.push_back(gx[i]);
        result.evaluations += 2;
    }
    track(result, analytic, numeric, "input");
    return result;
}

GradCheck check_model(nn::Model& model, const Tensor& x, const std::vector<Label>& labels, Rng& rng, double h,
                      std::size_t entries_per_tensor) {
    GradCheck result;
    auto fwd = model.forward(x, nn::Mode::train);
    const auto loss = nn::cross_entropy(fwd.logits, labels);
    const auto grads = model.backward(fwd.cache, loss.grad_logits);

    // Independent softmax cross-entropy on the logits.
    auto loss_at = [&]() {
        const Tensor logits = model.forward(x, nn::Mode::train).logits;
        const std::size_t n = logits.dim(0), c = logits.dim(1);
        double total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double mx = -INFINITY;
            for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, static_cast<double>(logits[i * c + j]));
            double z = 0;
            for (std::size_t j = 0; j < c; ++j) z += std::exp(logits[i * c + j] - mx);
            total += std::log(z) + mx - logits[i * c + static_cast<std::size_t>(labels[i])];
        }
        return total / static_cast<double>(n);
    };

    auto params = model.parameters();
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& value = params[p]->value;
        std::vector<double> analytic, numeric;
        for (std::size_t i : probe_entries(value.size(), entries_per_tensor, rng)) {
            const Real saved = value[i];
            value[i] = static_cast<Real>(saved + h);
            const double up = loss_at();
            value[i] = static_cast<Real>(saved - h);
            const double down = loss_at();
            value[i] = saved;
            numeric.push_back((up - down) / (2 * h));
            analytic.push_back(grads[p][i]);
            result.evaluations += 2;
        }
        track(result, analytic, numeric, std::to_string(p) + ":" + params[p]->name);
    }
    return result;
}

std::vector<Label> knn_oracle(const std::vector<std::vector<double>>& query, const std::vector<std::vector<double>>& ref,
                              const std::vector<Label>& ref_labels, std::size_t k, const std::vector<long>& query_ids,
                              const std::vector<long>& ref_ids) {
    std::vector<Label> out;
    for (std::size_t q = 0; q < query.size(); ++q) {
        std::vector<std::pair<double, std::size_t>> cand;
        for (std::size_t r = 0; r < ref.size(); ++r) {
            if (!query_ids.empty() && query_ids[q] == ref_ids[r]) continue;
            double d = 0;
            for (std::size_t j = 0; j < ref[r].size(); ++j) d += (query[q][j] - ref[r][j]) * (query[q][j] - ref[r][j]);
            cand.emplace_back(d, r);
        }
        std::sort(cand.begin(), cand.end());
        std::map<Label, std::size_t> votes;
        for (std::size_t i = 0; i < k; ++i) ++votes[ref_labels[cand[i].second]];
        std::size_t best = 0;
        for (const auto& [c, v] : votes) best = std::max(best, v);
        Label winner = -1;
        for (std::size_t i = 0; i < k && winner < 0; ++i)
            if (votes[ref_labels[cand[i].second]] == best) winner = ref_labels[cand[i].second];
        out.push_back(winner);
    }
    return out;
}

double trustworthiness(const std::vector<std::vector<double>>& x, const std::vector<double>& y, std::size_t k) {
    const std::size_t n = x.size();
    auto sq = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0;
        for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
        return s;
    };
    double penalty = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::pair<double, std::size_t>> in, emb;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            in.emplace_back(sq(x[i], x[j]), j);
            const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
            emb.emplace_back(dx * dx + dy * dy, j);
        }
        std::sort(in.begin(), in.end());
        std::sort(emb.begin(), emb.end());
        std::vector<std::size_t> rank(n, 0);
        for (std::size_t r = 0; r < in.size(); ++r) rank[in[r].second] = r + 1;
        for (std::size_t r = 0; r < k; ++r) {
            const std::size_t j = emb[r].second;
            if (rank[j] > k) penalty += static_cast<double>(rank[j] - k);
        }
    }
    const double nn = static_cast<double>(n), kk = static_cast<double>(k);
    return 1.0 - 2.0 / (nn * kk * (2.0 * nn - 3.0 * kk - 1.0)) * penalty;
}

double lr_direct(nn::LrSchedule s, std::size_t epoch, double lr0) {
    const double e = static_cast<double>(epoch);
    if (s == nn::LrSchedule::simplefc) return lr0 / std::sqrt(1.0 + std::floor(e / 50.0));
    return lr0 / std::sqrt(1.0 + 10.0 * e);
}

std::size_t enumerate_params(const nn::Model& model) {
    std::size_t total = 0;
    for (const auto& layer : model.layers())
        for (const auto* p : layer->parameters()) {
            std::size_t n = 1;
            for (auto d : p->value.shape()) n *= d;
            total += n;
        }
    return total;
}

probes::FeatureMatrix gaussian_clusters(std::size_t per_cluster, std::size_t dim, std::uint64_t seed,
                                        std::vector<Label>* labels) {
    Rng rng(seed);
    probes::FeatureMatrix f;
    f.dim = dim;
    for (std::size_t c = 0; c < 3; ++c) {
        std::vector<double> mean(dim, 0.0);
        mean[c % dim] = 20.0;
        for (std::size_t i = 0; i < per_cluster; ++i) {
            for (std::size_t j = 0; j < dim; ++j) f.values.push_back(mean[j] + rng.normal());
            f.sample_ids.push_back(f.sample_ids.size());
            if (labels) labels->push_back(static_cast<Label>(c));
        }
    }
    return f;
}

std::vector<std::vector<double>> rows_of(const probes::FeatureMatrix& f) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < f.rows(); ++i) rows.emplace_back(f.row(i).begin(), f.row(i).end());
    return rows;
}

} // namespace ddlab::testing
