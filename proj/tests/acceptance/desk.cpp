// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

// Desk-scale criteria on the real datasets. Sweeps persist under work_dir and
// resume, so an interrupted run continues where it stopped.

#include "criteria.hpp"

#include "ddlab/probes.hpp"
#include "ddlab/sweep.hpp"
#include "ddlab/zoo.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

namespace ddlab::acceptance {

namespace fs = std::filesystem;

namespace {

const std::vector<std::size_t> kMnistWidths = {2, 4, 6, 8, 10, 12, 15, 18, 22, 30, 50, 100, 250, 600};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

sweep::SweepConfig mnist_config(const DeskOptions& opt, double p, const std::string& tag) {
    sweep::SweepConfig cfg;
    cfg.family = Family::simplefc;
    cfg.widths = kMnistWidths;
    cfg.noise_p = p;
    cfg.dataset = "mnist";
    cfg.data_dir = opt.data_dir / "mnist";
    cfg.subsample = 4000;
    cfg.data_seed = 2024;
    cfg.base_seed = 2024;
    cfg.replicates = 3;
    cfg.train.epochs = opt.epochs;
    cfg.train.lr_schedule = nn::LrSchedule::simplefc;
    cfg.kp.out_of_sample = false;
    cfg.output_dir = opt.work_dir / tag;
    cfg.workers = opt.workers;
    return cfg;
}

struct Curves {
    std::vector<std::size_t> widths;
    std::vector<double> train_error, test_error, kp;
    std::optional<std::size_t> threshold;
};

Curves run_curves(const sweep::SweepConfig& cfg) {
    std::cerr << "  sweep " << cfg.output_dir.string() << " (resumable)\n";
    const auto out = sweep::run_sweep(cfg, true);
    if (!out.failures.empty()) throw NumericError("sweep jobs failed: " + out.failures.front());
    const auto agg = sweep::aggregate(out.records);
    Curves c;
    c.widths = sweep::widths_of(agg);
    c.train_error = sweep::series_of(agg, "train_error");
    c.test_error = sweep::series_of(agg, "test_error");
    c.kp = sweep::series_of(agg, "kp_in_sample");
    c.threshold = sweep::detect_interpolation_threshold(c.widths, c.train_error);
    return c;
}

struct Peak {
    std::size_t index = 0;
    double over_smaller = 0;  // peak minus best test error at smaller widths
    double over_larger = 0;   // peak minus best test error at larger widths
    double prominence() const { return std::max(0.0, std::min(over_smaller, over_larger)); }
};

std::optional<Peak> interior_peak(const Curves& c) {
    const auto found = sweep::locate_test_error_peak(c.widths, c.test_error, c.threshold);
    if (!found) return std::nullopt;
    Peak p;
    p.index = static_cast<std::size_t>(std::find(c.widths.begin(), c.widths.end(), found->first) - c.widths.begin());
    if (p.index == 0 || p.index + 1 == c.widths.size()) return std::nullopt;
    const double smaller = *std::min_element(c.test_error.begin(), c.test_error.begin() + static_cast<long>(p.index));
    const double larger = *std::min_element(c.test_error.begin() + static_cast<long>(p.index) + 1, c.test_error.end());
    p.over_smaller = c.test_error[p.index] - smaller;
    p.over_larger = c.test_error[p.index] - larger;
    return p;
}

} // namespace

Outcome mnist_double_descent(const DeskOptions& opt) {
    const Curves c20 = run_curves(mnist_config(opt, 0.2, "mnist_p20"));
    const Curves c10 = run_curves(mnist_config(opt, 0.1, "mnist_p10"));
    std::string detail;
    bool ok = true;

    if (!c20.threshold) return {Status::fail, "(a) p=20%: no width reaches mean train error <= 0.005"};
    detail += "(a) threshold k=" + std::to_string(*c20.threshold);

    const auto peak = interior_peak(c20);
    if (!peak) return {Status::fail, detail + "; (b) no interior test-error peak in [t/2, 4t]"};
    const bool b = peak->over_smaller >= 0.02 && peak->over_larger >= 0.02;
    ok &= b;
    detail += "; (b) peak k=" + std::to_string(c20.widths[peak->index]) + " +" + fmt(peak->over_smaller) + "/+" +
              fmt(peak->over_larger) + (b ? "" : " [FAIL]");

    const double kp_last = c20.kp.back(), kp_peak = c20.kp[peak->index];
    const bool cc = kp_last >= 0.85;
    const bool d = kp_last - kp_peak >= 0.1;
    ok &= cc && d;
    detail += "; (c) Kp(k=" + std::to_string(c20.widths.back()) + ")=" + fmt(kp_last) + (cc ? "" : " [FAIL]") +
              "; (d) Kp(peak)=" + fmt(kp_peak) + (d ? "" : " [FAIL]");

    const auto peak10 = interior_peak(c10);
    const double prom10 = peak10 ? peak10->prominence() : 0.0;
    const bool e = prom10 < peak->prominence();
    ok &= e;
    detail += "; p=10% peak prominence " + fmt(prom10) + " vs p=20% " + fmt(peak->prominence()) + (e ? "" : " [FAIL]");
    return {ok ? Status::pass : Status::fail, detail};
}

Outcome mnist_noise_free(const DeskOptions& opt) {
    const Curves c = run_curves(mnist_config(opt, 0.0, "mnist_p0"));
    std::string bumps;
    for (std::size_t i = 1; i + 1 < c.widths.size(); ++i)
        if (c.test_error[i] > c.test_error[i - 1] + 0.01 && c.test_error[i] > c.test_error[i + 1] + 0.01)
            bumps += " k=" + std::to_string(c.widths[i]);
    const bool near15 = c.threshold && *c.threshold >= 10 && *c.threshold <= 20;
    return {bumps.empty() && near15 ? Status::pass : Status::fail,
            "threshold " + (c.threshold ? "k=" + std::to_string(*c.threshold) : std::string("not reached")) +
                (near15 ? "" : " [outside 15 +/- 5]") + "; interior bumps > 0.01:" + (bumps.empty() ? " none" : bumps)};
}

Outcome cifar_properties(const DeskOptions& opt) {
    std::string detail;
    bool ok = true;

    // shape propagation
    for (std::size_t k : {1u, 2u, 4u}) {
        for (Family f : {Family::cnn5, Family::resnet18}) {
            const ModelSpec spec = cifar_spec(f, k);
            if (zoo::feature_dim(spec) != 8 * k || zoo::build_model(spec, 1).feature_dim() != 8 * k) ok = false;
        }
        const auto stages = zoo::stage_shapes(cifar_spec(Family::resnet18, k));
        const std::size_t maps[] = {32, 16, 8, 4};
        for (std::size_t s = 0; s < 4; ++s)
            if (stages.at(s) != Shape{k << s, maps[s], maps[s]}) ok = false;
    }
    detail += ok ? "shapes ok" : "shape mismatch";

    const fs::path dir = opt.data_dir / "cifar10";
    const LabeledDataset train = subsample(load_cifar10(dir, Split::train), 2000, 7);
    const LabeledDataset test = subsample(load_cifar10(dir, Split::test), 1000, 8);
    nn::TrainConfig tc;
    tc.epochs = 50;
    tc.lr_schedule = nn::LrSchedule::cnn;
    for (Family f : {Family::cnn5, Family::resnet18}) {
        for (std::size_t k : {1u, 2u, 4u}) {
            nn::Model m = zoo::build_model(cifar_spec(f, k), derive_seed(11, k));
            tc.seed = derive_seed(12, k);
            std::cerr << "  " << to_string(f) << " k=" << k << " on 2000 CIFAR-10 samples\n";
            const auto h = nn::train(m, train, test, tc);
            detail += std::string("; ") + to_string(f) + " k=" + std::to_string(k) + " train err " +
                      fmt(h.final_train.error);
            if (k == 4 && h.final_train.error > 0.05) {
                ok = false;
                detail += " [FAIL]";
            }
        }
    }

    const auto [noisy, map] = inject_label_noise(train, 0.2, 13);
    nn::Model m = zoo::build_model(cifar_spec(Family::cnn5, 2), 14);
    tc.epochs = 5;
    nn::train(m, noisy, test, tc);
    const auto rep = probes::compute_kp(m, noisy, 5, probes::KpMode::in_sample);
    const bool kp_ok = rep.kp >= 0 && rep.kp <= 1 && rep.noisy_count == map.entries.size();
    ok &= kp_ok;
    detail += "; Kp pipeline " + fmt(rep.kp) + (kp_ok ? "" : " [FAIL]");
    return {ok ? Status::pass : Status::fail, detail};
}

Outcome determinism_desk(const DeskOptions& opt) {
    auto cfg = mnist_config(opt, 0.2, "determinism");
    const auto data = sweep::load_sweep_data(cfg);
    const auto [noisy, map] = inject_label_noise(data.train, cfg.noise_p, derive_seed(cfg.data_seed, 0x6e));
    const std::size_t k = cfg.widths.front();
    const auto a = sweep::run_job(cfg, noisy, data.test, map.digest(), k, 0);
    const auto b = sweep::run_job(cfg, noisy, data.test, map.digest(), k, 0);
    const bool same = sweep::to_csv_row(a) == sweep::to_csv_row(b);
    return {same ? Status::pass : Status::fail,
            "SimpleFC k=" + std::to_string(k) + ", " + std::to_string(cfg.train.epochs) + " epochs, rows " +
                (same ? "bitwise identical" : "differ")};
}

} // namespace ddlab::acceptance
