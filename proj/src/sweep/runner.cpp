// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddlab/kernels.hpp"
#include "ddlab/probes.hpp"
#include "ddlab/sweep.hpp"
#include "ddlab/zoo.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <mutex>
#include <thread>

#ifndef DDLAB_VERSION
#define DDLAB_VERSION "0.0.0"
#endif

namespace ddlab::sweep {

namespace fs = std::filesystem;
using nlohmann::json;

void SweepConfig::validate() const {
    if (widths.empty()) throw ArgumentError("sweep: width list is empty");
    for (std::size_t i = 1; i < widths.size(); ++i)
        if (widths[i] <= widths[i - 1]) throw ArgumentError("sweep: widths must be strictly increasing");
    for (auto w : widths)
        if (w < 1 || w > max_width(family))
            throw ArgumentError("sweep: width " + std::to_string(w) + " outside the family range");
    if (replicates < 1) throw ArgumentError("sweep: replicates must be at least 1");
    if (!(noise_p >= 0 && noise_p <= 1)) throw ArgumentError("sweep: noise ratio must lie in [0, 1]");
    if (workers < 1) throw ArgumentError("sweep: workers must be at least 1");
    if (output_dir.empty()) throw ArgumentError("sweep: output_dir is required");
    if (kp.k_neighbors < 1) throw ArgumentError("sweep: kp.k_neighbors must be at least 1");
    train.validate();
}

SweepConfig parse_sweep_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw DataError(std::string("sweep config is not valid JSON: ") + e.what());
    }
    SweepConfig c;
    try {
        c.family = parse_family(j.at("family").get<std::string>());
        c.widths = j.at("widths").get<std::vector<std::size_t>>();
        c.noise_p = j.value("noise_p", 0.0);
        c.dataset = j.value("dataset", std::string("mnist"));
        c.data_dir = j.value("data_dir", std::string());
        c.subsample = j.value("subsample", std::size_t{0});
        c.test_subsample = j.value("test_subsample", std::size_t{0});
        c.data_seed = j.value("data_seed", std::uint64_t{0});
        c.replicates = j.value("replicates", std::size_t{3});
        c.base_seed = j.value("base_seed", std::uint64_t{0});
        c.output_dir = j.at("output_dir").get<std::string>();
        c.workers = j.value("workers", std::size_t{1});
        c.batchnorm = j.value("batchnorm", true);
        c.deterministic = j.value("deterministic", true);
        if (j.contains("train")) {
            const auto& t = j.at("train");
            c.train.epochs = t.value("epochs", c.train.epochs);
            c.train.batch_size = t.value("batch_size", c.train.batch_size);
            c.train.lr_schedule = nn::parse_schedule(t.value("lr_schedule", std::string(nn::to_string(
                                                                                 c.family == Family::simplefc
                                                                                     ? nn::LrSchedule::simplefc
                                                                                     : nn::LrSchedule::cnn))));
            c.train.initial_lr = t.value("initial_lr", c.train.initial_lr);
            c.train.momentum = t.value("momentum", c.train.momentum);
            c.train.shuffle_per_epoch = t.value("shuffle_per_epoch", c.train.shuffle_per_epoch);
        } else if (c.family != Family::simplefc) {
            c.train.lr_schedule = nn::LrSchedule::cnn;
        }
        if (j.contains("kp")) {
            const auto& k = j.at("kp");
            c.kp.k_neighbors = k.value("k_neighbors", c.kp.k_neighbors);
            if (k.contains("modes")) {
                c.kp.in_sample = c.kp.out_of_sample = false;
                for (const auto& m : k.at("modes")) {
                    const auto mode = probes::parse_kp_mode(m.get<std::string>());
                    (mode == probes::KpMode::in_sample ? c.kp.in_sample : c.kp.out_of_sample) = true;
                }
            }
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("sweep config: ") + e.what());
    }
    c.validate();
    return c;
}

SweepConfig load_sweep_config(const fs::path& path) {
    if (!fs::exists(path)) throw DataError("sweep config not found: " + path.string());
    return parse_sweep_config(read_text_file(path));
}

std::string sweep_config_to_json(const SweepConfig& c) {
    json modes = json::array();
    if (c.kp.in_sample) modes.push_back("in_sample");
    if (c.kp.out_of_sample) modes.push_back("out_of_sample");
    json j = {
        {"family", to_string(c.family)},
        {"widths", c.widths},
        {"noise_p", c.noise_p},
        {"dataset", c.dataset},
        {"data_dir", c.data_dir.string()},
        {"subsample", c.subsample},
        {"test_subsample", c.test_subsample},
        {"data_seed", c.data_seed},
        {"replicates", c.replicates},
        {"base_seed", c.base_seed},
        {"output_dir", c.output_dir.string()},
        {"workers", c.workers},
        {"batchnorm", c.batchnorm},
        {"deterministic", c.deterministic},
        {"train",
         {{"epochs", c.train.epochs},
          {"batch_size", c.train.batch_size},
          {"lr_schedule", nn::to_string(c.train.lr_schedule)},
          {"initial_lr", c.train.initial_lr},
          {"momentum", c.train.momentum},
          {"shuffle_per_epoch", c.train.shuffle_per_epoch}}},
        {"kp", {{"k_neighbors", c.kp.k_neighbors}, {"modes", modes}}},
    };
    return j.dump(2);
}

std::uint64_t job_seed(std::uint64_t base_seed, std::size_t width, std::size_t replicate) {
    return derive_seed(base_seed, width, replicate);
}

SweepData load_sweep_data(const SweepConfig& cfg) {
    SweepData d;
    LabeledDataset train = load_dataset(cfg.dataset, cfg.data_dir, Split::train);
    d.train = cfg.subsample ? subsample(train, cfg.subsample, cfg.data_seed) : std::move(train);
    LabeledDataset test = load_dataset(cfg.dataset, cfg.data_dir, Split::test);
    d.test = cfg.test_subsample ? subsample(test, cfg.test_subsample, derive_seed(cfg.data_seed, 0x7e57))
                                : std::move(test);
    return d;
}

namespace {

ModelSpec spec_for(const SweepConfig& cfg, const LabeledDataset& train, std::size_t width) {
    ModelSpec s;
    s.family = cfg.family;
    s.width = width;
    s.input_shape = train.sample_shape();
    s.class_count = train.class_count;
    s.batchnorm = cfg.batchnorm;
    return s;
}

std::string job_name(std::size_t width, std::size_t replicate) {
    return "w" + std::to_string(width) + "_r" + std::to_string(replicate);
}

} // namespace

SweepRecord run_job(const SweepConfig& cfg, const LabeledDataset& noisy_train, const LabeledDataset& test,
                    const std::string& noise_digest, std::size_t width, std::size_t replicate) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t seed = job_seed(cfg.base_seed, width, replicate);
    const ModelSpec spec = spec_for(cfg, noisy_train, width);
    nn::Model model = zoo::build_model(spec, derive_seed(seed, 0x1));
    nn::TrainConfig tc = cfg.train;
    tc.seed = derive_seed(seed, 0x2);
    const auto hist = nn::train(model, noisy_train, test, tc);

    SweepRecord r;
    r.family = cfg.family;
    r.width_k = width;
    r.param_count = zoo::count_params(spec);
    r.p = cfg.noise_p;
    r.replicate = replicate;
    r.seed = seed;
    r.train_loss = hist.final_train.loss;
    r.train_error = hist.final_train.error;
    r.test_loss = hist.final_test.loss;
    r.test_error = hist.final_test.error;
    r.epochs = tc.epochs;
    r.noise_map_digest = noise_digest;
    if (noisy_train.noise_injected() && (cfg.kp.in_sample || cfg.kp.out_of_sample)) {
        const auto train_features = probes::extract_features(model, noisy_train);
        if (cfg.kp.in_sample)
            r.kp_in_sample =
                probes::compute_kp(train_features, noisy_train, cfg.kp.k_neighbors, probes::KpMode::in_sample).kp;
        if (cfg.kp.out_of_sample && test.size() > 0) {
            const auto test_features = probes::extract_features(model, test);
            r.kp_out_of_sample = probes::compute_kp(train_features, noisy_train, cfg.kp.k_neighbors,
                                                    probes::KpMode::out_of_sample, &test_features, &test)
                                     .kp;
        }
    }
    r.wall_clock_seconds =
        cfg.deterministic ? 0.0 : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

SweepOutcome run_sweep(const SweepConfig& cfg, bool resume) {
    cfg.validate();
    return run_sweep(cfg, load_sweep_data(cfg), resume);
}

SweepOutcome run_sweep(const SweepConfig& cfg, const SweepData& data, bool resume) {
    cfg.validate();
    const fs::path out = cfg.output_dir;
    const fs::path jobs_dir = out / "jobs";
    if (!resume && fs::exists(jobs_dir)) fs::remove_all(jobs_dir);
    fs::create_directories(jobs_dir);

    // One noise draw per (p, data seed), shared by every job.
    const fs::path map_path = out / "noise_map.txt";
    NoiseMap map;
    LabeledDataset noisy;
    if (resume && fs::exists(map_path)) {
        map = load_noise_map(map_path);
        if (map.p != cfg.noise_p || map.seed != derive_seed(cfg.data_seed, 0x6e))
            throw DataError("existing noise map does not belong to this sweep config");
        noisy = apply_noise_map(data.train, map);
    } else {
        auto [ds, m] = inject_label_noise(data.train, cfg.noise_p, derive_seed(cfg.data_seed, 0x6e));
        m.subsample_seed = cfg.data_seed;
        noisy = std::move(ds);
        map = std::move(m);
        save_noise_map(map, map_path);
    }
    const std::string digest = map.digest();

    struct Job {
        std::size_t width, replicate;
    };
    std::vector<Job> jobs;
    for (auto w : cfg.widths)
        for (std::size_t r = 0; r < cfg.replicates; ++r) jobs.push_back({w, r});

    SweepOutcome outcome;
    outcome.noise_map_digest = digest;
    std::vector<std::optional<SweepRecord>> results(jobs.size());
    std::mutex mu;
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        if (cfg.workers > 1) kernels::set_threads(1);
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            const auto [w, r] = jobs[i];
            const fs::path record_path = jobs_dir / (job_name(w, r) + ".csv");
            const fs::path failed_path = jobs_dir / (job_name(w, r) + ".failed");
            if (resume && fs::exists(record_path)) {
                const auto recs = parse_sweep_csv(read_text_file(record_path));
                if (recs.size() == 1 && recs[0].noise_map_digest == digest) {
                    std::lock_guard lock(mu);
                    results[i] = recs[0];
                    ++outcome.jobs_resumed;
                    continue;
                }
            }
            try {
                SweepRecord rec = run_job(cfg, noisy, data.test, digest, w, r);
                write_file_atomic(record_path, write_sweep_csv({rec}));
                if (fs::exists(failed_path)) fs::remove(failed_path);
                std::lock_guard lock(mu);
                results[i] = std::move(rec);
                ++outcome.jobs_run;
            } catch (const std::exception& e) {
                write_file_atomic(failed_path, std::string(e.what()) + '\n');
                std::lock_guard lock(mu);
                outcome.failures.push_back(job_name(w, r) + ": " + e.what());
            }
        }
    };

    const std::size_t nworkers = std::min(cfg.workers, jobs.size());
    if (nworkers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < nworkers; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    for (auto& r : results)
        if (r) outcome.records.push_back(std::move(*r));
    std::sort(outcome.failures.begin(), outcome.failures.end());

    write_file_atomic(out / "results.csv", write_sweep_csv(outcome.records));

    json manifest = {
        {"config", json::parse(sweep_config_to_json(cfg))},
        {"noise_map_digest", digest},
        {"noise_map_convention", map.convention},
        {"noisy_count", map.entries.size()},
        {"code_version", DDLAB_VERSION},
        {"records", outcome.records.size()},
        {"failures", outcome.failures},
        {"interpolation_epsilon", kInterpolationEpsilon},
        {"peak_window", "[threshold/2, 4*threshold]"},
        {"kp_metric", "euclidean"},
        {"train_metrics", "eval-mode pass after the final epoch; train error against assigned labels"},
    };
    if (!outcome.records.empty()) {
        const auto agg = aggregate(outcome.records);
        const auto thr = detect_interpolation_threshold(widths_of(agg), series_of(agg, "train_error"));
        manifest["interpolation_threshold"] = thr ? json(*thr) : json(nullptr);
        const auto peak = locate_test_error_peak(widths_of(agg), series_of(agg, "test_error"), thr);
        manifest["test_error_peak_width"] = peak ? json(peak->first) : json(nullptr);
    }
    write_file_atomic(out / "manifest.json", manifest.dump(2) + '\n');
    return outcome;
}

} // namespace ddlab::sweep
