// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ddlab/data.hpp"
#include "ddlab/model_spec.hpp"
#include "ddlab/nn/train.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ddlab::sweep {

struct KpSettings {
    std::size_t k_neighbors = 5;
    bool in_sample = true;
    bool out_of_sample = true;
};

struct SweepConfig {
    Family family = Family::simplefc;
    std::vector<std::size_t> widths;      // strictly increasing
    double noise_p = 0.0;
    std::string dataset = "mnist";
    std::filesystem::path data_dir;
    std::size_t subsample = 0;            // train rows kept; 0 = all
    std::size_t test_subsample = 0;       // test rows kept; 0 = all
    std::uint64_t data_seed = 0;          // subsampling and the noise draw
    std::size_t replicates = 3;
    std::uint64_t base_seed = 0;          // job seeds derive from (base_seed, width, replicate)
    nn::TrainConfig train;
    KpSettings kp;
    std::filesystem::path output_dir;
    std::size_t workers = 1;
    bool batchnorm = true;
    // Writes wall_clock_seconds as 0 so reruns produce byte-identical CSVs.
    bool deterministic = true;

    void validate() const;
};

SweepConfig parse_sweep_config(const std::string& json_text);
SweepConfig load_sweep_config(const std::filesystem::path& path);
std::string sweep_config_to_json(const SweepConfig& cfg);

struct SweepRecord {
    Family family = Family::simplefc;
    std::size_t width_k = 0;
    std::size_t param_count = 0;
    double p = 0;
    std::size_t replicate = 0;
    std::uint64_t seed = 0;
    double train_loss = 0;
    double train_error = 0;
    double test_loss = 0;
    double test_error = 0;
    std::optional<double> kp_in_sample;
    std::optional<double> kp_out_of_sample;
    std::size_t epochs = 0;
    double wall_clock_seconds = 0;
    std::string noise_map_digest;

    friend bool operator==(const SweepRecord&, const SweepRecord&) = default;
};

// Fixed column order; the schema line precedes the column header in files.
inline constexpr const char* kSweepSchema = "#schema=ddlab.sweep.v1";
std::string csv_header();
std::string to_csv_row(const SweepRecord& r);
SweepRecord parse_csv_row(const std::string& line);
std::string write_sweep_csv(std::vector<SweepRecord> records);
std::vector<SweepRecord> read_sweep_csv(const std::filesystem::path& path);
std::vector<SweepRecord> parse_sweep_csv(const std::string& text);

std::uint64_t job_seed(std::uint64_t base_seed, std::size_t width, std::size_t replicate);

// Clean train/test sets for a sweep, already subsampled.
struct SweepData {
    LabeledDataset train;
    LabeledDataset test;
};

SweepData load_sweep_data(const SweepConfig& cfg);

struct SweepOutcome {
    std::vector<SweepRecord> records;  // ordered by (width, replicate)
    std::vector<std::string> failures;  // "w<k>_r<r>: message"
    std::string noise_map_digest;
    std::size_t jobs_run = 0;           // trained in this invocation
    std::size_t jobs_resumed = 0;       // read back from disk
};

// Runs every (width, replicate) job not already persisted under
// cfg.output_dir. Without `resume`, previously persisted jobs are discarded.
SweepOutcome run_sweep(const SweepConfig& cfg, bool resume = false);
SweepOutcome run_sweep(const SweepConfig& cfg, const SweepData& data, bool resume = false);

// Trains and probes a single job.
SweepRecord run_job(const SweepConfig& cfg, const LabeledDataset& noisy_train, const LabeledDataset& test,
                    const std::string& noise_digest, std::size_t width, std::size_t replicate);

struct MetricStats {
    double mean = 0;
    double stddev = 0;  // sample standard deviation; 0 for a single value
    std::size_t count = 0;
};

struct WidthAggregate {
    std::size_t width = 0;
    std::size_t param_count = 0;
    std::map<std::string, MetricStats> metrics;  // keyed by CSV column name

    const MetricStats* find(const std::string& metric) const;
};

// Per-width statistics over replicates, ascending in width. Records must
// share family and p. The result does not depend on record order.
std::vector<WidthAggregate> aggregate(const std::vector<SweepRecord>& records);

inline constexpr double kInterpolationEpsilon = 0.005;

// Smallest width whose mean train error is at most epsilon.
std::optional<std::size_t> detect_interpolation_threshold(const std::vector<std::size_t>& widths,
                                                          const std::vector<double>& train_errors,
                                                          double epsilon = kInterpolationEpsilon);

struct PeakWindow {
    double low = 0;
    double high = 0;
};

PeakWindow peak_window(std::size_t threshold);

// Width of maximal test error within [threshold/2, 4 threshold]; none when the
// maximum sits at the window's smallest width (curve falling from there).
std::optional<std::pair<std::size_t, double>> locate_test_error_peak(const std::vector<std::size_t>& widths,
                                                                     const std::vector<double>& test_errors,
                                                                     std::optional<std::size_t> threshold);

// Series helpers over an aggregate.
std::vector<std::size_t> widths_of(const std::vector<WidthAggregate>& agg);
std::vector<double> series_of(const std::vector<WidthAggregate>& agg, const std::string& metric);

} // namespace ddlab::sweep
