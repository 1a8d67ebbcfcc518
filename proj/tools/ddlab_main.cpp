// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

// ddlab: label-noise double-descent experiments from the command line.
// Exit codes: 0 ok, 1 usage, 2 data, 3 numeric failure.

#include "fetch.hpp"

#include "ddlab/kernels.hpp"
#include "ddlab/probes.hpp"
#include "ddlab/report.hpp"
#include "ddlab/sweep.hpp"
#include "ddlab/zoo.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <functional>
#include <iostream>

namespace fs = std::filesystem;
using namespace ddlab;

namespace {

fs::path resolve_data_dir(const std::string& flag, const std::string& dataset) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("DDLAB_DATA_DIR"); env && *env) return fs::path(env) / dataset;
    return fs::path("data") / dataset;
}

// The training set a noise map was drawn for, with the map applied.
LabeledDataset train_set_for(const NoiseMap& map, const std::string& data_dir_flag) {
    if (map.dataset.empty()) throw DataError("noise map does not name its dataset");
    LabeledDataset full = load_dataset(map.dataset, resolve_data_dir(data_dir_flag, map.dataset), Split::train);
    if (map.dataset_size < full.size()) full = subsample(full, map.dataset_size, map.subsample_seed);
    return apply_noise_map(full, map);
}

LabeledDataset test_set_for(const NoiseMap& map, const std::string& data_dir_flag, std::size_t test_n) {
    LabeledDataset test = load_dataset(map.dataset, resolve_data_dir(data_dir_flag, map.dataset), Split::test);
    if (test_n && test_n < test.size()) test = subsample(test, test_n, derive_seed(map.subsample_seed, 0x7e57));
    return test;
}

struct DataArgs {
    std::string data_dir;
    std::string noise_map;
    std::size_t test_n = 0;
};

void add_data_args(CLI::App* cmd, DataArgs& a) {
    cmd->add_option("--data-dir", a.data_dir, "Dataset directory (default $DDLAB_DATA_DIR/<dataset>)");
    cmd->add_option("--noise-map", a.noise_map, "Noise map naming the training set")->required();
    cmd->add_option("--test-n", a.test_n, "Test rows to keep (0 = all)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ddlab: width sweeps, label noise and feature-space probes"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");
    int threads = 0;
    app.add_option("--threads", threads, "OpenMP threads (0 = runtime default)");

    std::function<int()> run;

    // fetch-data
    auto* fetch_cmd = app.add_subcommand("fetch-data", "Download or verify the standard dataset archives");
    std::string fetch_dataset = "mnist", fetch_dir, mirror;
    bool verify_only = false;
    fetch_cmd->add_option("--dataset", fetch_dataset)->check(CLI::IsMember({"mnist", "cifar10"}));
    fetch_cmd->add_option("--dir", fetch_dir, "Target directory (default $DDLAB_DATA_DIR/<dataset>)");
    fetch_cmd->add_option("--mirror", mirror, "Base URL tried before the default hosts");
    fetch_cmd->add_flag("--verify-only", verify_only, "Only check archive checksums");
    fetch_cmd->callback([&] {
        run = [&] {
            const fs::path dir = resolve_data_dir(fetch_dir, fetch_dataset);
            fetch::fetch_dataset(fetch_dataset, dir, verify_only, mirror);
            std::cerr << fetch_dataset << " ready in " << dir.string() << '\n';
            return 0;
        };
    });

    // inject-noise
    auto* noise_cmd = app.add_subcommand("inject-noise", "Draw a label-noise map for a (subsampled) training set");
    std::string noise_dataset = "mnist", noise_dir, noise_out;
    std::size_t noise_n = 0;
    double noise_p = 0;
    std::uint64_t noise_seed = 0, subsample_seed = 0;
    noise_cmd->add_option("--dataset", noise_dataset)->check(CLI::IsMember({"mnist", "cifar10"}));
    noise_cmd->add_option("--data-dir", noise_dir);
    noise_cmd->add_option("--n", noise_n, "Training rows to keep (0 = all)");
    noise_cmd->add_option("--p", noise_p, "Noise ratio in [0, 1]")->required();
    noise_cmd->add_option("--seed", noise_seed, "Noise seed");
    noise_cmd->add_option("--subsample-seed", subsample_seed, "Seed for choosing the --n rows");
    noise_cmd->add_option("--out", noise_out)->required();
    noise_cmd->callback([&] {
        run = [&] {
            LabeledDataset ds = load_dataset(noise_dataset, resolve_data_dir(noise_dir, noise_dataset), Split::train);
            if (noise_n && noise_n != ds.size()) ds = subsample(ds, noise_n, subsample_seed);
            auto [noisy, map] = inject_label_noise(ds, noise_p, noise_seed);
            map.subsample_seed = subsample_seed;
            save_noise_map(map, noise_out);
            std::cerr << "flagged " << map.entries.size() << " of " << map.dataset_size << " rows, digest "
                      << map.digest() << '\n';
            return 0;
        };
    });

    // train
    auto* train_cmd = app.add_subcommand("train", "Train one model on a noisy training set");
    DataArgs train_data;
    add_data_args(train_cmd, train_data);
    std::string family_name, ckpt_out, history_out, schedule_name;
    std::size_t width = 0;
    nn::TrainConfig tc;
    std::uint64_t train_seed = 0;
    bool no_batchnorm = false;
    std::size_t log_every = 10;
    train_cmd->add_option("--family", family_name)->required()->check(CLI::IsMember({"simplefc", "cnn5", "resnet18"}));
    train_cmd->add_option("--width", width)->required();
    train_cmd->add_option("--epochs", tc.epochs);
    train_cmd->add_option("--batch-size", tc.batch_size);
    train_cmd->add_option("--lr", tc.initial_lr);
    train_cmd->add_option("--schedule", schedule_name, "simplefc or cnn (default by family)");
    train_cmd->add_option("--momentum", tc.momentum);
    train_cmd->add_option("--seed", train_seed, "Job seed; same derivation as sweep jobs");
    train_cmd->add_flag("--no-batchnorm", no_batchnorm, "CNN5 without batch normalization");
    train_cmd->add_option("--log-every", log_every, "Progress line every N epochs (0 = silent)");
    train_cmd->add_option("--out", ckpt_out)->required();
    train_cmd->add_option("--history", history_out);
    train_cmd->callback([&] {
        run = [&] {
            const NoiseMap map = load_noise_map(train_data.noise_map);
            const LabeledDataset ds = train_set_for(map, train_data.data_dir);
            const LabeledDataset test = test_set_for(map, train_data.data_dir, train_data.test_n);
            ModelSpec spec;
            spec.family = parse_family(family_name);
            spec.width = width;
            spec.input_shape = ds.sample_shape();
            spec.class_count = ds.class_count;
            spec.batchnorm = !no_batchnorm;
            tc.lr_schedule = schedule_name.empty()
                                 ? (spec.family == Family::simplefc ? nn::LrSchedule::simplefc : nn::LrSchedule::cnn)
                                 : nn::parse_schedule(schedule_name);
            tc.seed = derive_seed(train_seed, 0x2);
            nn::Model model = zoo::build_model(spec, derive_seed(train_seed, 0x1));
            std::cerr << to_string(spec.family) << " k=" << width << ": " << model.parameter_count()
                      << " parameters, " << ds.size() << " train rows (" << ds.noisy_count() << " noisy)\n";
            nn::BatchObserver obs;
            if (log_every)
                obs = [&](const nn::BatchEvent& e) {
                    if (e.batch == 0 && e.epoch % log_every == 0)
                        std::cerr << "epoch " << e.epoch << " lr " << format_real(e.lr) << " loss "
                                  << format_real(e.loss) << '\n';
                };
            const auto hist = nn::train(model, ds, test, tc, obs);
            nn::save_checkpoint(model, tc.seed, ckpt_out);
            if (!history_out.empty()) {
                std::string h = "#schema=ddlab.history.v1\nepoch,lr,train_loss,train_error,seconds\n";
                for (std::size_t e = 0; e < hist.train_loss.size(); ++e)
                    h += std::to_string(e) + ',' + format_real(nn::lr_at(tc.lr_schedule, e, tc.initial_lr)) + ',' +
                         format_real(hist.train_loss[e]) + ',' + format_real(hist.train_error[e]) + ',' +
                         format_real(hist.epoch_seconds[e]) + '\n';
                write_file_atomic(history_out, h);
            }
            std::cerr << "final train loss " << format_real(hist.final_train.loss) << " error "
                      << format_real(hist.final_train.error) << "; test loss " << format_real(hist.final_test.loss)
                      << " error " << format_real(hist.final_test.error) << '\n';
            return 0;
        };
    });

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "Run a width sweep from a JSON config");
    std::string config_path;
    std::size_t workers = 0;
    bool resume = false;
    sweep_cmd->add_option("--config", config_path)->required();
    sweep_cmd->add_option("--workers", workers, "Concurrent jobs (overrides the config)");
    sweep_cmd->add_flag("--resume", resume, "Keep finished jobs from a previous run");
    sweep_cmd->callback([&] {
        run = [&] {
            sweep::SweepConfig cfg = sweep::load_sweep_config(config_path);
            if (workers) cfg.workers = workers;
            if (cfg.data_dir.empty()) cfg.data_dir = resolve_data_dir("", cfg.dataset);
            cfg.validate();
            const auto out = sweep::run_sweep(cfg, resume);
            std::cerr << "sweep: " << out.records.size() << " records (" << out.jobs_run << " trained, "
                      << out.jobs_resumed << " resumed), noise map " << out.noise_map_digest << '\n';
            if (!out.records.empty()) {
                const auto agg = sweep::aggregate(out.records);
                const auto thr =
                    sweep::detect_interpolation_threshold(sweep::widths_of(agg), sweep::series_of(agg, "train_error"));
                std::cerr << "interpolation threshold: " << (thr ? "k=" + std::to_string(*thr) : "not reached")
                          << '\n';
            }
            for (const auto& f : out.failures) std::cerr << "failed " << f << '\n';
            return out.failures.empty() ? 0 : 3;
        };
    });

    // probe
    auto* probe_cmd = app.add_subcommand("probe", "Feature-space probes of a trained checkpoint");
    probe_cmd->require_subcommand(1);
    std::string checkpoint;

    auto* kp_cmd = probe_cmd->add_subcommand("kp", "Kp: k-NN recovery of true labels of noisy samples");
    DataArgs kp_data;
    std::size_t kp_k = 5;
    std::string kp_mode = "in_sample", kp_json;
    kp_cmd->add_option("--checkpoint", checkpoint)->required();
    add_data_args(kp_cmd, kp_data);
    kp_cmd->add_option("--k", kp_k);
    kp_cmd->add_option("--mode", kp_mode)->check(CLI::IsMember({"in_sample", "out_of_sample"}));
    kp_cmd->add_option("--json", kp_json, "Also write the report as JSON");
    kp_cmd->callback([&] {
        run = [&] {
            const NoiseMap map = load_noise_map(kp_data.noise_map);
            const auto ck = nn::load_checkpoint(checkpoint);
            const LabeledDataset ds = train_set_for(map, kp_data.data_dir);
            const auto mode = probes::parse_kp_mode(kp_mode);
            LabeledDataset test;
            if (mode == probes::KpMode::out_of_sample) test = test_set_for(map, kp_data.data_dir, kp_data.test_n);
            const auto rep =
                probes::compute_kp(ck.model, ds, kp_k, mode, mode == probes::KpMode::out_of_sample ? &test : nullptr);
            std::cout << format_real(rep.kp) << '\n';
            std::cerr << "Kp " << probes::to_string(rep.mode) << " k=" << rep.k_neighbors << ": " << rep.matched_count
                      << '/' << rep.noisy_count << " (" << rep.metric << ")\n";
            if (!kp_json.empty()) {
                nlohmann::json j = {{"kp", rep.kp},           {"k_neighbors", rep.k_neighbors},
                                    {"matched", rep.matched_count}, {"denominator", rep.noisy_count},
                                    {"mode", probes::to_string(rep.mode)}, {"metric", rep.metric},
                                    {"noise_map_digest", map.digest()}};
                write_file_atomic(kp_json, j.dump(2) + '\n');
            }
            return 0;
        };
    });

    auto* feat_cmd = probe_cmd->add_subcommand("features", "Export penultimate-layer features");
    DataArgs feat_data;
    std::string feat_split = "train", feat_out;
    bool feat_csv = false;
    feat_cmd->add_option("--checkpoint", checkpoint)->required();
    add_data_args(feat_cmd, feat_data);
    feat_cmd->add_option("--split", feat_split)->check(CLI::IsMember({"train", "test"}));
    feat_cmd->add_option("--out", feat_out)->required();
    feat_cmd->add_flag("--csv", feat_csv, "Write CSV instead of the binary feature file");
    feat_cmd->callback([&] {
        run = [&] {
            const NoiseMap map = load_noise_map(feat_data.noise_map);
            const auto ck = nn::load_checkpoint(checkpoint);
            const LabeledDataset ds = parse_split(feat_split) == Split::train
                                          ? train_set_for(map, feat_data.data_dir)
                                          : test_set_for(map, feat_data.data_dir, feat_data.test_n);
            const auto f = probes::extract_features(ck.model, ds);
            feat_csv ? probes::save_features_csv(f, feat_out) : probes::save_features(f, feat_out);
            std::cerr << f.rows() << " x " << f.dim << " features written\n";
            return 0;
        };
    });

    auto* tsne_cmd = probe_cmd->add_subcommand("tsne", "2-D t-SNE embedding of training features");
    DataArgs tsne_data;
    probes::TsneOptions topt;
    std::size_t tsne_n = 1000;
    std::string tsne_out, kl_out;
    tsne_cmd->add_option("--checkpoint", checkpoint)->required();
    add_data_args(tsne_cmd, tsne_data);
    tsne_cmd->add_option("--n", tsne_n, "Training rows to embed");
    tsne_cmd->add_option("--perplexity", topt.perplexity);
    tsne_cmd->add_option("--iterations", topt.iterations);
    tsne_cmd->add_option("--seed", topt.seed);
    tsne_cmd->add_option("--out", tsne_out, "Embedding CSV")->required();
    tsne_cmd->add_option("--kl", kl_out, "Per-iteration KL trace CSV");
    tsne_cmd->callback([&] {
        run = [&] {
            const NoiseMap map = load_noise_map(tsne_data.noise_map);
            const auto ck = nn::load_checkpoint(checkpoint);
            const LabeledDataset ds = train_set_for(map, tsne_data.data_dir);
            const auto rows = probes::sample_for_tsne(ds, std::min(tsne_n, ds.size()), topt.seed);
            const auto f = probes::extract_features(ck.model, ds).select(rows);
            const auto res = probes::tsne(f, topt);
            probes::save_embedding_csv(res, f, ds, tsne_out);
            if (!kl_out.empty()) {
                std::string s = "iteration,kl\n";
                for (std::size_t i = 0; i < res.kl.size(); ++i) s += std::to_string(i) + ',' + format_real(res.kl[i]) + '\n';
                write_file_atomic(kl_out, s);
            }
            std::cerr << "embedded " << res.rows << " points, final KL "
                      << (res.kl.empty() ? std::string("-") : format_real(res.kl.back())) << '\n';
            return 0;
        };
    });

    // report
    auto* report_cmd = app.add_subcommand("report", "Render figures as SVG");
    report_cmd->require_subcommand(1);
    auto* curves_cmd = report_cmd->add_subcommand("curves", "Metric curves against width from sweep CSVs");
    report::ReportSpec rs;
    std::vector<std::string> curve_inputs;
    std::string curve_out, curve_kind = "error", x_axis = "width", agg_out;
    bool linear = false;
    curves_cmd->add_option("--in", curve_inputs, "Sweep results CSV (repeatable)")->required();
    curves_cmd->add_option("--out", curve_out)->required();
    curves_cmd->add_option("--kind", curve_kind)->check(CLI::IsMember({"error", "loss", "kp"}));
    curves_cmd->add_option("--x-axis", x_axis)->check(CLI::IsMember({"width", "params"}));
    curves_cmd->add_flag("--linear", linear, "Linear width axis");
    curves_cmd->add_option("--title", rs.title);
    curves_cmd->add_option("--csv", agg_out, "Also write per-width aggregates");
    curves_cmd->callback([&] {
        run = [&] {
            for (const auto& p : curve_inputs) rs.inputs.emplace_back(p);
            rs.output = curve_out;
            rs.kind = report::parse_plot_kind(curve_kind);
            rs.log_x = !linear;
            rs.x_axis = x_axis == "params" ? report::XAxis::params : report::XAxis::width;
            const std::string svg = report::curves_svg(rs);
            if (!agg_out.empty()) {
                if (rs.inputs.size() != 1) throw ArgumentError("--csv takes a single --in");
                write_file_atomic(agg_out, report::aggregate_csv(sweep::aggregate(sweep::read_sweep_csv(rs.inputs[0]))));
            }
            write_file_atomic(rs.output, svg);
            return 0;
        };
    });
    auto* rtsne_cmd = report_cmd->add_subcommand("tsne", "Scatter plot of a t-SNE embedding CSV");
    std::string emb_in, emb_out, emb_title;
    rtsne_cmd->add_option("--in", emb_in)->required();
    rtsne_cmd->add_option("--out", emb_out)->required();
    rtsne_cmd->add_option("--title", emb_title);
    rtsne_cmd->callback([&] {
        run = [&] {
            report::render_tsne(emb_in, emb_out, emb_title);
            return 0;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\nrun with --help for usage\n";
        return 1;
    }

    try {
        if (threads > 0) kernels::set_threads(threads);
        return run ? run() : 1;
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
