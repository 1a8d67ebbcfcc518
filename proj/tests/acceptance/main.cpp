// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

// Prints one line per acceptance criterion.
//   acceptance            fast criteria (seconds to minutes)
//   acceptance --desk     dataset-scale criteria; needs --data-dir or DDLAB_DATA_DIR

#include "criteria.hpp"

#include "ddlab/common.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>

using namespace ddlab::acceptance;

namespace {

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

// Returns the number of failures not listed in `allowed`.
int run_all(const std::vector<Criterion>& list, const std::set<int>& allowed) {
    int failed = 0;
    std::vector<int> tolerated;
    for (const auto& c : list) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {Status::fail, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "NOT RUN";
        std::cout << "[" << tag << "] " << c.id << ". " << c.name << ": " << o.detail << " (" << std::fixed
                  << std::setprecision(1) << secs << "s)" << std::defaultfloat << std::endl;
        if (o.status != Status::fail) continue;
        if (allowed.count(c.id))
            tolerated.push_back(c.id);
        else
            ++failed;
    }
    for (int id : tolerated)
        std::cout << "note: criterion " << id << " FAILED and is excluded from the exit status by --allow-fail\n";
    return failed;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ddlab acceptance suite"};
    bool desk = false;
    DeskOptions opt;
    std::string data_dir, work_dir = "acceptance-work";
    std::vector<int> allow_fail;
    app.add_flag("--desk", desk, "Run the dataset-scale criteria instead of the fast ones");
    app.add_option("--data-dir", data_dir, "Directory with mnist/ and cifar10/ (default $DDLAB_DATA_DIR)");
    app.add_option("--work-dir", work_dir, "Where desk sweeps persist their jobs");
    app.add_option("--workers", opt.workers);
    app.add_option("--epochs", opt.epochs, "SimpleFC epochs for the MNIST sweeps (at least 1000)")
        ->check(CLI::Range(std::size_t{1000}, std::size_t{100000}));
    app.add_option("--allow-fail", allow_fail, "Criterion ids whose failure does not change the exit status");
    CLI11_PARSE(app, argc, argv);
    const std::set<int> allowed(allow_fail.begin(), allow_fail.end());

    if (!desk) {
        const int failed = run_all({
            {1, "gradient correctness", gradient_correctness},
            {2, "k-NN oracle equivalence", knn_oracle_equivalence},
            {3, "noise-injection exactness", noise_injection_exactness},
            {4, "parameter-count identity", parameter_count_identity},
            {5, "learning-rate schedules", lr_schedules},
            {6, "MNIST double descent", [] { return Outcome{Status::not_run, "desk scale, see --desk"}; }},
            {7, "MNIST p=0 monotonicity", [] { return Outcome{Status::not_run, "desk scale, see --desk"}; }},
            {8, "CIFAR-10 substituted properties", [] { return Outcome{Status::not_run, "desk scale, see --desk"}; }},
            {9, "t-SNE properties", tsne_properties},
            {10, "determinism (fixture replay; MNIST replay in --desk)", determinism_fixture},
        }, allowed);
        return failed == 0 ? 0 : 1;
    }

    if (data_dir.empty())
        if (const char* env = std::getenv("DDLAB_DATA_DIR")) data_dir = env;
    if (data_dir.empty()) {
        std::cerr << "desk suite needs --data-dir or DDLAB_DATA_DIR (run `ddlab fetch-data` first)\n";
        return 2;
    }
    opt.data_dir = data_dir;
    opt.work_dir = work_dir;
    const int failed = run_all({
        {6, "MNIST double descent", [&] { return mnist_double_descent(opt); }},
        {7, "MNIST p=0 monotonicity", [&] { return mnist_noise_free(opt); }},
        {8, "CIFAR-10 substituted properties", [&] { return cifar_properties(opt); }},
        {10, "determinism (MNIST smallest-width replay)", [&] { return determinism_desk(opt); }},
    }, allowed);
    return failed == 0 ? 0 : 1;
}
