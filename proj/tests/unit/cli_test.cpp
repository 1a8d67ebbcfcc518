// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"

#include "ddlab/sweep.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

using namespace ddlab;
using namespace ddlab::testing;
namespace fs = std::filesystem;

namespace {

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

} // namespace

TEST_CASE("usage errors exit 1") {
    TempDir dir;
    CHECK(run_cli("--bogus", dir.path()).code == 1);
    CHECK(run_cli("train --family simplefc", dir.path()).code == 1);
    CHECK(run_cli("inject-noise --dataset svhn --p 0.1 --out x", dir.path()).code == 1);
    const auto help = run_cli("--help", dir.path());
    CHECK(help.code == 0);
    CHECK(help.out.find("sweep") != std::string::npos);
}

TEST_CASE("missing config exits 2 and creates nothing") {
    TempDir dir;
    const auto r = run_cli("sweep --config " + q(dir / "nope.json"), dir.path());
    CHECK(r.code == 2);
    CHECK(r.err.find("not found") != std::string::npos);
    std::size_t entries = 0;
    for (const auto& e : fs::directory_iterator(dir.path()))
        if (e.path().extension() != ".out" && e.path().extension() != ".err") ++entries;
    CHECK(entries == 0);
}

TEST_CASE("sweep from a config file") {
    TempDir dir;
    write_mnist_fixture(dir / "mnist", 150, 60, 31);
    std::ofstream(dir / "sweep.json") << R"({"family": "simplefc", "widths": [2, 4], "noise_p": 0.2,
        "dataset": "mnist", "data_dir": ")" << (dir / "mnist").string() << R"(", "subsample": 100,
        "replicates": 2, "base_seed": 1, "data_seed": 2, "output_dir": ")" << (dir / "out").string() << R"(",
        "train": {"epochs": 2, "batch_size": 32}})";
    const auto r = run_cli("sweep --config " + q(dir / "sweep.json"), dir.path());
    CHECK_MESSAGE(r.code == 0, r.err);
    const auto recs = sweep::read_sweep_csv(dir / "out" / "results.csv");
    CHECK(recs.size() == 4);
    CHECK(fs::exists(dir / "out" / "manifest.json"));

    const auto again = run_cli("sweep --resume --config " + q(dir / "sweep.json"), dir.path());
    CHECK(again.code == 0);
    CHECK(sweep::read_sweep_csv(dir / "out" / "results.csv") == recs);

    const auto curves = run_cli("report curves --in " + q(dir / "out" / "results.csv") + " --out " +
                                    q(dir / "curves.svg") + " --csv " + q(dir / "agg.csv"),
                                dir.path());
    CHECK(curves.code == 0);
    CHECK(slurp(dir / "curves.svg").find("<svg") != std::string::npos);
    CHECK(slurp(dir / "agg.csv").rfind("#schema=ddlab.aggregate.v1", 0) == 0);
}

TEST_CASE("inject-noise, train, probe and report end to end") {
    TempDir dir;
    write_mnist_fixture(dir / "mnist", 200, 50, 32);
    const std::string data = " --data-dir " + q(dir / "mnist");

    auto r = run_cli("inject-noise --dataset mnist" + data + " --n 150 --p 0.2 --seed 4 --out " + q(dir / "noise.txt"),
                     dir.path());
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(load_noise_map(dir / "noise.txt").entries.size() == 30);

    const std::string map = " --noise-map " + q(dir / "noise.txt");
    r = run_cli("train --family simplefc --width 8 --epochs 5 --batch-size 32 --seed 3" + data + map + " --out " +
                    q(dir / "m.ckpt") + " --history " + q(dir / "h.csv"),
                dir.path());
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(slurp(dir / "h.csv").rfind("#schema=ddlab.history.v1", 0) == 0);

    const std::string ck = " --checkpoint " + q(dir / "m.ckpt");
    r = run_cli("probe kp" + ck + data + map + " --k 5 --json " + q(dir / "kp.json"), dir.path());
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const double kp = std::stod(r.out);
    CHECK(kp >= 0);
    CHECK(kp <= 1);
    CHECK(fs::exists(dir / "kp.json"));

    r = run_cli("probe features" + ck + data + map + " --csv --out " + q(dir / "f.csv"), dir.path());
    CHECK(r.code == 0);

    r = run_cli("probe tsne" + ck + data + map + " --n 60 --perplexity 10 --iterations 100 --out " +
                    q(dir / "e.csv"),
                dir.path());
    REQUIRE_MESSAGE(r.code == 0, r.err);
    r = run_cli("report tsne --in " + q(dir / "e.csv") + " --out " + q(dir / "e.svg"), dir.path());
    CHECK(r.code == 0);
    CHECK(slurp(dir / "e.svg").find("<svg") != std::string::npos);
}

TEST_CASE("data problems exit 2") {
    TempDir dir;
    CHECK(run_cli("inject-noise --dataset mnist --data-dir " + q(dir / "empty") + " --p 0.1 --out " +
                      q(dir / "n.txt"),
                  dir.path())
              .code == 2);
    CHECK_FALSE(fs::exists(dir / "n.txt"));
    std::ofstream(dir / "bad.ckpt") << "not a checkpoint";
    write_mnist_fixture(dir / "mnist", 20, 10, 1);
    CHECK(run_cli("inject-noise --dataset mnist --data-dir " + q(dir / "mnist") + " --p 0.1 --out " +
                      q(dir / "n.txt"),
                  dir.path())
              .code == 0);
    CHECK(run_cli("probe kp --checkpoint " + q(dir / "bad.ckpt") + " --data-dir " + q(dir / "mnist") +
                      " --noise-map " + q(dir / "n.txt"),
                  dir.path())
              .code == 2);
    CHECK(run_cli("report tsne --in " + q(dir / "missing.csv") + " --out " + q(dir / "x.svg"), dir.path()).code == 2);
}
