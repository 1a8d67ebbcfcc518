// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"

#include "ddlab/probes.hpp"
#include "ddlab/report.hpp"
#include "ddlab/sweep.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace ddlab;
using namespace ddlab::testing;
namespace fs = std::filesystem;

namespace {

std::size_t count(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
    return n;
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

std::string sweep_csv(bool with_kp) {
    std::vector<sweep::SweepRecord> recs;
    for (std::size_t w : {2u, 4u, 8u, 16u})
        for (std::size_t r = 0; r < 2; ++r) {
            sweep::SweepRecord rec;
            rec.width_k = w;
            rec.param_count = 795 * w + 10;
            rec.p = with_kp ? 0.2 : 0.0;
            rec.replicate = r;
            rec.train_error = 0.4 / static_cast<double>(w);
            rec.test_error = 0.5 - 0.01 * static_cast<double>(w) + 0.01 * static_cast<double>(r);
            rec.train_loss = 1.0 / static_cast<double>(w);
            rec.test_loss = 1.5;
            if (with_kp) rec.kp_in_sample = 0.6 + 0.02 * static_cast<double>(w);
            rec.epochs = 5;
            recs.push_back(rec);
        }
    return sweep::write_sweep_csv(recs);
}

std::string embedding_csv(std::size_t n, double p, std::size_t classes, std::uint64_t seed) {
    Rng rng(seed);
    const auto flagged = rng.sample_without_replacement(n, static_cast<std::size_t>(p * static_cast<double>(n)));
    const std::set<std::size_t> noisy(flagged.begin(), flagged.end());
    std::ostringstream os;
    os << "#schema=ddlab.embedding.v1\nsample_id,x,y,true_label,assigned_label,is_noisy\n";
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = i % classes;
        os << i << ',' << rng.normal() << ',' << rng.normal() << ',' << c << ',' << c << ',' << noisy.count(i)
           << '\n';
    }
    return os.str();
}

} // namespace

TEST_CASE("curves SVG is byte-identical for the same input") {
    TempDir dir;
    write(dir / "a.csv", sweep_csv(true));
    report::ReportSpec spec;
    spec.inputs = {dir / "a.csv"};
    spec.output = dir / "a.svg";
    const std::string first = report::curves_svg(spec);
    CHECK(first == report::curves_svg(spec));
    CHECK(first.rfind("<svg", 0) == 0);
    // train error, test error and in-sample Kp
    CHECK(count(first, "<g class=\"series\"") == 3);
    CHECK(first.find("data-label=\"Kp\"") != std::string::npos);

    report::render_curves(spec);
    CHECK(slurp(spec.output) == first);
}

TEST_CASE("curves without Kp and other kinds") {
    TempDir dir;
    write(dir / "p0.csv", sweep_csv(false));
    write(dir / "p20.csv", sweep_csv(true));
    report::ReportSpec spec;
    spec.inputs = {dir / "p0.csv"};
    spec.output = dir / "o.svg";
    CHECK(count(report::curves_svg(spec), "<g class=\"series\"") == 2);

    spec.kind = report::PlotKind::loss_vs_width;
    spec.x_axis = report::XAxis::params;
    spec.log_x = false;
    CHECK(count(report::curves_svg(spec), "<g class=\"series\"") == 2);

    spec.inputs = {dir / "p0.csv", dir / "p20.csv"};
    spec.kind = report::PlotKind::error_vs_width;
    CHECK(count(report::curves_svg(spec), "<g class=\"series\"") == 5);

    spec.kind = report::PlotKind::kp_vs_width;
    spec.inputs = {dir / "p0.csv"};
    CHECK_THROWS_AS(report::curves_svg(spec), DataError);

    CHECK(report::parse_plot_kind("kp") == report::PlotKind::kp_vs_width);
    CHECK_THROWS_AS(report::parse_plot_kind("bars"), ArgumentError);
}

TEST_CASE("an empty sweep CSV writes no file") {
    TempDir dir;
    write(dir / "empty.csv", sweep::write_sweep_csv({}));
    report::ReportSpec spec;
    spec.inputs = {dir / "empty.csv"};
    spec.output = dir / "out.svg";
    CHECK_THROWS_AS(report::render_curves(spec), DataError);
    CHECK_FALSE(fs::exists(spec.output));

    spec.inputs = {dir / "missing.csv"};
    CHECK_THROWS_AS(report::render_curves(spec), DataError);
    CHECK_FALSE(fs::exists(spec.output));
}

TEST_CASE("aggregate CSV has one row per width") {
    const auto agg = sweep::aggregate(sweep::parse_sweep_csv(sweep_csv(true)));
    const std::string text = report::aggregate_csv(agg);
    CHECK(text.rfind("#schema=ddlab.aggregate.v1\nwidth_k,", 0) == 0);
    CHECK(count(text, "\n") == 2 + 4);
}

TEST_CASE("t-SNE scatter marks noisy points as stars") {
    const auto pts = report::parse_embedding_csv(embedding_csv(1000, 0.2, 10, 1));
    CHECK(pts.size() == 1000);
    const std::string svg = report::tsne_svg(pts, "p = 20%");
    CHECK(count(svg, "<polygon class=\"noisy\"") == 200);
    CHECK(count(svg, "<circle class=\"clean\"") == 800);
    CHECK(svg == report::tsne_svg(pts, "p = 20%"));

    const auto clean = report::parse_embedding_csv(embedding_csv(300, 0.0, 10, 2));
    CHECK(count(report::tsne_svg(clean), "<polygon class=\"noisy\"") == 0);
}

TEST_CASE("t-SNE scatter colors by true label") {
    const std::string svg = report::tsne_svg(report::parse_embedding_csv(embedding_csv(40, 0.25, 2, 3)));
    std::set<std::string> fills;
    for (auto pos = svg.find("class=\"clean\""); pos != std::string::npos; pos = svg.find("class=\"clean\"", pos + 1)) {
        const auto f = svg.find("fill=\"", pos) + 6;
        fills.insert(svg.substr(f, svg.find('"', f) - f));
    }
    CHECK(fills.size() == 2);
}

TEST_CASE("embedding CSV validation") {
    const std::string header = "#schema=ddlab.embedding.v1\n";
    CHECK_THROWS_WITH_AS(report::parse_embedding_csv(header + "sample_id,x,y,true_label,assigned_label\n0,1,2,3,3\n"),
                         doctest::Contains("is_noisy"), DataError);
    CHECK_THROWS_AS(report::parse_embedding_csv("#schema=other\nsample_id,x,y,true_label,is_noisy\n"), DataError);
    CHECK_THROWS_AS(report::parse_embedding_csv(header + "sample_id,x,y,true_label,is_noisy\n0,1,2,3,7\n"), DataError);
    CHECK_THROWS_AS(report::parse_embedding_csv(header + "sample_id,x,y,true_label,is_noisy\n"), DataError);
    // column order is free
    const auto pts = report::parse_embedding_csv(header + "is_noisy,y,x,true_label\n1,2.5,-1,4\n");
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].noisy);
    CHECK(pts[0].x == -1);
    CHECK(pts[0].y == 2.5);
}

TEST_CASE("probe embedding export feeds the scatter plot") {
    TempDir dir;
    const LabeledDataset ds = synthetic_dataset(40, 1, 2, 2, 4);
    const auto [noisy, map] = inject_label_noise(ds, 0.25, 1);
    probes::FeatureMatrix f;
    f.dim = 4;
    for (std::size_t i = 0; i < 40; ++i) {
        f.sample_ids.push_back(i);
        for (std::size_t j = 0; j < 4; ++j) f.values.push_back(noisy.images[i * 4 + j]);
    }
    probes::TsneOptions opt;
    opt.perplexity = 5;
    opt.iterations = 50;
    probes::save_embedding_csv(probes::tsne(f, opt), f, noisy, dir / "e.csv");
    report::render_tsne(dir / "e.csv", dir / "e.svg");
    CHECK(count(slurp(dir / "e.svg"), "<polygon class=\"noisy\"") == 10);
}
