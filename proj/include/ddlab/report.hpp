// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ddlab/sweep.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ddlab::report {

enum class PlotKind { error_vs_width, loss_vs_width, kp_vs_width, tsne_scatter };

const char* to_string(PlotKind k);
PlotKind parse_plot_kind(const std::string& s);

enum class XAxis { width, params };

struct ReportSpec {
    std::vector<std::filesystem::path> inputs;  // sweep CSVs, or one embedding CSV
    PlotKind kind = PlotKind::error_vs_width;
    bool log_x = true;
    XAxis x_axis = XAxis::width;
    std::filesystem::path output;
    std::string title;

    // Throws ArgumentError / DataError when inputs are missing.
    void validate() const;
};

// error_vs_width: train and test error, plus in-sample Kp when recorded.
// loss_vs_width: train and test loss.  kp_vs_width: both Kp modes.
// One series per metric and input file; mean over replicates.
std::string curves_svg(const ReportSpec& spec);
std::string curves_svg(const std::vector<std::vector<sweep::WidthAggregate>>& inputs,
                       const std::vector<std::string>& input_labels, const ReportSpec& spec);

// Writes the SVG only after it rendered successfully.
void render_curves(const ReportSpec& spec);

// Per-width means and standard deviations, one row per width.
std::string aggregate_csv(const std::vector<sweep::WidthAggregate>& agg);

struct EmbeddingPoint {
    std::size_t sample_id = 0;
    double x = 0, y = 0;
    int true_label = 0;
    int assigned_label = 0;
    bool noisy = false;
};

// Columns are looked up by name; is_noisy and true_label are required.
std::vector<EmbeddingPoint> parse_embedding_csv(const std::string& text);

// Clean points as filled circles, noisy ones as five-point stars, colored by
// true label.
std::string tsne_svg(const std::vector<EmbeddingPoint>& points, const std::string& title = "");
void render_tsne(const std::filesystem::path& embedding_csv, const std::filesystem::path& out,
                 const std::string& title = "");

} // namespace ddlab::report
