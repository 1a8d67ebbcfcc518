// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddlab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace ddlab::report {

namespace fs = std::filesystem;

const char* to_string(PlotKind k) {
    switch (k) {
    case PlotKind::error_vs_width: return "error_vs_width";
    case PlotKind::loss_vs_width: return "loss_vs_width";
    case PlotKind::kp_vs_width: return "kp_vs_width";
    case PlotKind::tsne_scatter: return "tsne_scatter";
    }
    return "?";
}

PlotKind parse_plot_kind(const std::string& s) {
    if (s == "error" || s == "error_vs_width") return PlotKind::error_vs_width;
    if (s == "loss" || s == "loss_vs_width") return PlotKind::loss_vs_width;
    if (s == "kp" || s == "kp_vs_width") return PlotKind::kp_vs_width;
    if (s == "tsne" || s == "tsne_scatter") return PlotKind::tsne_scatter;
    throw ArgumentError("unknown plot kind '" + s + "'");
}

void ReportSpec::validate() const {
    if (inputs.empty()) throw ArgumentError("report: no input files");
    if (output.empty()) throw ArgumentError("report: no output path");
    for (const auto& p : inputs)
        if (!fs::exists(p)) throw DataError("report input not found: " + p.string());
    if (kind == PlotKind::tsne_scatter && inputs.size() != 1)
        throw ArgumentError("report: t-SNE scatter takes exactly one embedding CSV");
}

namespace {

// tab10
constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

constexpr double kWidth = 720, kHeight = 460;
constexpr double kLeft = 70, kRight = 190, kTop = 40, kBottom = 60;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    std::string s = buf;
    if (s == "-0.00") s = "0.00";
    return s;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string svg_open(const std::string& title) {
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!title.empty())
        os << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
           << "</text>\n";
    return os.str();
}

struct Series {
    std::string label;
    std::vector<double> x, y;
};

std::vector<double> nice_ticks(double lo, double hi, int target) {
    const double span = hi - lo;
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (raw <= m * mag) {
            step = m * mag;
            break;
        }
    std::vector<double> t;
    for (double v = std::ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) t.push_back(std::abs(v) < step * 1e-9 ? 0 : v);
    return t;
}

std::vector<std::pair<std::string, std::string>> metrics_for(PlotKind kind) {
    switch (kind) {
    case PlotKind::error_vs_width:
        return {{"train_error", "train error"}, {"test_error", "test error"}, {"kp_in_sample", "Kp"}};
    case PlotKind::loss_vs_width: return {{"train_loss", "train loss"}, {"test_loss", "test loss"}};
    case PlotKind::kp_vs_width: return {{"kp_in_sample", "Kp in-sample"}, {"kp_out_of_sample", "Kp out-of-sample"}};
    case PlotKind::tsne_scatter: break;
    }
    throw ArgumentError("plot kind has no curves");
}

} // namespace

std::string curves_svg(const std::vector<std::vector<sweep::WidthAggregate>>& inputs,
                       const std::vector<std::string>& input_labels, const ReportSpec& spec) {
    if (inputs.size() != input_labels.size()) throw ArgumentError("report: one label per input required");
    const auto metrics = metrics_for(spec.kind);

    std::vector<Series> series;
    std::vector<std::size_t> thresholds;
    std::vector<std::pair<double, std::string>> threshold_marks;
    for (std::size_t f = 0; f < inputs.size(); ++f) {
        const auto& agg = inputs[f];
        if (agg.empty()) throw DataError("report: input " + input_labels[f] + " has no records");
        for (const auto& [column, label] : metrics) {
            Series s;
            s.label = inputs.size() > 1 ? input_labels[f] + " " + label : label;
            for (const auto& a : agg) {
                const auto* m = a.find(column);
                if (!m) continue;
                s.x.push_back(static_cast<double>(spec.x_axis == XAxis::params ? a.param_count : a.width));
                s.y.push_back(m->mean);
            }
            if (!s.x.empty()) series.push_back(std::move(s));
        }
        const auto thr =
            sweep::detect_interpolation_threshold(sweep::widths_of(agg), sweep::series_of(agg, "train_error"));
        if (thr) {
            double x = static_cast<double>(*thr);
            if (spec.x_axis == XAxis::params)
                for (const auto& a : agg)
                    if (a.width == *thr) x = static_cast<double>(a.param_count);
            threshold_marks.push_back(
                {x, (inputs.size() > 1 ? input_labels[f] + " " : std::string()) + "threshold k=" + std::to_string(*thr)});
        }
    }
    if (series.empty()) {
        std::string names;
        for (const auto& [column, label] : metrics) names += (names.empty() ? "" : ", ") + column;
        throw DataError("report: none of the columns " + names + " hold values");
    }

    double xmin = INFINITY, xmax = -INFINITY, ymin = 0, ymax = -INFINITY;
    for (const auto& s : series) {
        for (double x : s.x) xmin = std::min(xmin, x), xmax = std::max(xmax, x);
        for (double y : s.y) ymin = std::min(ymin, y), ymax = std::max(ymax, y);
    }
    if (spec.log_x && xmin <= 0) throw DataError("report: logarithmic axis needs positive widths");
    auto xf = [&](double v) { return spec.log_x ? std::log10(v) : v; };
    double x0 = xf(xmin), x1 = xf(xmax);
    if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
    if (ymax - ymin < 1e-12) ymax = ymin + 1;
    ymax += 0.05 * (ymax - ymin);

    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto px = [&](double v) { return kLeft + (xf(v) - x0) / (x1 - x0) * pw; };
    auto py = [&](double v) { return kTop + ph - (v - ymin) / (ymax - ymin) * ph; };

    std::ostringstream os;
    os << svg_open(spec.title);
    os << "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n"
       << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
       << "\"/>\n</g>\n";

    // x ticks: powers of ten and 2/5 multiples on a log axis
    std::vector<double> xt;
    if (spec.log_x) {
        for (int e = static_cast<int>(std::floor(x0)); e <= static_cast<int>(std::ceil(x1)); ++e)
            for (double m : {1.0, 2.0, 5.0}) {
                const double v = m * std::pow(10.0, e);
                if (xf(v) >= x0 - 1e-9 && xf(v) <= x1 + 1e-9) xt.push_back(v);
            }
    } else {
        xt = nice_ticks(x0, x1, 6);
    }
    os << "<g class=\"xticks\" text-anchor=\"middle\">\n";
    for (double v : xt)
        os << "<line x1=\"" << num(px(v)) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(px(v)) << "\" y2=\""
           << num(kTop + ph + 5) << "\" stroke=\"black\"/><text x=\"" << num(px(v)) << "\" y=\"" << num(kTop + ph + 18)
           << "\">" << tick_label(v) << "</text>\n";
    os << "</g>\n<g class=\"yticks\" text-anchor=\"end\">\n";
    for (double v : nice_ticks(ymin, ymax, 5))
        os << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(py(v)) << "\" x2=\"" << num(kLeft) << "\" y2=\""
           << num(py(v)) << "\" stroke=\"black\"/><text x=\"" << num(kLeft - 8) << "\" y=\"" << num(py(v) + 4) << "\">"
           << tick_label(v) << "</text>\n";
    os << "</g>\n";
    os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 15) << "\" text-anchor=\"middle\">"
       << (spec.x_axis == XAxis::params ? "parameters" : "width k") << (spec.log_x ? " (log scale)" : "")
       << "</text>\n";

    for (std::size_t t = 0; t < threshold_marks.size(); ++t) {
        const double x = px(threshold_marks[t].first);
        os << "<g class=\"threshold\"><line x1=\"" << num(x) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(x)
           << "\" y2=\"" << num(kTop + ph) << "\" stroke=\"#555\" stroke-dasharray=\"4 3\"/><text x=\"" << num(x + 4)
           << "\" y=\"" << num(kTop + 14 + 14 * static_cast<double>(t)) << "\" fill=\"#555\">"
           << escape(threshold_marks[t].second) << "</text></g>\n";
    }

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % 10];
        os << "<g class=\"series\" data-label=\"" << escape(series[s].label) << "\">\n<polyline fill=\"none\" stroke=\""
           << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < series[s].x.size(); ++i)
            os << (i ? " " : "") << num(px(series[s].x[i])) << ',' << num(py(series[s].y[i]));
        os << "\"/>\n";
        for (std::size_t i = 0; i < series[s].x.size(); ++i)
            os << "<circle cx=\"" << num(px(series[s].x[i])) << "\" cy=\"" << num(py(series[s].y[i]))
               << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        os << "</g>\n";
    }

    os << "<g class=\"legend\">\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const double y = kTop + 10 + 18 * static_cast<double>(s);
        os << "<line x1=\"" << num(kWidth - kRight + 15) << "\" y1=\"" << num(y) << "\" x2=\"" << num(kWidth - kRight + 40)
           << "\" y2=\"" << num(y) << "\" stroke=\"" << kPalette[s % 10] << "\" stroke-width=\"2\"/><text x=\""
           << num(kWidth - kRight + 46) << "\" y=\"" << num(y + 4) << "\">" << escape(series[s].label) << "</text>\n";
    }
    os << "</g>\n</svg>\n";
    return os.str();
}

std::string curves_svg(const ReportSpec& spec) {
    spec.validate();
    std::vector<std::vector<sweep::WidthAggregate>> aggs;
    std::vector<std::string> labels;
    for (const auto& path : spec.inputs) {
        const auto records = sweep::read_sweep_csv(path);
        if (records.empty()) throw DataError("report: " + path.string() + " holds no records");
        aggs.push_back(sweep::aggregate(records));
        labels.push_back("p=" + format_real(records.front().p));
    }
    return curves_svg(aggs, labels, spec);
}

void render_curves(const ReportSpec& spec) {
    const std::string svg = curves_svg(spec);
    write_file_atomic(spec.output, svg);
}

std::string aggregate_csv(const std::vector<sweep::WidthAggregate>& agg) {
    static const char* kMetrics[] = {"train_loss", "train_error", "test_loss", "test_error", "kp_in_sample",
                                     "kp_out_of_sample"};
    std::string out = "#schema=ddlab.aggregate.v1\nwidth_k,param_count,replicates";
    for (const char* m : kMetrics) out += std::string(",") + m + "_mean," + m + "_std";
    out += '\n';
    for (const auto& a : agg) {
        const auto* te = a.find("test_error");
        out += std::to_string(a.width) + ',' + std::to_string(a.param_count) + ',' +
               std::to_string(te ? te->count : 0);
        for (const char* m : kMetrics) {
            const auto* s = a.find(m);
            out += s ? ',' + format_real(s->mean) + ',' + format_real(s->stddev) : std::string(",,");
        }
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<EmbeddingPoint> parse_embedding_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    auto next = [&]() {
        if (!std::getline(in, line)) return false;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    };
    if (!next()) throw DataError("embedding CSV is empty");
    if (line.rfind("#schema=", 0) == 0) {
        if (line != "#schema=ddlab.embedding.v1")
            throw DataError("embedding CSV: unsupported schema '" + line.substr(8) + "'");
        if (!next()) throw DataError("embedding CSV: missing column header");
    }
    std::map<std::string, std::size_t> col;
    {
        std::size_t i = 0;
        std::istringstream h(line);
        for (std::string c; std::getline(h, c, ',');) col[c] = i++;
    }
    for (const char* need : {"x", "y", "true_label", "is_noisy"})
        if (!col.count(need)) throw DataError(std::string("embedding CSV: missing column '") + need + "'");

    std::vector<EmbeddingPoint> pts;
    std::size_t lineno = 2;
    while (next()) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream r(line);
        for (std::string c; std::getline(r, c, ',');) cells.push_back(c);
        if (cells.size() < col.size()) cells.resize(col.size());
        auto cell = [&](const char* name) -> const std::string& { return cells[col.at(name)]; };
        try {
            EmbeddingPoint p;
            p.sample_id = col.count("sample_id") ? std::stoull(cell("sample_id")) : pts.size();
            p.x = std::stod(cell("x"));
            p.y = std::stod(cell("y"));
            p.true_label = std::stoi(cell("true_label"));
            p.assigned_label = col.count("assigned_label") ? std::stoi(cell("assigned_label")) : p.true_label;
            const std::string& flag = cell("is_noisy");
            if (flag != "0" && flag != "1") throw DataError("is_noisy must be 0 or 1");
            p.noisy = flag == "1";
            if (p.true_label < 0 || p.true_label > 9) throw DataError("true_label outside 0..9");
            pts.push_back(p);
        } catch (const std::logic_error&) {
            throw DataError("embedding CSV: malformed line " + std::to_string(lineno));
        } catch (const DataError& e) {
            throw DataError("embedding CSV line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (pts.empty()) throw DataError("embedding CSV holds no points");
    return pts;
}

std::string tsne_svg(const std::vector<EmbeddingPoint>& points, const std::string& title) {
    if (points.empty()) throw DataError("t-SNE plot: no points");
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (const auto& p : points) {
        xmin = std::min(xmin, p.x), xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y), ymax = std::max(ymax, p.y);
    }
    if (xmax - xmin < 1e-12) xmin -= 1, xmax += 1;
    if (ymax - ymin < 1e-12) ymin -= 1, ymax += 1;
    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto px = [&](double v) { return kLeft + (v - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double v) { return kTop + ph - (v - ymin) / (ymax - ymin) * ph; };

    std::ostringstream os;
    os << svg_open(title);
    os << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
       << "\" fill=\"none\" stroke=\"#999\"/>\n";
    // clean points first so stars stay visible
    os << "<g class=\"clean-points\">\n";
    for (const auto& p : points)
        if (!p.noisy)
            os << "<circle class=\"clean\" cx=\"" << num(px(p.x)) << "\" cy=\"" << num(py(p.y)) << "\" r=\"2.5\" fill=\""
               << kPalette[p.true_label] << "\"/>\n";
    os << "</g>\n<g class=\"noisy-points\">\n";
    for (const auto& p : points) {
        if (!p.noisy) continue;
        const double cx = px(p.x), cy = py(p.y);
        os << "<polygon class=\"noisy\" points=\"";
        for (int v = 0; v < 10; ++v) {
            const double r = v % 2 ? 2.2 : 5.5;
            const double a = -M_PI / 2 + v * M_PI / 5;
            os << (v ? " " : "") << num(cx + r * std::cos(a)) << ',' << num(cy + r * std::sin(a));
        }
        os << "\" fill=\"" << kPalette[p.true_label] << "\" stroke=\"black\" stroke-width=\"0.4\"/>\n";
    }
    os << "</g>\n<g class=\"legend\">\n";
    std::vector<bool> used(10, false);
    for (const auto& p : points) used[p.true_label] = true;
    double y = kTop + 10;
    for (int c = 0; c < 10; ++c) {
        if (!used[c]) continue;
        os << "<circle cx=\"" << num(kWidth - kRight + 22) << "\" cy=\"" << num(y) << "\" r=\"4\" fill=\"" << kPalette[c]
           << "\"/><text x=\"" << num(kWidth - kRight + 32) << "\" y=\"" << num(y + 4) << "\">class " << c
           << "</text>\n";
        y += 18;
    }
    os << "<text x=\"" << num(kWidth - kRight + 15) << "\" y=\"" << num(y + 8) << "\">circle: clean</text>\n"
       << "<text x=\"" << num(kWidth - kRight + 15) << "\" y=\"" << num(y + 26) << "\">star: noisy label</text>\n";
    os << "</g>\n</svg>\n";
    return os.str();
}

void render_tsne(const fs::path& embedding_csv, const fs::path& out, const std::string& title) {
    if (!fs::exists(embedding_csv)) throw DataError("embedding CSV not found: " + embedding_csv.string());
    const std::string svg = tsne_svg(parse_embedding_csv(read_text_file(embedding_csv)), title);
    write_file_atomic(out, svg);
}

} // namespace ddlab::report
