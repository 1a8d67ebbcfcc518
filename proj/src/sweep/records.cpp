// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddlab/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ddlab::sweep {

namespace {

constexpr const char* kColumns[] = {"family",         "width_k",          "param_count", "p",
                                    "replicate",      "seed",             "train_loss",  "train_error",
                                    "test_loss",      "test_error",       "kp_in_sample", "kp_out_of_sample",
                                    "epochs",         "wall_clock_seconds", "noise_map_digest"};
constexpr std::size_t kColumnCount = sizeof kColumns / sizeof kColumns[0];

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

double to_double(const std::string& s, const char* column) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw DataError(std::string("sweep CSV: bad ") + column + " '" + s + "'");
    return v;
}

std::uint64_t to_u64(const std::string& s, const char* column) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw DataError(std::string("sweep CSV: bad ") + column + " '" + s + "'");
    return std::stoull(s);
}

} // namespace

std::string csv_header() {
    std::string h;
    for (std::size_t i = 0; i < kColumnCount; ++i) {
        if (i) h += ',';
        h += kColumns[i];
    }
    return h;
}

std::string to_csv_row(const SweepRecord& r) {
    std::ostringstream os;
    os << to_string(r.family) << ',' << r.width_k << ',' << r.param_count << ',' << format_real(r.p) << ','
       << r.replicate << ',' << r.seed << ',' << format_real(r.train_loss) << ',' << format_real(r.train_error) << ','
       << format_real(r.test_loss) << ',' << format_real(r.test_error) << ','
       << (r.kp_in_sample ? format_real(*r.kp_in_sample) : "") << ','
       << (r.kp_out_of_sample ? format_real(*r.kp_out_of_sample) : "") << ',' << r.epochs << ','
       << format_real(r.wall_clock_seconds) << ',' << r.noise_map_digest;
    return os.str();
}

SweepRecord parse_csv_row(const std::string& line) {
    const auto c = split_csv(line);
    if (c.size() != kColumnCount)
        throw DataError("sweep CSV: expected " + std::to_string(kColumnCount) + " columns, got " +
                        std::to_string(c.size()));
    SweepRecord r;
    r.family = parse_family(c[0]);
    r.width_k = to_u64(c[1], "width_k");
    r.param_count = to_u64(c[2], "param_count");
    r.p = to_double(c[3], "p");
    r.replicate = to_u64(c[4], "replicate");
    r.seed = to_u64(c[5], "seed");
    r.train_loss = to_double(c[6], "train_loss");
    r.train_error = to_double(c[7], "train_error");
    r.test_loss = to_double(c[8], "test_loss");
    r.test_error = to_double(c[9], "test_error");
    if (!c[10].empty()) r.kp_in_sample = to_double(c[10], "kp_in_sample");
    if (!c[11].empty()) r.kp_out_of_sample = to_double(c[11], "kp_out_of_sample");
    r.epochs = to_u64(c[12], "epochs");
    r.wall_clock_seconds = to_double(c[13], "wall_clock_seconds");
    r.noise_map_digest = c[14];
    return r;
}

std::string write_sweep_csv(std::vector<SweepRecord> records) {
    std::sort(records.begin(), records.end(), [](const SweepRecord& a, const SweepRecord& b) {
        return std::tie(a.width_k, a.replicate) < std::tie(b.width_k, b.replicate);
    });
    std::string out = std::string(kSweepSchema) + '\n' + csv_header() + '\n';
    for (const auto& r : records) out += to_csv_row(r) + '\n';
    return out;
}

std::vector<SweepRecord> parse_sweep_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError("sweep CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("#schema=", 0) != 0) throw DataError("sweep CSV: missing schema line");
    if (line != kSweepSchema) throw DataError("sweep CSV: unsupported schema '" + line.substr(8) + "'");
    if (!std::getline(in, line)) throw DataError("sweep CSV: missing column header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != csv_header()) throw DataError("sweep CSV: unexpected column header");
    std::vector<SweepRecord> out;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        out.push_back(parse_csv_row(line));
    }
    return out;
}

std::vector<SweepRecord> read_sweep_csv(const std::filesystem::path& path) {
    return parse_sweep_csv(read_text_file(path));
}

// ---------------------------------------------------------------------------

const MetricStats* WidthAggregate::find(const std::string& metric) const {
    auto it = metrics.find(metric);
    return it == metrics.end() ? nullptr : &it->second;
}

std::vector<WidthAggregate> aggregate(const std::vector<SweepRecord>& records) {
    if (records.empty()) throw ArgumentError("aggregate: no records");
    for (const auto& r : records)
        if (r.family != records.front().family || r.p != records.front().p)
            throw ArgumentError("aggregate: records mix families or noise ratios");

    std::map<std::size_t, std::vector<const SweepRecord*>> by_width;
    for (const auto& r : records) by_width[r.width_k].push_back(&r);

    std::vector<WidthAggregate> out;
    for (const auto& [width, group] : by_width) {
        WidthAggregate agg;
        agg.width = width;
        agg.param_count = group.front()->param_count;
        std::map<std::string, std::vector<double>> values;
        for (const auto* r : group) {
            values["train_loss"].push_back(r->train_loss);
            values["train_error"].push_back(r->train_error);
            values["test_loss"].push_back(r->test_loss);
            values["test_error"].push_back(r->test_error);
            if (r->kp_in_sample) values["kp_in_sample"].push_back(*r->kp_in_sample);
            if (r->kp_out_of_sample) values["kp_out_of_sample"].push_back(*r->kp_out_of_sample);
        }
        for (auto& [name, v] : values) {
            // Sorted summation keeps the result independent of record order.
            std::sort(v.begin(), v.end());
            MetricStats s;
            s.count = v.size();
            double sum = 0;
            for (double x : v) sum += x;
            s.mean = sum / static_cast<double>(v.size());
            if (v.size() > 1) {
                double ss = 0;
                for (double x : v) ss += (x - s.mean) * (x - s.mean);
                s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
            }
            agg.metrics[name] = s;
        }
        out.push_back(std::move(agg));
    }
    return out;
}

std::optional<std::size_t> detect_interpolation_threshold(const std::vector<std::size_t>& widths,
                                                          const std::vector<double>& train_errors, double epsilon) {
    if (widths.size() != train_errors.size()) throw ArgumentError("threshold: widths and errors differ in length");
    for (std::size_t i = 0; i < widths.size(); ++i)
        if (train_errors[i] <= epsilon) return widths[i];
    return std::nullopt;
}

PeakWindow peak_window(std::size_t threshold) {
    return {static_cast<double>(threshold) / 2.0, 4.0 * static_cast<double>(threshold)};
}

std::optional<std::pair<std::size_t, double>> locate_test_error_peak(const std::vector<std::size_t>& widths,
                                                                     const std::vector<double>& test_errors,
                                                                     std::optional<std::size_t> threshold) {
    if (widths.size() != test_errors.size()) throw ArgumentError("peak: widths and errors differ in length");
    if (!threshold) return std::nullopt;
    const PeakWindow win = peak_window(*threshold);
    std::optional<std::size_t> best, first;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        const auto w = static_cast<double>(widths[i]);
        if (w < win.low || w > win.high) continue;
        if (!first) first = i;
        if (!best || test_errors[i] > test_errors[*best]) best = i;
    }
    if (!best || best == first) return std::nullopt;
    return std::make_pair(widths[*best], test_errors[*best]);
}

std::vector<std::size_t> widths_of(const std::vector<WidthAggregate>& agg) {
    std::vector<std::size_t> w;
    for (const auto& a : agg) w.push_back(a.width);
    return w;
}

std::vector<double> series_of(const std::vector<WidthAggregate>& agg, const std::string& metric) {
    std::vector<double> s;
    for (const auto& a : agg) {
        const auto* m = a.find(metric);
        s.push_back(m ? m->mean : std::nan(""));
    }
    return s;
}

} // namespace ddlab::sweep
