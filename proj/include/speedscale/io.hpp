#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace speedscale {

inline constexpr const char* kVersion = "0.1.0";

/// Fixed-format float: enough digits to round-trip, locale-independent.
inline std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

/**
 * Minimal CSV emitter: header row naming the columns, comma delimiter, '.'
 * decimals.  All formatting goes through fmt_num so output is deterministic.
 */
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns)
        : out_(path) {
        if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path.string());
        for (std::size_t i = 0; i < columns.size(); ++i)
            out_ << (i ? "," : "") << columns[i];
        out_ << "\n";
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << "\n";
    }

    void row_num(const std::vector<double>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << fmt_num(cells[i]);
        out_ << "\n";
    }

private:
    std::ofstream out_;
};

/**
 * Run manifest: experiment name, configuration echo, master seed, code
 * version, timestamp, and the result files.  Written before any results so a
 * crashed run still leaves its configuration behind.
 */
struct RunManifest {
    std::string experiment;
    nlohmann::json config;
    std::uint64_t master_seed = 0;
    std::vector<std::string> outputs;

    void write(const std::filesystem::path& dir) const {
        nlohmann::json j;
        j["experiment"] = experiment;
        j["config"] = config;
        j["master_seed"] = master_seed;
        j["code_version"] = kVersion;
        const auto now = std::chrono::system_clock::now();
        j["timestamp_unix"] = std::chrono::duration_cast<std::chrono::seconds>(
                                  now.time_since_epoch())
                                  .count();
        j["outputs"] = outputs;
        std::ofstream f(dir / "manifest.json");
        if (!f) throw std::runtime_error("RunManifest: cannot write manifest");
        f << j.dump(2) << "\n";
    }
};

// ---------------------------------------------------------------------------
// Thin deterministic SVG renderers over CSV-shaped data
// ---------------------------------------------------------------------------

struct SvgSeries {
    std::string label;
    std::vector<double> x, y;
};

inline void write_svg_lines(const std::filesystem::path& path, const std::string& title,
                            const std::vector<SvgSeries>& series, bool log_y = false) {
    const int W = 720, H = 440, ML = 60, MR = 20, MT = 40, MB = 40;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            double yv = s.y[i];
            if (log_y && yv <= 0) continue;
            if (log_y) yv = std::log10(yv);
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, yv);
            ymax = std::max(ymax, yv);
        }
    if (xmax <= xmin) xmax = xmin + 1;
    if (ymax <= ymin) ymax = ymin + 1;
    auto px = [&](double x) { return ML + (x - xmin) / (xmax - xmin) * (W - ML - MR); };
    auto py = [&](double y) { return H - MB - (y - ymin) / (ymax - ymin) * (H - MT - MB); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_svg_lines: cannot open " + path.string());
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    f << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title
      << (log_y ? " (log scale)" : "") << "</text>\n";
    f << "<line x1=\"" << ML << "\" y1=\"" << H - MB << "\" x2=\"" << W - MR << "\" y2=\""
      << H - MB << "\" stroke=\"black\"/>\n";
    f << "<line x1=\"" << ML << "\" y1=\"" << MT << "\" x2=\"" << ML << "\" y2=\"" << H - MB
      << "\" stroke=\"black\"/>\n";
    int ci = 0;
    for (const auto& s : series) {
        f << "<polyline fill=\"none\" stroke=\"" << colors[ci % 8] << "\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            double yv = s.y[i];
            if (log_y) {
                if (yv <= 0) continue;
                yv = std::log10(yv);
            }
            f << fmt_num(px(s.x[i])) << "," << fmt_num(py(yv)) << " ";
        }
        f << "\"/>\n";
        f << "<text x=\"" << ML + 10 << "\" y=\"" << MT + 16 * (ci + 1) << "\" fill=\""
          << colors[ci % 8] << "\" font-size=\"12\">" << s.label << "</text>\n";
        ++ci;
    }
    f << "</svg>\n";
}

inline void write_svg_histogram(const std::filesystem::path& path, const std::string& title,
                                const std::vector<double>& values, int bins = 40) {
    double lo = 1e300, hi = -1e300;
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo)) hi = lo + 1;
    std::vector<int> count(static_cast<std::size_t>(bins), 0);
    for (double v : values) {
        int b = static_cast<int>((v - lo) / (hi - lo) * bins);
        b = std::clamp(b, 0, bins - 1);
        ++count[static_cast<std::size_t>(b)];
    }
    int peak = 1;
    for (int c : count) peak = std::max(peak, c);
    const int W = 720, H = 440, ML = 60, MR = 20, MT = 40, MB = 40;
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_svg_histogram: cannot open " + path.string());
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    f << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title
      << "</text>\n";
    const double bw = static_cast<double>(W - ML - MR) / bins;
    for (int b = 0; b < bins; ++b) {
        const double h = static_cast<double>(count[static_cast<std::size_t>(b)]) / peak *
                         (H - MT - MB);
        f << "<rect x=\"" << fmt_num(ML + b * bw) << "\" y=\"" << fmt_num(H - MB - h)
          << "\" width=\"" << fmt_num(bw) << "\" height=\"" << fmt_num(h)
          << "\" fill=\"#1f77b4\"/>\n";
    }
    f << "<text x=\"" << ML << "\" y=\"" << H - 10 << "\" font-size=\"11\">" << fmt_num(lo)
      << "</text>\n";
    f << "<text x=\"" << W - MR << "\" y=\"" << H - 10 << "\" text-anchor=\"end\" font-size=\"11\">"
      << fmt_num(hi) << "</text>\n";
    f << "</svg>\n";
}

}  // namespace speedscale
