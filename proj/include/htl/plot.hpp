#pragma once

// Minimal SVG line charts for study summaries. No external renderer.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "htl/errors.hpp"

namespace htl {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = true;
    bool log_y = true;
    int width = 720;
    int height = 480;
};

namespace detail {

inline std::string svg_escape(const std::string& s) {
    std::string out;
    for (const char c : s) {
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

inline std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

inline constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                                         "#ff7f0e", "#17becf", "#8c564b", "#e377c2"};

}  // namespace detail

/// Points that are non-finite, or non-positive on a log axis, are dropped.
inline std::string render_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series) {
    if (spec.width < 200 || spec.height < 150) {
        throw InputError("render_svg: canvas too small");
    }
    auto tx = [&](double v) { return spec.log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return spec.log_y ? std::log10(v) : v; };
    auto usable = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!spec.log_x || x > 0.0) && (!spec.log_y || y > 0.0);
    };

    double x_lo = std::numeric_limits<double>::infinity();
    double x_hi = -x_lo;
    double y_lo = x_lo;
    double y_hi = -x_lo;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) {
            throw InputError("render_svg: series '" + s.label + "' has mismatched x/y lengths");
        }
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!usable(s.x[i], s.y[i])) continue;
            x_lo = std::min(x_lo, tx(s.x[i]));
            x_hi = std::max(x_hi, tx(s.x[i]));
            y_lo = std::min(y_lo, ty(s.y[i]));
            y_hi = std::max(y_hi, ty(s.y[i]));
        }
    }
    if (!(x_lo <= x_hi)) {
        x_lo = 0.0;
        x_hi = 1.0;
        y_lo = 0.0;
        y_hi = 1.0;
    }
    if (x_hi - x_lo < 1e-12) {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    if (y_hi - y_lo < 1e-12) {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    const double pad_y = 0.05 * (y_hi - y_lo);
    y_lo -= pad_y;
    y_hi += pad_y;

    const double left = 80.0;
    const double right = spec.width - 170.0;
    const double top = 40.0;
    const double bottom = spec.height - 60.0;
    auto px = [&](double v) { return left + (v - x_lo) / (x_hi - x_lo) * (right - left); };
    auto py = [&](double v) { return bottom - (v - y_lo) / (y_hi - y_lo) * (bottom - top); };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(spec.width) + "\" height=\"" +
           std::to_string(spec.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + detail::svg_num(0.5 * (left + right)) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
           detail::svg_escape(spec.title) + "</text>\n";
    out += "<rect x=\"" + detail::svg_num(left) + "\" y=\"" + detail::svg_num(top) + "\" width=\"" +
           detail::svg_num(right - left) + "\" height=\"" + detail::svg_num(bottom - top) +
           "\" fill=\"none\" stroke=\"black\"/>\n";

    constexpr int kTicks = 5;
    for (int t = 0; t <= kTicks; ++t) {
        const double fx = x_lo + (x_hi - x_lo) * t / kTicks;
        const double fy = y_lo + (y_hi - y_lo) * t / kTicks;
        const double vx = spec.log_x ? std::pow(10.0, fx) : fx;
        const double vy = spec.log_y ? std::pow(10.0, fy) : fy;
        out += "<line x1=\"" + detail::svg_num(px(fx)) + "\" y1=\"" + detail::svg_num(bottom) + "\" x2=\"" +
               detail::svg_num(px(fx)) + "\" y2=\"" + detail::svg_num(bottom + 5) + "\" stroke=\"black\"/>\n";
        out += "<text x=\"" + detail::svg_num(px(fx)) + "\" y=\"" + detail::svg_num(bottom + 18) +
               "\" text-anchor=\"middle\">" + detail::tick_label(vx) + "</text>\n";
        out += "<line x1=\"" + detail::svg_num(left - 5) + "\" y1=\"" + detail::svg_num(py(fy)) + "\" x2=\"" +
               detail::svg_num(left) + "\" y2=\"" + detail::svg_num(py(fy)) + "\" stroke=\"black\"/>\n";
        out += "<text x=\"" + detail::svg_num(left - 8) + "\" y=\"" + detail::svg_num(py(fy) + 4) +
               "\" text-anchor=\"end\">" + detail::tick_label(vy) + "</text>\n";
    }
    out += "<text x=\"" + detail::svg_num(0.5 * (left + right)) + "\" y=\"" + detail::svg_num(spec.height - 18.0) +
           "\" text-anchor=\"middle\">" + detail::svg_escape(spec.x_label) + (spec.log_x ? " (log)" : "") +
           "</text>\n";
    out += "<text transform=\"translate(18," + detail::svg_num(0.5 * (top + bottom)) +
           ") rotate(-90)\" text-anchor=\"middle\">" + detail::svg_escape(spec.y_label) +
           (spec.log_y ? " (log)" : "") + "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* colour = detail::kPalette[k % detail::kPalette.size()];
        std::string pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!usable(s.x[i], s.y[i])) continue;
            pts += detail::svg_num(px(tx(s.x[i]))) + ',' + detail::svg_num(py(ty(s.y[i]))) + ' ';
        }
        if (!pts.empty()) {
            out += "<polyline fill=\"none\" stroke=\"" + std::string(colour) + "\" stroke-width=\"1.5\" points=\"" +
                   pts + "\"/>\n";
        }
        const double ly = top + 16.0 * static_cast<double>(k) + 8.0;
        out += "<line x1=\"" + detail::svg_num(right + 12) + "\" y1=\"" + detail::svg_num(ly) + "\" x2=\"" +
               detail::svg_num(right + 32) + "\" y2=\"" + detail::svg_num(ly) + "\" stroke=\"" + colour +
               "\" stroke-width=\"2\"/>\n";
        out += "<text x=\"" + detail::svg_num(right + 38) + "\" y=\"" + detail::svg_num(ly + 4) + "\">" +
               detail::svg_escape(s.label) + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

}  // namespace htl
