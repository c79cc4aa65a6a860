#include "gfmlab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gfmlab/errors.hpp"
#include "gfmlab/textio.hpp"

namespace gfmlab {

namespace {

constexpr int kMarginLeft = 78;
constexpr int kMarginRight = 24;
constexpr int kMarginTop = 42;
constexpr int kMarginBottom = 58;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

struct Range {
    double lo = 0.0, hi = 1.0;
};

double nice_step(double span, int target_ticks) {
    const double raw = span / std::max(1, target_ticks);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double norm = raw / mag;
    double step;
    if (norm < 1.5) step = 1.0;
    else if (norm < 3.5) step = 2.0;
    else if (norm < 7.5) step = 5.0;
    else step = 10.0;
    return step * mag;
}

Range data_range(const std::vector<PlotSeries>& series, bool use_y, bool log_scale) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& s : series) {
        const auto& v = use_y ? s.y : s.x;
        for (double val : v) {
            if (!std::isfinite(val)) continue;
            if (log_scale && !(val > 0.0)) continue;
            lo = std::min(lo, val);
            hi = std::max(hi, val);
        }
    }
    if (!(lo <= hi)) return {0.0, 1.0};
    if (lo == hi) {
        const double pad = (lo == 0.0) ? 1.0 : std::abs(lo) * 0.1;
        return {lo - pad, hi + pad};
    }
    return {lo, hi};
}

std::string xml_escape(const std::string& in) {
    std::string out;
    out.reserve(in.size());
    for (char c : in) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string render_line_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series) {
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) {
            throw InvalidInputError("render_line_plot: series x/y length mismatch");
        }
    }

    const double px0 = kMarginLeft;
    const double px1 = spec.width - kMarginRight;
    const double py0 = spec.height - kMarginBottom;  // y axis grows upward
    const double py1 = kMarginTop;

    Range xr = data_range(series, false, false);
    Range yr = data_range(series, true, spec.log_y);
    if (spec.log_y) {
        yr.lo = std::log10(yr.lo);
        yr.hi = std::log10(yr.hi);
        if (yr.hi - yr.lo < 1e-12) yr.hi = yr.lo + 1.0;
    }

    auto sx = [&](double x) { return px0 + (x - xr.lo) / (xr.hi - xr.lo) * (px1 - px0); };
    auto sy = [&](double y) {
        const double v = spec.log_y ? std::log10(y) : y;
        return py0 + (v - yr.lo) / (yr.hi - yr.lo) * (py1 - py0);
    };

    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    if (!spec.header_comment.empty()) {
        out += "<!-- " + xml_escape(spec.header_comment) + " -->\n";
    }
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(spec.width) +
           "\" height=\"" + std::to_string(spec.height) + "\" viewBox=\"0 0 " +
           std::to_string(spec.width) + " " + std::to_string(spec.height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + format_double_short((px0 + px1) / 2) +
           "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
           xml_escape(spec.title) + "</text>\n";

    // x ticks
    const double x_step = nice_step(xr.hi - xr.lo, 6);
    const double x_first = std::ceil(xr.lo / x_step) * x_step;
    for (double x = x_first; x <= xr.hi + 1e-9 * x_step; x += x_step) {
        const double px = sx(x);
        out += "<line x1=\"" + format_double_short(px) + "\" y1=\"" + format_double_short(py0) +
               "\" x2=\"" + format_double_short(px) + "\" y2=\"" + format_double_short(py1) +
               "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        out += "<text x=\"" + format_double_short(px) + "\" y=\"" +
               format_double_short(py0 + 20) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
               format_double_short(x) + "</text>\n";
    }

    // y ticks
    if (spec.log_y) {
        const int d0 = static_cast<int>(std::floor(yr.lo));
        const int d1 = static_cast<int>(std::ceil(yr.hi));
        for (int d = d0; d <= d1; ++d) {
            if (d < yr.lo - 1e-9 || d > yr.hi + 1e-9) continue;
            const double py = py0 + (d - yr.lo) / (yr.hi - yr.lo) * (py1 - py0);
            out += "<line x1=\"" + format_double_short(px0) + "\" y1=\"" +
                   format_double_short(py) + "\" x2=\"" + format_double_short(px1) + "\" y2=\"" +
                   format_double_short(py) + "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
            out += "<text x=\"" + format_double_short(px0 - 8) + "\" y=\"" +
                   format_double_short(py + 4) +
                   "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1e" +
                   std::to_string(d) + "</text>\n";
        }
    } else {
        const double y_step = nice_step(yr.hi - yr.lo, 6);
        const double y_first = std::ceil(yr.lo / y_step) * y_step;
        for (double y = y_first; y <= yr.hi + 1e-9 * y_step; y += y_step) {
            const double py = py0 + (y - yr.lo) / (yr.hi - yr.lo) * (py1 - py0);
            out += "<line x1=\"" + format_double_short(px0) + "\" y1=\"" +
                   format_double_short(py) + "\" x2=\"" + format_double_short(px1) + "\" y2=\"" +
                   format_double_short(py) + "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
            out += "<text x=\"" + format_double_short(px0 - 8) + "\" y=\"" +
                   format_double_short(py + 4) +
                   "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
                   format_double_short(y) + "</text>\n";
        }
    }

    // axes
    out += "<line x1=\"" + format_double_short(px0) + "\" y1=\"" + format_double_short(py0) +
           "\" x2=\"" + format_double_short(px1) + "\" y2=\"" + format_double_short(py0) +
           "\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
    out += "<line x1=\"" + format_double_short(px0) + "\" y1=\"" + format_double_short(py0) +
           "\" x2=\"" + format_double_short(px0) + "\" y2=\"" + format_double_short(py1) +
           "\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
    out += "<text x=\"" + format_double_short((px0 + px1) / 2) + "\" y=\"" +
           format_double_short(py0 + 42.0) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
           xml_escape(spec.x_label) + "</text>\n";
    out += "<text x=\"18\" y=\"" + format_double_short((py0 + py1) / 2) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
           "transform=\"rotate(-90 18 " +
           format_double_short((py0 + py1) / 2) + ")\">" + xml_escape(spec.y_label) +
           "</text>\n";

    // series polylines
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
        std::string points;
        for (std::size_t i = 0; i < series[s].x.size(); ++i) {
            const double x = series[s].x[i];
            const double y = series[s].y[i];
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            if (spec.log_y && !(y > 0.0)) continue;
            points += format_double_short(sx(x), 8);
            points += ',';
            points += format_double_short(sy(y), 8);
            points += ' ';
        }
        out += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
               "\" stroke-width=\"1.6\" points=\"" + points + "\"/>\n";
        // legend entry
        const double ly = kMarginTop + 6.0 + 16.0 * static_cast<double>(s);
        out += "<line x1=\"" + format_double_short(px1 - 118) + "\" y1=\"" +
               format_double_short(ly) + "\" x2=\"" + format_double_short(px1 - 94) + "\" y2=\"" +
               format_double_short(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
        out += "<text x=\"" + format_double_short(px1 - 88) + "\" y=\"" +
               format_double_short(ly + 4) +
               "\" font-family=\"sans-serif\" font-size=\"11\">" + xml_escape(series[s].label) +
               "</text>\n";
    }

    out += "</svg>\n";
    return out;
}

}  // namespace gfmlab
