#pragma once

#include <string>
#include <vector>

namespace gfmlab {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = false;
    int width = 860;
    int height = 480;
    std::string header_comment;  // optional provenance line embedded as an XML comment
};

// Deterministic line plot: axes, tick grid, one polyline per series and a
// small legend. No external dependency, byte-stable output.
std::string render_line_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series);

}  // namespace gfmlab
