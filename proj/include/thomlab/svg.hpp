#pragma once

#include <string>
#include <vector>

namespace thomlab {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string title;
    std::string xlabel;
    std::string ylabel;
    bool logx = false;
    bool logy = false;
    std::string note;   // embedded as an XML comment and a description element
};

/// Line plot as a standalone SVG document. Points that are non-finite, or
/// non-positive on a log axis, are skipped.
std::string render_svg(const std::vector<PlotSeries>& series, const PlotSpec& spec);

} // namespace thomlab
