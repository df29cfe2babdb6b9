#pragma once

#include <string>
#include <vector>

namespace idcr {

// Minimal standalone SVG line charts: one polyline per series.

struct SvgSeries {
    std::string name;
    std::vector<double> values; // y per integer x
};

std::string svg_line_chart(const std::string& title, const std::vector<SvgSeries>& series,
                           int width = 640, int height = 360);

void write_svg(const std::string& path, const std::string& svg);

} // namespace idcr
