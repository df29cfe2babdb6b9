#include "idcr/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "idcr/errors.hpp"

namespace idcr {

namespace {

std::string xml_escape(const std::string& s) {
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

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                         "#9467bd", "#8c564b", "#17becf"};

} // namespace

std::string svg_line_chart(const std::string& title, const std::vector<SvgSeries>& series,
                           int width, int height) {
    const double ml = 50, mr = 16, mt = 36, mb = 28;
    double lo = 0, hi = 1;
    size_t max_n = 0;
    bool first = true;
    for (const auto& s : series)
        for (double v : s.values) {
            if (first) {
                lo = hi = v;
                first = false;
            }
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    for (const auto& s : series) max_n = std::max(max_n, s.values.size());
    if (hi == lo) hi = lo + 1.0;

    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof(buf),
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                  "viewBox=\"0 0 %d %d\">\n",
                  width, height, width, height);
    out += buf;
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + std::to_string(width / 2) +
           "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"14\">" +
           xml_escape(title) + "</text>\n";
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" "
                  "stroke=\"#888\"/>\n",
                  ml, mt, width - ml - mr, height - mt - mb);
    out += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"6\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"10\">"
                  "%.4g</text>\n",
                  mt + 10, hi);
    out += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"6\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"10\">"
                  "%.4g</text>\n",
                  height - mb, lo);
    out += buf;

    for (size_t si = 0; si < series.size(); ++si) {
        const SvgSeries& s = series[si];
        const char* color = kColors[si % (sizeof(kColors) / sizeof(kColors[0]))];
        if (!s.values.empty()) {
            out += std::string("<polyline fill=\"none\" stroke=\"") + color +
                   "\" stroke-width=\"1.5\" points=\"";
            size_t n = s.values.size();
            for (size_t i = 0; i < n; ++i) {
                double x = ml + (max_n > 1 ? (width - ml - mr) * static_cast<double>(i) /
                                                 static_cast<double>(max_n - 1)
                                           : 0.0);
                double y = (height - mb) -
                           (height - mt - mb) * (s.values[i] - lo) / (hi - lo);
                std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", x, y);
                out += buf;
            }
            out += "\"/>\n";
        }
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" "
                      "font-size=\"11\" fill=\"%s\">%s</text>\n",
                      ml + 8 + 110.0 * static_cast<double>(si), height - 8.0, color,
                      xml_escape(s.name).c_str());
        out += buf;
    }
    out += "</svg>\n";
    return out;
}

void write_svg(const std::string& path, const std::string& svg) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw data_error("write_svg: cannot open '" + path + "'");
    f << svg;
    if (!f) throw data_error("write_svg: short write to '" + path + "'");
}

} // namespace idcr
