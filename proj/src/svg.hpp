#ifndef IPKP_SVG_HPP
#define IPKP_SVG_HPP

#include <string>
#include <vector>

namespace ipkp {

// One plotted line; y_lo/y_hi, when the same length as y, add a shaded band.
struct SvgSeries {
    std::string name;
    std::vector<double> x, y, y_lo, y_hi;
};

struct SvgChart {
    std::string title, x_label, y_label;
    bool log_x = false;
    std::vector<SvgSeries> series;
};

// Self-contained SVG line chart (inline styles, no external references).
void write_svg_chart(const std::string& path, const SvgChart& chart);

}  // namespace ipkp

#endif
