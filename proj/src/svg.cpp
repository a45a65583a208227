#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "ipkp/common.hpp"

namespace ipkp {

namespace {

constexpr int kWidth = 720, kHeight = 480;
constexpr int kLeft = 70, kRight = 24, kTop = 48, kBottom = 56;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                          "#17becf", "#8c564b", "#7f7f7f", "#bcbd22", "#e377c2"};

std::string esc(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else out += c;
    }
    return out;
}

std::string num(double v) {
    std::string s = strprintf("%.6g", v);
    return s;
}

double nice_step(double range) {
    if (!(range > 0)) return 1.0;
    double raw = range / 5.0;
    double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double frac = raw / mag;
    double step = frac < 1.5 ? 1.0 : frac < 3.5 ? 2.0 : frac < 7.5 ? 5.0 : 10.0;
    return step * mag;
}

}  // namespace

void write_svg_chart(const std::string& path, const SvgChart& chart) {
    if (chart.series.empty()) throw Error("write_svg_chart: no series");
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : chart.series) {
        if (s.x.size() != s.y.size()) {
            throw Error("write_svg_chart: series '" + s.name + "' has mismatched x/y lengths");
        }
        bool banded = s.y_lo.size() == s.y.size() && s.y_hi.size() == s.y.size();
        for (size_t i = 0; i < s.x.size(); ++i) {
            double xv = s.x[i];
            if (chart.log_x && !(xv > 0)) {
                throw Error(strprintf("write_svg_chart: x value %g on a log axis", xv));
            }
            if (!std::isfinite(s.y[i])) continue;
            xmin = std::min(xmin, xv);
            xmax = std::max(xmax, xv);
            double lo = banded && std::isfinite(s.y_lo[i]) ? s.y_lo[i] : s.y[i];
            double hi = banded && std::isfinite(s.y_hi[i]) ? s.y_hi[i] : s.y[i];
            ymin = std::min(ymin, lo);
            ymax = std::max(ymax, hi);
        }
    }
    if (!std::isfinite(xmin) || !std::isfinite(ymin)) {
        throw Error("write_svg_chart: no finite points to plot");
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    double ypad = 0.06 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    double lx0 = chart.log_x ? std::log10(xmin) : xmin;
    double lx1 = chart.log_x ? std::log10(xmax) : xmax;
    auto px = [&](double x) {
        double t = chart.log_x ? std::log10(x) : x;
        return kLeft + (t - lx0) / (lx1 - lx0) * (kWidth - kLeft - kRight);
    };
    auto py = [&](double y) {
        return kHeight - kBottom - (y - ymin) / (ymax - ymin) * (kHeight - kTop - kBottom);
    };

    std::ofstream os(path);
    if (!os) throw DataError("cannot open " + path + " for writing");
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
       << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
       << "font-family=\"sans-serif\" font-size=\"16\">" << esc(chart.title) << "</text>\n";

    // Gridlines and ticks.
    os << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
    if (chart.log_x) {
        for (int e = static_cast<int>(std::floor(lx0)); e <= static_cast<int>(std::ceil(lx1)); ++e) {
            double xv = std::pow(10.0, e);
            if (xv < xmin * 0.999 || xv > xmax * 1.001) continue;
            double X = px(xv);
            os << "<line x1=\"" << num(X) << "\" y1=\"" << kTop << "\" x2=\"" << num(X)
               << "\" y2=\"" << kHeight - kBottom << "\" stroke=\"#ddd\"/>\n";
            os << "<text x=\"" << num(X) << "\" y=\"" << kHeight - kBottom + 16
               << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
        }
    } else {
        double step = nice_step(xmax - xmin);
        for (double xv = std::ceil(xmin / step) * step; xv <= xmax + 1e-9; xv += step) {
            double X = px(xv);
            os << "<line x1=\"" << num(X) << "\" y1=\"" << kTop << "\" x2=\"" << num(X)
               << "\" y2=\"" << kHeight - kBottom << "\" stroke=\"#ddd\"/>\n";
            os << "<text x=\"" << num(X) << "\" y=\"" << kHeight - kBottom + 16
               << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
        }
    }
    double ystep = nice_step(ymax - ymin);
    for (double yv = std::ceil(ymin / ystep) * ystep; yv <= ymax + 1e-9; yv += ystep) {
        double Y = py(yv);
        os << "<line x1=\"" << kLeft << "\" y1=\"" << num(Y) << "\" x2=\"" << kWidth - kRight
           << "\" y2=\"" << num(Y) << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(Y + 4)
           << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
    }
    os << "</g>\n";

    // Axes.
    os << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\""
       << kWidth - kRight << "\" y2=\"" << kHeight - kBottom << "\" stroke=\"#000\"/>\n"
       << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
       << kHeight - kBottom << "\" stroke=\"#000\"/>\n"
       << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 14
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
       << esc(chart.x_label) << "</text>\n"
       << "<text x=\"18\" y=\"" << (kTop + kHeight - kBottom) / 2
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 "
       << (kTop + kHeight - kBottom) / 2 << ")\">" << esc(chart.y_label) << "</text>\n";

    // Bands first so lines draw over them.
    for (size_t si = 0; si < chart.series.size(); ++si) {
        const auto& s = chart.series[si];
        const char* color = kPalette[si % (sizeof kPalette / sizeof *kPalette)];
        if (s.y_lo.size() != s.y.size() || s.y_hi.size() != s.y.size()) continue;
        std::string pts;
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y_hi[i])) continue;
            pts += num(px(s.x[i])) + "," + num(py(s.y_hi[i])) + " ";
        }
        for (size_t i = s.x.size(); i-- > 0;) {
            if (!std::isfinite(s.y_lo[i])) continue;
            pts += num(px(s.x[i])) + "," + num(py(s.y_lo[i])) + " ";
        }
        if (!pts.empty()) {
            os << "<polygon points=\"" << pts << "\" fill=\"" << color
               << "\" fill-opacity=\"0.12\" stroke=\"none\"/>\n";
        }
    }
    for (size_t si = 0; si < chart.series.size(); ++si) {
        const auto& s = chart.series[si];
        const char* color = kPalette[si % (sizeof kPalette / sizeof *kPalette)];
        std::string pts;
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            pts += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
        }
        os << "<polyline points=\"" << pts << "\" fill=\"none\" stroke=\"" << color
           << "\" stroke-width=\"2\"/>\n";
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            os << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i]))
               << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
    }

    // Legend.
    os << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
    for (size_t si = 0; si < chart.series.size(); ++si) {
        const char* color = kPalette[si % (sizeof kPalette / sizeof *kPalette)];
        int y = kTop + 8 + static_cast<int>(si) * 18;
        os << "<line x1=\"" << kWidth - kRight - 150 << "\" y1=\"" << y << "\" x2=\""
           << kWidth - kRight - 126 << "\" y2=\"" << y << "\" stroke=\"" << color
           << "\" stroke-width=\"2\"/>\n"
           << "<text x=\"" << kWidth - kRight - 120 << "\" y=\"" << y + 4 << "\">"
           << esc(chart.series[si].name) << "</text>\n";
    }
    os << "</g>\n</svg>\n";
    if (!os) throw DataError("write failed for " + path);
}

}  // namespace ipkp
