#pragma once

// Minimal SVG line charts: several series over a shared x axis, optional shaded
// x-intervals (masked regions), charts stacked vertically in one document.

#include <adawave/error.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace adawave {

struct PlotSeries {
    std::string label;
    std::vector<double> x, y;
    std::string color = "#1f77b4";
    bool dashed = false;
};

struct PlotShade {
    double x0, x1;
};

struct Chart {
    explicit Chart(std::string t = {}) : title(std::move(t)) {}

    std::string title;
    std::vector<PlotSeries> series;
    std::vector<PlotShade> shades;
    double width = 760;
    double height = 260;
};

inline std::vector<double> iota_axis(std::size_t n, double start = 0.0) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = start + static_cast<double>(i);
    return x;
}

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

inline void render_chart(std::ostringstream& os, const Chart& c, double top) {
    const double ml = 56, mr = 150, mt = 28, mb = 28;
    const double pw = c.width - ml - mr, ph = c.height - mt - mb;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : c.series) {
        if (s.x.size() != s.y.size()) throw ShapeError("plot: series '" + s.label + "' has mismatched x/y");
        for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
        for (double v : s.y) {
            if (std::isfinite(v)) y0 = std::min(y0, v), y1 = std::max(y1, v);
        }
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + mt + (y1 - y) / (y1 - y0) * ph; };

    os << "<text x=\"" << ml << "\" y=\"" << top + 18 << "\" font-size=\"13\" font-weight=\"bold\">"
       << xml_escape(c.title) << "</text>\n";
    for (const auto& sh : c.shades) {
        double a = px(std::max(sh.x0, x0)), b = px(std::min(sh.x1, x1));
        if (b > a) {
            os << "<rect x=\"" << a << "\" y=\"" << top + mt << "\" width=\"" << b - a << "\" height=\"" << ph
               << "\" fill=\"#999\" fill-opacity=\"0.2\"/>\n";
        }
    }
    os << "<rect x=\"" << ml << "\" y=\"" << top + mt << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        double yv = y0 + (y1 - y0) * i / 4.0;
        os << "<text x=\"" << ml - 6 << "\" y=\"" << py(yv) + 4 << "\" font-size=\"10\" text-anchor=\"end\">"
           << std::setprecision(3) << yv << "</text>\n";
        double xv = x0 + (x1 - x0) * i / 4.0;
        os << "<text x=\"" << px(xv) << "\" y=\"" << top + mt + ph + 16 << "\" font-size=\"10\" text-anchor=\"middle\">"
           << std::setprecision(4) << xv << "</text>\n";
    }
    double ly = top + mt + 12;
    for (const auto& s : c.series) {
        os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.4\"";
        if (s.dashed) os << " stroke-dasharray=\"5,3\"";
        os << " points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (std::isfinite(s.y[i])) os << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
        }
        os << "\"/>\n";
        os << "<line x1=\"" << ml + pw + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << ml + pw + 30 << "\" y2=\"" << ly - 4
           << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"5,3\"" : "")
           << "/>\n<text x=\"" << ml + pw + 36 << "\" y=\"" << ly << "\" font-size=\"11\">" << xml_escape(s.label)
           << "</text>\n";
        ly += 16;
    }
}

} // namespace detail

inline std::string render_svg(const std::vector<Chart>& charts) {
    double w = 0, h = 0;
    for (const auto& c : charts) w = std::max(w, c.width), h += c.height;
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
       << ' ' << h << "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    double top = 0;
    for (const auto& c : charts) {
        detail::render_chart(os, c, top);
        top += c.height;
    }
    os << "</svg>\n";
    return os.str();
}

inline std::string render_svg(const Chart& chart) { return render_svg(std::vector<Chart>{chart}); }

inline void write_svg(const std::string& path, const std::vector<Chart>& charts) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << render_svg(charts);
}

/// Runs of zeros in a binary mask row as shaded intervals.
inline std::vector<PlotShade> mask_shades(const std::vector<double>& mask_row, double start = 0.0) {
    std::vector<PlotShade> out;
    for (std::size_t i = 0; i < mask_row.size();) {
        if (mask_row[i] != 0.0) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < mask_row.size() && mask_row[j] == 0.0) ++j;
        out.push_back({start + static_cast<double>(i) - 0.5, start + static_cast<double>(j) - 0.5});
        i = j;
    }
    return out;
}

} // namespace adawave
