#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace qlasso::cli {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Dashed reference line y = coefficient · x^exponent.
struct GuideLine {
    std::string label;
    double coefficient = 1.0;
    double exponent = -0.5;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    std::vector<GuideLine> guides;
    int width = 640;
    int height = 420;
};

namespace detail {

inline std::string fmt(double v, const char *spec = "%.2f") {
    char buf[48];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

inline std::string escape_xml(const std::string &s) {
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

constexpr std::array<const char *, 6> palette{"#1f77b4", "#d62728", "#2ca02c",
                                              "#9467bd", "#ff7f0e", "#8c564b"};

} // namespace detail

/// Self-contained log-log line plot. Output depends only on the spec, so equal
/// inputs give byte-identical files.
inline void write_loglog_svg(std::ostream &os, const PlotSpec &spec) {
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto &s : spec.series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!(s.x[i] > 0) || !(s.y[i] > 0))
                continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (!(xmin < xmax)) {
        xmin = xmin > 0 && std::isfinite(xmin) ? xmin / 2 : 1.0;
        xmax = xmin * 4;
    }
    if (!(ymin < ymax)) {
        ymin = ymin > 0 && std::isfinite(ymin) ? ymin / 2 : 1.0;
        ymax = ymin * 4;
    }
    const double lx0 = std::log10(xmin) - 0.05, lx1 = std::log10(xmax) + 0.05;
    const double ly0 = std::log10(ymin) - 0.1, ly1 = std::log10(ymax) + 0.1;

    const double left = 70, right = 160, top = 40, bottom = 55;
    const double pw = spec.width - left - right, ph = spec.height - top - bottom;
    auto px = [&](double x) { return left + (std::log10(x) - lx0) / (lx1 - lx0) * pw; };
    auto py = [&](double y) { return top + (ly1 - std::log10(y)) / (ly1 - ly0) * ph; };

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\""
       << spec.height << "\" viewBox=\"0 0 " << spec.width << ' ' << spec.height
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << spec.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
       << detail::escape_xml(spec.title) << "</text>\n";
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << detail::fmt(pw)
       << "\" height=\"" << detail::fmt(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";

    // Decade ticks plus 2x and 5x minor ticks.
    auto ticks = [](double l0, double l1) {
        std::vector<double> out;
        for (int e = static_cast<int>(std::floor(l0)); e <= static_cast<int>(std::ceil(l1)); ++e)
            for (double mult : {1.0, 2.0, 5.0}) {
                const double v = mult * std::pow(10.0, e);
                if (std::log10(v) >= l0 && std::log10(v) <= l1)
                    out.push_back(v);
            }
        return out;
    };
    for (double v : ticks(lx0, lx1)) {
        const double x = px(v);
        os << "<line x1=\"" << detail::fmt(x) << "\" y1=\"" << top + ph << "\" x2=\""
           << detail::fmt(x) << "\" y2=\"" << top + ph + 5 << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << detail::fmt(x) << "\" y=\"" << top + ph + 18
           << "\" text-anchor=\"middle\">" << detail::fmt(v, "%g") << "</text>\n";
    }
    for (double v : ticks(ly0, ly1)) {
        const double y = py(v);
        os << "<line x1=\"" << left - 5 << "\" y1=\"" << detail::fmt(y) << "\" x2=\"" << left
           << "\" y2=\"" << detail::fmt(y) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << left - 8 << "\" y=\"" << detail::fmt(y + 4)
           << "\" text-anchor=\"end\">" << detail::fmt(v, "%g") << "</text>\n";
    }
    os << "<text x=\"" << detail::fmt(left + pw / 2) << "\" y=\"" << spec.height - 12
       << "\" text-anchor=\"middle\">" << detail::escape_xml(spec.x_label) << "</text>\n";
    os << "<text transform=\"translate(18," << detail::fmt(top + ph / 2)
       << ") rotate(-90)\" text-anchor=\"middle\">" << detail::escape_xml(spec.y_label)
       << "</text>\n";

    os << "<clipPath id=\"plot-area\"><rect x=\"" << left << "\" y=\"" << top << "\" width=\""
       << detail::fmt(pw) << "\" height=\"" << detail::fmt(ph) << "\"/></clipPath>\n";
    double legend_y = top + 10;
    auto legend = [&](const std::string &label, const char *color, bool dashed) {
        os << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << detail::fmt(legend_y) << "\" x2=\""
           << left + pw + 36 << "\" y2=\"" << detail::fmt(legend_y) << "\" stroke=\"" << color
           << "\" stroke-width=\"2\"" << (dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
        os << "<text x=\"" << left + pw + 42 << "\" y=\"" << detail::fmt(legend_y + 4) << "\">"
           << detail::escape_xml(label) << "</text>\n";
        legend_y += 18;
    };

    for (const auto &g : spec.guides) {
        const double x0 = std::pow(10.0, lx0), x1 = std::pow(10.0, lx1);
        const double y0 = g.coefficient * std::pow(x0, g.exponent);
        const double y1 = g.coefficient * std::pow(x1, g.exponent);
        if (!(y0 > 0) || !(y1 > 0))
            continue;
        os << "<line clip-path=\"url(#plot-area)\" x1=\"" << detail::fmt(px(x0)) << "\" y1=\""
           << detail::fmt(py(y0)) << "\" x2=\"" << detail::fmt(px(x1)) << "\" y2=\""
           << detail::fmt(py(y1))
           << "\" stroke=\"gray\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"/>\n";
        legend(g.label, "gray", true);
    }

    for (std::size_t k = 0; k < spec.series.size(); ++k) {
        const auto &s = spec.series[k];
        const char *color = detail::palette[k % detail::palette.size()];
        std::ostringstream pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!(s.x[i] > 0) || !(s.y[i] > 0))
                continue;
            pts << (pts.tellp() > 0 ? " " : "") << detail::fmt(px(s.x[i])) << ','
                << detail::fmt(py(s.y[i]));
        }
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\""
           << pts.str() << "\"/>\n";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!(s.x[i] > 0) || !(s.y[i] > 0))
                continue;
            os << "<circle cx=\"" << detail::fmt(px(s.x[i])) << "\" cy=\""
               << detail::fmt(py(s.y[i])) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        legend(s.label, color, false);
    }
    os << "</svg>\n";
}

} // namespace qlasso::cli
