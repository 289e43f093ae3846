#include "wikitox/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace wikitox::plot {

namespace {

std::string fmt(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string tick_label(double v) {
    char buf[64];
    if (v != 0.0 && (std::fabs(v) >= 1e4 || std::fabs(v) < 1e-2)) {
        std::snprintf(buf, sizeof buf, "%.0e", v);
    } else {
        std::snprintf(buf, sizeof buf, "%g", v);
    }
    return buf;
}

std::string escape(const std::string& s) {
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

struct Axis {
    double lo = 0.0;
    double hi = 1.0;
    bool log = false;
    double px_lo = 0.0;
    double px_hi = 1.0;

    double to_px(double v) const {
        double a = log ? std::log10(v) : v;
        double b = log ? std::log10(lo) : lo;
        double c = log ? std::log10(hi) : hi;
        return px_lo + (a - b) / (c - b) * (px_hi - px_lo);
    }

    std::vector<double> ticks() const {
        std::vector<double> t;
        if (log) {
            for (double e = std::floor(std::log10(lo)); e <= std::ceil(std::log10(hi)); e += 1.0) {
                double v = std::pow(10.0, e);
                if (v >= lo * (1 - 1e-9) && v <= hi * (1 + 1e-9)) t.push_back(v);
            }
            return t;
        }
        double span = hi - lo;
        double raw = span / 6.0;
        double mag = std::pow(10.0, std::floor(std::log10(raw)));
        double step = mag;
        for (double m : {1.0, 2.0, 5.0, 10.0}) {
            if (raw <= m * mag) {
                step = m * mag;
                break;
            }
        }
        for (double v = std::ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
            t.push_back(std::fabs(v) < step * 1e-9 ? 0.0 : v);
        }
        return t;
    }
};

bool usable(double v, bool log) { return std::isfinite(v) && (!log || v > 0.0); }

void fit_range(Axis& axis) {
    if (!(axis.hi > axis.lo)) {
        double pad = axis.log ? axis.lo * 0.5 : (axis.lo == 0.0 ? 1.0 : std::fabs(axis.lo) * 0.1);
        axis.lo -= pad;
        axis.hi += axis.log ? axis.hi : pad;
        if (axis.log && axis.lo <= 0.0) axis.lo = axis.hi / 100.0;
    }
    if (axis.log) {
        axis.lo = std::pow(10.0, std::floor(std::log10(axis.lo)));
        axis.hi = std::pow(10.0, std::ceil(std::log10(axis.hi)));
    }
}

}  // namespace

std::string render(const LineChart& chart) {
    const double left = 70, right = 180, top = 40, bottom = 55;
    Axis xa{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), chart.log_x, left,
            chart.width - right};
    Axis ya{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), chart.log_y,
            chart.height - bottom, top};
    for (const auto& s : chart.series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!usable(s.x[i], chart.log_x)) continue;
            auto include_y = [&](double y) {
                if (!usable(y, chart.log_y)) return;
                ya.lo = std::min(ya.lo, y);
                ya.hi = std::max(ya.hi, y);
            };
            xa.lo = std::min(xa.lo, s.x[i]);
            xa.hi = std::max(xa.hi, s.x[i]);
            include_y(s.y[i]);
            if (i < s.y_low.size()) include_y(s.y_low[i]);
            if (i < s.y_high.size()) include_y(s.y_high[i]);
        }
    }
    if (!std::isfinite(xa.lo)) xa.lo = chart.log_x ? 1.0 : 0.0, xa.hi = chart.log_x ? 10.0 : 1.0;
    if (!std::isfinite(ya.lo)) ya.lo = chart.log_y ? 1.0 : 0.0, ya.hi = chart.log_y ? 10.0 : 1.0;
    fit_range(xa);
    fit_range(ya);

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << chart.width << "\" height=\"" << chart.height
        << "\" viewBox=\"0 0 " << chart.width << ' ' << chart.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << chart.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
        << escape(chart.title) << "</text>\n";

    for (double t : xa.ticks()) {
        double px = xa.to_px(t);
        svg << "<line x1=\"" << fmt(px) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(px) << "\" y2=\""
            << fmt(chart.height - bottom) << "\" stroke=\"#e5e5e5\"/>\n";
        svg << "<text x=\"" << fmt(px) << "\" y=\"" << fmt(chart.height - bottom + 16)
            << "\" text-anchor=\"middle\">" << tick_label(t) << "</text>\n";
    }
    for (double t : ya.ticks()) {
        double py = ya.to_px(t);
        svg << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(py) << "\" x2=\"" << fmt(chart.width - right)
            << "\" y2=\"" << fmt(py) << "\" stroke=\"#e5e5e5\"/>\n";
        svg << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(py + 4) << "\" text-anchor=\"end\">"
            << tick_label(t) << "</text>\n";
    }
    svg << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(chart.width - right - left)
        << "\" height=\"" << fmt(chart.height - bottom - top) << "\" fill=\"none\" stroke=\"#333\"/>\n";
    svg << "<text x=\"" << fmt((left + chart.width - right) / 2) << "\" y=\"" << chart.height - 12
        << "\" text-anchor=\"middle\">" << escape(chart.x_label) << "</text>\n";
    svg << "<text transform=\"translate(18," << fmt((top + chart.height - bottom) / 2)
        << ") rotate(-90)\" text-anchor=\"middle\">" << escape(chart.y_label) << "</text>\n";

    if (chart.vertical_marker && usable(*chart.vertical_marker, chart.log_x) && *chart.vertical_marker >= xa.lo &&
        *chart.vertical_marker <= xa.hi) {
        double px = xa.to_px(*chart.vertical_marker);
        svg << "<line x1=\"" << fmt(px) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(px) << "\" y2=\""
            << fmt(chart.height - bottom) << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
    }

    for (const auto& s : chart.series) {
        const std::size_t n = std::min(s.x.size(), s.y.size());
        if (s.y_low.size() == n && s.y_high.size() == n && n > 0) {
            std::ostringstream upper, lower;
            std::vector<std::pair<double, double>> hi_pts, lo_pts;
            for (std::size_t i = 0; i < n; ++i) {
                if (!usable(s.x[i], chart.log_x) || !usable(s.y_low[i], chart.log_y) ||
                    !usable(s.y_high[i], chart.log_y)) {
                    continue;
                }
                hi_pts.emplace_back(xa.to_px(s.x[i]), ya.to_px(s.y_high[i]));
                lo_pts.emplace_back(xa.to_px(s.x[i]), ya.to_px(s.y_low[i]));
            }
            if (!hi_pts.empty()) {
                svg << "<polygon fill=\"" << s.color << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
                for (auto [x, y] : hi_pts) svg << fmt(x) << ',' << fmt(y) << ' ';
                for (auto it = lo_pts.rbegin(); it != lo_pts.rend(); ++it) svg << fmt(it->first) << ',' << fmt(it->second) << ' ';
                svg << "\"/>\n";
            }
        }
        std::ostringstream path;
        bool pen_down = false;
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < n; ++i) {
            if (!usable(s.x[i], chart.log_x) || !usable(s.y[i], chart.log_y)) {
                pen_down = false;
                continue;
            }
            double px = xa.to_px(s.x[i]);
            double py = ya.to_px(s.y[i]);
            path << (pen_down ? 'L' : 'M') << fmt(px) << ' ' << fmt(py) << ' ';
            pen_down = true;
            pts.emplace_back(px, py);
        }
        if (!pts.empty()) {
            svg << "<path d=\"" << path.str() << "\" fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.6\""
                << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
        }
        if (s.markers) {
            for (auto [px, py] : pts) {
                svg << "<circle cx=\"" << fmt(px) << "\" cy=\"" << fmt(py) << "\" r=\"2.5\" fill=\"" << s.color
                    << "\"/>\n";
            }
        }
    }

    double ly = top + 10;
    for (const auto& s : chart.series) {
        double lx = chart.width - right + 14;
        svg << "<line x1=\"" << fmt(lx) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(lx + 22) << "\" y2=\"" << fmt(ly)
            << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"6 4\"" : "")
            << "/>\n";
        svg << "<text x=\"" << fmt(lx + 28) << "\" y=\"" << fmt(ly + 4) << "\">" << escape(s.label) << "</text>\n";
        ly += 18;
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string render(const Heatmap& map) {
    const int left = 90, top = 50;
    const int cols = static_cast<int>(map.columns.size());
    const int rows = static_cast<int>(map.rows.size());
    const int width = left + cols * map.cell_width + 20;
    const int height = top + rows * map.cell_height + 50;
    double extent = 0.0;
    for (const auto& v : map.values) {
        if (v && std::isfinite(*v)) extent = std::max(extent, std::fabs(*v));
    }
    if (extent == 0.0) extent = 1.0;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(map.title)
        << "</text>\n";
    for (int r = 0; r < rows; ++r) {
        int y = top + r * map.cell_height;
        svg << "<text x=\"" << left - 8 << "\" y=\"" << y + map.cell_height / 2 + 4 << "\" text-anchor=\"end\">"
            << escape(map.rows[static_cast<std::size_t>(r)]) << "</text>\n";
        for (int c = 0; c < cols; ++c) {
            int x = left + c * map.cell_width;
            auto idx = static_cast<std::size_t>(r * cols + c);
            std::optional<double> v = idx < map.values.size() ? map.values[idx] : std::nullopt;
            std::string fill = "#cccccc";
            if (v && std::isfinite(*v)) {
                double t = std::clamp(*v / extent, -1.0, 1.0);
                // negative red, positive blue
                int shade = static_cast<int>(std::lround(255 * (1.0 - std::fabs(t))));
                char buf[16];
                if (t < 0) {
                    std::snprintf(buf, sizeof buf, "#ff%02x%02x", shade, shade);
                } else {
                    std::snprintf(buf, sizeof buf, "#%02x%02xff", shade, shade);
                }
                fill = buf;
            }
            svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << map.cell_width << "\" height=\""
                << map.cell_height << "\" fill=\"" << fill << "\" stroke=\"white\"/>\n";
            svg << "<text x=\"" << x + map.cell_width / 2 << "\" y=\"" << y + map.cell_height / 2 + 4
                << "\" text-anchor=\"middle\">" << (v && std::isfinite(*v) ? fmt(*v) : "n/a") << "</text>\n";
        }
    }
    for (int c = 0; c < cols; ++c) {
        svg << "<text x=\"" << left + c * map.cell_width + map.cell_width / 2 << "\" y=\""
            << top + rows * map.cell_height + 18 << "\" text-anchor=\"middle\">"
            << escape(map.columns[static_cast<std::size_t>(c)]) << "</text>\n";
    }
    svg << "<text x=\"" << left + cols * map.cell_width / 2 << "\" y=\"" << height - 8 << "\" text-anchor=\"middle\">"
        << escape(map.column_label) << "</text>\n";
    svg << "<text transform=\"translate(16," << top + rows * map.cell_height / 2
        << ") rotate(-90)\" text-anchor=\"middle\">" << escape(map.row_label) << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace wikitox::plot
