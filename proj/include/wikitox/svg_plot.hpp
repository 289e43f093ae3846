#pragma once

#include <optional>
#include <string>
#include <vector>

namespace wikitox::plot {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    // Optional shaded band; same length as x when present.
    std::vector<double> y_low;
    std::vector<double> y_high;
    std::string color = "#1f77b4";
    bool markers = false;
    bool dashed = false;
};

struct LineChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    int width = 760;
    int height = 480;
    std::optional<double> vertical_marker;
    std::vector<Series> series;
};

// Self-contained SVG. Non-finite points and, on log axes, non-positive ones are skipped.
std::string render(const LineChart& chart);

struct Heatmap {
    std::string title;
    std::string row_label;
    std::string column_label;
    std::vector<std::string> rows;
    std::vector<std::string> columns;
    std::vector<std::optional<double>> values;  // row-major; absent cells drawn grey
    int cell_width = 80;
    int cell_height = 36;
};

// Diverging colour scale centred on 0, cells annotated with their value.
std::string render(const Heatmap& map);

}  // namespace wikitox::plot
