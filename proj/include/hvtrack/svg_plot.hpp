#pragma once

// Dependency-free SVG charts for the threshold curves and per-category bars.

#include <string>
#include <vector>

namespace hvt::plot {

// single polyline over (xs, ys); y expected in [0, 1]
void write_curve_svg(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<double>& xs, const std::vector<double>& ys);

void write_bar_svg(const std::string& path, const std::string& title,
                   const std::vector<std::string>& labels,
                   const std::vector<double>& values);

}  // namespace hvt::plot
