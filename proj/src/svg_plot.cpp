#include "hvtrack/svg_plot.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace hvt::plot {

namespace {

constexpr int kW = 640, kH = 420;
constexpr int kMargin = 60;

std::ofstream open_svg(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write plot: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return out;
}

void axes(std::ofstream& out, const std::string& title, const std::string& x_label,
          const std::string& y_label) {
  out << "<line x1=\"" << kMargin << "\" y1=\"" << kH - kMargin << "\" x2=\"" << kW - kMargin
      << "\" y2=\"" << kH - kMargin << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << kMargin << "\" y1=\"" << kH - kMargin << "\" x2=\"" << kMargin
      << "\" y2=\"" << kMargin << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << title << "</text>\n"
      << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 14
      << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label << "</text>\n"
      << "<text x=\"18\" y=\"" << kH / 2 << "\" text-anchor=\"middle\" font-size=\"12\" "
      << "transform=\"rotate(-90 18 " << kH / 2 << ")\">" << y_label << "</text>\n";
}

}  // namespace

void write_curve_svg(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.empty())
    throw std::invalid_argument("write_curve_svg: series mismatch or empty");
  auto out = open_svg(path);
  axes(out, title, x_label, y_label);

  const double x_min = xs.front(), x_max = xs.back();
  const double span = x_max - x_min > 0 ? x_max - x_min : 1.0;
  const double plot_w = kW - 2 * kMargin, plot_h = kH - 2 * kMargin;

  out << "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\" points=\"";
  char buf[64];
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double px = kMargin + (xs[i] - x_min) / span * plot_w;
    const double py = kH - kMargin - std::clamp(ys[i], 0.0, 1.0) * plot_h;
    std::snprintf(buf, sizeof buf, "%.1f,%.1f ", px, py);
    out << buf;
  }
  out << "\"/>\n";

  // x ticks at the ends and midpoint, y ticks at 0 / 0.5 / 1
  for (double f : {0.0, 0.5, 1.0}) {
    const double px = kMargin + f * plot_w;
    const double py = kH - kMargin - f * plot_h;
    std::snprintf(buf, sizeof buf, "%.2f", x_min + f * span);
    out << "<text x=\"" << px << "\" y=\"" << kH - kMargin + 16
        << "\" text-anchor=\"middle\" font-size=\"10\">" << buf << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.1f", f);
    out << "<text x=\"" << kMargin - 8 << "\" y=\"" << py + 4
        << "\" text-anchor=\"end\" font-size=\"10\">" << buf << "</text>\n";
  }
  out << "</svg>\n";
}

void write_bar_svg(const std::string& path, const std::string& title,
                   const std::vector<std::string>& labels,
                   const std::vector<double>& values) {
  if (labels.size() != values.size() || labels.empty())
    throw std::invalid_argument("write_bar_svg: series mismatch or empty");
  auto out = open_svg(path);
  axes(out, title, "", "score");

  const double vmax = std::max(1.0, *std::max_element(values.begin(), values.end()));
  const double plot_w = kW - 2 * kMargin, plot_h = kH - 2 * kMargin;
  const double slot = plot_w / double(labels.size());
  char buf[64];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double h = values[i] / vmax * plot_h;
    const double x = kMargin + double(i) * slot + 0.15 * slot;
    out << "<rect x=\"" << x << "\" y=\"" << kH - kMargin - h << "\" width=\"" << 0.7 * slot
        << "\" height=\"" << h << "\" fill=\"#1f6fb2\"/>\n";
    out << "<text x=\"" << x + 0.35 * slot << "\" y=\"" << kH - kMargin + 16
        << "\" text-anchor=\"middle\" font-size=\"10\">" << labels[i] << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.1f", values[i]);
    out << "<text x=\"" << x + 0.35 * slot << "\" y=\"" << kH - kMargin - h - 4
        << "\" text-anchor=\"middle\" font-size=\"10\">" << buf << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace hvt::plot
