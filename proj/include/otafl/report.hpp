#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "otafl/errors.hpp"

namespace otafl {

// Shortest round-trippable decimal form of a double.
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = 0.0;
  std::sscanf(buf, "%lg", &back);
  if (back == v) {
    for (int prec = 1; prec <= 16; ++prec) {
      char shorter[32];
      std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
      std::sscanf(shorter, "%lg", &back);
      if (back == v) return shorter;
    }
  }
  return buf;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path.string());
  return out;
}

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

// Minimal standalone SVG line plot: axes with extreme tick labels, one
// polyline per series, legend in the top-right corner.
inline void svg_line_plot(const std::filesystem::path& path,
                          const std::string& title,
                          const std::string& x_label,
                          const std::string& y_label,
                          const std::vector<PlotSeries>& series) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};
  const double width = 860, height = 560;
  const double ml = 80, mr = 30, mt = 50, mb = 60;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : series) {
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      if (first) {
        xmin = xmax = s.x[k];
        ymin = ymax = s.y[k];
        first = false;
      } else {
        xmin = std::min(xmin, s.x[k]);
        xmax = std::max(xmax, s.x[k]);
        ymin = std::min(ymin, s.y[k]);
        ymax = std::max(ymax, s.y[k]);
      }
    }
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const auto px = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr);
  };
  const auto py = [&](double y) {
    return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb);
  };

  auto out = open_out(path);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << width / 2 << "\" y=\"28\" text-anchor=\"middle\" "
         "font-size=\"18\" font-family=\"sans-serif\">" << title << "</text>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\""
      << width - mr << "\" y2=\"" << height - mb
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 16
      << "\" text-anchor=\"middle\" font-size=\"14\" "
         "font-family=\"sans-serif\">" << x_label << "</text>\n";
  out << "<text x=\"20\" y=\"" << (mt + height - mb) / 2
      << "\" text-anchor=\"middle\" font-size=\"14\" "
         "font-family=\"sans-serif\" transform=\"rotate(-90 20 "
      << (mt + height - mb) / 2 << ")\">" << y_label << "</text>\n";
  out << "<text x=\"" << ml << "\" y=\"" << height - mb + 18
      << "\" text-anchor=\"middle\" font-size=\"12\" "
         "font-family=\"sans-serif\">" << fmt_double(xmin) << "</text>\n"
      << "<text x=\"" << width - mr << "\" y=\"" << height - mb + 18
      << "\" text-anchor=\"middle\" font-size=\"12\" "
         "font-family=\"sans-serif\">" << fmt_double(xmax) << "</text>\n"
      << "<text x=\"" << ml - 8 << "\" y=\"" << height - mb
      << "\" text-anchor=\"end\" font-size=\"12\" "
         "font-family=\"sans-serif\">" << fmt_double(ymin) << "</text>\n"
      << "<text x=\"" << ml - 8 << "\" y=\"" << mt + 4
      << "\" text-anchor=\"end\" font-size=\"12\" "
         "font-family=\"sans-serif\">" << fmt_double(ymax) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < series[s].x.size(); ++k) {
      if (!std::isfinite(series[s].y[k])) continue;
      out << px(series[s].x[k]) << "," << py(series[s].y[k]) << " ";
    }
    out << "\"/>\n";
    out << "<text x=\"" << width - mr - 140 << "\" y=\""
        << mt + 18 * (s + 1) << "\" font-size=\"13\" "
           "font-family=\"sans-serif\" fill=\"" << color << "\">"
        << series[s].name << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace otafl
