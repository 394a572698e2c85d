#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cltlab/errors.hpp"
#include "cltlab/rates.hpp"

namespace cltlab {

using Json = nlohmann::json;

// All numbers in text reports use 12 significant digits so that identical
// runs produce byte-identical files.
inline std::string format_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

// temp file + rename
inline void write_atomic(const std::filesystem::path& path,
                         const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + tmp.string());
    out << content;
    if (!out.good()) throw IoFailure("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoFailure("rename failed: " + ec.message());
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_string() const {
    std::ostringstream out;
    for (size_t i = 0; i < header.size(); ++i)
      out << header[i] << (i + 1 < header.size() ? "," : "");
    out << "\n";
    for (const auto& row : rows) {
      for (size_t i = 0; i < row.size(); ++i)
        out << row[i] << (i + 1 < row.size() ? "," : "");
      out << "\n";
    }
    return out.str();
  }
};

inline CsvTable rate_report_csv(const RateReport& report) {
  CsvTable t;
  t.header = {"n", "distance", "method", "band_low", "band_high"};
  for (size_t i = 0; i < report.n_grid.size(); ++i) {
    const bool banded = i < report.band_low.size();
    t.rows.push_back({std::to_string(report.n_grid[i]),
                      format_number(report.distances[i]), report.method,
                      banded ? format_number(report.band_low[i]) : "",
                      banded ? format_number(report.band_high[i]) : ""});
  }
  return t;
}

inline Json rate_report_json(const RateReport& report) {
  Json j;
  j["schema_version"] = 1;
  j["method"] = report.method;
  j["n_grid"] = report.n_grid;
  j["distances"] = report.distances;
  if (!report.band_low.empty()) {
    j["band_low"] = report.band_low;
    j["band_high"] = report.band_high;
  }
  j["slope"] = report.fit.slope;
  j["slope_stderr"] = report.fit.stderr_;
  j["intercept"] = report.fit.intercept;
  j["residuals"] = report.fit.residuals;
  return j;
}

// Self-contained log-log SVG plot of distances vs n with the fitted line.
inline std::string rate_report_svg(const RateReport& report) {
  const double w = 640, h = 480, ml = 70, mr = 20, mt = 20, mb = 50;
  double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
  for (size_t i = 0; i < report.n_grid.size(); ++i) {
    const double x = std::log10(static_cast<double>(report.n_grid[i]));
    const double y = std::log10(report.distances[i]);
    x_min = std::min(x_min, x); x_max = std::max(x_max, x);
    y_min = std::min(y_min, y); y_max = std::max(y_max, y);
  }
  if (x_max <= x_min) x_max = x_min + 1;
  if (y_max <= y_min) y_max = y_min + 1;
  const auto px = [&](double x) {
    return ml + (x - x_min) / (x_max - x_min) * (w - ml - mr);
  };
  const auto py = [&](double y) {
    return h - mb - (y - y_min) / (y_max - y_min) * (h - mt - mb);
  };
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // fitted line, converted from natural to base-10 logs
  const double ln10 = std::numbers::ln10;
  const auto fit_y = [&](double x10) {
    return (report.fit.intercept + report.fit.slope * x10 * ln10) / ln10;
  };
  svg << "<line x1=\"" << format_number(px(x_min)) << "\" y1=\""
      << format_number(py(fit_y(x_min))) << "\" x2=\""
      << format_number(px(x_max)) << "\" y2=\""
      << format_number(py(fit_y(x_max)))
      << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
  svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" "
         "points=\"";
  for (size_t i = 0; i < report.n_grid.size(); ++i)
    svg << format_number(px(std::log10(static_cast<double>(report.n_grid[i]))))
        << "," << format_number(py(std::log10(report.distances[i]))) << " ";
  svg << "\"/>\n";
  for (size_t i = 0; i < report.n_grid.size(); ++i)
    svg << "<circle cx=\""
        << format_number(px(std::log10(static_cast<double>(report.n_grid[i]))))
        << "\" cy=\"" << format_number(py(std::log10(report.distances[i])))
        << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
  svg << "<text x=\"" << w / 2 << "\" y=\"" << h - 12
      << "\" text-anchor=\"middle\" font-size=\"13\">log10 n</text>\n"
      << "<text x=\"16\" y=\"" << h / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 "
         "16 "
      << h / 2 << ")\">log10 distance</text>\n"
      << "<text x=\"" << w - mr << "\" y=\"" << mt + 14
      << "\" text-anchor=\"end\" font-size=\"13\">slope "
      << format_number(report.fit.slope) << "</text>\n"
      << "</svg>\n";
  return svg.str();
}

}  // namespace cltlab
