#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "aetsgd/error.hpp"
#include "aetsgd/harness.hpp"
#include "aetsgd/text.hpp"

namespace aetsgd {

inline constexpr const char* kCsvColumns =
    "experiment,node,round,iter,loss,accuracy,rounds_total,messages,duration_ms,speedup";

namespace detail {

inline std::string csv_number(double v) { return std::isnan(v) ? std::string() : text::format_double(v); }

inline std::string fixed(double v, int digits) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, digits);
  return std::string(buf, ptr);
}

}  // namespace detail

// One row per (node, curve point). Empty metrics produce the header alone.
inline void write_csv(std::ostream& out, const std::vector<Metrics>& runs) {
  out << kCsvColumns << '\n';
  for (const auto& m : runs) {
    for (std::size_t c = 0; c < m.nodes.size(); ++c) {
      const auto& nm = m.nodes[c];
      for (const auto& p : nm.curve) {
        out << m.experiment << ',' << c << ',' << p.round << ',' << p.iter << ',' << detail::csv_number(p.loss) << ','
            << detail::csv_number(p.accuracy) << ',' << nm.rounds << ',' << m.messages << ','
            << detail::csv_number(m.duration_ms) << ',' << detail::csv_number(m.speedup) << '\n';
      }
    }
  }
}

inline void export_csv(const std::vector<Metrics>& runs, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_csv(out, runs);
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline void export_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::vector<Metrics> runs;
  for (const auto& r : rows) runs.push_back(r.metrics);
  export_csv(runs, path);
}

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

// Minimal line chart: one polyline per series, axes with min/max labels and a
// legend. Output depends only on the input values.
inline void write_svg_lines(std::ostream& out, const std::vector<Series>& series, const std::string& title,
                            const std::string& x_label, const std::string& y_label) {
  constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return kTop + ph - (y - ymin) / (ymax - ymin) * ph; };
  static const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  using detail::fixed;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 "
      << kW << ' ' << kH << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + ph
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << kLeft << "\" y=\"" << kTop + ph + 18 << "\" font-size=\"11\">" << fixed(xmin, 3)
      << "</text>\n";
  out << "<text x=\"" << kLeft + pw << "\" y=\"" << kTop + ph + 18 << "\" font-size=\"11\" text-anchor=\"end\">"
      << fixed(xmax, 3) << "</text>\n";
  out << "<text x=\"" << kLeft - 6 << "\" y=\"" << kTop + ph << "\" font-size=\"11\" text-anchor=\"end\">"
      << fixed(ymin, 4) << "</text>\n";
  out << "<text x=\"" << kLeft - 6 << "\" y=\"" << kTop + 10 << "\" font-size=\"11\" text-anchor=\"end\">"
      << fixed(ymax, 4) << "</text>\n";
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
      << x_label << "</text>\n";
  out << "<text x=\"16\" y=\"" << kTop + ph / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16 " << kTop + ph / 2
      << ")\" text-anchor=\"middle\">" << y_label << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kPalette[k % std::size(kPalette)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (const auto& [x, y] : series[k].points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      out << (first ? "" : " ") << fixed(sx(x), 2) << ',' << fixed(sy(y), 2);
      first = false;
    }
    out << "\"/>\n";
    const double ly = kTop + 14.0 * static_cast<double>(k);
    out << "<line x1=\"" << kLeft + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + pw + 30 << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << kLeft + pw + 34 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << series[k].label
        << "</text>\n";
  }
  out << "</svg>\n";
}

inline void export_svg_lines(const std::vector<Series>& series, const std::string& path, const std::string& title,
                             const std::string& x_label = "iteration", const std::string& y_label = "loss") {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_svg_lines(out, series, title, x_label, y_label);
  if (!out) throw IoError("write failed for '" + path + "'");
}

// Per-node held-out loss against iteration count.
inline std::vector<Series> loss_curves(const Metrics& m) {
  std::vector<Series> out;
  for (std::size_t c = 0; c < m.nodes.size(); ++c) {
    Series s{"node " + std::to_string(c), {}};
    for (const auto& p : m.nodes[c].curve) s.points.emplace_back(static_cast<double>(p.iter), p.loss);
    out.push_back(std::move(s));
  }
  return out;
}

inline void export_trace(const Trace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_trace(out, trace);
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline Trace load_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_trace(in);
}

}  // namespace aetsgd
