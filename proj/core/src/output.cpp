#include "cnf/output.hpp"

#include "cnf/csv.hpp"
#include "cnf/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace cnf {

namespace {

constexpr double kMargin = 60.0;
constexpr std::array<const char*, 6> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

// Fixed-precision coordinate text keeps files short and byte-stable.
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
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

void open_svg(std::ostringstream& os, const std::string& title) {
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kSvgWidth << "\" height=\""
     << kSvgHeight << "\" viewBox=\"0 0 " << kSvgWidth << " " << kSvgHeight << "\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << kSvgWidth << "\" height=\"" << kSvgHeight << "\" fill=\"white\"/>\n"
     << "<text x=\"" << kSvgWidth / 2 << "\" y=\"30\" text-anchor=\"middle\" font-family=\"sans-serif\" "
     << "font-size=\"18\">" << escape(title) << "</text>\n";
}

struct Frame {
  double x0, x1, y0, y1;  // data range
  double left, right, top, bottom;  // pixels

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (right - left); }
  double py(double y) const { return bottom - (y - y0) / (y1 - y0) * (bottom - top); }
};

void widen(double& lo, double& hi) {
  if (!(hi > lo)) {
    const double pad = lo == 0.0 ? 1.0 : 0.5 * std::abs(lo);
    lo -= pad;
    hi += pad;
  }
}

void axes(std::ostringstream& os, const Frame& f, const std::string& ylabel) {
  os << "<rect x=\"" << num(f.left) << "\" y=\"" << num(f.top) << "\" width=\"" << num(f.right - f.left)
     << "\" height=\"" << num(f.bottom - f.top) << "\" fill=\"none\" stroke=\"black\"/>\n";
  const auto label = [&](double x, double y, const std::string& text, const char* anchor) {
    os << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" text-anchor=\"" << anchor
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(text) << "</text>\n";
  };
  label(f.left, f.bottom + 18, format_real(f.x0), "start");
  label(f.right, f.bottom + 18, format_real(f.x1), "end");
  label(f.left - 6, f.bottom, format_real(f.y0), "end");
  label(f.left - 6, f.top + 10, format_real(f.y1), "end");
  if (!ylabel.empty()) label(f.left, f.top - 8, ylabel, "start");
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::vector<Series>& series, bool log_y) {
  std::vector<std::vector<std::pair<double, double>>> pts;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw DimensionMismatch("svg_line_chart: x and y lengths differ");
    std::vector<std::pair<double, double>> p;
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      double y = s.y[k];
      if (log_y) {
        if (!(y > 0.0) || !std::isfinite(y)) continue;
        y = std::log10(y);
      }
      if (!std::isfinite(y) || !std::isfinite(s.x[k])) continue;
      p.emplace_back(s.x[k], y);
      x0 = std::min(x0, s.x[k]);
      x1 = std::max(x1, s.x[k]);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
    pts.push_back(std::move(p));
  }
  if (!std::isfinite(x0)) x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  widen(x0, x1);
  widen(y0, y1);
  const Frame f{x0, x1, y0, y1, kMargin + 30, kSvgWidth - kMargin, kMargin, kSvgHeight - kMargin};

  std::ostringstream os;
  open_svg(os, title);
  axes(os, f, log_y ? "log10" : "");
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* colour = kPalette[s % kPalette.size()];
    if (!pts[s].empty()) {
      os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t k = 0; k < pts[s].size(); ++k) {
        os << (k ? " " : "") << num(f.px(pts[s][k].first)) << "," << num(f.py(pts[s][k].second));
      }
      os << "\"/>\n";
    }
    const double ly = f.top + 16 + 16.0 * static_cast<double>(s);
    os << "<line x1=\"" << num(f.right - 150) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(f.right - 130)
       << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << num(f.right - 125) << "\" y=\"" << num(ly)
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(series[s].name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string heat_colour(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const long r = std::lround(255.0 * t);
  const long g = std::lround(64.0 * (1.0 - std::abs(2.0 * t - 1.0)));
  const long b = std::lround(255.0 * (1.0 - t));
  return "rgb(" + std::to_string(r) + "," + std::to_string(g) + "," + std::to_string(b) + ")";
}

std::string svg_heatmap(const std::string& title, const EvalGrid& grid, const std::vector<double>& values) {
  if (values.size() != grid.size()) throw DimensionMismatch("svg_heatmap: value count does not match the grid");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double side = std::min(kSvgWidth - 2 * kMargin, kSvgHeight - 2 * kMargin);
  const double left = (kSvgWidth - side) / 2;
  const double top = (kSvgHeight - side) / 2 + 10;
  const double cw = side / grid.nx();
  const double ch = side / grid.ny();

  std::ostringstream os;
  open_svg(os, title);
  for (int j = 0; j < grid.ny(); ++j) {
    for (int i = 0; i < grid.nx(); ++i) {
      const double v = values[static_cast<std::size_t>(j) * grid.nx() + i];
      const double t = (hi > lo && std::isfinite(v)) ? (v - lo) / (hi - lo) : 0.0;
      os << "<rect x=\"" << num(left + i * cw) << "\" y=\"" << num(top + (grid.ny() - 1 - j) * ch) << "\" width=\""
         << num(cw) << "\" height=\"" << num(ch) << "\" fill=\"" << heat_colour(t) << "\"/>\n";
    }
  }
  const auto label = [&](double x, double y, const std::string& text) {
    os << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-family=\"sans-serif\" font-size=\"12\">"
       << escape(text) << "</text>\n";
  };
  if (std::isfinite(lo)) {
    label(left + side + 10, top + side, "min " + format_real(lo));
    label(left + side + 10, top + 12, "max " + format_real(hi));
  }
  os << "</svg>\n";
  return os.str();
}

std::string svg_polylines(const std::string& title, const std::vector<Polyline>& lines, double lo, double hi,
                          const std::vector<Point>& markers) {
  if (!(hi > lo)) throw BadConfig("svg_polylines: empty view");
  const double side = std::min(kSvgWidth - 2 * kMargin, kSvgHeight - 2 * kMargin);
  const double left = (kSvgWidth - side) / 2;
  const double top = (kSvgHeight - side) / 2 + 10;
  const Frame f{lo, hi, lo, hi, left, left + side, top, top + side};

  std::ostringstream os;
  open_svg(os, title);
  axes(os, f, "");
  for (const auto& l : lines) {
    os << "<polyline fill=\"none\" stroke=\"" << kPalette[0] << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < l.size(); ++k) os << (k ? " " : "") << num(f.px(l[k].x())) << "," << num(f.py(l[k].y()));
    os << "\"/>\n";
  }
  for (const auto& m : markers) {
    os << "<circle cx=\"" << num(f.px(m[0])) << "\" cy=\"" << num(f.py(m[1])) << "\" r=\"2\" fill=\"" << kPalette[1]
       << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace cnf
