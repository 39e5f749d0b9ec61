#include "polyode/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace polyode {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kMargin = 50.0;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const { return kMargin + (x - x0) / (x1 - x0) * (kWidth - 2 * kMargin); }
  double py(double y) const { return kHeight - kMargin - (y - y0) / (y1 - y0) * (kHeight - 2 * kMargin); }
};

void widen(double& lo, double& hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    lo = 0.0;
    hi = 1.0;
  } else if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
}

std::string header(const std::string& title) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
     << "</text>\n";
  return os.str();
}

std::string axes(const Frame& f, const std::string& x_label) {
  std::ostringstream os;
  os << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kWidth - 2 * kMargin << "\" height=\""
     << kHeight - 2 * kMargin << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << kMargin << "\" y=\"" << kHeight - kMargin + 15 << "\">" << label_num(f.x0) << "</text>\n";
  os << "<text x=\"" << kWidth - kMargin << "\" y=\"" << kHeight - kMargin + 15 << "\" text-anchor=\"end\">"
     << label_num(f.x1) << "</text>\n";
  os << "<text x=\"" << kMargin - 4 << "\" y=\"" << kHeight - kMargin << "\" text-anchor=\"end\">" << label_num(f.y0)
     << "</text>\n";
  os << "<text x=\"" << kMargin - 4 << "\" y=\"" << kMargin + 8 << "\" text-anchor=\"end\">" << label_num(f.y1)
     << "</text>\n";
  if (!x_label.empty()) {
    os << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">" << escape(x_label)
       << "</text>\n";
  }
  return os.str();
}

}  // namespace

std::string svg_line_plot(const std::vector<Series>& series, const std::string& title, const std::string& x_label) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("svg_line_plot: series '" + s.label + "' is ragged");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  widen(x0, x1);
  widen(y0, y1);
  const Frame f{x0, x1, y0, y1};

  std::string out = header(title) + axes(f, x_label);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % std::size(kColors)];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      pts += num(f.px(s.x[i])) + "," + num(f.py(s.y[i])) + " ";
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\"";
    if (s.dashed) out += " stroke-dasharray=\"5,3\"";
    out += " points=\"" + pts + "\"/>\n";
    out += "<text x=\"" + num(kWidth - kMargin + 4) + "\" y=\"" + num(kMargin + 14.0 * static_cast<double>(k + 1)) +
           "\" fill=\"" + color + "\">" + escape(s.label) + "</text>\n";
  }
  return out + "</svg>\n";
}

std::string svg_trajectory_plot(const Trajectory& traj, const std::string& title, const Trajectory* reference) {
  std::vector<Series> series;
  auto add = [&](const Trajectory& t, const std::string& suffix, bool dashed) {
    for (std::size_t j = 0; j < t.dim; ++j) {
      Series s;
      s.label = (j < t.names.size() ? t.names[j] : "y" + std::to_string(j)) + suffix;
      s.x = t.times;
      for (std::size_t i = 0; i < t.size(); ++i) s.y.push_back(t.at(i, j));
      s.dashed = dashed;
      series.push_back(std::move(s));
    }
  };
  add(traj, "", false);
  if (reference) add(*reference, " (ref)", true);
  return svg_line_plot(series, title, traj.time_name);
}

std::string svg_quiver(const VectorField& field, const std::string& title) {
  if (field.x.empty()) throw std::invalid_argument("svg_quiver: empty field");
  const auto [xmin, xmax] = std::minmax_element(field.x.begin(), field.x.end());
  const auto [ymin, ymax] = std::minmax_element(field.y.begin(), field.y.end());
  double x0 = *xmin, x1 = *xmax, y0 = *ymin, y1 = *ymax;
  widen(x0, x1);
  widen(y0, y1);
  const Frame f{x0, x1, y0, y1};

  const double cell = (kWidth - 2 * kMargin) / static_cast<double>(std::max<std::size_t>(field.n, 2));
  double longest = 0.0;
  std::vector<double> dx(field.x.size()), dy(field.x.size());
  for (std::size_t i = 0; i < field.x.size(); ++i) {
    // direction in pixel space
    dx[i] = f.px(field.x[i] + field.dxdt[i]) - f.px(field.x[i]);
    dy[i] = f.py(field.y[i] + field.dydt[i]) - f.py(field.y[i]);
    const double len = std::hypot(dx[i], dy[i]);
    if (std::isfinite(len)) longest = std::max(longest, len);
  }
  const double scale = longest > 0.0 ? 0.9 * cell / longest : 0.0;

  std::string out = header(title) + axes(f, "x");
  for (std::size_t i = 0; i < field.x.size(); ++i) {
    const double len = std::hypot(dx[i], dy[i]);
    if (!std::isfinite(len)) continue;
    const double ax = f.px(field.x[i]), ay = f.py(field.y[i]);
    const double bx = ax + dx[i] * scale, by = ay + dy[i] * scale;
    out += "<line x1=\"" + num(ax) + "\" y1=\"" + num(ay) + "\" x2=\"" + num(bx) + "\" y2=\"" + num(by) +
           "\" stroke=\"#1f77b4\"/>";
    out += "<circle cx=\"" + num(bx) + "\" cy=\"" + num(by) + "\" r=\"1.2\" fill=\"#1f77b4\"/>\n";
  }
  return out + "</svg>\n";
}

}  // namespace polyode
