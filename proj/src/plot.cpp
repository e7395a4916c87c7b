#include "sacd/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace sacd {

namespace {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (step, eval_return)
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

std::string render_learning_curve_svg(const std::vector<std::pair<std::string, RunMetrics>>& input) {
  std::vector<Series> series;
  double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
  for (const auto& [name, metrics] : input) {
    Series s;
    s.name = name;
    for (const MetricsRow& row : metrics.rows) {
      if (!row.eval_return) continue;
      const double x = static_cast<double>(row.step), y = *row.eval_return;
      s.points.emplace_back(x, y);
      min_x = std::min(min_x, x), max_x = std::max(max_x, x);
      min_y = std::min(min_y, y), max_y = std::max(max_y, y);
    }
    series.push_back(std::move(s));
  }
  bool any = false;
  for (const Series& s : series) any = any || !s.points.empty();
  if (!any) {
    min_x = 0, max_x = 1, min_y = 0, max_y = 1;
  }
  if (max_x <= min_x) max_x = min_x + 1;
  if (max_y <= min_y) {
    max_y += 0.5;
    min_y -= 0.5;
  }

  const double width = 720, height = 440;
  const double left = 70, right = 20, top = 30, bottom = 50;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  auto sx = [&](double x) { return left + (x - min_x) / (max_x - min_x) * plot_w; };
  auto sy = [&](double y) { return top + (max_y - y) / (max_y - min_y) * plot_h; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
     << top + plot_h << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
     << "\" stroke=\"black\"/>\n";

  for (int i = 0; i <= 4; ++i) {
    const double frac = i / 4.0;
    const double x = min_x + frac * (max_x - min_x);
    const double y = min_y + frac * (max_y - min_y);
    os << "<text x=\"" << sx(x) << "\" y=\"" << top + plot_h + 18
       << "\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">" << fmt(x) << "</text>\n";
    os << "<text x=\"" << left - 8 << "\" y=\"" << sy(y) + 4
       << "\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">" << fmt(y) << "</text>\n";
  }
  os << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12
     << "\" font-size=\"13\" text-anchor=\"middle\" font-family=\"sans-serif\">env step</text>\n";
  os << "<text x=\"16\" y=\"" << top + plot_h / 2
     << "\" font-size=\"13\" text-anchor=\"middle\" font-family=\"sans-serif\" transform=\"rotate(-90 16 "
     << top + plot_h / 2 << ")\">eval return</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const Series& s = series[i];
    const char* color = kColors[i % (sizeof kColors / sizeof kColors[0])];
    if (!s.points.empty()) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (const auto& [x, y] : s.points) os << fmt(sx(x)) << ',' << fmt(sy(y)) << ' ';
      os << "\"/>\n";
    }
    os << "<text x=\"" << left + plot_w - 6 << "\" y=\"" << top + 14 + 16 * static_cast<double>(i)
       << "\" font-size=\"12\" text-anchor=\"end\" fill=\"" << color << "\" font-family=\"sans-serif\">" << s.name
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace sacd
