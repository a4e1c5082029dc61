#include "maeguard/harness/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>


namespace maeguard::harness {

namespace {

constexpr double kW = 640, kH = 420, kLeft = 70, kRight = 150, kTop = 40, kBottom = 55;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string esc(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kW - kLeft - kRight); }
  double py(double y) const { return kH - kBottom - (y - y0) / (y1 - y0) * (kH - kTop - kBottom); }
};

void axes(std::ostringstream& o, const Frame& f, const PlotLabels& labels) {
  o << "<rect x='0' y='0' width='" << kW << "' height='" << kH << "' fill='white'/>\n";
  o << "<text x='" << kW / 2 << "' y='22' text-anchor='middle' font-size='15'>" << esc(labels.title) << "</text>\n";
  o << "<line x1='" << kLeft << "' y1='" << f.py(f.y0) << "' x2='" << kW - kRight << "' y2='" << f.py(f.y0)
    << "' stroke='black'/>\n";
  o << "<line x1='" << kLeft << "' y1='" << f.py(f.y0) << "' x2='" << kLeft << "' y2='" << kTop
    << "' stroke='black'/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4, yv = f.y0 + (f.y1 - f.y0) * i / 4;
    o << "<text x='" << f.px(xv) << "' y='" << f.py(f.y0) + 16 << "' text-anchor='middle' font-size='11'>"
      << num(xv) << "</text>\n";
    o << "<text x='" << kLeft - 6 << "' y='" << f.py(yv) + 4 << "' text-anchor='end' font-size='11'>" << num(yv)
      << "</text>\n";
  }
  o << "<text x='" << (kLeft + kW - kRight) / 2 << "' y='" << kH - 15 << "' text-anchor='middle' font-size='13'>"
    << esc(labels.x) << "</text>\n";
  o << "<text x='18' y='" << (kTop + kH - kBottom) / 2 << "' text-anchor='middle' font-size='13' transform='rotate(-90 18 "
    << (kTop + kH - kBottom) / 2 << ")'>" << esc(labels.y) << "</text>\n";
}

void legend(std::ostringstream& o, std::size_t i, const std::string& name, bool dashed) {
  const double y = kTop + 10 + 20 * static_cast<double>(i);
  o << "<line x1='" << kW - kRight + 12 << "' y1='" << y << "' x2='" << kW - kRight + 36 << "' y2='" << y
    << "' stroke='" << kColors[i % 6] << "' stroke-width='2'" << (dashed ? " stroke-dasharray='5,3'" : "")
    << "/>\n<text x='" << kW - kRight + 42 << "' y='" << y + 4 << "' font-size='11'>" << esc(name) << "</text>\n";
}

Frame pad(Frame f) {
  if (f.x1 <= f.x0) f.x1 = f.x0 + 1;
  if (f.y1 <= f.y0) f.y1 = f.y0 + 1;
  return f;
}

}  // namespace

std::string line_plot_svg(const std::vector<Series>& series, const PlotLabels& labels) {
  Frame f{INFINITY, -INFINITY, 0.0, -INFINITY};
  for (const auto& s : series) {
    for (double x : s.x) f.x0 = std::min(f.x0, x), f.x1 = std::max(f.x1, x);
    for (double y : s.y) f.y0 = std::min(f.y0, y), f.y1 = std::max(f.y1, y);
  }
  if (!std::isfinite(f.x0)) f = {0, 1, 0, 1};
  f.y1 += 0.05 * (f.y1 - f.y0);
  f = pad(f);
  std::ostringstream o;
  o << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='" << kH << "' font-family='sans-serif'>\n";
  axes(o, f, labels);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    o << "<polyline fill='none' stroke='" << kColors[i % 6] << "' stroke-width='2'"
      << (s.dashed ? " stroke-dasharray='5,3'" : "") << " points='";
    for (std::size_t k = 0; k < s.x.size(); ++k) o << f.px(s.x[k]) << "," << f.py(s.y[k]) << " ";
    o << "'/>\n";
    for (std::size_t k = 0; k < s.x.size(); ++k)
      o << "<circle cx='" << f.px(s.x[k]) << "' cy='" << f.py(s.y[k]) << "' r='3' fill='" << kColors[i % 6] << "'/>\n";
    legend(o, i, s.name, s.dashed);
  }
  o << "</svg>\n";
  return o.str();
}

std::string histogram_svg(const std::vector<std::pair<std::string, Histogram>>& hists, const PlotLabels& labels) {
  Frame f{0, 1, 0, 0};
  if (!hists.empty()) f.x0 = hists.front().second.lo, f.x1 = hists.front().second.hi;
  std::vector<std::vector<double>> dens;
  for (const auto& [name, h] : hists) {
    std::size_t total = 0;
    for (auto c : h.counts) total += c;
    std::vector<double> d;
    for (auto c : h.counts) d.push_back(total ? c / (static_cast<double>(total) * h.bin_width()) : 0.0);
    for (double v : d) f.y1 = std::max(f.y1, v);
    dens.push_back(std::move(d));
  }
  f.y1 *= 1.05;
  f = pad(f);
  std::ostringstream o;
  o << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='" << kH << "' font-family='sans-serif'>\n";
  axes(o, f, labels);
  for (std::size_t i = 0; i < hists.size(); ++i) {
    const auto& h = hists[i].second;
    o << "<polyline fill='" << kColors[i % 6] << "' fill-opacity='0.25' stroke='" << kColors[i % 6]
      << "' stroke-width='1.5' points='" << f.px(h.lo) << "," << f.py(0) << " ";
    for (std::size_t k = 0; k < h.counts.size(); ++k) {
      const double a = h.lo + h.bin_width() * static_cast<double>(k), b = a + h.bin_width();
      o << f.px(a) << "," << f.py(dens[i][k]) << " " << f.px(b) << "," << f.py(dens[i][k]) << " ";
    }
    o << f.px(h.hi) << "," << f.py(0) << "'/>\n";
    legend(o, i, hists[i].first, false);
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace maeguard::harness
