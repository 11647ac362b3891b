#include "qdspin/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace qdspin::svg {

namespace {

constexpr double kW = 760, kH = 480;
constexpr double kL = 80, kR = 30, kT = 44, kB = 58;
const char* kColors[] = {"#1f6fb2", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string meta_comment(const std::string& meta) {
  if (meta.empty()) return "";
  std::string safe = meta;
  std::size_t pos = 0;
  while ((pos = safe.find("--", pos)) != std::string::npos) safe.replace(pos, 2, "- -");
  return "<!-- manifest: " + safe + " -->\n";
}

struct Range {
  double lo = 0.0, hi = 1.0;
  void expand(double v) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  void pad() {
    if (hi <= lo) hi = lo + 1.0;
    const double m = 0.05 * (hi - lo);
    lo -= m;
    hi += m;
  }
  double frac(double v) const { return (v - lo) / (hi - lo); }
};

std::string axes_and_ticks(const std::string& title, const std::string& xl,
                           const std::string& yl, const Range& rx, const Range& ry) {
  std::string s;
  s += "<rect x='" + num(kL) + "' y='" + num(kT) + "' width='" + num(kW - kL - kR) +
       "' height='" + num(kH - kT - kB) + "' fill='none' stroke='#444'/>\n";
  s += "<text x='" + num(kW / 2) + "' y='24' text-anchor='middle' font-size='16'>" + title +
       "</text>\n";
  s += "<text x='" + num(kW / 2) + "' y='" + num(kH - 14) +
       "' text-anchor='middle' font-size='13'>" + xl + "</text>\n";
  s += "<text x='18' y='" + num(kH / 2) + "' text-anchor='middle' font-size='13' transform='rotate(-90 18 " +
       num(kH / 2) + ")'>" + yl + "</text>\n";
  for (int i = 0; i <= 5; ++i) {
    const double fx = i / 5.0;
    const double px = kL + fx * (kW - kL - kR);
    const double py = kH - kB + 0.0;
    s += "<line x1='" + num(px) + "' y1='" + num(py) + "' x2='" + num(px) + "' y2='" +
         num(py + 5) + "' stroke='#444'/>\n";
    s += "<text x='" + num(px) + "' y='" + num(py + 20) + "' text-anchor='middle' font-size='11'>" +
         num(rx.lo + fx * (rx.hi - rx.lo)) + "</text>\n";
    const double fy = i / 5.0;
    const double qy = kH - kB - fy * (kH - kT - kB);
    s += "<line x1='" + num(kL - 5) + "' y1='" + num(qy) + "' x2='" + num(kL) + "' y2='" + num(qy) +
         "' stroke='#444'/>\n";
    s += "<text x='" + num(kL - 9) + "' y='" + num(qy + 4) + "' text-anchor='end' font-size='11'>" +
         num(ry.lo + fy * (ry.hi - ry.lo)) + "</text>\n";
  }
  return s;
}

}  // namespace

std::string line_plot(const std::string& title, const std::string& x_label,
                      const std::string& y_label, const std::vector<LineSeries>& series,
                      const std::string& meta) {
  Range rx, ry;
  bool first = true;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        rx.lo = rx.hi = s.x[i];
        ry.lo = ry.hi = s.y[i];
        first = false;
      }
      rx.expand(s.x[i]);
      ry.expand(s.y[i]);
    }
  }
  rx.pad();
  ry.pad();

  std::string out = "<svg xmlns='http://www.w3.org/2000/svg' width='" + num(kW) + "' height='" +
                    num(kH) + "'>\n" + meta_comment(meta) +
                    "<rect width='100%' height='100%' fill='white'/>\n";
  out += axes_and_ticks(title, x_label, y_label, rx, ry);

  int ci = 0;
  for (const auto& s : series) {
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double px = kL + rx.frac(s.x[i]) * (kW - kL - kR);
      const double py = kH - kB - ry.frac(s.y[i]) * (kH - kT - kB);
      pts += num(px) + "," + num(py) + " ";
    }
    const char* color = kColors[ci % 6];
    out += "<polyline fill='none' stroke='" + std::string(color) + "' stroke-width='1.4' points='" +
           pts + "'/>\n";
    if (!s.label.empty()) {
      out += "<text x='" + num(kW - kR - 8) + "' y='" + num(kT + 18 + 16 * ci) +
             "' text-anchor='end' font-size='12' fill='" + color + "'>" + s.label + "</text>\n";
    }
    ++ci;
  }
  out += "</svg>\n";
  return out;
}

std::string heatmap(const std::string& title, const std::string& x_label,
                    const std::string& y_label, const std::vector<double>& x,
                    const std::vector<double>& y, const std::vector<double>& values,
                    const std::string& meta) {
  Range rx, ry, rv;
  rx.lo = x.front();
  rx.hi = x.back();
  ry.lo = y.front();
  ry.hi = y.back();
  rv.lo = rv.hi = values.empty() ? 0.0 : values[0];
  for (double v : values) rv.expand(v);
  if (rv.hi <= rv.lo) rv.hi = rv.lo + 1.0;

  auto color_of = [&](double v) {
    const double f = std::clamp((v - rv.lo) / (rv.hi - rv.lo), 0.0, 1.0);
    // dark blue -> teal -> yellow
    const int r = static_cast<int>(255 * std::clamp(2.0 * f - 0.9, 0.0, 1.0));
    const int g = static_cast<int>(255 * std::clamp(1.3 * f, 0.0, 1.0) * 0.9);
    const int b = static_cast<int>(255 * std::clamp(1.0 - 1.1 * f, 0.05, 1.0));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return std::string(buf);
  };

  std::string out = "<svg xmlns='http://www.w3.org/2000/svg' width='" + num(kW) + "' height='" +
                    num(kH) + "'>\n" + meta_comment(meta) +
                    "<rect width='100%' height='100%' fill='white'/>\n";
  out += axes_and_ticks(title, x_label, y_label, rx, ry);

  const std::size_t nx = x.size(), ny = y.size();
  const double cw = (kW - kL - kR) / nx;
  const double ch = (kH - kT - kB) / ny;
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const double v = values[j * nx + i];
      const double px = kL + i * cw;
      const double py = kH - kB - (j + 1) * ch;
      out += "<rect x='" + num(px) + "' y='" + num(py) + "' width='" + num(cw + 0.5) +
             "' height='" + num(ch + 0.5) + "' fill='" + color_of(v) + "'/>\n";
    }
  }
  out += "</svg>\n";
  return out;
}

}  // namespace qdspin::svg
