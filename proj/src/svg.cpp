#include "mjls/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace mjls {

namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = 0.0, hi = 1.0;
  void expand(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    } else {
      double p = 0.05 * (hi - lo);
      lo -= p;
      hi += p;
    }
  }
};

// round ticks at 1/2/5 multiples covering the range
std::vector<double> ticks(const Range& r, int target = 5) {
  double span = r.hi - r.lo;
  double raw = span / target;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double mult : {1.0, 2.0, 5.0, 10.0}) {
    if (mag * mult >= raw) {
      step = mag * mult;
      break;
    }
  }
  std::vector<double> out;
  double t = std::ceil(r.lo / step) * step;
  for (; t <= r.hi + 1e-12 * span; t += step) out.push_back(t == 0.0 ? 0.0 : t);
  return out;
}

}  // namespace

std::string emit_svg(const SvgFigure& fig) {
  if (fig.panels.empty()) throw std::invalid_argument("emit_svg: figure has no panels");
  const int margin_l = 60, margin_r = 20, margin_t = 30, margin_b = 40;
  const int total_h = static_cast<int>(fig.panels.size()) * fig.panel_height;

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fig.width << "\" height=\"" << total_h
     << "\" viewBox=\"0 0 " << fig.width << " " << total_h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  long long dropped = 0;
  for (size_t pi = 0; pi < fig.panels.size(); ++pi) {
    const SvgPanel& panel = fig.panels[pi];
    const double top = static_cast<double>(pi) * fig.panel_height;
    const double x0 = margin_l, x1 = fig.width - margin_r;
    const double y0 = top + margin_t, y1 = top + fig.panel_height - margin_b;

    Range rx, ry;
    bool first = true;
    for (const SvgSeries& s : panel.series) {
      for (size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
        if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
        double half = (k < s.band.size() && std::isfinite(s.band[k])) ? std::abs(s.band[k]) : 0.0;
        if (first) {
          rx = Range{s.x[k], s.x[k]};
          ry = Range{s.y[k] - half, s.y[k] + half};
          first = false;
        } else {
          rx.expand(s.x[k]);
          ry.expand(s.y[k] - half);
          ry.expand(s.y[k] + half);
        }
      }
    }
    if (first) {
      rx = Range{0.0, 1.0};
      ry = Range{0.0, 1.0};
    }
    rx.pad();
    ry.pad();

    auto sx = [&](double v) { return x0 + (v - rx.lo) / (rx.hi - rx.lo) * (x1 - x0); };
    auto sy = [&](double v) { return y1 - (v - ry.lo) / (ry.hi - ry.lo) * (y1 - y0); };

    os << "<g>\n";
    os << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << top + 18 << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">"
       << escape(panel.title) << "</text>\n";
    // axes box
    os << "<rect x=\"" << fmt(x0) << "\" y=\"" << fmt(y0) << "\" width=\"" << fmt(x1 - x0) << "\" height=\""
       << fmt(y1 - y0) << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double t : ticks(rx)) {
      double px = sx(t);
      os << "<line x1=\"" << fmt(px) << "\" y1=\"" << fmt(y1) << "\" x2=\"" << fmt(px) << "\" y2=\"" << fmt(y1 + 4)
         << "\" stroke=\"black\"/>\n";
      os << "<text x=\"" << fmt(px) << "\" y=\"" << fmt(y1 + 16) << "\" text-anchor=\"middle\" font-size=\"10\" font-family=\"sans-serif\">"
         << fmt(t) << "</text>\n";
    }
    for (double t : ticks(ry)) {
      double py = sy(t);
      os << "<line x1=\"" << fmt(x0 - 4) << "\" y1=\"" << fmt(py) << "\" x2=\"" << fmt(x0) << "\" y2=\"" << fmt(py)
         << "\" stroke=\"black\"/>\n";
      os << "<text x=\"" << fmt(x0 - 7) << "\" y=\"" << fmt(py + 3) << "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">"
         << fmt(t) << "</text>\n";
    }
    os << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << fmt(y1 + 32) << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
       << escape(panel.x_label) << "</text>\n";
    os << "<text x=\"" << fmt(x0 - 45) << "\" y=\"" << fmt((y0 + y1) / 2)
       << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\" transform=\"rotate(-90 " << fmt(x0 - 45)
       << " " << fmt((y0 + y1) / 2) << ")\">" << escape(panel.y_label) << "</text>\n";

    // shaded bands first so lines stay visible
    for (const SvgSeries& s : panel.series) {
      if (s.band.empty()) continue;
      std::ostringstream up, down;
      int n_pts = 0;
      for (size_t k = 0; k < s.x.size() && k < s.y.size() && k < s.band.size(); ++k) {
        if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k]) || !std::isfinite(s.band[k])) {
          ++dropped;
          continue;
        }
        up << fmt(sx(s.x[k])) << "," << fmt(sy(s.y[k] + std::abs(s.band[k]))) << " ";
        down << fmt(sx(s.x[k])) << "," << fmt(sy(s.y[k] - std::abs(s.band[k]))) << " ";
        ++n_pts;
      }
      if (n_pts < 2) continue;
      // reverse the lower edge to close the polygon
      std::vector<std::string> lower;
      std::istringstream is(down.str());
      std::string tok;
      while (is >> tok) lower.push_back(tok);
      os << "<polygon fill=\"" << s.color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"" << up.str();
      for (auto it = lower.rbegin(); it != lower.rend(); ++it) os << *it << " ";
      os << "\"/>\n";
    }

    for (const SvgSeries& s : panel.series) {
      std::ostringstream pts;
      int n_pts = 0;
      double prev_y = 0.0;
      bool have_prev = false;
      for (size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
        if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) {
          if (s.band.empty()) ++dropped;  // banded points already counted above
          continue;
        }
        if (s.step && have_prev) pts << fmt(sx(s.x[k])) << "," << fmt(prev_y) << " ";
        prev_y = sy(s.y[k]);
        have_prev = true;
        pts << fmt(sx(s.x[k])) << "," << fmt(prev_y) << " ";
        ++n_pts;
      }
      if (n_pts == 0) continue;
      os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"" << pts.str()
         << "\"/>\n";
    }

    // legend
    double lx = x0 + 8, ly = y0 + 14;
    for (const SvgSeries& s : panel.series) {
      if (s.label.empty()) continue;
      os << "<line x1=\"" << fmt(lx) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\"" << fmt(lx + 18) << "\" y2=\""
         << fmt(ly - 4) << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
      os << "<text x=\"" << fmt(lx + 22) << "\" y=\"" << fmt(ly) << "\" font-size=\"10\" font-family=\"sans-serif\">"
         << escape(s.label) << "</text>\n";
      ly += 14;
    }
    os << "</g>\n";
  }

  os << "<!-- dropped_nonfinite_points: " << dropped << " -->\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace mjls
