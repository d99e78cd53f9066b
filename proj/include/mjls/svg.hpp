#pragma once

#include <string>
#include <vector>

namespace mjls {

// One curve: y over x, optionally with a shaded +/- band.
struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> band;  // half-width of the shaded band; empty = no band
  std::string color = "#1f77b4";
  bool step = false;  // draw as a step (zero-order-hold) line
};

struct SvgPanel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<SvgSeries> series;
};

struct SvgFigure {
  std::vector<SvgPanel> panels;  // stacked vertically
  int width = 720;
  int panel_height = 220;
};

// Deterministic, standalone, well-formed SVG. Non-finite points are
// dropped; the number dropped appears in an XML comment.
std::string emit_svg(const SvgFigure& fig);

}  // namespace mjls
