#include <cmath>
#include <limits>
#include <string>

#include "doctest.h"
#include "mjls/svg.hpp"

namespace {

using namespace mjls;

SvgFigure sample_figure() {
  SvgFigure fig;
  SvgPanel panel;
  panel.title = "decay";
  panel.x_label = "t";
  panel.y_label = "x";
  SvgSeries line;
  line.label = "mean";
  for (int k = 0; k <= 40; ++k) {
    double t = 0.25 * k;
    line.x.push_back(t);
    line.y.push_back(std::exp(-t));
    line.band.push_back(0.1);
  }
  panel.series.push_back(line);
  fig.panels.push_back(panel);
  return fig;
}

size_t count_occurrences(const std::string& hay, const std::string& needle) {
  size_t count = 0;
  for (size_t pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++count;
  return count;
}

}  // namespace

TEST_CASE("figure has the expected structural elements") {
  std::string svg = emit_svg(sample_figure());
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("decay") != std::string::npos);
  CHECK(svg.find("mean") != std::string::npos);
  CHECK(count_occurrences(svg, "<polyline") >= 1);
  CHECK(count_occurrences(svg, "<polygon") == 1);  // one band
  // Every opened tag is closed: crude balance checks.
  CHECK(count_occurrences(svg, "<svg") == count_occurrences(svg, "</svg>"));
  CHECK(count_occurrences(svg, "<text") == count_occurrences(svg, "</text>"));
}

TEST_CASE("output is deterministic") {
  SvgFigure fig = sample_figure();
  CHECK(emit_svg(fig) == emit_svg(fig));
}

TEST_CASE("non-finite points are dropped and counted") {
  SvgFigure fig = sample_figure();
  fig.panels[0].series[0].y[3] = std::numeric_limits<double>::quiet_NaN();
  fig.panels[0].series[0].y[7] = std::numeric_limits<double>::infinity();
  std::string svg = emit_svg(fig);
  CHECK(svg.find("dropped_nonfinite_points: 2") != std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);
  CHECK(svg.find("inf") == std::string::npos);
}

TEST_CASE("clean figure reports zero dropped points") {
  std::string svg = emit_svg(sample_figure());
  CHECK(svg.find("dropped_nonfinite_points: 0") != std::string::npos);
}

TEST_CASE("labels are escaped for xml") {
  SvgFigure fig = sample_figure();
  fig.panels[0].title = "a < b & c > \"d\"";
  std::string svg = emit_svg(fig);
  CHECK(svg.find("a &lt; b &amp; c &gt;") != std::string::npos);
  CHECK(svg.find("a < b") == std::string::npos);
}

TEST_CASE("constant series and single-point series do not degenerate") {
  SvgFigure fig;
  SvgPanel panel;
  SvgSeries flat;
  flat.label = "flat";
  flat.x = {0.0, 1.0, 2.0};
  flat.y = {5.0, 5.0, 5.0};  // zero y-range must still produce valid ticks
  panel.series.push_back(flat);
  SvgSeries point;
  point.label = "pt";
  point.x = {1.0};
  point.y = {2.0};
  panel.series.push_back(point);
  fig.panels.push_back(panel);
  std::string svg = emit_svg(fig);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);
}

TEST_CASE("step series renders zero-order-hold segments") {
  SvgFigure fig;
  SvgPanel panel;
  SvgSeries modes;
  modes.label = "mode";
  modes.step = true;
  modes.x = {0.0, 1.0, 2.0, 3.0};
  modes.y = {0.0, 1.0, 0.0, 1.0};
  panel.series.push_back(modes);
  fig.panels.push_back(panel);
  std::string smooth_svg;
  {
    SvgFigure f2 = fig;
    f2.panels[0].series[0].step = false;
    smooth_svg = emit_svg(f2);
  }
  std::string step_svg = emit_svg(fig);
  // The step rendering inserts the extra hold vertices, so the polyline
  // payload must be strictly longer.
  CHECK(step_svg.size() > smooth_svg.size());
}

TEST_CASE("multiple panels stack and scale the figure height") {
  SvgFigure one = sample_figure();
  SvgFigure two = sample_figure();
  two.panels.push_back(two.panels[0]);
  std::string svg1 = emit_svg(one);
  std::string svg2 = emit_svg(two);
  CHECK(count_occurrences(svg2, "<polygon") == 2);
  CHECK(svg2.size() > svg1.size());
}
