#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace rawlskm {

/// One plotted assignment: MAG on x, LAG on y, overall utility drives hue.
struct PlotPoint {
  double mag = 0;
  double lag = 0;
  double overall = 0;
};

struct PlotSeries {
  std::string name;
  std::string stroke;  // polyline color when connected
  bool connect = false;
  std::vector<PlotPoint> points;
};

struct PlotMarker {
  double mag = 0;
  double lag = 0;
  std::string label;
};

namespace detail {

/// Fixed-precision formatting keeps the emitted SVG byte-stable for equal
/// inputs regardless of locale or accumulated state.
inline std::string fixed2(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string fixed4(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace detail

/// Renders the MAG-LAG plane to a standalone SVG: square canvas, axes in
/// utility units, the lag = mag reference diagonal, scatter points colored
/// by overall utility (blue = lowest, red = highest), optional connected
/// trajectories, optional labeled markers. Output is deterministic.
inline std::string render_utility_svg(const std::vector<PlotSeries>& series,
                                      const std::vector<PlotMarker>& markers) {
  const double canvas = 840;
  const double margin = 80;
  const double plot = canvas - 2 * margin;

  double min_x = 0, max_x = 1, min_y = 0, max_y = 1;
  double min_overall = 0, max_overall = 1;
  bool any = false;
  auto fold = [&](double mag, double lag) {
    if (!any) {
      min_x = max_x = mag;
      min_y = max_y = lag;
      any = true;
    } else {
      min_x = std::min(min_x, mag);
      max_x = std::max(max_x, mag);
      min_y = std::min(min_y, lag);
      max_y = std::max(max_y, lag);
    }
  };
  bool any_overall = false;
  for (const PlotSeries& s : series) {
    for (const PlotPoint& p : s.points) {
      fold(p.mag, p.lag);
      if (!any_overall) {
        min_overall = max_overall = p.overall;
        any_overall = true;
      } else {
        min_overall = std::min(min_overall, p.overall);
        max_overall = std::max(max_overall, p.overall);
      }
    }
  }
  for (const PlotMarker& m : markers) fold(m.mag, m.lag);
  if (!any) {
    min_x = min_y = 0;
    max_x = max_y = 1;
  }
  // A shared square range keeps the 45 degree line meaningful.
  double lo = std::min(min_x, min_y);
  double hi = std::max(max_x, max_y);
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  auto sx = [&](double v) { return margin + (v - lo) / (hi - lo) * plot; };
  auto sy = [&](double v) { return canvas - margin - (v - lo) / (hi - lo) * plot; };
  auto hue_color = [&](double overall) {
    double t = max_overall > min_overall ? (overall - min_overall) / (max_overall - min_overall)
                                         : 0.5;
    const int hue = static_cast<int>(std::lround(240.0 * (1.0 - t)));
    return "hsl(" + std::to_string(hue) + ",75%,45%)";
  };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"840\" height=\"840\" "
         "viewBox=\"0 0 840 840\">\n";
  out += "<rect width=\"840\" height=\"840\" fill=\"white\"/>\n";

  // Axes and ticks.
  out += "<g stroke=\"#333\" stroke-width=\"1\">\n";
  out += "<line x1=\"" + detail::fixed2(margin) + "\" y1=\"" + detail::fixed2(canvas - margin) +
         "\" x2=\"" + detail::fixed2(canvas - margin) + "\" y2=\"" +
         detail::fixed2(canvas - margin) + "\"/>\n";
  out += "<line x1=\"" + detail::fixed2(margin) + "\" y1=\"" + detail::fixed2(margin) +
         "\" x2=\"" + detail::fixed2(margin) + "\" y2=\"" + detail::fixed2(canvas - margin) +
         "\"/>\n";
  out += "</g>\n";
  out += "<g font-family=\"sans-serif\" font-size=\"14\" fill=\"#333\">\n";
  const int ticks = 5;
  for (int t = 0; t <= ticks; ++t) {
    const double v = lo + (hi - lo) * t / ticks;
    const std::string label = detail::fixed4(v);
    out += "<line x1=\"" + detail::fixed2(sx(v)) + "\" y1=\"" + detail::fixed2(canvas - margin) +
           "\" x2=\"" + detail::fixed2(sx(v)) + "\" y2=\"" +
           detail::fixed2(canvas - margin + 6) + "\" stroke=\"#333\"/>\n";
    out += "<text x=\"" + detail::fixed2(sx(v)) + "\" y=\"" +
           detail::fixed2(canvas - margin + 24) + "\" text-anchor=\"middle\">" + label +
           "</text>\n";
    out += "<line x1=\"" + detail::fixed2(margin - 6) + "\" y1=\"" + detail::fixed2(sy(v)) +
           "\" x2=\"" + detail::fixed2(margin) + "\" y2=\"" + detail::fixed2(sy(v)) +
           "\" stroke=\"#333\"/>\n";
    out += "<text x=\"" + detail::fixed2(margin - 10) + "\" y=\"" + detail::fixed2(sy(v) + 5) +
           "\" text-anchor=\"end\">" + label + "</text>\n";
  }
  out += "<text x=\"" + detail::fixed2(canvas / 2) + "\" y=\"" + detail::fixed2(canvas - 20) +
         "\" text-anchor=\"middle\">more advantaged group utility</text>\n";
  out += "<text x=\"20\" y=\"" + detail::fixed2(canvas / 2) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 20 " + detail::fixed2(canvas / 2) +
         ")\">less advantaged group utility</text>\n";
  out += "</g>\n";

  // lag = mag reference diagonal.
  out += "<line x1=\"" + detail::fixed2(sx(lo)) + "\" y1=\"" + detail::fixed2(sy(lo)) +
         "\" x2=\"" + detail::fixed2(sx(hi)) + "\" y2=\"" + detail::fixed2(sy(hi)) +
         "\" stroke=\"#cc2222\" stroke-width=\"1.5\" stroke-dasharray=\"8 6\"/>\n";

  for (const PlotSeries& s : series) {
    if (s.connect && s.points.size() > 1) {
      std::string path = "<polyline fill=\"none\" stroke=\"" + s.stroke +
                         "\" stroke-width=\"2\" points=\"";
      for (const PlotPoint& p : s.points) {
        path += detail::fixed2(sx(p.mag));
        path += ',';
        path += detail::fixed2(sy(p.lag));
        path += ' ';
      }
      if (!s.points.empty()) path.pop_back();
      path += "\"/>\n";
      out += path;
    }
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      const PlotPoint& p = s.points[i];
      const std::string fill = s.connect ? s.stroke : hue_color(p.overall);
      const char* radius = s.connect ? "3" : "4";
      out += "<circle cx=\"" + detail::fixed2(sx(p.mag)) + "\" cy=\"" + detail::fixed2(sy(p.lag)) +
             "\" r=\"" + radius + "\" fill=\"" + fill + "\"/>\n";
    }
    if (s.connect && !s.points.empty()) {
      // Start marker.
      const PlotPoint& p = s.points.front();
      out += "<rect x=\"" + detail::fixed2(sx(p.mag) - 6) + "\" y=\"" +
             detail::fixed2(sy(p.lag) - 6) +
             "\" width=\"12\" height=\"12\" fill=\"none\" stroke=\"" + s.stroke +
             "\" stroke-width=\"2\"/>\n";
    }
  }

  out += "<g font-family=\"sans-serif\" font-size=\"14\" fill=\"#111\">\n";
  for (const PlotMarker& m : markers) {
    const double x = sx(m.mag);
    const double y = sy(m.lag);
    out += "<path d=\"M " + detail::fixed2(x) + " " + detail::fixed2(y - 8) + " L " +
           detail::fixed2(x + 8) + " " + detail::fixed2(y) + " L " + detail::fixed2(x) + " " +
           detail::fixed2(y + 8) + " L " + detail::fixed2(x - 8) + " " + detail::fixed2(y) +
           " Z\" fill=\"none\" stroke=\"#111\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + detail::fixed2(x + 12) + "\" y=\"" + detail::fixed2(y - 10) + "\">" +
           m.label + "</text>\n";
  }
  out += "</g>\n";

  // Legend for connected series.
  double legend_y = margin;
  for (const PlotSeries& s : series) {
    if (!s.connect || s.name.empty()) continue;
    out += "<line x1=\"" + detail::fixed2(canvas - margin - 180) + "\" y1=\"" +
           detail::fixed2(legend_y) + "\" x2=\"" + detail::fixed2(canvas - margin - 140) +
           "\" y2=\"" + detail::fixed2(legend_y) + "\" stroke=\"" + s.stroke +
           "\" stroke-width=\"3\"/>\n";
    out += "<text font-family=\"sans-serif\" font-size=\"14\" fill=\"#111\" x=\"" +
           detail::fixed2(canvas - margin - 132) + "\" y=\"" + detail::fixed2(legend_y + 5) +
           "\">" + s.name + "</text>\n";
    legend_y += 22;
  }

  out += "</svg>\n";
  return out;
}

}  // namespace rawlskm
