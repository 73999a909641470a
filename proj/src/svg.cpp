#include "cellnav/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

namespace cellnav::svg {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

struct Frame {
  double x0, y0, scale, height;
  double px(const Point& p) const { return (p.x() - x0) * scale + 20.0; }
  double py(const Point& p) const { return height - ((p.y() - y0) * scale + 20.0); }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string points_attr(const Frame& f, const std::vector<Point>& pts) {
  std::string s;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) s += ' ';
    s += num(f.px(pts[i])) + "," + num(f.py(pts[i]));
  }
  return s;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '"') out += "&quot;";
    else out += c;
  }
  return out;
}

}  // namespace

std::string render(const PlotInput& in) {
  std::vector<Point> extent;
  if (in.env) {
    extent.insert(extent.end(), in.env->boundary.begin(), in.env->boundary.end());
    extent.insert(extent.end(), in.env->landmarks.begin(), in.env->landmarks.end());
  }
  for (const auto& t : in.trajectories) extent.insert(extent.end(), t.points.begin(), t.points.end());
  if (extent.empty()) extent = {Point(0, 0), Point(1, 1)};
  Point lo = extent.front();
  Point hi = extent.front();
  for (const auto& p : extent) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double span = std::max({hi.x() - lo.x(), hi.y() - lo.y(), 1e-9});
  const double scale = (in.width - 40.0) / span;
  const double height = (hi.y() - lo.y()) * scale + 40.0 + 20.0 * static_cast<double>(in.trajectories.size());
  const Frame f{lo.x(), lo.y() - 20.0 * static_cast<double>(in.trajectories.size()) / scale, scale, height};

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(in.width) + "\" height=\"" +
                  num(height) + "\" viewBox=\"0 0 " + std::to_string(in.width) + " " + num(height) + "\">\n";
  s += "<defs><marker id=\"arrow\" viewBox=\"0 0 10 10\" refX=\"9\" refY=\"5\" markerWidth=\"6\" markerHeight=\"6\" "
       "orient=\"auto\"><path d=\"M0,0 L10,5 L0,10 z\" fill=\"#555\"/></marker></defs>\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (in.env) {
    s += "<polygon points=\"" + points_attr(f, in.env->boundary) + "\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n";
    for (const auto& o : in.env->obstacles) {
      s += "<polygon points=\"" + points_attr(f, o) + "\" fill=\"#999\" stroke=\"black\"/>\n";
    }
  }
  if (in.decomposition) {
    for (int i = 0; i < in.decomposition->size(); ++i) {
      const auto verts = vertices_2d(in.decomposition->cells[static_cast<std::size_t>(i)]);
      s += "<polygon points=\"" + points_attr(f, verts) +
           "\" fill=\"#e8f0fa\" fill-opacity=\"0.5\" stroke=\"#4a6fa5\" stroke-width=\"1\"/>\n";
      const Point c = polygon_centroid(verts);
      s += "<text x=\"" + num(f.px(c)) + "\" y=\"" + num(f.py(c)) +
           "\" font-size=\"12\" fill=\"#4a6fa5\" text-anchor=\"middle\">" + std::to_string(i) + "</text>\n";
    }
  }
  if (in.plan && in.decomposition) {
    const double len = 0.08 * span;
    for (const auto& e : in.plan->exits) {
      if (!e.face) continue;
      const Point tail = e.x_e + len * e.z;
      const Point head = e.x_e - len * e.z;
      s += "<line x1=\"" + num(f.px(tail)) + "\" y1=\"" + num(f.py(tail)) + "\" x2=\"" + num(f.px(head)) + "\" y2=\"" +
           num(f.py(head)) + "\" stroke=\"#555\" stroke-width=\"1.5\" marker-end=\"url(#arrow)\"/>\n";
    }
  }
  if (in.env) {
    for (std::size_t i = 0; i < in.env->landmarks.size(); ++i) {
      const Point& p = in.env->landmarks[i];
      s += "<circle cx=\"" + num(f.px(p)) + "\" cy=\"" + num(f.py(p)) + "\" r=\"4\" fill=\"#222\"/>\n";
    }
  }
  for (std::size_t k = 0; k < in.trajectories.size(); ++k) {
    const auto& t = in.trajectories[k];
    const char* color = kPalette[k % (sizeof(kPalette) / sizeof(kPalette[0]))];
    if (!t.points.empty()) {
      s += "<polyline points=\"" + points_attr(f, t.points) + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"1.5\"/>\n";
    }
    const double ly = height - 10.0 - 20.0 * static_cast<double>(k);
    s += "<line x1=\"20\" y1=\"" + num(ly) + "\" x2=\"50\" y2=\"" + num(ly) + "\" stroke=\"" + color +
         "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"56\" y=\"" + num(ly + 4.0) + "\" font-size=\"12\">" + escape(t.label) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace cellnav::svg
