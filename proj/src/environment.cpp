#include "cellnav/environment.hpp"

#include "cellnav/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace cellnav {

namespace {

using nlohmann::json;

Point parse_point(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw Error(ErrorKind::SchemaError, where + ": expected [x, y]");
  }
  const Point p(j[0].get<double>(), j[1].get<double>());
  if (!p.allFinite()) throw Error(ErrorKind::SchemaError, where + ": non-finite coordinate");
  return p;
}

std::vector<Point> parse_points(const json& j, const std::string& where) {
  if (!j.is_array()) throw Error(ErrorKind::SchemaError, where + ": expected a list of points");
  std::vector<Point> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(parse_point(j[k], where + "[" + std::to_string(k) + "]"));
  return out;
}

std::vector<Point> parse_polygon(const json& j, const std::string& where) {
  auto pts = parse_points(j, where);
  if (pts.size() < 3) throw Error(ErrorKind::InvalidGeometry, where + ": polygon needs at least 3 vertices");
  const double area = polygon_area(pts);
  if (std::abs(area) < 1e-12) throw Error(ErrorKind::InvalidGeometry, where + ": polygon has zero area");
  if (area < 0) std::reverse(pts.begin(), pts.end());
  return pts;
}

bool on_polygon_boundary(const Point& x, const std::vector<Point>& poly) {
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % poly.size()];
    const Point ab = b - a;
    const double t = std::clamp((x - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    if ((a + t * ab - x).norm() <= 1e-12 * std::max(1.0, ab.norm())) return true;
  }
  return false;
}

bool proper_cross(const Point& a0, const Point& a1, const Point& b0, const Point& b1) {
  auto orient = [](const Point& p, const Point& q, const Point& r) {
    return (q.x() - p.x()) * (r.y() - p.y()) - (q.y() - p.y()) * (r.x() - p.x());
  };
  const double o1 = orient(a0, a1, b0);
  const double o2 = orient(a0, a1, b1);
  const double o3 = orient(b0, b1, a0);
  const double o4 = orient(b0, b1, a1);
  return ((o1 > 1e-14 && o2 < -1e-14) || (o1 < -1e-14 && o2 > 1e-14)) &&
         ((o3 > 1e-14 && o4 < -1e-14) || (o3 < -1e-14 && o4 > 1e-14));
}

// Convex polygon whose edge k (from v[k] to v[k+1]) lies on halfspace pool[label[k]].
struct LabeledPolygon {
  std::vector<Point> v;
  std::vector<int> label;

  bool empty() const { return v.size() < 3; }
};

void clip(LabeledPolygon& poly, const Halfspace& h, int label) {
  const std::size_t n = poly.v.size();
  if (n < 3) return;
  const double scale = std::max(1.0, std::abs(h.offset)) * 1e-12;
  std::vector<double> s(n);
  bool all_in = true;
  bool all_out = true;
  for (std::size_t k = 0; k < n; ++k) {
    s[k] = h.slack(poly.v[k]);
    all_in = all_in && s[k] >= -scale;
    all_out = all_out && s[k] < scale;
  }
  if (all_in) return;
  LabeledPolygon out;
  if (all_out) {
    poly = out;
    return;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t k1 = (k + 1) % n;
    const bool in0 = s[k] >= -scale;
    const bool in1 = s[k1] >= -scale;
    if (in0) {
      out.v.push_back(poly.v[k]);
      out.label.push_back(poly.label[k]);
    }
    if (in0 != in1) {
      const double t = s[k] / (s[k] - s[k1]);
      out.v.push_back(poly.v[k] + t * (poly.v[k1] - poly.v[k]));
      out.label.push_back(in0 ? label : poly.label[k]);
    }
  }
  // drop zero-length edges
  LabeledPolygon clean;
  for (std::size_t k = 0; k < out.v.size(); ++k) {
    const Point& nxt = out.v[(k + 1) % out.v.size()];
    if ((out.v[k] - nxt).norm() <= 1e-12) continue;
    clean.v.push_back(out.v[k]);
    clean.label.push_back(out.label[k]);
  }
  if (clean.v.size() < 3 || std::abs(polygon_area(clean.v)) < 1e-14) clean = LabeledPolygon{};
  poly = std::move(clean);
}

// Area of (possibly nonconvex) `subject` inside the convex `clip_poly`.
double overlap_area(const std::vector<Point>& subject, const std::vector<Point>& clip_poly) {
  std::vector<Point> cur = subject;
  const std::size_t n = clip_poly.size();
  for (std::size_t e = 0; e < n && !cur.empty(); ++e) {
    const Point a = clip_poly[e];
    const Point b = clip_poly[(e + 1) % n];
    const Eigen::Vector2d normal(b.y() - a.y(), a.x() - b.x());
    const Halfspace h(normal, normal.dot(a));
    std::vector<Point> next;
    for (std::size_t k = 0; k < cur.size(); ++k) {
      const Point& p = cur[k];
      const Point& q = cur[(k + 1) % cur.size()];
      const double sp = h.slack(p);
      const double sq = h.slack(q);
      if (sp >= 0) next.push_back(p);
      if ((sp >= 0) != (sq >= 0)) next.push_back(p + sp / (sp - sq) * (q - p));
    }
    cur = std::move(next);
  }
  return cur.size() < 3 ? 0.0 : std::abs(polygon_area(cur));
}

Polytope to_polytope(const LabeledPolygon& poly, const std::vector<Halfspace>& pool) {
  std::vector<Halfspace> rows;
  std::vector<int> seen;
  for (int l : poly.label) {
    if (std::find(seen.begin(), seen.end(), l) != seen.end()) continue;
    seen.push_back(l);
    rows.push_back(pool[static_cast<std::size_t>(l)]);
  }
  return Polytope(std::move(rows));
}

// Uniform double in [0,1) from the top 53 bits; identical on every platform.
double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

bool Environment::in_free_space(const Point& x) const {
  if (!point_in_polygon(x, boundary) && !on_polygon_boundary(x, boundary)) return false;
  for (const auto& o : obstacles) {
    if (point_in_polygon(x, o) || on_polygon_boundary(x, o)) return false;
  }
  return true;
}

bool Environment::segment_free(const Point& a, const Point& b) const {
  if (!in_free_space(a) || !in_free_space(b) || !in_free_space(0.5 * (a + b))) return false;
  for (std::size_t i = 0; i < boundary.size(); ++i) {
    if (proper_cross(a, b, boundary[i], boundary[(i + 1) % boundary.size()])) return false;
  }
  for (const auto& o : obstacles) {
    for (std::size_t i = 0; i < o.size(); ++i) {
      if (segments_intersect(a, b, o[i], o[(i + 1) % o.size()])) return false;
    }
  }
  return true;
}

Environment parse_environment(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::SchemaError, "environment must be a JSON object");
  Environment env;
  if (!j.contains("boundary")) throw Error(ErrorKind::SchemaError, "missing key 'boundary'");
  env.boundary = parse_polygon(j["boundary"], "boundary");
  if (j.contains("obstacles")) {
    if (!j["obstacles"].is_array()) throw Error(ErrorKind::SchemaError, "'obstacles' must be a list");
    for (std::size_t k = 0; k < j["obstacles"].size(); ++k) {
      env.obstacles.push_back(parse_polygon(j["obstacles"][k], "obstacles[" + std::to_string(k) + "]"));
    }
  }
  if (!j.contains("landmarks")) throw Error(ErrorKind::SchemaError, "missing key 'landmarks'");
  env.landmarks = parse_points(j["landmarks"], "landmarks");
  if (env.landmarks.empty()) throw Error(ErrorKind::SchemaError, "at least one landmark is required");

  if (j.contains("cells")) {
    if (!j["cells"].is_array() || j["cells"].empty()) throw Error(ErrorKind::SchemaError, "'cells' must be a nonempty list");
    std::vector<std::vector<Point>> cells;
    for (std::size_t k = 0; k < j["cells"].size(); ++k) {
      const std::string where = "cells[" + std::to_string(k) + "]";
      auto poly = parse_polygon(j["cells"][k], where);
      if (!is_convex_polygon(poly)) throw Error(ErrorKind::InvalidGeometry, where + " is not convex");
      cells.push_back(std::move(poly));
    }
    env.cells = std::move(cells);
  }
  if (j.contains("cell_landmarks")) {
    if (!env.cells) throw Error(ErrorKind::SchemaError, "'cell_landmarks' requires 'cells'");
    const json& cl = j["cell_landmarks"];
    if (!cl.is_array() || cl.size() != env.cells->size()) {
      throw Error(ErrorKind::SchemaError, "'cell_landmarks' must list one index set per cell");
    }
    std::vector<std::vector<int>> assign;
    for (std::size_t k = 0; k < cl.size(); ++k) {
      if (!cl[k].is_array() || cl[k].empty()) throw Error(ErrorKind::SchemaError, "every cell needs at least one landmark");
      std::vector<int> idx;
      for (const auto& v : cl[k]) {
        if (!v.is_number_integer()) throw Error(ErrorKind::SchemaError, "landmark index must be an integer");
        const int i = v.get<int>();
        if (i < 0 || i >= static_cast<int>(env.landmarks.size())) {
          throw Error(ErrorKind::SchemaError, "landmark index " + std::to_string(i) + " out of range");
        }
        if (std::find(idx.begin(), idx.end(), i) != idx.end()) throw Error(ErrorKind::SchemaError, "duplicate landmark index");
        idx.push_back(i);
      }
      assign.push_back(std::move(idx));
    }
    env.cell_landmarks = std::move(assign);
  }
  if (j.contains("objective")) {
    const json& o = j["objective"];
    if (!o.is_object() || !o.contains("kind") || !o["kind"].is_string()) {
      throw Error(ErrorKind::SchemaError, "objective needs a string 'kind'");
    }
    const std::string kind = o["kind"].get<std::string>();
    if (kind == "stabilize") {
      if (!o.contains("goal")) throw Error(ErrorKind::SchemaError, "stabilize objective needs 'goal'");
      env.objective = Objective::stabilize(parse_point(o["goal"], "objective.goal"));
    } else if (kind == "patrol") {
      if (!o.contains("cycle") || !o["cycle"].is_array()) throw Error(ErrorKind::SchemaError, "patrol objective needs 'cycle'");
      std::vector<int> cycle;
      for (const auto& v : o["cycle"]) {
        if (!v.is_number_integer()) throw Error(ErrorKind::SchemaError, "cycle entries must be integers");
        cycle.push_back(v.get<int>());
      }
      env.objective = Objective::patrol(std::move(cycle));
    } else {
      throw Error(ErrorKind::SchemaError, "unknown objective kind '" + kind + "'");
    }
  }
  if (j.contains("system")) {
    const json& s = j["system"];
    if (!s.is_object()) throw Error(ErrorKind::SchemaError, "'system' must be an object");
    SystemSpec spec;
    const std::string type = s.value("type", std::string("single_integrator"));
    if (type == "single_integrator") {
      spec.kind = SystemSpec::Kind::SingleIntegrator;
    } else if (type == "double_integrator") {
      spec.kind = SystemSpec::Kind::DoubleIntegrator;
    } else {
      throw Error(ErrorKind::SchemaError, "unknown system type '" + type + "'");
    }
    spec.u_max = s.value("u_max", 1.0);
    spec.v_max = s.value("v_max", 1.0);
    if (!(spec.u_max > 0) || !(spec.v_max > 0)) throw Error(ErrorKind::SchemaError, "system bounds must be positive");
    env.system = spec;
  }
  return env;
}

Environment load_environment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open environment file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_environment(ss.str());
}

int CellDecomposition::locate(const Point& x, double tol) const {
  for (int i = 0; i < size(); ++i) {
    if (cells[static_cast<std::size_t>(i)].contains(x, tol)) return i;
  }
  return -1;
}

void compute_adjacency(CellDecomposition& d) {
  d.adjacency.clear();
  for (int i = 0; i < d.size(); ++i) {
    for (int j = i + 1; j < d.size(); ++j) {
      if (common_face(d.cells[static_cast<std::size_t>(i)], d.cells[static_cast<std::size_t>(j)])) {
        d.adjacency.emplace_back(i, j);
      }
    }
  }
}

CellDecomposition decomposition_from_cells(const Environment& env) {
  if (!env.cells) throw Error(ErrorKind::SchemaError, "environment has no 'cells'");
  CellDecomposition d;
  for (std::size_t k = 0; k < env.cells->size(); ++k) {
    const auto& poly = (*env.cells)[k];
    if (!is_convex_polygon(poly)) throw Error(ErrorKind::InvalidGeometry, "cell " + std::to_string(k) + " is not convex");
    d.cells.push_back(Polytope::from_polygon(poly));
    d.generators.push_back(polygon_centroid(poly));
    d.parents.push_back(-1);
    if (env.cell_landmarks) {
      d.landmarks.push_back((*env.cell_landmarks)[k]);
    } else {
      std::vector<int> all(env.landmarks.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
      d.landmarks.push_back(std::move(all));
    }
  }
  compute_adjacency(d);
  return d;
}

CellDecomposition decompose_rrt(const Environment& env, std::uint64_t seed, const RrtParams& params) {
  if (params.n_samples < 1 || !(params.step > 0) || !(params.radius > 0)) {
    throw Error(ErrorKind::InvalidConfig, "RRT parameters must be positive");
  }
  if (!is_convex_polygon(env.boundary)) {
    throw Error(ErrorKind::InvalidGeometry, "tree decomposition needs a convex boundary");
  }
  Point lo = env.boundary.front();
  Point hi = lo;
  for (const auto& p : env.boundary) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const long max_attempts = static_cast<long>(params.n_samples) * params.max_attempts_factor;

  std::mt19937_64 rng(seed);
  Point root = params.root.value_or(polygon_centroid(env.boundary));
  if (!params.root) {
    // The centroid may sit inside an obstacle; fall back to the first free draw.
    for (long attempt = 0; !env.in_free_space(root) && attempt < max_attempts; ++attempt) {
      const double ux = unit_draw(rng);
      const double uy = unit_draw(rng);
      root = Point(lo.x() + ux * (hi.x() - lo.x()), lo.y() + uy * (hi.y() - lo.y()));
    }
  }
  if (!env.in_free_space(root)) throw Error(ErrorKind::DecompositionFailed, "tree root is not in free space");
  std::vector<Point> nodes{root};
  std::vector<int> parent{-1};
  std::vector<double> cost{0.0};
  std::vector<Point> colliding;

  auto refresh_costs = [&](int from) {
    std::vector<int> stack{from};
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (std::size_t c = 0; c < nodes.size(); ++c) {
        if (parent[c] == v) {
          cost[c] = cost[static_cast<std::size_t>(v)] + (nodes[c] - nodes[static_cast<std::size_t>(v)]).norm();
          stack.push_back(static_cast<int>(c));
        }
      }
    }
  };

  for (long attempt = 0; static_cast<int>(nodes.size()) < params.n_samples && attempt < max_attempts; ++attempt) {
    const double ux = unit_draw(rng);
    const double uy = unit_draw(rng);
    const Point s(lo.x() + ux * (hi.x() - lo.x()), lo.y() + uy * (hi.y() - lo.y()));
    if (!point_in_polygon(s, env.boundary)) continue;
    if (!env.in_free_space(s)) {
      if (params.colliding_generators) colliding.push_back(s);
      continue;
    }
    std::size_t nearest = 0;
    for (std::size_t k = 1; k < nodes.size(); ++k) {
      if ((nodes[k] - s).norm() < (nodes[nearest] - s).norm()) nearest = k;
    }
    const double dist = (s - nodes[nearest]).norm();
    if (dist <= 1e-12) continue;
    const Point q = dist > params.step ? Point(nodes[nearest] + params.step / dist * (s - nodes[nearest])) : s;
    if (!env.segment_free(nodes[nearest], q)) continue;

    std::vector<std::size_t> near;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if ((nodes[k] - q).norm() <= params.radius && env.segment_free(nodes[k], q)) near.push_back(k);
    }
    std::size_t best = nearest;
    double best_cost = cost[nearest] + (q - nodes[nearest]).norm();
    for (std::size_t k : near) {
      const double c = cost[k] + (q - nodes[k]).norm();
      if (c < best_cost - 1e-12) {
        best = k;
        best_cost = c;
      }
    }
    const int qi = static_cast<int>(nodes.size());
    nodes.push_back(q);
    parent.push_back(static_cast<int>(best));
    cost.push_back(best_cost);
    for (std::size_t k : near) {
      if (k == best) continue;
      const double via = best_cost + (q - nodes[k]).norm();
      if (via < cost[k] - 1e-12) {
        parent[k] = qi;
        cost[k] = via;
        refresh_costs(static_cast<int>(k));
      }
    }
  }

  // Simplify: drop an inner node when every child sees the grandparent.
  std::vector<char> alive(nodes.size(), 1);
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t v = 1; v < nodes.size(); ++v) {
      if (!alive[v]) continue;
      std::vector<std::size_t> children;
      for (std::size_t c = 0; c < nodes.size(); ++c) {
        if (alive[c] && parent[c] == static_cast<int>(v)) children.push_back(c);
      }
      if (children.empty()) continue;
      const int p = parent[v];
      const bool ok = std::all_of(children.begin(), children.end(), [&](std::size_t c) {
        return env.segment_free(nodes[static_cast<std::size_t>(p)], nodes[c]);
      });
      if (!ok) continue;
      for (std::size_t c : children) parent[c] = p;
      alive[v] = 0;
      changed = true;
    }
  }

  std::vector<int> kept;
  for (std::size_t v = 0; v < nodes.size(); ++v) {
    if (alive[v]) kept.push_back(static_cast<int>(v));
  }

  // Halfspace pool: boundary edges first, then bisectors and obstacle cuts.
  std::vector<Halfspace> pool;
  LabeledPolygon base;
  for (std::size_t k = 0; k < env.boundary.size(); ++k) {
    const Point a = env.boundary[k];
    const Point b = env.boundary[(k + 1) % env.boundary.size()];
    const Eigen::Vector2d normal(b.y() - a.y(), a.x() - b.x());
    pool.emplace_back(normal, normal.dot(a));
    base.v.push_back(a);
    base.label.push_back(static_cast<int>(k));
  }

  std::vector<Point> cutters;
  for (int v : kept) cutters.push_back(nodes[static_cast<std::size_t>(v)]);
  const std::size_t n_tree = cutters.size();
  cutters.insert(cutters.end(), colliding.begin(), colliding.end());

  CellDecomposition d;
  d.seed = seed;
  std::vector<int> cell_of_node(nodes.size(), -1);
  for (std::size_t i = 0; i < n_tree; ++i) {
    const int node = kept[i];
    const Point g = cutters[i];
    LabeledPolygon poly = base;
    for (std::size_t k = 0; k < cutters.size() && !poly.empty(); ++k) {
      if (k == i) continue;
      if (k < n_tree && params.overlap_parent && kept[k] == parent[static_cast<std::size_t>(node)]) continue;
      if ((cutters[k] - g).norm() <= 1e-12) continue;
      pool.push_back(bisector(g, cutters[k]));
      clip(poly, pool.back(), static_cast<int>(pool.size()) - 1);
    }
    for (const auto& obstacle : env.obstacles) {
      for (std::size_t guard = 0; guard <= obstacle.size() && !poly.empty(); ++guard) {
        if (overlap_area(obstacle, poly.v) <= 1e-10) break;
        double best_area = -1.0;
        bool best_holds_generator = false;
        LabeledPolygon best_poly;
        Halfspace best_cut;
        for (std::size_t e = 0; e < obstacle.size(); ++e) {
          const Point a = obstacle[e];
          const Point b = obstacle[(e + 1) % obstacle.size()];
          const Eigen::Vector2d outward(b.y() - a.y(), a.x() - b.x());
          const Halfspace cut(-outward, -outward.dot(a));
          LabeledPolygon trial = poly;
          clip(trial, cut, -1);
          const double area = trial.empty() ? 0.0 : polygon_area(trial.v);
          const bool holds = cut.contains(g);
          if ((holds && !best_holds_generator) || (holds == best_holds_generator && area > best_area)) {
            best_area = area;
            best_holds_generator = holds;
            best_poly = trial;
            best_cut = cut;
          }
        }
        pool.push_back(best_cut);
        for (auto& l : best_poly.label) {
          if (l == -1) l = static_cast<int>(pool.size()) - 1;
        }
        poly = best_poly;
      }
    }
    if (poly.empty() || polygon_area(poly.v) < 1e-9) continue;
    cell_of_node[static_cast<std::size_t>(node)] = d.size();
    d.cells.push_back(to_polytope(poly, pool));
    d.generators.push_back(g);
    d.parents.push_back(parent[static_cast<std::size_t>(node)]);  // node index for now
  }
  if (d.cells.empty()) throw Error(ErrorKind::DecompositionFailed, "no cell survived obstacle clipping");
  for (auto& p : d.parents) p = p < 0 ? -1 : cell_of_node[static_cast<std::size_t>(p)];

  std::vector<int> all(env.landmarks.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  d.landmarks.assign(d.cells.size(), all);
  compute_adjacency(d);
  return d;
}

bool AbstractGraph::has_edge(int i, int j) const {
  if (i < 0 || j < 0 || i >= num_nodes || j >= num_nodes) return false;
  const auto& n = neighbors[static_cast<std::size_t>(i)];
  return std::binary_search(n.begin(), n.end(), j);
}

AbstractGraph build_graph(const CellDecomposition& d) {
  AbstractGraph g;
  g.num_nodes = d.size();
  g.edges = d.adjacency;
  g.neighbors.assign(static_cast<std::size_t>(g.num_nodes), {});
  for (const auto& [i, j] : d.adjacency) {
    g.neighbors[static_cast<std::size_t>(i)].push_back(j);
    g.neighbors[static_cast<std::size_t>(j)].push_back(i);
  }
  for (auto& n : g.neighbors) std::sort(n.begin(), n.end());
  return g;
}

}  // namespace cellnav
