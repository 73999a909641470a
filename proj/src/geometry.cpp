#include "cellnav/geometry.hpp"

#include "cellnav/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cellnav {

namespace {

// Coordinates beyond this magnitude are treated as "at infinity" by the
// emptiness probe in vertices_2d.
constexpr double kProbeBox = 1e7;

bool near(const Point& a, const Point& b, double tol) { return (a - b).norm() <= tol; }

std::vector<Point> raw_vertices_2d(const std::vector<Halfspace>& rows) {
  std::vector<Point> out;
  const std::size_t n = rows.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Eigen::Vector2d ni = rows[i].normal;
      const Eigen::Vector2d nj = rows[j].normal;
      const double det = ni.x() * nj.y() - ni.y() * nj.x();
      if (std::abs(det) < 1e-12) continue;
      const Point v((rows[i].offset * nj.y() - ni.y() * rows[j].offset) / det,
                    (ni.x() * rows[j].offset - rows[i].offset * nj.x()) / det);
      bool feasible = true;
      for (const auto& r : rows) {
        if (r.slack(v) < -kGeomTol * std::max(1.0, std::abs(r.offset))) {
          feasible = false;
          break;
        }
      }
      if (!feasible) continue;
      const double scale = std::max(1.0, v.norm());
      const bool dup = std::any_of(out.begin(), out.end(),
                                   [&](const Point& w) { return near(v, w, kGeomTol * scale); });
      if (!dup) out.push_back(v);
    }
  }
  return out;
}

void sort_ccw(std::vector<Point>& pts) {
  if (pts.size() < 2) return;
  Point c = Point::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  std::sort(pts.begin(), pts.end(), [&](const Point& a, const Point& b) {
    return std::atan2(a.y() - c.y(), a.x() - c.x()) < std::atan2(b.y() - c.y(), b.x() - c.x());
  });
}

// Polytope {x : A x <= b} has a nonzero recession direction.
bool has_recession_2d(const std::vector<Halfspace>& unit_rows) {
  if (unit_rows.empty()) return true;
  for (const auto& r : unit_rows) {
    const Eigen::Vector2d d(-r.normal.y(), r.normal.x());
    for (const double sign : {1.0, -1.0}) {
      bool recedes = true;
      for (const auto& s : unit_rows) {
        if (s.normal.dot(sign * d) > 1e-12) {
          recedes = false;
          break;
        }
      }
      if (recedes) return true;
    }
  }
  return false;
}

// Calls fn on every k-subset of {0..n-1} in lexicographic order.
template <typename Fn>
void for_each_subset(std::size_t n, std::size_t k, Fn&& fn) {
  if (k > n) return;
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    fn(idx);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

bool has_recession_nd(const Polytope& p) {
  const std::size_t n = p.dim();
  const Eigen::MatrixXd A = p.normalized().A();
  if (A.rows() == 0) return true;
  Eigen::FullPivLU<Eigen::MatrixXd> full(A);
  full.setThreshold(1e-10);
  if (full.rank() < static_cast<Eigen::Index>(n)) return true;
  bool found = false;
  for_each_subset(static_cast<std::size_t>(A.rows()), n - 1, [&](const std::vector<std::size_t>& s) {
    if (found) return;
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(s.size()), static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < s.size(); ++k) sub.row(static_cast<Eigen::Index>(k)) = A.row(static_cast<Eigen::Index>(s[k]));
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
    lu.setThreshold(1e-10);
    const Eigen::MatrixXd ker = lu.kernel();
    if (ker.cols() != 1) return;
    Eigen::VectorXd d = ker.col(0).normalized();
    for (const double sign : {1.0, -1.0}) {
      if (((sign * A * d).array() <= 1e-10).all()) found = true;
    }
  });
  return found;
}

}  // namespace

Halfspace::Halfspace(Eigen::VectorXd n, double o) : normal(std::move(n)), offset(o) {
  if (!(normal.norm() > 0.0)) throw Error(ErrorKind::InvalidGeometry, "halfspace normal has zero norm");
}

Halfspace Halfspace::normalized() const {
  const double s = normal.norm();
  return Halfspace(normal / s, offset / s);
}

Polytope::Polytope(std::vector<Halfspace> rows) : rows_(std::move(rows)) {
  unit_rows_.reserve(rows_.size());
  for (const auto& r : rows_) {
    if (!rows_.empty() && r.dim() != rows_.front().dim()) {
      throw Error(ErrorKind::DimensionMismatch, "polytope rows differ in dimension");
    }
    unit_rows_.push_back(r.normalized());
  }
}

Polytope::Polytope(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  if (A.rows() != b.size()) throw Error(ErrorKind::DimensionMismatch, "A and b row counts differ");
  std::vector<Halfspace> rows;
  for (Eigen::Index i = 0; i < A.rows(); ++i) rows.emplace_back(A.row(i).transpose(), b(i));
  *this = Polytope(std::move(rows));
}

Polytope Polytope::from_polygon(const std::vector<Point>& vertices) {
  std::vector<Point> v;
  for (const auto& p : vertices) {
    if (v.empty() || !near(v.back(), p, kGeomTol)) v.push_back(p);
  }
  while (v.size() > 1 && near(v.front(), v.back(), kGeomTol)) v.pop_back();
  if (v.size() < 3) throw Error(ErrorKind::InvalidGeometry, "polygon needs at least 3 distinct vertices");
  if (polygon_area(v) < 0) std::reverse(v.begin(), v.end());
  std::vector<Point> kept;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const Point d1 = v[k] - v[(k + v.size() - 1) % v.size()];
    const Point d2 = v[(k + 1) % v.size()] - v[k];
    const double cross = d1.x() * d2.y() - d1.y() * d2.x();
    if (std::abs(cross) <= 1e-14 * d1.norm() * d2.norm() && d1.dot(d2) > 0) continue;
    kept.push_back(v[k]);
  }
  if (kept.size() < 3) throw Error(ErrorKind::InvalidGeometry, "polygon is degenerate");
  std::vector<Halfspace> rows;
  const std::size_t n = kept.size();
  for (std::size_t k = 0; k < n; ++k) {
    const Point d = kept[(k + 1) % n] - kept[k];
    const Eigen::Vector2d normal(d.y(), -d.x());
    rows.emplace_back(normal, normal.dot(kept[k]));
  }
  return Polytope(std::move(rows));
}

Polytope Polytope::box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  if (lo.size() != hi.size()) throw Error(ErrorKind::DimensionMismatch, "box bounds differ in size");
  std::vector<Halfspace> rows;
  const Eigen::Index n = lo.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e(i) = 1.0;
    rows.emplace_back(e, hi(i));
    rows.emplace_back(-e, -lo(i));
  }
  return Polytope(std::move(rows));
}

std::size_t Polytope::dim() const { return rows_.empty() ? 0 : rows_.front().dim(); }

Eigen::MatrixXd Polytope::A() const {
  Eigen::MatrixXd A(static_cast<Eigen::Index>(rows_.size()), static_cast<Eigen::Index>(dim()));
  for (std::size_t i = 0; i < rows_.size(); ++i) A.row(static_cast<Eigen::Index>(i)) = rows_[i].normal.transpose();
  return A;
}

Eigen::VectorXd Polytope::b() const {
  Eigen::VectorXd b(static_cast<Eigen::Index>(rows_.size()));
  for (std::size_t i = 0; i < rows_.size(); ++i) b(static_cast<Eigen::Index>(i)) = rows_[i].offset;
  return b;
}

bool Polytope::contains(const Eigen::VectorXd& x, double tol) const {
  return std::all_of(unit_rows_.begin(), unit_rows_.end(), [&](const Halfspace& r) { return r.contains(x, tol); });
}

double Polytope::depth(const Eigen::VectorXd& x) const {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& r : unit_rows_) d = std::min(d, r.slack(x));
  return d;
}

Polytope Polytope::intersect(const Halfspace& h) const {
  auto rows = rows_;
  rows.push_back(h);
  return Polytope(std::move(rows));
}

Polytope Polytope::intersect(const Polytope& other) const {
  auto rows = rows_;
  rows.insert(rows.end(), other.rows_.begin(), other.rows_.end());
  return Polytope(std::move(rows));
}

Point Face::midpoint() const {
  Point m = Point::Zero();
  for (const auto& v : vertices) m += v;
  return m / static_cast<double>(vertices.size());
}

double Face::length() const { return vertices.size() < 2 ? 0.0 : (vertices.back() - vertices.front()).norm(); }

std::vector<Point> vertices_2d(const Polytope& p) {
  if (p.dim() != 2 && !p.empty()) throw Error(ErrorKind::DimensionMismatch, "vertices_2d needs a 2-D polytope");
  const auto& unit = p.unit_rows();
  auto probe = unit;
  const Polytope frame = Polytope::box(Eigen::Vector2d::Constant(-kProbeBox), Eigen::Vector2d::Constant(kProbeBox));
  probe.insert(probe.end(), frame.rows().begin(), frame.rows().end());
  if (raw_vertices_2d(probe).empty()) throw Error(ErrorKind::EmptyPolytope, "polytope has no feasible point");
  if (has_recession_2d(unit)) throw Error(ErrorKind::Unbounded, "polytope is unbounded");
  auto verts = raw_vertices_2d(unit);
  if (verts.empty()) throw Error(ErrorKind::EmptyPolytope, "polytope has no vertex");
  sort_ccw(verts);
  return verts;
}

std::vector<Eigen::VectorXd> enumerate_vertices(const Polytope& p) {
  const std::size_t n = p.dim();
  if (n == 2) {
    std::vector<Eigen::VectorXd> out;
    for (const auto& v : vertices_2d(p)) out.emplace_back(v);
    return out;
  }
  if (has_recession_nd(p)) throw Error(ErrorKind::Unbounded, "polytope is unbounded");
  const Polytope unit = p.normalized();
  const Eigen::MatrixXd A = unit.A();
  const Eigen::VectorXd b = unit.b();
  std::vector<Eigen::VectorXd> out;
  for_each_subset(unit.size(), n, [&](const std::vector<std::size_t>& s) {
    Eigen::MatrixXd M(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
      M.row(static_cast<Eigen::Index>(k)) = A.row(static_cast<Eigen::Index>(s[k]));
      rhs(static_cast<Eigen::Index>(k)) = b(static_cast<Eigen::Index>(s[k]));
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) return;
    const Eigen::VectorXd v = lu.solve(rhs);
    if (!unit.contains(v, kGeomTol * std::max(1.0, v.norm()))) return;
    for (const auto& w : out) {
      if ((w - v).norm() <= kGeomTol * std::max(1.0, v.norm())) return;
    }
    out.push_back(v);
  });
  if (out.empty()) throw Error(ErrorKind::EmptyPolytope, "polytope has no vertex");
  return out;
}

Halfspace bisector(const Point& p, const Point& q) {
  if (p == q) throw Error(ErrorKind::DegeneratePair, "bisector of coincident points");
  const Eigen::Vector2d n = q - p;
  return Halfspace(n, n.dot(0.5 * (p + q)));
}

std::optional<Face> common_face(const Polytope& a, const Polytope& b) {
  if (a.dim() != 2 || b.dim() != 2) return std::nullopt;
  std::vector<Point> va;
  std::vector<Point> vb;
  try {
    va = vertices_2d(a);
    vb = vertices_2d(b);
  } catch (const Error&) {
    return std::nullopt;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Halfspace& ra = a.unit_row(i);
    for (std::size_t j = 0; j < b.size(); ++j) {
      const Halfspace& rb = b.unit_row(j);
      const double scale = std::max(1.0, std::abs(ra.offset));
      if ((ra.normal + rb.normal).norm() > kGeomTol || std::abs(ra.offset + rb.offset) > kGeomTol * scale) continue;
      const Eigen::Vector2d t(-ra.normal.y(), ra.normal.x());
      double alo = std::numeric_limits<double>::infinity();
      double ahi = -alo;
      double blo = alo;
      double bhi = -alo;
      for (const auto& v : va) {
        if (std::abs(ra.slack(v)) <= kGeomTol * scale) {
          alo = std::min(alo, t.dot(v));
          ahi = std::max(ahi, t.dot(v));
        }
      }
      for (const auto& v : vb) {
        if (std::abs(rb.slack(v)) <= kGeomTol * scale) {
          blo = std::min(blo, t.dot(v));
          bhi = std::max(bhi, t.dot(v));
        }
      }
      const double lo = std::max(alo, blo);
      const double hi = std::min(ahi, bhi);
      if (!(hi - lo >= kGeomTol)) continue;
      const Point base = ra.normal * ra.offset;
      Face f;
      f.row_index = i;
      f.vertices = {base + lo * t, base + hi * t};
      return f;
    }
  }
  return std::nullopt;
}

Point inward_normal(const Face& f, const Polytope& p) {
  const Eigen::VectorXd n = p.unit_row(f.row_index).normal;
  return -Point(n(0), n(1));
}

LinearMax max_linear(const Eigen::VectorXd& c, const Polytope& p) {
  if (static_cast<std::size_t>(c.size()) != p.dim()) throw Error(ErrorKind::DimensionMismatch, "objective and polytope differ in dimension");
  const auto verts = enumerate_vertices(p);
  LinearMax best{-std::numeric_limits<double>::infinity(), verts.front()};
  for (const auto& v : verts) {
    const double val = c.dot(v);
    if (val > best.value) best = {val, v};
  }
  return best;
}

double polygon_area(const std::vector<Point>& v) {
  double a = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point& p = v[i];
    const Point& q = v[(i + 1) % v.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

Point polygon_centroid(const std::vector<Point>& v) {
  const double a = polygon_area(v);
  if (std::abs(a) < 1e-15) {
    Point m = Point::Zero();
    for (const auto& p : v) m += p;
    return m / static_cast<double>(std::max<std::size_t>(v.size(), 1));
  }
  Point c = Point::Zero();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point& p = v[i];
    const Point& q = v[(i + 1) % v.size()];
    const double cross = p.x() * q.y() - q.x() * p.y();
    c += (p + q) * cross;
  }
  return c / (6.0 * a);
}

bool is_convex_polygon(const std::vector<Point>& v) {
  if (v.size() < 3) return false;
  int sign = 0;
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point d1 = v[(i + 1) % n] - v[i];
    const Point d2 = v[(i + 2) % n] - v[(i + 1) % n];
    const double cross = d1.x() * d2.y() - d1.y() * d2.x();
    if (std::abs(cross) <= 1e-12 * d1.norm() * d2.norm()) continue;
    const int s = cross > 0 ? 1 : -1;
    if (sign == 0) sign = s;
    else if (s != sign) return false;
  }
  // reject self-intersecting "star" polygons whose turns agree
  double winding = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point d1 = v[(i + 1) % n] - v[i];
    const Point d2 = v[(i + 2) % n] - v[(i + 1) % n];
    winding += std::atan2(d1.x() * d2.y() - d1.y() * d2.x(), d1.dot(d2));
  }
  return sign != 0 && std::abs(std::abs(winding) - 2.0 * M_PI) < 1e-6;
}

bool point_in_polygon(const Point& x, const std::vector<Point>& poly) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % n];
    const Point ab = b - a;
    const Point ax = x - a;
    const double cross = ab.x() * ax.y() - ab.y() * ax.x();
    if (std::abs(cross) <= 1e-12 * std::max(1.0, ab.norm()) && ax.dot(ab) >= 0 && ax.dot(ab) <= ab.squaredNorm()) {
      return false;
    }
  }
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& pi = poly[i];
    const Point& pj = poly[j];
    if ((pi.y() > x.y()) != (pj.y() > x.y())) {
      const double xc = pj.x() + (x.y() - pj.y()) * (pi.x() - pj.x()) / (pi.y() - pj.y());
      if (x.x() < xc) inside = !inside;
    }
  }
  return inside;
}

bool segments_intersect(const Point& a0, const Point& a1, const Point& b0, const Point& b1) {
  auto orient = [](const Point& p, const Point& q, const Point& r) {
    const double v = (q.x() - p.x()) * (r.y() - p.y()) - (q.y() - p.y()) * (r.x() - p.x());
    if (std::abs(v) < 1e-14) return 0;
    return v > 0 ? 1 : -1;
  };
  auto on_segment = [](const Point& p, const Point& q, const Point& r) {
    return std::min(p.x(), r.x()) - 1e-14 <= q.x() && q.x() <= std::max(p.x(), r.x()) + 1e-14 &&
           std::min(p.y(), r.y()) - 1e-14 <= q.y() && q.y() <= std::max(p.y(), r.y()) + 1e-14;
  };
  const int o1 = orient(a0, a1, b0);
  const int o2 = orient(a0, a1, b1);
  const int o3 = orient(b0, b1, a0);
  const int o4 = orient(b0, b1, a1);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a0, b0, a1)) return true;
  if (o2 == 0 && on_segment(a0, b1, a1)) return true;
  if (o3 == 0 && on_segment(b0, a0, b1)) return true;
  if (o4 == 0 && on_segment(b0, a1, b1)) return true;
  return false;
}

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EmptyPolytope: return "EmptyPolytope";
    case ErrorKind::Unbounded: return "Unbounded";
    case ErrorKind::DegeneratePair: return "DegeneratePair";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::InvalidGeometry: return "InvalidGeometry";
    case ErrorKind::DecompositionFailed: return "DecompositionFailed";
    case ErrorKind::Unreachable: return "Unreachable";
    case ErrorKind::InvalidCycle: return "InvalidCycle";
    case ErrorKind::MissingFace: return "MissingFace";
    case ErrorKind::InvalidGoal: return "InvalidGoal";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::NoRelativeDegree: return "NoRelativeDegree";
    case ErrorKind::HeterogeneousRelativeDegree: return "HeterogeneousRelativeDegree";
    case ErrorKind::EmptyRegion: return "EmptyRegion";
    case ErrorKind::GoalOutsideCell: return "GoalOutsideCell";
    case ErrorKind::InvalidSystem: return "InvalidSystem";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::CoincidentLandmark: return "CoincidentLandmark";
    case ErrorKind::MissingLandmark: return "MissingLandmark";
    case ErrorKind::NoVisibleLandmark: return "NoVisibleLandmark";
    case ErrorKind::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorKind::FixedLandmarkHidden: return "FixedLandmarkHidden";
    case ErrorKind::OutOfDecomposition: return "OutOfDecomposition";
    case ErrorKind::ZeroControl: return "ZeroControl";
    case ErrorKind::BadInitialState: return "BadInitialState";
    case ErrorKind::PreconditionViolated: return "PreconditionViolated";
  }
  return "Error";
}

}  // namespace cellnav
