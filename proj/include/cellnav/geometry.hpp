#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <vector>

namespace cellnav {

using Point = Eigen::Vector2d;

/// Absolute tolerance for row activity and containment tests.
inline constexpr double kGeomTol = 1e-9;

/// The closed halfspace {x : normal . x <= offset}.
struct Halfspace {
  Eigen::VectorXd normal;
  double offset = 0.0;

  Halfspace() = default;
  Halfspace(Eigen::VectorXd n, double o);

  std::size_t dim() const { return static_cast<std::size_t>(normal.size()); }
  /// offset - normal . x; nonnegative inside.
  double slack(const Eigen::VectorXd& x) const { return offset - normal.dot(x); }
  bool contains(const Eigen::VectorXd& x, double tol = kGeomTol) const {
    return slack(x) >= -tol;
  }
  /// Same set, unit-norm normal.
  Halfspace normalized() const;
};

/// Convex polytope in H-representation. Rows are kept as given; a unit-norm
/// copy is cached for distance-like computations.
class Polytope {
 public:
  Polytope() = default;
  explicit Polytope(std::vector<Halfspace> rows);
  Polytope(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

  /// Polygon given by its vertices in counterclockwise order. Clockwise input
  /// is reversed. Collinear consecutive vertices are skipped.
  static Polytope from_polygon(const std::vector<Point>& vertices);
  /// Axis-aligned box lo <= x <= hi.
  static Polytope box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

  std::size_t dim() const;
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  const Halfspace& row(std::size_t i) const { return rows_[i]; }
  const std::vector<Halfspace>& rows() const { return rows_; }
  const Halfspace& unit_row(std::size_t i) const { return unit_rows_[i]; }
  const std::vector<Halfspace>& unit_rows() const { return unit_rows_; }

  Eigen::MatrixXd A() const;
  Eigen::VectorXd b() const;

  bool contains(const Eigen::VectorXd& x, double tol = kGeomTol) const;
  /// Minimum unit-row slack: signed distance-like depth of x inside.
  double depth(const Eigen::VectorXd& x) const;

  /// Copy with every row scaled to a unit normal.
  Polytope normalized() const { return Polytope(unit_rows_); }
  Polytope intersect(const Halfspace& h) const;
  Polytope intersect(const Polytope& other) const;

 private:
  std::vector<Halfspace> rows_;
  std::vector<Halfspace> unit_rows_;
};

/// A facet of a 2-D polytope: the parent row and its endpoint segment.
struct Face {
  std::size_t row_index = 0;
  std::vector<Point> vertices;

  Point midpoint() const;
  double length() const;
};

/// Extreme points of a bounded 2-D polytope in counterclockwise order.
/// Throws Error{EmptyPolytope} or Error{Unbounded}.
std::vector<Point> vertices_2d(const Polytope& p);

/// All vertices of a bounded polytope in any dimension by brute-force
/// enumeration of row subsets. Intended for small problems (oracles).
std::vector<Eigen::VectorXd> enumerate_vertices(const Polytope& p);

/// Points no farther from p than from q. Throws Error{DegeneratePair} if p == q.
Halfspace bisector(const Point& p, const Point& q);

/// Facet shared by `a` and `b` with positive overlap length, oriented as a
/// row of `a`; nullopt when the polytopes are not face-adjacent.
std::optional<Face> common_face(const Polytope& a, const Polytope& b);

/// Unit normal of the face row pointing into `p`.
Point inward_normal(const Face& f, const Polytope& p);

struct LinearMax {
  double value = 0.0;
  Eigen::VectorXd argmax;
};

/// Exact maximum of c . x over `p` by vertex enumeration.
LinearMax max_linear(const Eigen::VectorXd& c, const Polytope& p);

double polygon_area(const std::vector<Point>& ccw_vertices);
Point polygon_centroid(const std::vector<Point>& ccw_vertices);
bool is_convex_polygon(const std::vector<Point>& vertices);
/// Strict point-in-simple-polygon test (even-odd rule, boundary excluded).
bool point_in_polygon(const Point& x, const std::vector<Point>& polygon);
/// Proper or touching intersection of two closed segments.
bool segments_intersect(const Point& a0, const Point& a1, const Point& b0, const Point& b1);

}  // namespace cellnav
