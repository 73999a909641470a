#include "cellnav/runtime.hpp"

#include "cellnav/error.hpp"

#include <cmath>

namespace cellnav {

int Measurement::visible_count() const {
  int n = 0;
  for (bool v : visible) n += v ? 1 : 0;
  return n;
}

Measurement measure(const Point& xp, const std::vector<Point>& landmarks, const std::vector<bool>& mask,
                    bool with_bearings) {
  if (mask.size() != landmarks.size()) throw Error(ErrorKind::DimensionMismatch, "visibility mask length differs");
  Measurement m;
  m.visible = mask;
  m.displacements.assign(landmarks.size(), Point::Zero());
  m.bearings.assign(landmarks.size(), Point::Zero());
  for (std::size_t i = 0; i < landmarks.size(); ++i) {
    if (!mask[i]) continue;
    m.displacements[i] = landmarks[i] - xp;
    if (with_bearings) {
      const double d = m.displacements[i].norm();
      if (!(d > 0.0)) throw Error(ErrorKind::CoincidentLandmark, "robot sits on landmark " + std::to_string(i));
      m.bearings[i] = m.displacements[i] / d;
    }
  }
  return m;
}

Measurement measure(const Point& xp, const std::vector<Point>& landmarks, bool with_bearings) {
  return measure(xp, landmarks, std::vector<bool>(landmarks.size(), true), with_bearings);
}

namespace {

void check_shapes(const CellGains& g, const Eigen::VectorXd& xd) {
  if (g.Kp.cols() != 2 * static_cast<Eigen::Index>(g.landmarks.size())) {
    throw Error(ErrorKind::DimensionMismatch, "K_p columns differ from 2 x landmark count");
  }
  if (g.Kd.cols() != xd.size()) throw Error(ErrorKind::DimensionMismatch, "K_d columns differ from dynamic state size");
}

Eigen::VectorXd base_term(const CellGains& g, const Eigen::VectorXd& xd) {
  Eigen::VectorXd u = g.Kb;
  if (xd.size() > 0) u += g.Kd * xd;
  return u;
}

std::size_t checked_index(int idx, std::size_t n) {
  if (idx < 0 || static_cast<std::size_t>(idx) >= n) throw Error(ErrorKind::MissingLandmark, "landmark index out of range");
  return static_cast<std::size_t>(idx);
}

}  // namespace

Eigen::VectorXd control_full(const CellGains& g, const Measurement& meas, const Eigen::VectorXd& xd) {
  check_shapes(g, xd);
  Eigen::VectorXd u = base_term(g, xd);
  for (std::size_t k = 0; k < g.landmarks.size(); ++k) {
    const std::size_t i = checked_index(g.landmarks[k], meas.visible.size());
    if (!meas.visible[i]) throw Error(ErrorKind::MissingLandmark, "landmark " + std::to_string(i) + " is not visible");
    u += g.Kp.middleCols(2 * static_cast<Eigen::Index>(k), 2) * meas.displacements[i];
  }
  return u;
}

Eigen::VectorXd control_limited_fov(const CellGains& g, const Measurement& meas, const std::vector<Point>& landmarks,
                                    const Eigen::VectorXd& xd) {
  check_shapes(g, xd);
  int hat = -1;
  for (int idx : g.landmarks) {
    const std::size_t i = checked_index(idx, meas.visible.size());
    if (meas.visible[i] && (hat < 0 || idx < hat)) hat = idx;
  }
  if (hat < 0) throw Error(ErrorKind::NoVisibleLandmark, "no landmark of the active cell is visible");
  const Point& y_hat = meas.displacements[static_cast<std::size_t>(hat)];
  const Point& l_hat = landmarks.at(static_cast<std::size_t>(hat));

  Eigen::VectorXd u = base_term(g, xd);
  Eigen::VectorXd k_bias = Eigen::VectorXd::Zero(g.Kp.rows());
  for (std::size_t k = 0; k < g.landmarks.size(); ++k) {
    const std::size_t i = static_cast<std::size_t>(g.landmarks[k]);
    const auto K = g.Kp.middleCols(2 * static_cast<Eigen::Index>(k), 2);
    if (meas.visible[i]) {
      u += K * meas.displacements[i];
    } else {
      u += K * y_hat;
      k_bias += K * (landmarks.at(i) - l_hat);
    }
  }
  return u + k_bias;
}

std::vector<Point> rescale_bearings(const Measurement& meas, int fixed, const std::vector<Point>& landmarks,
                                    const std::vector<int>& cell_landmarks) {
  const std::size_t f = checked_index(fixed, meas.visible.size());
  if (!meas.visible[f]) throw Error(ErrorKind::FixedLandmarkHidden, "fixed landmark " + std::to_string(f) + " is hidden");
  const Point beta_f = meas.bearings[f];
  std::vector<Point> out;
  for (int idx : cell_landmarks) {
    const std::size_t i = checked_index(idx, meas.visible.size());
    if (i == f) {
      out.push_back(beta_f);
      continue;
    }
    if (!meas.visible[i]) throw Error(ErrorKind::MissingLandmark, "landmark " + std::to_string(i) + " is not visible");
    const Point beta_i = meas.bearings[i];
    const Point beta_if = (landmarks.at(i) - landmarks.at(f)).normalized();
    // t beta_i - s beta_if = beta_f
    Eigen::Matrix2d M;
    M.col(0) = beta_i;
    M.col(1) = -beta_if;
    const double det = M.determinant();
    if (std::abs(det) < 1e-9) {
      throw Error(ErrorKind::DegenerateGeometry, "robot is aligned with landmarks " + std::to_string(f) + " and " +
                                                     std::to_string(i));
    }
    const double t = (beta_f.x() * M(1, 1) - M(0, 1) * beta_f.y()) / det;
    out.push_back(t * beta_i);
  }
  return out;
}

Eigen::VectorXd control_bearing(const CellGains& g, const std::vector<Point>& scaled, const Eigen::VectorXd& xd) {
  check_shapes(g, xd);
  if (scaled.size() != g.landmarks.size()) throw Error(ErrorKind::MissingLandmark, "scaled stack is incomplete");
  Eigen::VectorXd u = base_term(g, xd);
  for (std::size_t k = 0; k < scaled.size(); ++k) u += g.Kp.middleCols(2 * static_cast<Eigen::Index>(k), 2) * scaled[k];
  return u;
}

ControllerState switch_cell(const CellDecomposition& d, const ExitPlan& plan, const Point& x,
                            const ControllerState& state, double t, double tol) {
  const int cur = state.active_cell;
  if (cur >= 0 && cur < d.size() && d.cells[static_cast<std::size_t>(cur)].contains(x, tol)) return state;
  ControllerState next = state;
  next.last_switch_time = t;
  if (cur >= 0 && cur < d.size()) {
    const int succ = plan.successor(cur);
    if (succ >= 0 && d.cells[static_cast<std::size_t>(succ)].contains(x, tol)) {
      next.active_cell = succ;
      return next;
    }
  }
  const int any = d.locate(x, tol);
  if (any < 0) throw Error(ErrorKind::OutOfDecomposition, "state left every cell");
  next.active_cell = any;
  return next;
}

Eigen::VectorXd normalize_velocity(const Eigen::VectorXd& u, double v_des) {
  const double n = u.norm();
  if (!(n > 0.0)) throw Error(ErrorKind::ZeroControl, "cannot normalize a zero control");
  return v_des * u / n;
}

std::vector<bool> sector_visibility(const Point& xp, const Point& heading, const std::vector<Point>& landmarks,
                                    double angle, double range) {
  std::vector<bool> vis(landmarks.size(), false);
  const double hn = heading.norm();
  const double half = 0.5 * angle;
  for (std::size_t i = 0; i < landmarks.size(); ++i) {
    const Point d = landmarks[i] - xp;
    const double dist = d.norm();
    if (dist > range) continue;
    if (hn == 0.0 || angle >= 2.0 * M_PI || dist == 0.0) {
      vis[i] = true;
      continue;
    }
    const double c = std::clamp(d.dot(heading) / (dist * hn), -1.0, 1.0);
    vis[i] = std::acos(c) <= half;
  }
  return vis;
}

}  // namespace cellnav
