#include <algorithm>
#include <cmath>
#include <limits>

#include "betatess/geometry.hpp"
#include "betatess/hull.hpp"

namespace betatess {
namespace {

std::vector<HalfSpace> with_guards(const std::vector<HalfSpace>& hs, int dim, double guard) {
  std::vector<HalfSpace> all = hs;
  for (int k = 0; k < dim; ++k) {
    for (double sgn : {1.0, -1.0}) {
      HalfSpace g;
      g.u = Vector::Zero(dim);
      g.u[k] = sgn;
      g.t = guard;
      all.push_back(g);
    }
  }
  return all;
}

HalfspaceIntersection intersect_1d(const std::vector<HalfSpace>& hs, double guard, double tol) {
  double lo = -guard, hi = guard;
  int ilo = -1, ihi = -1;
  for (int i = 0; i < static_cast<int>(hs.size()); ++i) {
    const double u = hs[i].u[0], t = hs[i].t;
    if (u > 0 && t / u < hi) hi = t / u, ihi = i;
    if (u < 0 && t / u > lo) lo = t / u, ilo = i;
  }
  HalfspaceIntersection out;
  if (hi - lo <= tol) {
    out.status = CellStatus::Empty;
    return out;
  }
  if (ilo < 0 || ihi < 0) {
    out.status = CellStatus::Unbounded;
    return out;
  }
  out.status = CellStatus::Bounded;
  Polytope& P = out.polytope;
  P.dim = 1;
  P.ordered = true;
  P.halfspaces = {hs[ilo], hs[ihi]};
  P.source = {ilo, ihi};
  P.vertices = {Vector::Constant(1, lo), Vector::Constant(1, hi)};
  P.vertex_facets = {{0}, {1}};
  return out;
}

Vector line_intersection(const HalfSpace& a, const HalfSpace& b) {
  Eigen::Matrix2d A;
  A << a.u[0], a.u[1], b.u[0], b.u[1];
  return A.partialPivLu().solve(Eigen::Vector2d(a.t, b.t));
}

// Convex clipping of the guard square; each edge remembers the half-space it lies on.
HalfspaceIntersection intersect_2d(const std::vector<HalfSpace>& hs, double guard, double tol) {
  const int n = static_cast<int>(hs.size());
  const std::vector<HalfSpace> all = with_guards(hs, 2, guard);
  struct Corner {
    Eigen::Vector2d p;
    int label;  // half-space of the edge leaving this corner
  };
  std::vector<Corner> poly = {{{-guard, -guard}, n + 3},
                              {{guard, -guard}, n + 0},
                              {{guard, guard}, n + 2},
                              {{-guard, guard}, n + 1}};
  std::vector<Corner> next;
  std::vector<double> s;
  HalfspaceIntersection out;
  for (int j = 0; j < n; ++j) {
    const Eigen::Vector2d u = hs[j].u;
    const double t = hs[j].t;
    const int m = static_cast<int>(poly.size());
    s.resize(m);
    bool any_out = false, any_in = false;
    for (int i = 0; i < m; ++i) {
      s[i] = u.dot(poly[i].p) - t;
      any_out |= s[i] > tol;
      any_in |= s[i] < -tol;
    }
    if (!any_out) continue;
    if (!any_in) {
      out.status = CellStatus::Empty;
      return out;
    }
    next.clear();
    for (int i = 0; i < m; ++i) {
      const Corner& a = poly[i];
      const Corner& b = poly[(i + 1) % m];
      const double sa = s[i], sb = s[(i + 1) % m];
      const bool a_in = sa < -tol, a_out = sa > tol;
      const bool b_in = sb < -tol, b_out = sb > tol;
      if (a_in) {
        next.push_back(a);
        if (b_out) next.push_back({a.p + (b.p - a.p) * (sa / (sa - sb)), j});
      } else if (!a_out) {
        next.push_back({a.p, b_out ? j : a.label});
      } else if (b_in) {
        next.push_back({a.p + (b.p - a.p) * (sa / (sa - sb)), a.label});
      }
    }
    poly.swap(next);
    if (poly.size() < 3) {
      out.status = CellStatus::Empty;
      return out;
    }
  }

  // Drop edges whose length is below tolerance; the corner keeps the label of the surviving outgoing edge.
  bool changed = true;
  while (changed && poly.size() >= 3) {
    changed = false;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const std::size_t k = (i + 1) % poly.size();
      if ((poly[k].p - poly[i].p).norm() <= tol) {
        poly[i].label = poly[k].label;
        poly.erase(poly.begin() + static_cast<long>(k));
        changed = true;
        break;
      }
    }
  }
  double area = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& a = poly[i].p;
    const auto& b = poly[(i + 1) % poly.size()].p;
    area += a.x() * b.y() - a.y() * b.x();
  }
  if (poly.size() < 3 || area <= tol * tol) {
    out.status = CellStatus::Empty;
    return out;
  }
  for (const auto& c : poly) {
    if (c.label >= n) {
      out.status = CellStatus::Unbounded;
      return out;
    }
  }

  out.status = CellStatus::Bounded;
  Polytope& P = out.polytope;
  P.dim = 2;
  P.ordered = true;
  const int k = static_cast<int>(poly.size());
  for (int i = 0; i < k; ++i) {
    P.halfspaces.push_back(hs[poly[i].label]);
    P.source.push_back(poly[i].label);
  }
  for (int i = 0; i < k; ++i) {
    const int prev = (i + k - 1) % k;
    P.vertices.push_back(line_intersection(P.halfspaces[prev], P.halfspaces[i]));
    P.vertex_facets.push_back({prev, i});
  }
  return out;
}

HalfspaceIntersection intersect_dual(const std::vector<HalfSpace>& hs, int dim, double guard, double tol) {
  const int n = static_cast<int>(hs.size());
  const std::vector<HalfSpace> all = with_guards(hs, dim, guard);
  HalfspaceIntersection out;
  Vector c;
  const double r = chebyshev_center(all, dim, guard, &c);
  if (!(r > tol)) {
    out.status = CellStatus::Empty;
    return out;
  }
  const int m = static_cast<int>(all.size());
  Eigen::MatrixXd dual(dim, m);
  for (int i = 0; i < m; ++i) dual.col(i) = all[i].u / (all[i].t - all[i].u.dot(c));
  const ConvexHull hull = convex_hull(dual);
  for (int i : hull.vertices) {
    if (i >= n) {
      out.status = CellStatus::Unbounded;
      return out;
    }
  }

  out.status = CellStatus::Bounded;
  Polytope& P = out.polytope;
  P.dim = dim;
  std::vector<int> slot(m, -1);
  for (int i : hull.vertices) {
    slot[i] = static_cast<int>(P.halfspaces.size());
    P.halfspaces.push_back(all[i]);
    P.source.push_back(i);
  }
  double scale = guard * 1e-6;
  for (const auto& h : hs) scale = std::max(scale, std::abs(h.t));
  const double merge = 1e-9 * std::max(scale, 1.0);
  for (int f = 0; f < hull.facet_count(); ++f) {
    Vector nrm(dim);
    for (int k = 0; k < dim; ++k) nrm[k] = hull.normals[f * dim + k];
    const Vector w = c + nrm / hull.offsets[f];
    bool dup = false;
    for (const auto& q : P.vertices)
      if ((q - w).norm() <= merge) dup = true;
    if (!dup) P.vertices.push_back(w);
  }
  for (const auto& w : P.vertices) {
    std::vector<int> inc;
    for (int i = 0; i < P.facet_count(); ++i)
      if (std::abs(P.halfspaces[i].u.dot(w) - P.halfspaces[i].t) <= 1e3 * merge) inc.push_back(i);
    P.vertex_facets.push_back(inc);
  }
  return out;
}

}  // namespace

double support_function(const Polytope& K, const Vector& u) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& w : K.vertices) best = std::max(best, w.dot(u));
  return best;
}

HalfspaceIntersection intersect_halfspaces(const std::vector<HalfSpace>& halfspaces, int dim, double guard,
                                           double tol) {
  if (dim == 1) return intersect_1d(halfspaces, guard, tol);
  if (dim == 2) return intersect_2d(halfspaces, guard, tol);
  return intersect_dual(halfspaces, dim, guard, tol);
}

Polytope polytope_from_halfspaces(const std::vector<HalfSpace>& halfspaces) {
  if (halfspaces.empty()) throw Error(ErrorCode::Unbounded, "no half-spaces");
  const int dim = static_cast<int>(halfspaces[0].u.size());
  double scale = 1;
  for (const auto& h : halfspaces) scale = std::max(scale, std::abs(h.t));
  HalfspaceIntersection r = intersect_halfspaces(halfspaces, dim, 1e6 * scale, 1e-10 * scale);
  if (r.status == CellStatus::Unbounded) throw Error(ErrorCode::Unbounded, "half-space intersection is unbounded");
  if (r.status == CellStatus::Empty) throw Error(ErrorCode::Empty, "half-space intersection is empty");
  return std::move(r.polytope);
}

// Largest ball inside the half-spaces, by a dense single-phase simplex on shifted variables
// y = x + guard, s = r + shift >= 0, which makes the origin a feasible basis.
double chebyshev_center(const std::vector<HalfSpace>& hs, int dim, double guard, Vector* center) {
  const int m = static_cast<int>(hs.size());
  std::vector<double> b(m);
  double shift = 0;
  for (int i = 0; i < m; ++i) {
    b[i] = hs[i].t + guard * hs[i].u.sum();
    shift = std::max(shift, -b[i]);
  }
  const int rows = m + dim + 1;
  const int vars = dim + 1;
  const int cols = vars + rows + 1;
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(rows + 1, cols);
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < dim; ++k) T(i, k) = hs[i].u[k];
    T(i, dim) = hs[i].u.norm();
    T(i, cols - 1) = b[i] + shift * hs[i].u.norm();
  }
  for (int k = 0; k < dim; ++k) {
    T(m + k, k) = 1;
    T(m + k, cols - 1) = 2 * guard;
  }
  T(m + dim, dim) = 1;
  T(m + dim, cols - 1) = guard + shift;
  for (int i = 0; i < rows; ++i) T(i, vars + i) = 1;
  T(rows, dim) = -1;
  std::vector<int> basis(rows);
  for (int i = 0; i < rows; ++i) basis[i] = vars + i;

  const double piv_eps = 1e-12;
  for (int iter = 0; iter < 50 * cols; ++iter) {
    int enter = -1;
    for (int j = 0; j < cols - 1; ++j)
      if (T(rows, j) < -piv_eps) {
        enter = j;
        break;
      }
    if (enter < 0) break;
    int leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < rows; ++i) {
      if (T(i, enter) > piv_eps) {
        const double ratio = T(i, cols - 1) / T(i, enter);
        if (ratio < best - 1e-15 || (ratio <= best + 1e-15 && leave >= 0 && basis[i] < basis[leave])) {
          best = ratio;
          leave = i;
        }
      }
    }
    if (leave < 0) break;
    T.row(leave) /= T(leave, enter);
    for (int i = 0; i <= rows; ++i)
      if (i != leave && T(i, enter) != 0) T.row(i) -= T(i, enter) * T.row(leave);
    basis[leave] = enter;
  }
  Eigen::VectorXd sol = Eigen::VectorXd::Zero(vars);
  for (int i = 0; i < rows; ++i)
    if (basis[i] < vars) sol[basis[i]] = T(i, cols - 1);
  if (center) *center = sol.head(dim).array() - guard;
  return sol[dim] - shift;
}

}  // namespace betatess
