#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "betatess/error.hpp"

namespace betatess {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Vector = VectorX<double>;

// A point (v, h) of R^d x R.
template <typename Scalar>
struct WeightedPointT {
  VectorX<Scalar> v;
  Scalar h{0};
};

// H^-(u, t) = {w : <w, u> <= t}.
template <typename Scalar>
struct HalfSpaceT {
  VectorX<Scalar> u;
  Scalar t{0};
};

// {(w, h') : h' <= apex_h - |w - apex_v|^2}.
template <typename Scalar>
struct ParaboloidT {
  VectorX<Scalar> apex_v;
  Scalar apex_h{0};

  bool contains(const VectorX<Scalar>& w, Scalar h, Scalar tol = Scalar(0)) const {
    return h <= apex_h - (w - apex_v).squaredNorm() + tol;
  }
};

using WeightedPoint = WeightedPointT<double>;
using HalfSpace = HalfSpaceT<double>;
using Paraboloid = ParaboloidT<double>;

template <typename Scalar>
Scalar power_value(const WeightedPointT<Scalar>& x, const VectorX<Scalar>& w) {
  return (w - x.v).squaredNorm() + x.h;
}

template <typename Scalar>
WeightedPointT<Scalar> scale(const WeightedPointT<Scalar>& x, Scalar c) {
  if (!(c > Scalar(0))) throw Error(ErrorCode::NonPositiveScale, "scale factor must be positive");
  return {c * x.v, c * c * x.h};
}

template <typename Scalar>
std::vector<WeightedPointT<Scalar>> scale(const std::vector<WeightedPointT<Scalar>>& xs, Scalar c) {
  std::vector<WeightedPointT<Scalar>> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(scale(x, c));
  return out;
}

template <typename Scalar>
ParaboloidT<Scalar> scale(const ParaboloidT<Scalar>& p, Scalar c) {
  if (!(c > Scalar(0))) throw Error(ErrorCode::NonPositiveScale, "scale factor must be positive");
  return {c * p.apex_v, c * c * p.apex_h};
}

// Power bisector side of x against x', stored with a unit normal.
template <typename Scalar>
HalfSpaceT<Scalar> bounding_halfspace(const WeightedPointT<Scalar>& x, const WeightedPointT<Scalar>& xp) {
  const VectorX<Scalar> diff = xp.v - x.v;
  const Scalar len = diff.norm();
  if (!(len > Scalar(0))) throw Error(ErrorCode::CoincidentSites, "sites share a spatial location");
  const Scalar t = (diff.dot(xp.v + x.v) + xp.h - x.h) / (Scalar(2) * len);
  return {diff / len, t};
}

template <typename Scalar>
WeightedPointT<Scalar> arc_point(const WeightedPointT<Scalar>& x, const HalfSpaceT<Scalar>& H, Scalar alpha) {
  const Scalar tau = H.t - x.v.dot(H.u);
  return {x.v + alpha * H.u, x.h + tau * tau - (tau - alpha) * (tau - alpha)};
}

// Downward paraboloid through d+1 weighted points; solved in coordinates relative to the first point.
template <typename Scalar>
ParaboloidT<Scalar> circumparaboloid(const std::vector<WeightedPointT<Scalar>>& pts) {
  const Eigen::Index d = pts.empty() ? 0 : pts[0].v.size();
  if (static_cast<Eigen::Index>(pts.size()) != d + 1 || d < 1)
    throw Error(ErrorCode::DegenerateInput, "circumparaboloid needs exactly d+1 points");
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Mat A(d, d);
  VectorX<Scalar> rhs(d);
  Scalar scale_len(0);
  for (Eigen::Index i = 0; i < d; ++i) {
    const VectorX<Scalar> delta = pts[i + 1].v - pts[0].v;
    A.row(i) = Scalar(2) * delta.transpose();
    rhs(i) = pts[i + 1].h - pts[0].h + delta.squaredNorm();
    using std::max;
    scale_len = max(scale_len, delta.norm());
  }
  using std::abs;
  using std::pow;
  const Scalar det = (A / Scalar(2)).determinant();
  if (!(abs(det) > Scalar(1e-12) * pow(scale_len, Scalar(d))))
    throw Error(ErrorCode::DegenerateInput, "spatial parts are affinely dependent");
  const VectorX<Scalar> z = A.partialPivLu().solve(rhs);
  return {pts[0].v + z, pts[0].h + z.squaredNorm()};
}

template <typename Scalar>
Scalar orientation_det(const std::vector<VectorX<Scalar>>& vs) {
  const Eigen::Index d = vs[0].size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> A(d, d);
  for (Eigen::Index i = 0; i < d; ++i) A.col(i) = vs[i + 1] - vs[0];
  return A.determinant();
}

// Bounded intersection of half-spaces with its vertices and incidences.
struct Polytope {
  int dim = 0;
  std::vector<HalfSpace> halfspaces;
  std::vector<Vector> vertices;
  // For each vertex, indices into halfspaces of the facets through it.
  std::vector<std::vector<int>> vertex_facets;
  // For each stored half-space, its index in the caller's input list.
  std::vector<int> source;
  // d = 2 only: vertices are counter-clockwise and edge i joins vertex i to vertex i+1.
  bool ordered = false;

  int facet_count() const { return static_cast<int>(halfspaces.size()); }
  int vertex_count() const { return static_cast<int>(vertices.size()); }
};

double support_function(const Polytope& K, const Vector& u);

enum class CellStatus { Bounded, Empty, Unbounded };

struct HalfspaceIntersection {
  CellStatus status = CellStatus::Empty;
  Polytope polytope;
};

// Intersects the half-spaces with a guard box [-guard, guard]^d; a guard supporting a facet means Unbounded.
HalfspaceIntersection intersect_halfspaces(const std::vector<HalfSpace>& halfspaces, int dim, double guard,
                                           double tol = 1e-10);

// Throws Unbounded or Empty.
Polytope polytope_from_halfspaces(const std::vector<HalfSpace>& halfspaces);

// Largest inscribed ball; returns radius (negative if the system is infeasible).
double chebyshev_center(const std::vector<HalfSpace>& halfspaces, int dim, double guard, Vector* center);

}  // namespace betatess
