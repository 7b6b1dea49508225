#include "betatess/tessellation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "betatess/hull.hpp"
#include "betatess/rng.hpp"

namespace betatess {
namespace {

double spacing_of(const Eigen::MatrixXd& v) {
  const int d = static_cast<int>(v.rows());
  const int n = std::max<int>(1, static_cast<int>(v.cols()));
  if (v.cols() == 0) return 1;
  const Eigen::VectorXd ext = v.rowwise().maxCoeff() - v.rowwise().minCoeff();
  double vol = 1;
  for (int k = 0; k < d; ++k) vol *= std::max(ext[k], 1e-12);
  return std::pow(vol / n, 1.0 / d);
}

void finish(Triangulation& tri) {
  const int d1 = tri.d + 1;
  const int m = tri.simplex_count();
  std::vector<int> order(m);
  for (int i = 0; i < m; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return std::lexicographical_compare(tri.simplices.begin() + a * d1, tri.simplices.begin() + (a + 1) * d1,
                                        tri.simplices.begin() + b * d1, tri.simplices.begin() + (b + 1) * d1);
  });
  std::vector<int> sorted;
  sorted.reserve(tri.simplices.size());
  for (int i : order) sorted.insert(sorted.end(), tri.simplices.begin() + i * d1, tri.simplices.begin() + (i + 1) * d1);
  tri.simplices.swap(sorted);

  tri.adjacency.assign(tri.site_count(), {});
  for (int s = 0; s < m; ++s) {
    const int* sv = tri.simplices.data() + s * d1;
    for (int a = 0; a < d1; ++a)
      for (int b = 0; b < d1; ++b)
        if (a != b) tri.adjacency[sv[a]].push_back(sv[b]);
  }
  for (auto& adj : tri.adjacency) {
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
  }
  if (tri.site_count() > 0) {
    const Eigen::VectorXd ext = tri.v.rowwise().maxCoeff() - tri.v.rowwise().minCoeff();
    tri.guard = 2 * std::max(ext.maxCoeff(), 1.0);
    tri.cell_tol = 1e-10 * std::max(1.0, spacing_of(tri.v));
  }
}

double height_tolerance(const Eigen::MatrixXd& v, const Eigen::VectorXd& h) {
  const double s = spacing_of(v);
  const double hs = h.size() ? (h.maxCoeff() - h.minCoeff()) : 0.0;
  return 1e-10 * (s * s + hs);
}

}  // namespace

Triangulation build_weighted_delaunay(const Eigen::MatrixXd& v, const Eigen::VectorXd& h) {
  Triangulation tri;
  tri.d = static_cast<int>(v.rows());
  tri.v = v;
  tri.h = h;
  const int n = static_cast<int>(v.cols());
  if (n == tri.d + 1) {
    std::vector<Vector> vs;
    for (int i = 0; i < n; ++i) vs.push_back(v.col(i));
    double scale = 0;
    for (int i = 1; i < n; ++i) scale = std::max(scale, (vs[i] - vs[0]).norm());
    if (std::abs(orientation_det(vs)) <= 1e-12 * std::pow(scale, tri.d))
      throw Error(ErrorCode::DegenerateConfiguration, "sites are affinely dependent");
    for (int i = 0; i < n; ++i) tri.simplices.push_back(i);
  } else if (n > tri.d + 1) {
    const LowerHull lh = lower_hull_lifted(v, h);
    tri.simplices = lh.simplices;
  }
  finish(tri);
  return tri;
}

Triangulation build_weighted_delaunay(const PointSample& s) { return build_weighted_delaunay(s.v, s.h); }

Triangulation build_weighted_delaunay_jittered(const Eigen::MatrixXd& v, const Eigen::VectorXd& h,
                                               std::uint64_t seed) {
  try {
    return build_weighted_delaunay(v, h);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateConfiguration) throw;
  }
  const double s = spacing_of(v);
  const double amp = 1e-9 * std::max(s * s, 1e-300);
  Rng rng(seed, 0, 0x6a177e5ULL);
  Eigen::VectorXd hj = h;
  for (int i = 0; i < hj.size(); ++i) hj[i] += amp * (2 * rng.uniform() - 1);
  Triangulation tri = build_weighted_delaunay(v, hj);
  tri.h = h;
  tri.jittered = true;
  return tri;
}

Triangulation brute_force_delaunay(const Eigen::MatrixXd& v, const Eigen::VectorXd& h) {
  Triangulation tri;
  tri.d = static_cast<int>(v.rows());
  tri.v = v;
  tri.h = h;
  const int n = static_cast<int>(v.cols());
  const int d1 = tri.d + 1;
  const double tol = height_tolerance(v, h);
  std::vector<int> pick(d1);
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == d1) {
      std::vector<WeightedPoint> pts;
      for (int i : pick) pts.push_back({v.col(i), h[i]});
      Paraboloid P;
      try {
        P = circumparaboloid(pts);
      } catch (const Error&) {
        return;
      }
      for (int j = 0; j < n; ++j) {
        if (std::find(pick.begin(), pick.end(), j) != pick.end()) continue;
        const double gap = P.apex_h - (Vector(v.col(j)) - P.apex_v).squaredNorm() - h[j];
        if (gap > tol) return;
        if (gap > -tol) throw Error(ErrorCode::DegenerateConfiguration, "d+2 sites lie on one downward paraboloid");
      }
      tri.simplices.insert(tri.simplices.end(), pick.begin(), pick.end());
      return;
    }
    for (int i = start; i < n; ++i) {
      pick[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  if (n >= d1) rec(0, 0);
  finish(tri);
  return tri;
}

HalfspaceIntersection laguerre_cell_all_sites(const Eigen::MatrixXd& v, const Eigen::VectorXd& h, int site,
                                              double guard) {
  const WeightedPoint x{v.col(site), h[site]};
  std::vector<HalfSpace> hs;
  std::vector<int> ids;
  for (int j = 0; j < v.cols(); ++j) {
    if (j == site) continue;
    HalfSpace b = bounding_halfspace(x, WeightedPoint{v.col(j), h[j]});
    b.t -= b.u.dot(x.v);
    hs.push_back(b);
    ids.push_back(j);
  }
  HalfspaceIntersection r = intersect_halfspaces(hs, static_cast<int>(v.rows()), guard,
                                                 1e-10 * std::max(1.0, spacing_of(v)));
  for (auto& w : r.polytope.vertices) w += x.v;
  for (auto& b : r.polytope.halfspaces) b.t += b.u.dot(x.v);
  for (auto& s : r.polytope.source) s = ids[s];
  return r;
}

CellRecord laguerre_cell(const Triangulation& tri, int site) {
  CellRecord rec;
  rec.site = site;
  const auto& nbrs = tri.adjacency[site];
  if (nbrs.empty()) {
    rec.status = CellStatus::Empty;
    return rec;
  }
  const WeightedPoint x = tri.site(site);
  std::vector<HalfSpace> hs;
  hs.reserve(nbrs.size());
  for (int j : nbrs) {
    HalfSpace b = bounding_halfspace(x, tri.site(j));
    b.t -= b.u.dot(x.v);
    hs.push_back(b);
  }
  HalfspaceIntersection r = intersect_halfspaces(hs, tri.d, tri.guard, tri.cell_tol);
  rec.status = r.status;
  if (r.status != CellStatus::Bounded) return rec;
  rec.cell = std::move(r.polytope);
  for (auto& w : rec.cell.vertices) w += x.v;
  for (auto& b : rec.cell.halfspaces) b.t += b.u.dot(x.v);
  for (int s : rec.cell.source) rec.facet_sites.push_back(nbrs[s]);
  rec.n_facets = rec.cell.facet_count();
  rec.flower = voronoi_flower(rec, x);
  return rec;
}

int degree(const Triangulation& tri, int site) {
  if (site < 0 || site >= tri.site_count() || tri.adjacency[site].empty())
    throw Error(ErrorCode::NotAVertex, "site is not a vertex of the triangulation");
  return static_cast<int>(tri.adjacency[site].size());
}

std::vector<Paraboloid> voronoi_flower(const CellRecord& rec, const WeightedPoint& x) {
  if (rec.status != CellStatus::Bounded) throw Error(ErrorCode::UnboundedCell, "flower needs a bounded cell");
  std::vector<Paraboloid> out;
  out.reserve(rec.cell.vertices.size());
  for (const auto& w : rec.cell.vertices) out.push_back({w, power_value(x, w)});
  return out;
}

CertificationReport certify_cell(const CellRecord& rec, const SampleDomain& dom, const ModelParams& p,
                                 double leak_budget) {
  CertificationReport rep;
  if (rec.status != CellStatus::Bounded) {
    rep.spatial_ok = rep.height_ok = rep.leak_ok = false;
    rep.reasons.push_back(rec.status == CellStatus::Empty ? "empty" : "unbounded");
    return rep;
  }
  rep.max_apex = -std::numeric_limits<double>::infinity();
  for (const auto& P : rec.flower) rep.max_apex = std::max(rep.max_apex, P.apex_h);
  rep.spatial_ok = true;
  if (p.kappa == 1) {
    rep.height_ok = rep.max_apex <= dom.h_max;
    for (const auto& P : rec.flower)
      if (dom.box.inner_distance(P.apex_v) < std::sqrt(std::max(P.apex_h, 0.0))) rep.spatial_ok = false;
  } else {
    rep.height_ok = rep.max_apex <= -dom.eps;
    rep.suggested_eps = std::max(0.0, -rep.max_apex);
    for (const auto& P : rec.flower) {
      const double reach = dom.has_far_tier() ? std::sqrt(std::max(P.apex_h + dom.far_depth, 0.0)) : 0.0;
      if (dom.box.inner_distance(P.apex_v) < reach) rep.spatial_ok = false;
      const double rho = dom.far_box.inner_distance(P.apex_v);
      rep.leak += rho > 0 ? leak_bound(p, rho) : std::numeric_limits<double>::infinity();
    }
    rep.leak_ok = rep.leak <= leak_budget;
  }
  if (!rep.spatial_ok) rep.reasons.push_back("spatial");
  if (!rep.height_ok) rep.reasons.push_back("height");
  if (!rep.leak_ok) rep.reasons.push_back("leak");
  return rep;
}

Tessellation tessellate(PointSample sample, const TessellationOptions& opt) {
  Tessellation out;
  const ModelParams& p = sample.params;
  for (int round = 0;; ++round) {
    out.tri = opt.jitter ? build_weighted_delaunay_jittered(sample.v, sample.h, sample.seed ^ sample.replicate)
                         : build_weighted_delaunay(sample.v, sample.h);
    out.cells.clear();
    int height_failures = 0;
    for (int i = 0; i < out.tri.site_count(); ++i) {
      if (!opt.all_cells && !sample.domain.inner_box.contains(out.tri.v.col(i))) continue;
      CellRecord rec = laguerre_cell(out.tri, i);
      if (rec.status == CellStatus::Bounded) {
        rec.report = certify_cell(rec, sample.domain, p, opt.leak_budget);
        rec.certified = rec.report.certified();
        if (p.kappa == -1 && rec.report.spatial_ok && rec.report.leak_ok && !rec.report.height_ok &&
            sample.domain.inner_box.contains(out.tri.v.col(i)))
          ++height_failures;
      } else {
        rec.report = certify_cell(rec, sample.domain, p, opt.leak_budget);
      }
      out.cells.push_back(std::move(rec));
    }
    if (p.kappa != -1 || height_failures == 0) break;
    SampleDomain next = sample.domain;
    next.eps /= 2;
    const bool capped = expected_count(p, next) > opt.max_points;
    if (round >= opt.max_refinements || capped) {
      out.discarded = height_failures;
      out.point_cap_hit = capped;
      break;
    }
    sample = refine_eps(sample, next.eps);
    out.refinements = round + 1;
  }
  out.sample = std::move(sample);
  return out;
}

}  // namespace betatess
