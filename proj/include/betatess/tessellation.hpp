#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "betatess/geometry.hpp"
#include "betatess/point_process.hpp"

namespace betatess {

struct Triangulation {
  int d = 0;
  Eigen::MatrixXd v;
  Eigen::VectorXd h;
  // d+1 sorted site indices per simplex, simplices sorted lexicographically.
  std::vector<int> simplices;
  // Sorted neighbor lists.
  std::vector<std::vector<int>> adjacency;
  // Whether the heights were jittered to escape a degenerate configuration.
  bool jittered = false;
  // Half-width of the unboundedness guard box and the cell clipping tolerance.
  double guard = 1;
  double cell_tol = 1e-10;

  int site_count() const { return static_cast<int>(h.size()); }
  int simplex_count() const { return d == 0 ? 0 : static_cast<int>(simplices.size()) / (d + 1); }
  bool is_vertex(int i) const { return !adjacency[i].empty(); }
  WeightedPoint site(int i) const { return {v.col(i), h[i]}; }
};

Triangulation build_weighted_delaunay(const Eigen::MatrixXd& v, const Eigen::VectorXd& h);
Triangulation build_weighted_delaunay(const PointSample& s);
// On DegenerateConfiguration, jitters the heights by 1e-9 * scale once and retries.
Triangulation build_weighted_delaunay_jittered(const Eigen::MatrixXd& v, const Eigen::VectorXd& h, std::uint64_t seed);

// Exhaustive empty-paraboloid enumeration over all (d+1)-subsets.
Triangulation brute_force_delaunay(const Eigen::MatrixXd& v, const Eigen::VectorXd& h);

struct CertificationReport {
  bool spatial_ok = false;
  bool height_ok = false;
  bool leak_ok = true;
  double max_apex = 0;
  // kappa = -1: largest eps under which condition (b) holds.
  double suggested_eps = 0;
  double leak = 0;
  std::vector<std::string> reasons;

  bool certified() const { return spatial_ok && height_ok && leak_ok; }
};

struct CellRecord {
  int site = -1;
  CellStatus status = CellStatus::Empty;
  Polytope cell;
  // Site index of the neighbor generating each facet of cell.
  std::vector<int> facet_sites;
  int n_facets = 0;
  std::vector<Paraboloid> flower;
  bool certified = false;
  CertificationReport report;
};

// Laguerre cell from the bounding half-spaces of the triangulation neighbors.
CellRecord laguerre_cell(const Triangulation& tri, int site);

// Laguerre cell against all other sites (no triangulation needed); guard is the half-width of the
// detection box around the site.
HalfspaceIntersection laguerre_cell_all_sites(const Eigen::MatrixXd& v, const Eigen::VectorXd& h, int site,
                                              double guard);

int degree(const Triangulation& tri, int site);

std::vector<Paraboloid> voronoi_flower(const CellRecord& rec, const WeightedPoint& x);

CertificationReport certify_cell(const CellRecord& rec, const SampleDomain& dom, const ModelParams& p,
                                 double leak_budget = 1e-4);

struct TessellationOptions {
  bool jitter = true;
  double leak_budget = 1e-4;
  // kappa = -1: refinement rounds for cells failing the height condition.
  int max_refinements = 6;
  // Refinement also stops once the expected point count would exceed this.
  double max_points = 3e6;
  // Cells are computed only for sites in inner_box unless set.
  bool all_cells = false;
};

struct Tessellation {
  PointSample sample;
  Triangulation tri;
  // Cells of the analysis sites, in increasing site order.
  std::vector<CellRecord> cells;
  int refinements = 0;
  // Cells dropped after the refinement budget ran out.
  int discarded = 0;
  // Whether the budget that stopped refinement was the point cap.
  bool point_cap_hit = false;
};

Tessellation tessellate(PointSample sample, const TessellationOptions& opt = {});

}  // namespace betatess
