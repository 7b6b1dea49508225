#pragma once

#include <vector>

#include <Eigen/Dense>

namespace betatess {

// Facet data is stored flat with stride dim: facet f owns entries [f*dim, (f+1)*dim).
struct ConvexHull {
  int dim = 0;
  std::vector<int> facet_vertices;
  // Neighbor across the ridge opposite each facet vertex.
  std::vector<int> facet_neighbors;
  // Unit outward normals and offsets: interior points satisfy <n, p> <= offset.
  std::vector<double> normals;
  std::vector<double> offsets;
  std::vector<int> vertices;

  int facet_count() const { return dim == 0 ? 0 : static_cast<int>(facet_vertices.size()) / dim; }
};

// Quickhull over the columns of pts (dim between 2 and 5). Throws DegenerateInput when the points are flat.
ConvexHull convex_hull(const Eigen::MatrixXd& pts);

// Lower facets of the lifted points (v, |v|^2 + h), i.e. the regular triangulation.
struct LowerHull {
  int d = 0;
  // d+1 site indices per simplex, sorted increasingly.
  std::vector<int> simplices;
  // Neighboring simplex opposite each sorted vertex, -1 on the boundary.
  std::vector<int> neighbors;

  int simplex_count() const { return static_cast<int>(simplices.size()) / (d + 1); }
};

// v is d x n (d between 1 and 4). Throws DegenerateConfiguration when general position fails beyond tolerance.
LowerHull lower_hull_lifted(const Eigen::MatrixXd& v, const Eigen::VectorXd& h);

}  // namespace betatess
