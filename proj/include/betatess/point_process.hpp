#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "betatess/geometry.hpp"
#include "betatess/rng.hpp"

namespace betatess {

struct ModelParams {
  int kappa = 1;
  double beta = 0;
  double gamma = 1;
  int d = 2;

  // Throws InadmissibleParams with the violated constraint in the message.
  void validate() const;
  // kappa*beta + d/2 + 1, the exponent of the paraboloid measure.
  double exponent() const { return kappa * beta + d / 2.0 + 1; }
  // kappa*2*beta + d + 2, the homogeneity degree under (v, h) -> (cv, c^2 h).
  double homogeneity() const { return kappa * 2 * beta + d + 2; }
};

// Surface area of the unit sphere in R^d.
double sphere_area(int d);

// c_{d+1,beta} (kappa = +1) or c'_{d+1,beta} (kappa = -1).
double normalizing_constant(const ModelParams& p);
// Same formula with d+1 replaced by d.
double normalizing_constant_d(const ModelParams& p);

// Closed-form measure of the downward paraboloid with apex height h; requires kappa*h > 0.
double paraboloid_measure(const ModelParams& p, double h);

// The constant of the added-vertex bound: 2^-d times the measure of the paraboloid at height kappa.
double added_vertex_constant(const ModelParams& p);

// Height scale at which the paraboloid measure is 1; cells have diameter of order its square root.
double typical_height(const ModelParams& p);

struct Box {
  Vector lo, hi;

  static Box cube(int d, double lo, double hi);
  int dim() const { return static_cast<int>(lo.size()); }
  double volume() const;
  bool contains(const Vector& v) const;
  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& v) const {
    for (int k = 0; k < dim(); ++k)
      if (v[k] < lo[k] || v[k] > hi[k]) return false;
    return true;
  }
  Box expanded(double margin) const;
  // Distance from v (inside) to the complement; negative when v is outside.
  double inner_distance(const Vector& v) const;
  bool operator==(const Box& o) const { return lo == o.lo && hi == o.hi; }
};

// Sampled part of the space-height domain.
// kappa = +1: box x [0, h_max].
// kappa = -1: box x (-inf, -eps], plus (far_box \ box) x (-inf, -far_depth] when far_depth > 0.
struct SampleDomain {
  Box box;
  Box inner_box;
  double h_max = 0;
  double eps = 0;
  Box far_box;
  double far_depth = 0;

  bool has_far_tier() const { return far_depth > 0; }
  bool contains(int kappa, const Vector& v, double h) const;
};

struct PointSample {
  ModelParams params;
  SampleDomain domain;
  // d x n locations and n heights.
  Eigen::MatrixXd v;
  Eigen::VectorXd h;
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;
  // (eps_old, eps_new) per refinement.
  std::vector<std::pair<double, double>> layer_history;
  // Number of random layers drawn so far; the next layer uses this index.
  std::uint64_t layers = 0;

  int size() const { return static_cast<int>(h.size()); }
  WeightedPoint point(int i) const { return {v.col(i), h[i]}; }
};

// Expected number of points of the full domain.
double expected_count(const ModelParams& p, const SampleDomain& dom);

PointSample sample_beta(const ModelParams& p, const SampleDomain& dom, std::uint64_t seed,
                        std::uint64_t replicate = 0);
PointSample sample_beta_prime(const ModelParams& p, const SampleDomain& dom, std::uint64_t seed,
                              std::uint64_t replicate = 0);
// Dispatches on kappa.
PointSample sample_points(const ModelParams& p, const SampleDomain& dom, std::uint64_t seed,
                          std::uint64_t replicate = 0);

// Adds an independent layer with heights in (-eps_old, -eps_new] over the main box.
PointSample refine_eps(const PointSample& s, double eps_new);

// Coupled extension to a larger domain: points of new_dom not in the old domain are added from a fresh layer.
PointSample extend_domain(const PointSample& s, const SampleDomain& new_dom);

// Upper bound on the expected number of vertices with nucleus in inner_box lost to height truncation.
double tail_risk(const ModelParams& p, const SampleDomain& dom);
// Same bound per unit volume of the analysis window.
double tail_risk_density(const ModelParams& p, double cutoff);

// Smallest h_max (kappa = +1) or largest eps (kappa = -1) with tail_risk_density <= budget.
double height_cutoff_for_risk(const ModelParams& p, double budget);

// Flower mass of one paraboloid outside the ball of radius rho around its apex (kappa = -1): the
// probability budget of points missed beyond the far box.
double leak_bound(const ModelParams& p, double rho);

struct DomainOptions {
  double inner_side = 10;
  // Negative values select the defaults below.
  double padding = -1;
  double h_max = -1;
  double eps = -1;
  double far_depth = -1;
  double far_padding = -1;
  double risk_budget = 1e-3;
  double leak_budget = 1e-4;
};

// Inner window [0, L]^d padded by the spatial margin, with the default truncation policy.
SampleDomain make_domain(const ModelParams& p, const DomainOptions& opt);

double default_padding(const ModelParams& p);
double default_eps(const ModelParams& p);

}  // namespace betatess
