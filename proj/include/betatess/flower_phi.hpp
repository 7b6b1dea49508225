#pragma once

#include <functional>
#include <string>
#include <vector>

#include "betatess/geometry.hpp"
#include "betatess/point_process.hpp"
#include "betatess/rng.hpp"

namespace betatess {

// Closed-form measure of the downward paraboloid with the given apex.
double mu_paraboloid(const ModelParams& p, const WeightedPoint& apex);

// Content of the singleton body {w} seen from x: the measure of the paraboloid with apex (w, power of w).
double phi_point(const ModelParams& p, const WeightedPoint& x, const Vector& w);

// Density m of the bounding half-space offsets at reference height kappa, by direct radial quadrature.
// Throws OutOfDomain for kappa = -1 and t >= 1.
double density_m(const ModelParams& p, double t);

// Its cumulative int_{-inf}^t m, computed by its own radial quadrature. It equals the content
// contribution of a single direction whose support value is t.
double cumulative_m(const ModelParams& p, double t);

// Tabulated m and cumulative at reference height kappa, with log-Hermite interpolation.
class DensityTable {
 public:
  explicit DensityTable(const ModelParams& p, double step = 0.01);

  const ModelParams& params() const { return p_; }
  double density(double t) const;
  double cumulative(double t) const;
  // Largest relative interpolation error observed on midpoint probes during construction.
  double error_estimate() const { return err_; }
  std::string fingerprint() const;

  // t values and the tabulated columns.
  const std::vector<double>& grid() const { return t_; }
  const std::vector<double>& m_values() const { return m_; }
  const std::vector<double>& cumulative_values() const { return cum_; }

  void save_csv(const std::string& path) const;
  // Throws VersionMismatch when the fingerprint header does not match params and step.
  static DensityTable load_csv(const std::string& path, const ModelParams& p, double step = 0.01);

 private:
  DensityTable(const ModelParams& p, double step, bool);
  void finish();
  double z_of(double t) const;
  double t_of(double z) const;
  double dt_dz(double z) const;

  ModelParams p_;
  double step_ = 0.01;
  double z_lo_ = 0, z_hi_ = 0;
  std::vector<double> t_, m_, cum_;
  std::vector<double> log_cum_, dlog_cum_, log_m_;
  double err_ = 0;
};

enum class PhiMethod { ClosedForm, Quadrature, MonteCarlo };

std::string to_string(PhiMethod m);

struct PhiResult {
  double value = 0;
  PhiMethod method = PhiMethod::Quadrature;
  double std_error = 0;
  // Content of the singleton {v} per unit direction (M0) and the remainder of the value.
  double constant_part = 0;
  double directional_part = 0;
  long long samples = 0;
  long long accepted = 0;
};

// Phi-content of (x, K) for a polytope K given in absolute coordinates; d = 1 and d = 2 by quadrature over
// the normal cones, d >= 3 by Monte Carlo with a fixed stream.
PhiResult phi_content(const DensityTable& table, const WeightedPoint& x, const Polytope& K);
// Same, for K given by its vertices only (d = 2).
PhiResult phi_content_vertices(const DensityTable& table, const WeightedPoint& x, const std::vector<Vector>& verts);

// Phi-content of the ball of radius r centred at the nucleus.
PhiResult phi_content_ball(const DensityTable& table, const WeightedPoint& x, double r);

// Monte Carlo estimate: samples the model measure on an enclosing scaled paraboloid and tests flower
// membership through the support function of K - v.
PhiResult phi_content_mc(const ModelParams& p, const WeightedPoint& x, const Polytope& K, Rng& rng, long long n);
PhiResult phi_content_mc_ball(const ModelParams& p, const WeightedPoint& x, double r, Rng& rng, long long n);

// Generic form: support is the support function of the body relative to the nucleus, R its largest norm.
PhiResult phi_content_mc(const ModelParams& p, const WeightedPoint& x,
                         const std::function<double(const Vector&)>& support, double R, Rng& rng, long long n);

}  // namespace betatess
