#include "betatess/hull.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "betatess/error.hpp"

namespace betatess {
namespace {

template <int D>
using Vec = Eigen::Matrix<double, D, 1>;

template <int D>
struct PlainSet {
  const Eigen::MatrixXd& x;
  int size() const { return static_cast<int>(x.cols()); }
  Vec<D> diff(int p, int a) const { return Vec<D>(x.col(p) - x.col(a)); }
};

// Lifted coordinates (v, |v|^2 + h) seen from an anchor after the shear that makes the anchor's tangent plane
// horizontal. Differences stay at the local length scale, whatever the distance to the origin.
template <int D>
struct LiftedSet {
  const Eigen::MatrixXd& v;
  const Eigen::VectorXd& h;
  int size() const { return static_cast<int>(v.cols()); }
  Vec<D> diff(int p, int a) const {
    Vec<D> q;
    double s = 0;
    for (int k = 0; k < D - 1; ++k) {
      const double t = v(k, p) - v(k, a);
      q[k] = t;
      s += t * t;
    }
    q[D - 1] = s + (h[p] - h[a]);
    return q;
  }
};

template <int D, class Set>
class Quickhull {
 public:
  struct Facet {
    std::array<int, D> vtx{};
    std::array<int, D> nbr{};
    Vec<D> n = Vec<D>::Zero();
    std::vector<int> outside;
    int far = -1;
    double far_dist = 0;
    int stamp = -1;
    bool visible = false;
    bool alive = true;
  };

  Quickhull(const Set& set, double eps) : set_(set), eps_(eps) {}

  void run() {
    const int n = set_.size();
    if (n < D + 1) throw Error(ErrorCode::DegenerateInput, "too few points for a full-dimensional hull");
    initial_simplex(n);
    std::vector<int> stack;
    for (int f = 0; f < static_cast<int>(facets_.size()); ++f)
      if (!facets_[f].outside.empty()) stack.push_back(f);

    std::vector<int> visible, created;
    std::vector<std::pair<int, int>> horizon;
    std::vector<std::pair<std::array<int, D>, std::pair<int, int>>> ridges;
    while (!stack.empty()) {
      const int f0 = stack.back();
      stack.pop_back();
      if (!facets_[f0].alive || facets_[f0].outside.empty()) continue;
      const int p = facets_[f0].far;
      ++stamp_;

      visible.assign(1, f0);
      facets_[f0].stamp = stamp_;
      facets_[f0].visible = true;
      for (std::size_t i = 0; i < visible.size(); ++i) {
        const int F = visible[i];
        for (int k = 0; k < D; ++k) {
          const int g = facets_[F].nbr[k];
          Facet& G = facets_[g];
          if (G.stamp == stamp_) continue;
          G.stamp = stamp_;
          G.visible = distance(g, p) > tolerance(g, p);
          if (G.visible) visible.push_back(g);
        }
      }

      horizon.clear();
      for (int F : visible)
        for (int k = 0; k < D; ++k)
          if (!facets_[facets_[F].nbr[k]].visible) horizon.emplace_back(F, k);

      created.clear();
      ridges.clear();
      for (auto [F, k] : horizon) {
        const int nf = allocate();
        Facet& N = facets_[nf];
        N.vtx = facets_[F].vtx;
        N.vtx[k] = p;
        const int g = facets_[F].nbr[k];
        N.nbr[k] = g;
        for (int j = 0; j < D; ++j)
          if (facets_[g].nbr[j] == F) facets_[g].nbr[j] = nf;
        make_normal(nf);
        created.push_back(nf);
        for (int m = 0; m < D; ++m) {
          if (m == k) continue;
          std::array<int, D> key;
          key.fill(-1);
          int c = 0;
          for (int j = 0; j < D; ++j)
            if (j != m && j != k) key[c++] = N.vtx[j];
          std::sort(key.begin(), key.begin() + c);
          ridges.push_back({key, {nf, m}});
        }
      }
      std::sort(ridges.begin(), ridges.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      if (ridges.size() % 2 != 0)
        throw Error(ErrorCode::DegenerateInput, "hull horizon is not a closed ridge cycle");
      for (std::size_t i = 0; i < ridges.size(); i += 2) {
        if (ridges[i].first != ridges[i + 1].first)
          throw Error(ErrorCode::DegenerateInput, "hull horizon is not a closed ridge cycle");
        const auto [fa, ma] = ridges[i].second;
        const auto [fb, mb] = ridges[i + 1].second;
        facets_[fa].nbr[ma] = fb;
        facets_[fb].nbr[mb] = fa;
      }

      for (int F : visible) {
        for (int q : facets_[F].outside) {
          if (q == p) continue;
          assign(q, created);
        }
      }
      for (int F : visible) release(F);
      for (int nf : created)
        if (!facets_[nf].outside.empty()) stack.push_back(nf);
    }
  }

  double distance(int f, int p) const { return facets_[f].n.dot(set_.diff(p, facets_[f].vtx[0])); }

  double tolerance(int f, int p) const {
    return eps_ + 1e-13 * set_.diff(p, facets_[f].vtx[0]).cwiseAbs().sum();
  }

  std::vector<int> alive_facets() const {
    std::vector<int> out;
    for (int f = 0; f < static_cast<int>(facets_.size()); ++f)
      if (facets_[f].alive) out.push_back(f);
    return out;
  }

  const Facet& facet(int f) const { return facets_[f]; }
  const std::vector<int>& flagged() const { return flagged_; }

 private:
  void initial_simplex(int n) {
    int p0 = 0;
    double lo = 0;
    for (int p = 1; p < n; ++p) {
      const double c = set_.diff(p, 0)[0];
      if (c < lo) lo = c, p0 = p;
    }
    std::vector<Vec<D>> basis;
    std::vector<int> chosen{p0};
    double scale = 0;
    for (int k = 0; k < D; ++k) {
      int best = -1;
      double best_res = -1;
      for (int p = 0; p < n; ++p) {
        Vec<D> r = set_.diff(p, p0);
        if (k == 0) scale = std::max(scale, r.cwiseAbs().sum());
        for (const auto& b : basis) r -= b.dot(r) * b;
        const double res = r.norm();
        if (res > best_res) best_res = res, best = p;
      }
      if (!(best_res > 10 * eps_ + 1e-12 * scale))
        throw Error(ErrorCode::DegenerateInput, "points lie in a hyperplane");
      Vec<D> r = set_.diff(best, p0);
      for (const auto& b : basis) r -= b.dot(r) * b;
      basis.push_back(r / r.norm());
      chosen.push_back(best);
    }
    for (int i = 0; i <= D; ++i) init_[i] = chosen[i];

    facets_.resize(D + 1);
    for (int i = 0; i <= D; ++i) {
      Facet& F = facets_[i];
      int c = 0;
      for (int j = 0; j <= D; ++j) {
        if (j == i) continue;
        F.vtx[c] = init_[j];
        F.nbr[c] = j;
        ++c;
      }
      make_normal(i);
    }
    std::vector<int> all(D + 1);
    std::iota(all.begin(), all.end(), 0);
    for (int p = 0; p < n; ++p) {
      if (std::find(init_.begin(), init_.end(), p) != init_.end()) continue;
      assign(p, all);
    }
  }

  void assign(int q, const std::vector<int>& candidates) {
    int best = -1;
    double best_dist = -1e300, best_tol = 0;
    for (int f : candidates) {
      const double dist = distance(f, q);
      if (dist > best_dist) best_dist = dist, best = f, best_tol = tolerance(f, q);
    }
    if (best_dist > best_tol) {
      Facet& F = facets_[best];
      F.outside.push_back(q);
      if (best_dist > F.far_dist || F.far < 0) F.far_dist = best_dist, F.far = q;
    } else if (best_dist > -best_tol) {
      flagged_.push_back(q);
    }
  }

  void make_normal(int f) {
    Facet& F = facets_[f];
    Eigen::Matrix<double, D - 1, D> M;
    for (int k = 1; k < D; ++k) M.row(k - 1) = set_.diff(F.vtx[k], F.vtx[0]).transpose();
    Vec<D> n;
    for (int j = 0; j < D; ++j) {
      Eigen::Matrix<double, D - 1, D - 1> S;
      int c = 0;
      for (int col = 0; col < D; ++col)
        if (col != j) S.col(c++) = M.col(col);
      n[j] = (j % 2 ? -1.0 : 1.0) * S.determinant();
    }
    const double len = n.norm();
    if (!(len > 0)) throw Error(ErrorCode::DegenerateInput, "zero-volume hull facet");
    n /= len;
    Vec<D> interior = Vec<D>::Zero();
    for (int i = 0; i <= D; ++i) interior += set_.diff(init_[i], F.vtx[0]);
    if (n.dot(interior) > 0) n = -n;
    F.n = n;
  }

  int allocate() {
    if (!free_.empty()) {
      const int f = free_.back();
      free_.pop_back();
      facets_[f] = Facet{};
      return f;
    }
    facets_.emplace_back();
    return static_cast<int>(facets_.size()) - 1;
  }

  void release(int f) {
    Facet& F = facets_[f];
    F.alive = false;
    std::vector<int>().swap(F.outside);
    free_.push_back(f);
  }

  const Set& set_;
  double eps_;
  std::array<int, D + 1> init_{};
  std::vector<Facet> facets_;
  std::vector<int> free_;
  std::vector<int> flagged_;
  int stamp_ = 0;
};

template <int D>
ConvexHull plain_hull(const Eigen::MatrixXd& pts) {
  const double extent = (pts.rowwise().maxCoeff() - pts.rowwise().minCoeff()).maxCoeff();
  PlainSet<D> set{pts};
  Quickhull<D, PlainSet<D>> qh(set, 1e-11 * std::max(extent, 1e-300));
  qh.run();
  ConvexHull out;
  out.dim = D;
  const auto alive = qh.alive_facets();
  std::vector<int> remap;
  int max_id = 0;
  for (int f : alive) max_id = std::max(max_id, f);
  remap.assign(max_id + 1, -1);
  for (std::size_t i = 0; i < alive.size(); ++i) remap[alive[i]] = static_cast<int>(i);
  std::vector<char> is_vertex(pts.cols(), 0);
  for (int f : alive) {
    const auto& F = qh.facet(f);
    for (int k = 0; k < D; ++k) {
      out.facet_vertices.push_back(F.vtx[k]);
      out.facet_neighbors.push_back(remap[F.nbr[k]]);
      out.normals.push_back(F.n[k]);
      is_vertex[F.vtx[k]] = 1;
    }
    out.offsets.push_back(F.n.dot(Vec<D>(pts.col(F.vtx[0]))));
  }
  for (int p = 0; p < static_cast<int>(pts.cols()); ++p)
    if (is_vertex[p]) out.vertices.push_back(p);
  return out;
}

// Characteristic squared length of a lifted site set: squared mean spacing plus the spread of the heights.
double lifted_scale(const Eigen::MatrixXd& v, const Eigen::VectorXd& h) {
  const int d = static_cast<int>(v.rows());
  const int n = static_cast<int>(v.cols());
  const Eigen::VectorXd ext = v.rowwise().maxCoeff() - v.rowwise().minCoeff();
  double vol = 1;
  for (int k = 0; k < d; ++k) vol *= std::max(ext[k], 1e-300);
  const double spacing2 = std::pow(vol / n, 2.0 / d);
  std::vector<double> hs(h.data(), h.data() + n);
  std::nth_element(hs.begin(), hs.begin() + n / 2, hs.end());
  const double med = hs[n / 2];
  for (auto& x : hs) x = std::abs(x - med);
  std::nth_element(hs.begin(), hs.begin() + n / 2, hs.end());
  return spacing2 + hs[n / 2];
}

template <int D>
LowerHull lifted_hull(const Eigen::MatrixXd& v, const Eigen::VectorXd& h) {
  constexpr int d = D - 1;
  LiftedSet<D> set{v, h};
  Quickhull<D, LiftedSet<D>> qh(set, 1e-11 * lifted_scale(v, h));
  try {
    qh.run();
  } catch (const Error& e) {
    throw Error(ErrorCode::DegenerateConfiguration, e.what());
  }

  const auto alive = qh.alive_facets();
  int max_id = 0;
  for (int f : alive) max_id = std::max(max_id, f);
  std::vector<int> remap(max_id + 1, -1);
  std::vector<int> lower;
  for (int f : alive) {
    if (qh.facet(f).n[D - 1] < -1e-12) {
      remap[f] = static_cast<int>(lower.size());
      lower.push_back(f);
    }
  }

  for (int f : lower) {
    const auto& F = qh.facet(f);
    for (int k = 0; k < D; ++k) {
      const int g = F.nbr[k];
      if (remap[g] < 0) continue;
      const auto& G = qh.facet(g);
      int opposite = -1;
      for (int j = 0; j < D; ++j)
        if (std::find(F.vtx.begin(), F.vtx.end(), G.vtx[j]) == F.vtx.end()) opposite = G.vtx[j];
      if (qh.distance(f, opposite) >= -10 * qh.tolerance(f, opposite))
        throw Error(ErrorCode::DegenerateConfiguration, "d+2 sites lie on one downward paraboloid");
    }
  }

  // Points that were nearly coplanar with some facet during construction: reject if they sit on a lower facet.
  if (!qh.flagged().empty()) {
    std::vector<char> is_vertex(v.cols(), 0);
    for (int f : lower)
      for (int k = 0; k < D; ++k) is_vertex[qh.facet(f).vtx[k]] = 1;
    for (int q : qh.flagged()) {
      if (is_vertex[q]) continue;
      for (int f : lower) {
        const auto& F = qh.facet(f);
        Eigen::Matrix<double, d, d> A;
        for (int k = 1; k < D; ++k) A.col(k - 1) = v.col(F.vtx[k]) - v.col(F.vtx[0]);
        const Eigen::Matrix<double, d, 1> lam = A.partialPivLu().solve(
            Eigen::Matrix<double, d, 1>(v.col(q) - v.col(F.vtx[0])));
        if (lam.minCoeff() < -1e-9 || lam.sum() > 1 + 1e-9) continue;
        if (std::abs(qh.distance(f, q)) <= 10 * qh.tolerance(f, q))
          throw Error(ErrorCode::DegenerateConfiguration, "a site lies on an empty paraboloid boundary");
      }
    }
  }

  LowerHull out;
  out.d = d;
  out.simplices.reserve(lower.size() * D);
  out.neighbors.reserve(lower.size() * D);
  for (int f : lower) {
    const auto& F = qh.facet(f);
    std::array<int, D> order;
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return F.vtx[a] < F.vtx[b]; });
    for (int k = 0; k < D; ++k) {
      out.simplices.push_back(F.vtx[order[k]]);
      out.neighbors.push_back(remap[F.nbr[order[k]]]);
    }
  }
  return out;
}

}  // namespace

ConvexHull convex_hull(const Eigen::MatrixXd& pts) {
  switch (pts.rows()) {
    case 2: return plain_hull<2>(pts);
    case 3: return plain_hull<3>(pts);
    case 4: return plain_hull<4>(pts);
    case 5: return plain_hull<5>(pts);
    default: throw Error(ErrorCode::DegenerateInput, "convex hull supports dimensions 2 to 5");
  }
}

LowerHull lower_hull_lifted(const Eigen::MatrixXd& v, const Eigen::VectorXd& h) {
  switch (v.rows()) {
    case 1: return lifted_hull<2>(v, h);
    case 2: return lifted_hull<3>(v, h);
    case 3: return lifted_hull<4>(v, h);
    case 4: return lifted_hull<5>(v, h);
    default: throw Error(ErrorCode::DegenerateInput, "lifting supports spatial dimensions 1 to 4");
  }
}

}  // namespace betatess
