#pragma once

#include "paralab/core.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <queue>
#include <vector>

namespace paralab {

/// Weighted undirected edge of a graph space.
struct Edge {
  Index i = 0;
  Index j = 0;
  double weight = 1.0;
};

/// Lattice description retained by grid spaces (used by the finite-difference
/// generators). Point index = i0 + dims0 * (i1 + dims1 * i2).
struct GridGeometry {
  std::vector<Index> dims;
  double h = 1.0;
  bool periodic = false;

  Index dim() const { return static_cast<Index>(dims.size()); }

  std::vector<Index> coords(Index p) const {
    std::vector<Index> c(dims.size());
    for (std::size_t k = 0; k < dims.size(); ++k) {
      c[k] = p % dims[k];
      p /= dims[k];
    }
    return c;
  }

  Index index(const std::vector<Index>& c) const {
    Index p = 0;
    for (std::size_t k = dims.size(); k-- > 0;) p = p * dims[k] + c[k];
    return p;
  }

  /// Forward neighbour of p in direction k, or nullopt at a non-periodic boundary.
  std::optional<Index> forward(Index p, Index k) const {
    auto c = coords(p);
    if (c[k] + 1 < dims[k]) {
      ++c[k];
    } else if (periodic && dims[k] > 1) {
      c[k] = 0;
    } else {
      return std::nullopt;
    }
    return index(c);
  }
};

/// Finite metric measure space: dense distance matrix and positive weights.
/// Immutable once built.
class MetricMeasureSpace {
 public:
  MetricMeasureSpace(RMat dist, RVec mu, std::optional<GridGeometry> grid = std::nullopt,
                     std::vector<Edge> edges = {})
      : dist_(std::move(dist)), mu_(std::move(mu)), grid_(std::move(grid)), edges_(std::move(edges)) {
    require(dist_.rows() == dist_.cols() && dist_.rows() == mu_.size() && mu_.size() > 0,
            ErrorKind::parameter, "distance matrix and measure sizes disagree");
    require((mu_.array() > 0).all() && mu_.allFinite(), ErrorKind::parameter,
            "measure weights must be finite and strictly positive");
    scale_h_ = kInfinity;
    diameter_ = 0.0;
    for (Index i = 0; i < size(); ++i)
      for (Index j = 0; j < size(); ++j) {
        if (i != j) scale_h_ = std::min(scale_h_, dist_(i, j));
        diameter_ = std::max(diameter_, dist_(i, j));
      }
    if (size() == 1) scale_h_ = 1.0;
  }

  Index size() const { return mu_.size(); }
  const RMat& dist() const { return dist_; }
  double dist(Index x, Index y) const { return dist_(x, y); }
  const RVec& mu() const { return mu_; }
  double mu(Index x) const { return mu_(x); }
  double scale_h() const { return scale_h_; }
  double diameter() const { return diameter_; }
  double total_measure() const { return mu_.sum(); }
  const std::optional<GridGeometry>& grid() const { return grid_; }
  const std::vector<Edge>& edges() const { return edges_; }

  /// Measure of the open ball B(x, r).
  double volume(Index x, double r) const {
    double v = 0.0;
    for (Index y = 0; y < size(); ++y)
      if (dist_(x, y) < r) v += mu_(y);
    return v;
  }

 private:
  RMat dist_;
  RVec mu_;
  std::optional<GridGeometry> grid_;
  std::vector<Edge> edges_;
  double scale_h_ = 1.0;
  double diameter_ = 0.0;
};

using SpacePtr = std::shared_ptr<const MetricMeasureSpace>;

inline constexpr Index kDefaultPointCap = 4096;

/// Lattice with Euclidean (or flat torus) metric and mu = h^dim per point.
inline SpacePtr build_grid_space(const std::vector<Index>& dims, double h, bool periodic,
                                 Index cap = kDefaultPointCap) {
  require(!dims.empty() && dims.size() <= 3, ErrorKind::parameter, "grid must have 1 to 3 dimensions");
  require(h > 0 && std::isfinite(h), ErrorKind::parameter, "mesh size must be positive");
  Index n = 1;
  for (Index d : dims) {
    require(d >= 1, ErrorKind::parameter, "grid side lengths must be positive");
    n *= d;
    require(n <= cap, ErrorKind::size, "grid has more than " + std::to_string(cap) + " points");
  }
  require(n >= 2, ErrorKind::parameter, "grid must have at least two points");
  GridGeometry geo{dims, h, periodic};
  RMat dist(n, n);
  std::vector<std::vector<Index>> coords(static_cast<std::size_t>(n));
  for (Index p = 0; p < n; ++p) coords[static_cast<std::size_t>(p)] = geo.coords(p);
  for (Index p = 0; p < n; ++p) {
    const auto& a = coords[static_cast<std::size_t>(p)];
    for (Index q = p; q < n; ++q) {
      const auto& b = coords[static_cast<std::size_t>(q)];
      double s = 0.0;
      for (std::size_t k = 0; k < dims.size(); ++k) {
        double delta = std::abs(static_cast<double>(a[k] - b[k]));
        if (periodic) delta = std::min(delta, static_cast<double>(dims[k]) - delta);
        s += delta * delta;
      }
      dist(p, q) = dist(q, p) = h * std::sqrt(s);
    }
  }
  RVec mu = RVec::Constant(n, std::pow(h, static_cast<double>(dims.size())));
  return std::make_shared<const MetricMeasureSpace>(std::move(dist), std::move(mu), geo);
}

/// Nearest-neighbour lattice edges with weight h^(dim-2), so that the graph
/// Laplacian of a grid space approximates -Laplacian.
inline std::vector<Edge> lattice_edges(const GridGeometry& geo) {
  std::vector<Edge> edges;
  Index n = 1;
  for (Index d : geo.dims) n *= d;
  const double w = std::pow(geo.h, static_cast<double>(geo.dim()) - 2.0);
  for (Index p = 0; p < n; ++p)
    for (Index k = 0; k < geo.dim(); ++k) {
      auto q = geo.forward(p, k);
      // a periodic side of length 2 would otherwise produce a doubled edge
      if (q && *q != p && !(geo.periodic && geo.dims[static_cast<std::size_t>(k)] == 2 &&
                            geo.coords(p)[static_cast<std::size_t>(k)] == 1))
        edges.push_back({p, *q, w});
    }
  return edges;
}

inline bool is_connected(Index n, const std::vector<Edge>& edges) {
  std::vector<Index> parent(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) parent[static_cast<std::size_t>(i)] = i;
  auto find = [&](Index x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  Index components = n;
  for (const auto& e : edges) {
    const Index a = find(e.i), b = find(e.j);
    if (a != b) {
      parent[static_cast<std::size_t>(a)] = b;
      --components;
    }
  }
  return components == 1;
}

/// Shortest-path metric with edge length weight^(-1/2); mu as given.
inline SpacePtr build_graph_space(const std::vector<Edge>& edges, const RVec& mu) {
  const Index n = mu.size();
  require(n >= 2, ErrorKind::parameter, "graph space needs at least two vertices");
  for (const auto& e : edges) {
    require(e.i >= 0 && e.j >= 0 && e.i < n && e.j < n, ErrorKind::parameter, "edge endpoint out of range");
    require(e.i != e.j, ErrorKind::parameter, "self-loops are not allowed");
    require(e.weight > 0 && std::isfinite(e.weight), ErrorKind::parameter, "edge weights must be positive");
  }
  require(is_connected(n, edges), ErrorKind::connectivity, "graph is disconnected");

  std::vector<std::vector<std::pair<Index, double>>> adj(static_cast<std::size_t>(n));
  for (const auto& e : edges) {
    const double len = 1.0 / std::sqrt(e.weight);
    adj[static_cast<std::size_t>(e.i)].push_back({e.j, len});
    adj[static_cast<std::size_t>(e.j)].push_back({e.i, len});
  }
  RMat dist = RMat::Constant(n, n, kInfinity);
  using Item = std::pair<double, Index>;
  for (Index s = 0; s < n; ++s) {
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist(s, s) = 0.0;
    pq.push({0.0, s});
    while (!pq.empty()) {
      auto [d, u] = pq.top();
      pq.pop();
      if (d > dist(s, u)) continue;
      for (auto [v, len] : adj[static_cast<std::size_t>(u)]) {
        if (d + len < dist(s, v)) {
          dist(s, v) = d + len;
          pq.push({dist(s, v), v});
        }
      }
    }
  }
  // symmetrize against rounding in path sums
  dist = 0.5 * (dist + dist.transpose()).eval();
  return std::make_shared<const MetricMeasureSpace>(std::move(dist), mu, std::nullopt, edges);
}

/// Largest violation of the metric axioms (0 for an exact metric).
/// Triangle inequality is checked exhaustively up to `exhaustive_limit` points
/// and on `samples` random triples above.
inline double metric_axiom_violation(const MetricMeasureSpace& space, Index exhaustive_limit = 512,
                                     Index samples = 200000, std::uint64_t seed = 7) {
  const auto& d = space.dist();
  const Index n = space.size();
  double worst = 0.0;
  for (Index i = 0; i < n; ++i) {
    worst = std::max(worst, std::abs(d(i, i)));
    for (Index j = 0; j < n; ++j) {
      worst = std::max(worst, std::abs(d(i, j) - d(j, i)));
      if (i != j && !(d(i, j) > 0)) worst = std::max(worst, 1.0);
    }
  }
  auto tri = [&](Index i, Index j, Index k) { worst = std::max(worst, d(i, k) - d(i, j) - d(j, k)); };
  if (n <= exhaustive_limit) {
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        for (Index k = 0; k < n; ++k) tri(i, j, k);
  } else {
    auto rng = make_rng(seed, 0x7e1);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    for (Index s = 0; s < samples; ++s) tri(pick(rng), pick(rng), pick(rng));
  }
  return worst;
}

using IndexSet = std::vector<Index>;

/// Open ball {y : d(x,y) < r}.
inline IndexSet ball(const MetricMeasureSpace& space, Index x, double r) {
  require(r > 0, ErrorKind::parameter, "ball radius must be positive");
  require(x >= 0 && x < space.size(), ErrorKind::parameter, "ball centre out of range");
  IndexSet out;
  for (Index y = 0; y < space.size(); ++y)
    if (space.dist(x, y) < r) out.push_back(y);
  return out;
}

/// Dyadic annulus about B(x,r): S_0 = 2B, S_j = 2^{j+1}B \ 2^j B for j >= 1.
inline IndexSet annulus(const MetricMeasureSpace& space, Index x, double r, int j) {
  require(r > 0, ErrorKind::parameter, "annulus radius must be positive");
  require(j >= 0, ErrorKind::parameter, "annulus index must be nonnegative");
  const double outer = std::ldexp(r, j + 1);
  const double inner = j == 0 ? 0.0 : std::ldexp(r, j);
  IndexSet out;
  for (Index y = 0; y < space.size(); ++y) {
    const double d = space.dist(x, y);
    if (d < outer && (j == 0 || d >= inner)) out.push_back(y);
  }
  return out;
}

inline void check_field(const MetricMeasureSpace& space, const Field& f) {
  require(f.size() == space.size(), ErrorKind::parameter, "field length does not match space");
  require(f.allFinite(), ErrorKind::parameter, "field has non-finite entries");
}

/// Weighted L^p(mu) norm; p = kInfinity gives the sup norm.
inline double lp_norm(const RVec& mu, const Field& f, double p) {
  require(p >= 1.0, ErrorKind::parameter, "L^p norm needs p >= 1");
  if (std::isinf(p)) return sup_norm(f);
  const RVec a = f.cwiseAbs();
  const double m = a.size() ? a.maxCoeff() : 0.0;
  if (m == 0.0) return 0.0;
  // scaled to avoid overflow for large p
  double s = 0.0;
  for (Index i = 0; i < a.size(); ++i) s += std::pow(a(i) / m, p) * mu(i);
  return m * std::pow(s, 1.0 / p);
}

inline double lp_norm(const MetricMeasureSpace& space, const Field& f, double p) {
  check_field(space, f);
  return lp_norm(space.mu(), f, p);
}

inline Complex ball_average(const MetricMeasureSpace& space, const Field& f, const IndexSet& set) {
  require(!set.empty(), ErrorKind::parameter, "average over an empty set");
  Complex s = 0.0;
  double m = 0.0;
  for (Index y : set) {
    s += f(y) * space.mu(y);
    m += space.mu(y);
  }
  return s / m;
}

struct DoublingProfile {
  double c_doubling = 1.0;
  double nu_fit = 1.0;
  double r_min = 0.0;
  double r_max = 0.0;
  /// max over the window of V(x,r) / ((r/s)^nu_fit V(x,s)), r >= s.
  double max_ratio_violation = 0.0;
  bool nu_from_slope = true;
};

/// Log-spaced radii on [scale_h, diameter/2] (collapses to {scale_h} on tiny spaces).
inline std::vector<double> default_radii(const MetricMeasureSpace& space, int count = 16) {
  const double lo = space.scale_h();
  const double hi = std::max(lo, 0.5 * space.diameter());
  std::vector<double> r;
  if (hi <= lo * (1 + 1e-12) || count < 2) return {lo};
  for (int k = 0; k < count; ++k) r.push_back(lo * std::pow(hi / lo, static_cast<double>(k) / (count - 1)));
  return r;
}

inline DoublingProfile doubling_profile(const MetricMeasureSpace& space, const std::vector<double>& radii) {
  require(!radii.empty(), ErrorKind::parameter, "empty radii window");
  const double tol = 1e-12 * std::max(1.0, space.diameter());
  for (double r : radii)
    require(r >= space.scale_h() - tol && r <= space.diameter() + tol, ErrorKind::parameter,
            "radii must lie in [scale_h, diameter]");
  std::vector<double> sorted = radii;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  const Index n = space.size();
  const std::size_t m = sorted.size();
  RMat vol(n, static_cast<Index>(m));
  DoublingProfile prof;
  prof.r_min = sorted.front();
  prof.r_max = sorted.back();
  for (Index x = 0; x < n; ++x)
    for (std::size_t k = 0; k < m; ++k) {
      const double v1 = space.volume(x, sorted[k]);
      vol(x, static_cast<Index>(k)) = v1;
      prof.c_doubling = std::max(prof.c_doubling, space.volume(x, 2 * sorted[k]) / v1);
    }

  if (m >= 2) {
    std::vector<double> lr(m);
    for (std::size_t k = 0; k < m; ++k) lr[k] = std::log(sorted[k]);
    double acc = 0.0;
    for (Index x = 0; x < n; ++x) {
      std::vector<double> lv(m);
      for (std::size_t k = 0; k < m; ++k) lv[k] = std::log(vol(x, static_cast<Index>(k)));
      acc += fit_line(lr, lv).slope;
    }
    prof.nu_fit = acc / static_cast<double>(n);
  } else {
    prof.nu_from_slope = false;
    prof.nu_fit = std::max(std::log2(prof.c_doubling), 1e-12);
  }
  if (!(prof.nu_fit > 0)) {
    prof.nu_from_slope = false;
    prof.nu_fit = std::max(std::log2(prof.c_doubling), 1e-12);
  }

  for (Index x = 0; x < n; ++x)
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a; b < m; ++b) {
        const double ratio = vol(x, static_cast<Index>(b)) /
                             (std::pow(sorted[b] / sorted[a], prof.nu_fit) * vol(x, static_cast<Index>(a)));
        prof.max_ratio_violation = std::max(prof.max_ratio_violation, ratio);
      }
  return prof;
}

inline DoublingProfile doubling_profile(const MetricMeasureSpace& space) {
  return doubling_profile(space, default_radii(space));
}

}  // namespace paralab
