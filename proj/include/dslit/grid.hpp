#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "dslit/error.hpp"

namespace dslit {

/// Uniform 1-D sampling of a transverse coordinate (meters).
/// Node i sits at x_min + i*dx with dx = (x_max - x_min)/(n - 1).
class SpatialGrid {
 public:
  SpatialGrid(double x_min, double x_max, std::size_t n) : x_min_(x_min), x_max_(x_max), n_(n) {
    if (n < 2) throw Error(ErrorKind::invalid_parameter, "grid needs at least 2 nodes");
    if (!(x_max > x_min)) throw Error(ErrorKind::invalid_parameter, "grid requires x_max > x_min");
  }

  /// Grid whose n nodes are the midpoints of n equal cells covering [lo, hi].
  static SpatialGrid midpoints(double lo, double hi, std::size_t n) {
    const double dx = (hi - lo) / static_cast<double>(n);
    return SpatialGrid(lo + 0.5 * dx, hi - 0.5 * dx, n);
  }

  /// n nodes with spacing dx, symmetric about zero.
  static SpatialGrid centered(std::size_t n, double dx) {
    const double half = 0.5 * static_cast<double>(n - 1) * dx;
    return SpatialGrid(-half, half, n);
  }

  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  std::size_t size() const { return n_; }
  double dx() const { return (x_max_ - x_min_) / static_cast<double>(n_ - 1); }
  double operator[](std::size_t i) const { return x_min_ + static_cast<double>(i) * dx(); }

  /// Extent covered by the n rectangle-rule cells.
  double span() const { return static_cast<double>(n_) * dx(); }

  std::vector<double> nodes() const {
    std::vector<double> xs(n_);
    for (std::size_t i = 0; i < n_; ++i) xs[i] = (*this)[i];
    return xs;
  }

  bool contains(double x) const {
    const double half = 0.5 * dx();
    return x >= x_min_ - half && x <= x_max_ + half;
  }

  /// Index of the node nearest x; throws when x falls outside the grid's cells.
  std::size_t nearest(double x) const {
    if (!contains(x)) throw Error(ErrorKind::out_of_range, "position outside grid");
    const double t = std::round((x - x_min_) / dx());
    if (t <= 0.0) return 0;
    if (t >= static_cast<double>(n_ - 1)) return n_ - 1;
    return static_cast<std::size_t>(t);
  }

  bool same_as(const SpatialGrid& o, double rel_tol = 1e-12) const {
    const double scale = std::max(std::abs(x_max_ - x_min_), std::abs(o.x_max_ - o.x_min_));
    return n_ == o.n_ && std::abs(x_min_ - o.x_min_) <= rel_tol * scale &&
           std::abs(x_max_ - o.x_max_) <= rel_tol * scale;
  }

 private:
  double x_min_;
  double x_max_;
  std::size_t n_;
};

}  // namespace dslit
