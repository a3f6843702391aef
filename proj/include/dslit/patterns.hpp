#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dslit/biphoton.hpp"
#include "dslit/error.hpp"
#include "dslit/grid.hpp"
#include "dslit/log.hpp"
#include "dslit/optics.hpp"

namespace dslit {

struct FringePattern1D {
  SpatialGrid grid;
  std::vector<double> values;
  double period = 0.0;  // Λ in meters; 0 when unknown

  double sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }
  double mean() const { return sum() / static_cast<double>(values.size()); }
};

enum class JointKind { coincidence, excess };

/// Joint density on grid × grid; values(i, j) is at (x' = grid[i], x'' = grid[j]).
/// When unit_sum is set, Σ values Δx² = 1.
struct JointPattern2D {
  SpatialGrid grid;
  Eigen::MatrixXd values;
  JointKind kind = JointKind::coincidence;
  bool unit_sum = false;
  double period = 0.0;

  std::size_t size() const { return grid.size(); }
  double integral() const { return values.sum() * grid.dx() * grid.dx(); }
};

/// Contiguous node range used as the normalization region.
struct RegionOfInterest {
  std::size_t first = 0;
  std::size_t count = 0;
};

inline RegionOfInterest full_region(const SpatialGrid& grid) { return {0, grid.size()}; }

/// Largest centered node range spanning an integer number of periods.
inline RegionOfInterest integer_period_region(const SpatialGrid& grid, double period) {
  if (!(period > 0.0)) return full_region(grid);
  const double periods = std::floor(grid.span() / period + 1e-9);
  if (periods < 1.0) return full_region(grid);
  auto count = static_cast<std::size_t>(std::llround(periods * period / grid.dx()));
  count = std::clamp<std::size_t>(count, 1, grid.size());
  return {(grid.size() - count) / 2, count};
}

namespace detail {

inline void check_sampling(const SpatialGrid& grid, double period) {
  const double per = period / grid.dx();
  if (per < 8.0)
    warn("pattern sampled at " + std::to_string(per) + " nodes per fringe period (fewer than 8)");
}

inline void normalize_unit_mean(std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (m > 0.0)
    for (auto& x : v) x /= m;
}

inline void clamp_roundoff(Eigen::MatrixXd& m) {
  const double floor = -1e-12 * m.cwiseAbs().maxCoeff();
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    double& v = m.data()[k];
    if (v < 0.0 && v > floor) v = 0.0;
  }
}

}  // namespace detail

inline void normalize_unit_sum(JointPattern2D& p) {
  const double s = p.integral();
  if (!(s != 0.0)) throw Error(ErrorKind::normalization, "pattern integrates to zero");
  p.values /= s;
  p.unit_sum = true;
}

/// Fringe period Λ = λ f / a at the focal plane of the 2f detection lens.
inline double fringe_period(double wavelength, double focal_length, double separation) {
  return wavelength * focal_length / separation;
}

/// One-photon intensity behind the slits from all four terms of the two-slit
/// coherence expansion, normalized to unit mean.
inline FringePattern1D intensity_general(const LinearKernel& h2, const ApertureCorrelations& c,
                                         const SlitPair& slits, const SpatialGrid& grid) {
  if (!grid.same_as(h2.grid_out())) throw Error(ErrorKind::composition, "detector grid differs from h2 output grid");
  const auto [c1, c2] = slit_columns(h2, slits);
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double direct = std::norm(c1(k)) * c.G11 + std::norm(c2(k)) * c.G22;
    const double cross = 2.0 * (std::conj(c1(k)) * c2(k) * c.G12).real();
    v[i] = std::max(direct + cross, 0.0);
  }
  detail::normalize_unit_mean(v);
  return {grid, std::move(v), 0.0};
}

/// 1 + g1 cos(2πx'/Λ), normalized to unit mean.
inline FringePattern1D single_photon_pattern(double g1, double period, const SpatialGrid& grid) {
  if (!(std::abs(g1) <= 1.0 + 1e-12)) throw Error(ErrorKind::invalid_coherence, "|g1| exceeds 1");
  if (!(period > 0.0)) throw Error(ErrorKind::invalid_parameter, "fringe period must be positive");
  detail::check_sampling(grid, period);
  std::vector<double> v(grid.size());
  const double k = 2.0 * std::numbers::pi / period;
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = 1.0 + g1 * std::cos(k * grid[i]);
  detail::normalize_unit_mean(v);
  return {grid, std::move(v), period};
}

/// |Ψ(x', x'')|² with Ψ built from the slit-plane biphoton values through h₂;
/// unit-sum normalized.
inline JointPattern2D coincidence_general(const LinearKernel& h2, const ApertureCorrelations& c,
                                          const SlitPair& slits, const SpatialGrid& grid) {
  if (!grid.same_as(h2.grid_out())) throw Error(ErrorKind::composition, "detector grid differs from h2 output grid");
  const auto [c1, c2] = slit_columns(h2, slits);
  const auto n = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const cplx psi = c1(i) * c1(j) * c.P11 + c2(i) * c2(j) * c.P22 + (c1(i) * c2(j) + c2(i) * c1(j)) * c.P12;
      g(i, j) = std::norm(psi);
    }
  }
  JointPattern2D p{grid, std::move(g), JointKind::coincidence, false, 0.0};
  normalize_unit_sum(p);
  return p;
}

namespace detail {

// Maps (x', x'') to the pattern's canonical coordinates; difference orientation
// mirrors x''.
inline double oriented(double x2, FringeOrientation o) { return o == FringeOrientation::sum ? x2 : -x2; }

}  // namespace detail

/// Two-photon pattern as the squared modulus |cos(π(x'+x'')/Λ) + ψ cos(π(x'-x'')/Λ)|².
inline JointPattern2D coincidence_modulus_form(double psi, double period, const SpatialGrid& grid,
                                               FringeOrientation o = FringeOrientation::sum) {
  if (!(period > 0.0)) throw Error(ErrorKind::invalid_parameter, "fringe period must be positive");
  const auto n = static_cast<Eigen::Index>(grid.size());
  const double k = std::numbers::pi / period;
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double xa = grid[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < n; ++j) {
      const double xb = detail::oriented(grid[static_cast<std::size_t>(j)], o);
      const double amp = std::cos(k * (xa + xb)) + psi * std::cos(k * (xa - xb));
      g(i, j) = amp * amp;
    }
  }
  JointPattern2D p{grid, std::move(g), JointKind::coincidence, false, period};
  normalize_unit_sum(p);
  return p;
}

/// Two-photon pattern from its four-term cosine expansion:
/// 1 + cos(2πσ/Λ)/(1+ψ²) + ψ² cos(2πδ/Λ)/(1+ψ²) + 2ψ/(1+ψ²)[cos(2πx'/Λ) + cos(2πx''/Λ)],
/// σ = x'+x'', δ = x'-x''. Unit-sum normalized.
inline JointPattern2D coincidence_pattern(double psi, double period, const SpatialGrid& grid,
                                          FringeOrientation o = FringeOrientation::sum) {
  if (!(period > 0.0)) throw Error(ErrorKind::invalid_parameter, "fringe period must be positive");
  if (!(std::abs(psi) <= 1.0 + 1e-12)) warn("coincidence_pattern called with |psi| > 1");
  detail::check_sampling(grid, period);
  const auto n = static_cast<Eigen::Index>(grid.size());
  const double k = 2.0 * std::numbers::pi / period;
  const double norm = 1.0 + psi * psi;
  const double cs = 1.0 / norm;
  const double cd = psi * psi / norm;
  const double cm = 2.0 * psi / norm;
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double xa = grid[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < n; ++j) {
      const double xb = detail::oriented(grid[static_cast<std::size_t>(j)], o);
      g(i, j) = 1.0 + cs * std::cos(k * (xa + xb)) + cd * std::cos(k * (xa - xb)) +
                cm * (std::cos(k * xa) + std::cos(k * xb));
    }
  }
  detail::clamp_roundoff(g);
  JointPattern2D p{grid, std::move(g), JointKind::coincidence, false, period};
  normalize_unit_sum(p);
  return p;
}

/// Single-photon marginal: row sums times Δx.
inline FringePattern1D marginal_pattern(const JointPattern2D& g2) {
  const double dx = g2.grid.dx();
  std::vector<double> v(g2.size());
  for (std::size_t i = 0; i < g2.size(); ++i) v[i] = g2.values.row(static_cast<Eigen::Index>(i)).sum() * dx;
  return {g2.grid, std::move(v), g2.period};
}

/// ΔG = G2 - I_m(x') I_m(x'') + A, with A chosen so ΔG integrates to one over `roi`.
inline JointPattern2D excess_pattern(const JointPattern2D& g2, const FringePattern1D& im, RegionOfInterest roi) {
  if (!im.grid.same_as(g2.grid) || im.values.size() != g2.size())
    throw Error(ErrorKind::composition, "marginal grid differs from the joint pattern grid");
  if (roi.count == 0 || roi.first + roi.count > g2.size())
    throw Error(ErrorKind::out_of_range, "region of interest outside the grid");
  const auto n = static_cast<Eigen::Index>(g2.size());
  const Eigen::Map<const Eigen::VectorXd> m(im.values.data(), n);
  Eigen::MatrixXd d = g2.values - m * m.transpose();
  const auto f = static_cast<Eigen::Index>(roi.first);
  const auto c = static_cast<Eigen::Index>(roi.count);
  const double dx2 = g2.grid.dx() * g2.grid.dx();
  const double inner = d.block(f, f, c, c).sum() * dx2;
  const double a = (1.0 - inner) / (static_cast<double>(c * c) * dx2);
  d.array() += a;
  return {g2.grid, std::move(d), JointKind::excess, true, g2.period};
}

inline JointPattern2D excess_pattern(const JointPattern2D& g2, const FringePattern1D& im) {
  return excess_pattern(g2, im, g2.period > 0.0 ? integer_period_region(g2.grid, g2.period) : full_region(g2.grid));
}

/// Excess function of a single-ψ source in sum/difference form,
/// [1 + V(1+V)/2 cos(2πσ/Λ) - V(1-V)/2 cos(2πδ/Λ)] / span²,
/// which is what excess_pattern yields on a grid of whole periods.
inline JointPattern2D excess_closed_form(double v12, double period, const SpatialGrid& grid,
                                         FringeOrientation o = FringeOrientation::sum) {
  const auto n = static_cast<Eigen::Index>(grid.size());
  const double k = 2.0 * std::numbers::pi / period;
  const double b = 0.5 * v12 * (1.0 + v12);
  const double c = -0.5 * v12 * (1.0 - v12);
  const double scale = 1.0 / (grid.span() * grid.span());
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double xa = grid[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < n; ++j) {
      const double xb = detail::oriented(grid[static_cast<std::size_t>(j)], o);
      g(i, j) = scale * (1.0 + b * std::cos(k * (xa + xb)) + c * std::cos(k * (xa - xb)));
    }
  }
  return {grid, std::move(g), JointKind::excess, true, period};
}

/// Same function in product form, [1 + V² cos cos - V sin sin] / span².
inline JointPattern2D excess_product_form(double v12, double period, const SpatialGrid& grid,
                                          FringeOrientation o = FringeOrientation::sum) {
  const auto n = static_cast<Eigen::Index>(grid.size());
  const double k = 2.0 * std::numbers::pi / period;
  const double scale = 1.0 / (grid.span() * grid.span());
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double xa = grid[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < n; ++j) {
      const double xb = detail::oriented(grid[static_cast<std::size_t>(j)], o);
      g(i, j) = scale * (1.0 + v12 * v12 * std::cos(k * xa) * std::cos(k * xb) -
                         v12 * std::sin(k * xa) * std::sin(k * xb));
    }
  }
  return {grid, std::move(g), JointKind::excess, true, period};
}

/// Single-slit diffraction envelope sinc²(w x'/(λ f)); all ones for w = 0.
inline std::vector<double> slit_envelope(double w, double wavelength, double focal_length, const SpatialGrid& grid) {
  if (!(w >= 0.0)) throw Error(ErrorKind::invalid_parameter, "slit width must be non-negative");
  std::vector<double> e(grid.size(), 1.0);
  if (w == 0.0) return e;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double s = sinc(w * grid[i] / (wavelength * focal_length));
    e[i] = s * s;
  }
  return e;
}

inline void apply_envelope(FringePattern1D& p, const std::vector<double>& env) {
  for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] *= env[i];
  detail::normalize_unit_mean(p.values);
}

inline void apply_envelope(JointPattern2D& p, const std::vector<double>& env) {
  const auto n = static_cast<Eigen::Index>(p.size());
  const Eigen::Map<const Eigen::VectorXd> e(env.data(), n);
  p.values = p.values.cwiseProduct(e * e.transpose());
  normalize_unit_sum(p);
}

}  // namespace dslit
