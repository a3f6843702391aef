#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "dslit/error.hpp"
#include "dslit/grid.hpp"
#include "dslit/optics.hpp"

namespace dslit {

enum class PumpShape { uniform, gaussian };

/// Transverse pump field E_p(x) sampled on a grid, plus its intensity |E_p|².
class PumpProfile {
 public:
  PumpProfile(PumpShape shape, double width, SpatialGrid grid, std::vector<cplx> field)
      : shape_(shape), width_(width), grid_(grid), field_(std::move(field)) {
    if (field_.size() != grid_.size()) throw Error(ErrorKind::invalid_parameter, "pump samples do not match grid");
    bool any = false;
    for (const auto& e : field_) any = any || std::abs(e) > 0.0;
    if (!any) throw Error(ErrorKind::degenerate_source, "pump field is zero everywhere");
  }

  /// Top-hat of full width b sampled on `grid`.
  static PumpProfile uniform(double b, const SpatialGrid& grid) {
    if (!(b > 0.0)) throw Error(ErrorKind::invalid_parameter, "pump width must be positive");
    std::vector<cplx> e(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) e[i] = std::abs(grid[i]) <= 0.5 * b ? 1.0 : 0.0;
    return PumpProfile(PumpShape::uniform, b, grid, std::move(e));
  }

  /// Top-hat of width b on n midpoint nodes spanning exactly the support, so the
  /// rectangle rule is the midpoint rule with no edge error.
  static PumpProfile uniform(double b, std::size_t n) {
    if (!(b > 0.0)) throw Error(ErrorKind::invalid_parameter, "pump width must be positive");
    return uniform(b, SpatialGrid::midpoints(-0.5 * b, 0.5 * b, n));
  }

  /// Gaussian beam with 1/e² intensity diameter D: E = exp(-4x²/D²).
  static PumpProfile gaussian(double diameter, const SpatialGrid& grid) {
    if (!(diameter > 0.0)) throw Error(ErrorKind::invalid_parameter, "pump width must be positive");
    std::vector<cplx> e(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) e[i] = std::exp(-4.0 * grid[i] * grid[i] / (diameter * diameter));
    return PumpProfile(PumpShape::gaussian, diameter, grid, std::move(e));
  }

  PumpShape shape() const { return shape_; }
  double width() const { return width_; }
  const SpatialGrid& grid() const { return grid_; }
  const std::vector<cplx>& field() const { return field_; }

  std::vector<double> intensity() const {
    std::vector<double> i(field_.size());
    for (std::size_t k = 0; k < field_.size(); ++k) i[k] = std::norm(field_[k]);
    return i;
  }

  PumpProfile with_field(std::vector<cplx> field) const { return PumpProfile(shape_, width_, grid_, std::move(field)); }

 private:
  PumpShape shape_;
  double width_;
  SpatialGrid grid_;
  std::vector<cplx> field_;
};

/// Which slit-plane amplitude dominates the biphoton. Same-slit dominance gives
/// two-photon fringes in x'+x''; cross-slit dominance mirrors them into x'-x''.
enum class FringeOrientation { sum, difference };

inline const char* to_string(FringeOrientation o) { return o == FringeOrientation::sum ? "sum" : "difference"; }

struct ApertureCorrelations {
  double G11 = 0.0;
  double G22 = 0.0;
  cplx G12{};
  cplx P11{};
  cplx P22{};
  cplx P12{};
  cplx g1{};
  cplx psi{};
  FringeOrientation orientation = FringeOrientation::sum;

  /// Correlations of an ideal symmetric source with real g1 and psi (P11 = 1).
  static ApertureCorrelations from_normalized(double g1, double psi) {
    ApertureCorrelations c;
    c.G11 = c.G22 = 1.0;
    c.G12 = g1;
    c.P11 = c.P22 = 1.0;
    c.P12 = psi;
    c.g1 = g1;
    c.psi = psi;
    return c;
  }
};

namespace detail {

inline void check_source(const std::vector<cplx>& weights, const LinearKernel& h1) {
  if (weights.size() != h1.grid_in().size())
    throw Error(ErrorKind::composition, "pump grid differs from h1 input grid");
  for (const auto& w : weights)
    if (std::abs(w) > 0.0) return;
  throw Error(ErrorKind::degenerate_source, "source is zero everywhere");
}

inline void check_pump_grid(const PumpProfile& pump, const LinearKernel& h1) {
  if (!pump.grid().same_as(h1.grid_in())) throw Error(ErrorKind::composition, "pump grid differs from h1 input grid");
}

}  // namespace detail

struct CoherenceValues {
  double G11;
  double G22;
  cplx G12;
};

/// G_ij = Σ_x w(x) h₁*(x_i, x) h₁(x_j, x) Δx for an arbitrary source weight w.
/// With w = I_p this is the slit-plane coherence function.
inline CoherenceValues coherence_from_weights(const std::vector<cplx>& weights, const LinearKernel& h1,
                                              const SlitPair& slits) {
  detail::check_source(weights, h1);
  const auto [r1, r2] = slit_rows(h1, slits);
  const double dx = h1.grid_in().dx();
  cplx g11{}, g22{}, g12{};
  for (Eigen::Index i = 0; i < r1.size(); ++i) {
    const cplx w = weights[static_cast<std::size_t>(i)];
    g11 += w * std::conj(r1(i)) * r1(i);
    g22 += w * std::conj(r2(i)) * r2(i);
    g12 += w * std::conj(r1(i)) * r2(i);
  }
  return {g11.real() * dx, g22.real() * dx, g12 * dx};
}

inline CoherenceValues coherence_at_slits(const PumpProfile& pump, const LinearKernel& h1, const SlitPair& slits) {
  detail::check_pump_grid(pump, h1);
  const auto intensity = pump.intensity();
  return coherence_from_weights(std::vector<cplx>(intensity.begin(), intensity.end()), h1, slits);
}

struct BiphotonValues {
  cplx P11;
  cplx P22;
  cplx P12;
};

/// Ψ_A(x_i, x_j) = Σ_x E_p(x) h₁(x_i, x) h₁(x_j, x) Δx.
inline BiphotonValues biphoton_at_slits(const PumpProfile& pump, const LinearKernel& h1, const SlitPair& slits) {
  detail::check_pump_grid(pump, h1);
  detail::check_source(pump.field(), h1);
  const auto [r1, r2] = slit_rows(h1, slits);
  const double dx = h1.grid_in().dx();
  const auto& e = pump.field();
  cplx p11{}, p22{}, p12{};
  for (Eigen::Index i = 0; i < r1.size(); ++i) {
    const cplx w = e[static_cast<std::size_t>(i)];
    p11 += w * r1(i) * r1(i);
    p22 += w * r2(i) * r2(i);
    p12 += w * r1(i) * r2(i);
  }
  return {p11 * dx, p22 * dx, p12 * dx};
}

/// g1 = G12/√(G11 G22); psi = ratio of the smaller to the larger of P12, P11.
inline ApertureCorrelations normalized_values(const CoherenceValues& g, const BiphotonValues& p) {
  if (!(g.G11 * g.G22 > 0.0))
    throw Error(ErrorKind::normalization, g.G11 > 0.0 ? "G22 vanishes" : "G11 vanishes");
  const double m11 = std::abs(p.P11);
  const double m12 = std::abs(p.P12);
  if (!(m11 > 0.0) && !(m12 > 0.0)) throw Error(ErrorKind::normalization, "P11 and P12 both vanish");
  ApertureCorrelations c;
  c.G11 = g.G11;
  c.G22 = g.G22;
  c.G12 = g.G12;
  c.P11 = p.P11;
  c.P22 = p.P22;
  c.P12 = p.P12;
  c.g1 = g.G12 / std::sqrt(g.G11 * g.G22);
  if (m12 <= m11) {
    c.psi = p.P12 / p.P11;
    c.orientation = FringeOrientation::sum;
  } else {
    c.psi = p.P11 / p.P12;
    c.orientation = FringeOrientation::difference;
  }
  return c;
}

/// Real part of a normalized value that symmetry should make real.
inline double real_part_checked(cplx v, const char* name, double tol = 1e-9) {
  if (std::abs(v.imag()) > tol)
    throw Error(ErrorKind::normalization, std::string(name) + " has imaginary part " + std::to_string(v.imag()));
  return v.real();
}

/// sinc(x) = sin(πx)/(πx).
inline double sinc(double x) {
  if (std::abs(x) < 1e-8) return 1.0 - (std::numbers::pi * x) * (std::numbers::pi * x) / 6.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

/// ψ_A for a uniform pump of width b under 2f illumination: sinc(b a / (λ f)).
inline double psi_sinc_closed_form(double b, double a, double wavelength, double focal_length) {
  if (!(b > 0.0 && a > 0.0 && wavelength > 0.0 && focal_length > 0.0))
    throw Error(ErrorKind::invalid_parameter, "closed form requires positive arguments");
  return sinc(b * a / (wavelength * focal_length));
}

}  // namespace dslit
