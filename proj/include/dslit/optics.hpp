#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <utility>

#include <Eigen/Dense>

#include "dslit/error.hpp"
#include "dslit/grid.hpp"

namespace dslit {

using cplx = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexRow = Eigen::RowVectorXcd;

/// Discretized amplitude impulse response h(x_out, x_in); rows index grid_out.
class LinearKernel {
 public:
  LinearKernel(SpatialGrid grid_in, SpatialGrid grid_out, ComplexMatrix values)
      : grid_in_(grid_in), grid_out_(grid_out), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.rows()) != grid_out_.size() ||
        static_cast<std::size_t>(values_.cols()) != grid_in_.size())
      throw Error(ErrorKind::invalid_parameter, "kernel matrix does not match its grids");
    if (!values_.allFinite()) throw Error(ErrorKind::invalid_parameter, "kernel has non-finite entries");
  }

  static LinearKernel constant(const SpatialGrid& grid_in, const SpatialGrid& grid_out, cplx value) {
    return LinearKernel(grid_in, grid_out,
                        ComplexMatrix::Constant(static_cast<Eigen::Index>(grid_out.size()),
                                                static_cast<Eigen::Index>(grid_in.size()), value));
  }

  const SpatialGrid& grid_in() const { return grid_in_; }
  const SpatialGrid& grid_out() const { return grid_out_; }
  const ComplexMatrix& values() const { return values_; }
  cplx operator()(std::size_t out, std::size_t in) const {
    return values_(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  }

  LinearKernel scaled(cplx alpha) const { return LinearKernel(grid_in_, grid_out_, values_ * alpha); }

 private:
  SpatialGrid grid_in_;
  SpatialGrid grid_out_;
  ComplexMatrix values_;
};

/// Two slits at -a/2 and +a/2, each of width w.
struct SlitPair {
  double separation;
  double width = 0.0;

  SlitPair(double a, double w = 0.0) : separation(a), width(w) {
    if (!(a > 0.0)) throw Error(ErrorKind::invalid_parameter, "slit separation must be positive");
    if (!(w >= 0.0 && w < a)) throw Error(ErrorKind::invalid_parameter, "slit width must satisfy 0 <= w < a");
  }

  double x1() const { return -0.5 * separation; }
  double x2() const { return 0.5 * separation; }
};

namespace detail {

template <class Phase>
LinearKernel make_kernel(const SpatialGrid& grid_in, const SpatialGrid& grid_out, Phase phase) {
  const auto rows = static_cast<Eigen::Index>(grid_out.size());
  const auto cols = static_cast<Eigen::Index>(grid_in.size());
  ComplexMatrix m(rows, cols);
  for (Eigen::Index j = 0; j < rows; ++j) {
    const double xo = grid_out[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < cols; ++i) {
      m(j, i) = std::polar(1.0, phase(xo, grid_in[static_cast<std::size_t>(i)]));
    }
  }
  return LinearKernel(grid_in, grid_out, std::move(m));
}

}  // namespace detail

/// Lens in a 2f arrangement: exp(-i 2π x_out x_in / (λ f)).
inline LinearKernel fourier_2f_kernel(const SpatialGrid& grid_in, const SpatialGrid& grid_out,
                                      double wavelength, double focal_length) {
  if (!(wavelength > 0.0)) throw Error(ErrorKind::invalid_parameter, "wavelength must be positive");
  if (!(focal_length > 0.0)) throw Error(ErrorKind::invalid_parameter, "focal length must be positive");
  const double k = -2.0 * std::numbers::pi / (wavelength * focal_length);
  return detail::make_kernel(grid_in, grid_out, [k](double xo, double xi) { return k * xo * xi; });
}

/// Paraxial free-space propagation over distance d, constant prefactor dropped:
/// exp(iπ (x_out - x_in)² / (λ d)).
inline LinearKernel fresnel_kernel(const SpatialGrid& grid_in, const SpatialGrid& grid_out,
                                   double wavelength, double distance) {
  if (!(wavelength > 0.0)) throw Error(ErrorKind::invalid_parameter, "wavelength must be positive");
  if (!(distance > 0.0)) throw Error(ErrorKind::invalid_parameter, "propagation distance must be positive");
  const double k = std::numbers::pi / (wavelength * distance);
  return detail::make_kernel(grid_in, grid_out, [k](double xo, double xi) {
    const double d = xo - xi;
    return k * d * d;
  });
}

namespace detail {

// Rows of `m` at the nodes covered by a slit centered at x. A point slit
// snaps to the nearest node; a finite slit averages ceil(w/dx) nodes.
inline ComplexRow slit_row(const ComplexMatrix& m, const SpatialGrid& grid, double x, double w) {
  const std::size_t center = grid.nearest(x);
  if (w <= 0.0) return m.row(static_cast<Eigen::Index>(center));
  const auto count = static_cast<std::size_t>(std::ceil(w / grid.dx() - 1e-9));
  if (count <= 1) return m.row(static_cast<Eigen::Index>(center));
  const double first = x - 0.5 * static_cast<double>(count - 1) * grid.dx();
  ComplexRow acc = ComplexRow::Zero(m.cols());
  for (std::size_t k = 0; k < count; ++k) {
    acc += m.row(static_cast<Eigen::Index>(grid.nearest(first + static_cast<double>(k) * grid.dx())));
  }
  return acc / static_cast<double>(count);
}

inline Eigen::VectorXcd slit_col(const ComplexMatrix& m, const SpatialGrid& grid, double x, double w) {
  return slit_row(m.transpose(), grid, x, w).transpose();
}

}  // namespace detail

/// h(x₁, ·) and h(x₂, ·): kernel rows at the two slits of the output plane.
inline std::pair<ComplexRow, ComplexRow> slit_rows(const LinearKernel& kernel, const SlitPair& slits) {
  const auto& g = kernel.grid_out();
  if (!g.contains(slits.x1()) || !g.contains(slits.x2()))
    throw Error(ErrorKind::out_of_range, "slit position lies outside the kernel's output grid");
  return {detail::slit_row(kernel.values(), g, slits.x1(), slits.width),
          detail::slit_row(kernel.values(), g, slits.x2(), slits.width)};
}

/// h₂(·, x₁) and h₂(·, x₂): kernel columns at the two slits of the input plane.
inline std::pair<Eigen::VectorXcd, Eigen::VectorXcd> slit_columns(const LinearKernel& kernel,
                                                                  const SlitPair& slits) {
  const auto& g = kernel.grid_in();
  if (!g.contains(slits.x1()) || !g.contains(slits.x2()))
    throw Error(ErrorKind::out_of_range, "slit position lies outside the kernel's input grid");
  return {detail::slit_col(kernel.values(), g, slits.x1(), slits.width),
          detail::slit_col(kernel.values(), g, slits.x2(), slits.width)};
}

/// Overall response through the two slits:
/// h(x', x) = h₂(x', x₁) h₁(x₁, x) + h₂(x', x₂) h₁(x₂, x).
inline LinearKernel compose_two_path(const LinearKernel& h1, const LinearKernel& h2, const SlitPair& slits) {
  if (!h1.grid_out().same_as(h2.grid_in()))
    throw Error(ErrorKind::composition, "h1 output grid differs from h2 input grid");
  const auto [r1, r2] = slit_rows(h1, slits);
  const auto [c1, c2] = slit_columns(h2, slits);
  ComplexMatrix h = c1 * r1 + c2 * r2;
  return LinearKernel(h1.grid_in(), h2.grid_out(), std::move(h));
}

}  // namespace dslit
