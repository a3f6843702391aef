#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dslit/biphoton.hpp"
#include "dslit/error.hpp"
#include "dslit/patterns.hpp"

namespace dslit {

/// V1: pure one-photon, V1m: marginal one-photon, V12: two-photon.
struct VisibilitySet {
  double V1 = 0.0;
  double V1m = 0.0;
  double V12 = 0.0;
};

/// V1m = 2ψ/(1+ψ²), V12 = (1-ψ²)/(1+ψ²), V1 = ψ (rectangular-pump duality).
inline VisibilitySet visibilities_from_psi(double psi) {
  if (!(std::abs(psi) <= 1.0)) throw Error(ErrorKind::out_of_range, "|psi| must not exceed 1");
  const double p2 = psi * psi;
  return {psi, 2.0 * psi / (1.0 + p2), (1.0 - p2) / (1.0 + p2)};
}

/// Visibilities of a complex ψ; the phase of ψ pulls the point inside the unit circle.
inline VisibilitySet visibilities_from_complex_psi(cplx psi) {
  const double r2 = std::norm(psi);
  if (r2 > 1.0 + 1e-12) throw Error(ErrorKind::out_of_range, "|psi| must not exceed 1");
  return {psi.real(), 2.0 * psi.real() / (1.0 + r2), (1.0 - r2) / (1.0 + r2)};
}

inline double v12_from_v1(double v1) {
  if (!(std::abs(v1) <= 1.0)) throw Error(ErrorKind::out_of_range, "|V1| must not exceed 1");
  const double s = v1 * v1;
  return (1.0 - s) / (1.0 + s);
}

struct ComplementarityCheck {
  double residual = 0.0;
  bool pass = false;
};

/// |V1m² + V12² - 1| against a tolerance.
inline ComplementarityCheck check_complementarity(const VisibilitySet& v, double tol) {
  const double r = std::abs(v.V1m * v.V1m + v.V12 * v.V12 - 1.0);
  return {r, r < tol};
}

struct FringeFit {
  double V = 0.0;
  double phase = 0.0;
  double offset = 0.0;
  double residual_norm = 0.0;
  double std_error = 0.0;  // standard error of V from the residual variance
  std::size_t samples = 0;
};

struct FringeFitOptions {
  std::optional<std::vector<double>> envelope;  // divided out before fitting
  double envelope_floor = 0.05;                 // envelope samples below this fraction of peak are masked
};

namespace detail {

// Throws when the normal matrix is numerically singular.
template <int N>
inline void check_gram(const Eigen::Matrix<double, N, N>& gram, std::size_t samples, std::size_t params) {
  if (samples < params) throw Error(ErrorKind::under_determined, "fewer samples than fit parameters");
  Eigen::Matrix<double, N, 1> d = gram.diagonal().cwiseSqrt();
  if ((d.array() <= 0.0).any()) throw Error(ErrorKind::under_determined, "basis function vanishes on all samples");
  const Eigen::Matrix<double, N, N> corr = d.cwiseInverse().asDiagonal() * gram * d.cwiseInverse().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> es(corr);
  if (es.eigenvalues().minCoeff() < 1e-8 * es.eigenvalues().maxCoeff())
    throw Error(ErrorKind::under_determined, "samples do not determine the fringe basis");
}

}  // namespace detail

/// Least-squares fit of offset·(1 + V cos(2πx/Λ + phase)) at known Λ,
/// linear in the basis {1, cos, sin}. V is reported non-negative; a negative
/// visibility shows up as phase ≈ π.
inline FringeFit fit_fringe_visibility(const FringePattern1D& pattern, double period,
                                       const FringeFitOptions& opt = {}) {
  if (!(period > 0.0)) throw Error(ErrorKind::invalid_parameter, "fringe period must be positive");
  const auto& g = pattern.grid;
  const double k = 2.0 * std::numbers::pi / period;
  double env_peak = 0.0;
  if (opt.envelope) {
    if (opt.envelope->size() != pattern.values.size())
      throw Error(ErrorKind::composition, "envelope length differs from pattern");
    for (double e : *opt.envelope) env_peak = std::max(env_peak, e);
  }
  Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  std::vector<std::array<double, 4>> rows;
  rows.reserve(pattern.values.size());
  for (std::size_t i = 0; i < pattern.values.size(); ++i) {
    double y = pattern.values[i];
    if (opt.envelope) {
      const double e = (*opt.envelope)[i];
      if (e < opt.envelope_floor * env_peak) continue;
      y /= e;
    }
    const Eigen::Vector3d b(1.0, std::cos(k * g[i]), std::sin(k * g[i]));
    gram += b * b.transpose();
    rhs += b * y;
    rows.push_back({b(0), b(1), b(2), y});
  }
  detail::check_gram<3>(gram, rows.size(), 3);
  const Eigen::Vector3d p = gram.ldlt().solve(rhs);
  FringeFit fit;
  fit.samples = rows.size();
  fit.offset = p(0);
  double rss = 0.0;
  for (const auto& r : rows) {
    const double e = r[3] - (p(0) * r[0] + p(1) * r[1] + p(2) * r[2]);
    rss += e * e;
  }
  fit.residual_norm = std::sqrt(rss);
  const double amp = std::hypot(p(1), p(2));
  if (p(0) == 0.0 || amp <= 1e-12 * std::abs(p(0))) {
    fit.V = 0.0;
    fit.phase = 0.0;
  } else {
    fit.V = amp / std::abs(p(0));
    // p1 cos + p2 sin = amp cos(kx + phase) with phase = atan2(-p2, p1)
    fit.phase = std::atan2(-p(2), p(1));
    if (p(0) < 0.0) fit.phase = std::remainder(fit.phase + std::numbers::pi, 2.0 * std::numbers::pi);
  }
  if (rows.size() > 3 && p(0) != 0.0) {
    const double sigma2 = rss / static_cast<double>(rows.size() - 3);
    const Eigen::Matrix3d cov = gram.inverse() * sigma2;
    // V = amp/p0; first-order propagation using the dominant amplitude direction
    const double c = amp > 0.0 ? p(1) / amp : 1.0;
    const double s = amp > 0.0 ? p(2) / amp : 0.0;
    const double var_amp = c * c * cov(1, 1) + s * s * cov(2, 2) + 2.0 * c * s * cov(1, 2);
    const double v = fit.V;
    const double var_v = (var_amp + v * v * cov(0, 0)) / (p(0) * p(0));
    fit.std_error = std::sqrt(std::max(var_v, 0.0));
  }
  return fit;
}

inline std::string fringe_fit_csv_header() { return "dataset,V,phase,offset,residual_norm"; }

inline std::string fringe_fit_csv_row(const std::string& id, const FringeFit& f) {
  std::ostringstream os;
  os.precision(17);
  os << id << ',' << f.V << ',' << f.phase << ',' << f.offset << ',' << f.residual_norm;
  return os.str();
}

struct JointFit {
  double V12 = 0.0;
  FringeOrientation orientation = FringeOrientation::sum;
  double A = 0.0;  // constant term
  double B = 0.0;  // cos(2π(x'+x'')/Λ) amplitude
  double C = 0.0;  // cos(2π(x'-x'')/Λ) amplitude
  double residual_norm = 0.0;

  double sum_amplitude() const { return A != 0.0 ? B / A : 0.0; }
  double difference_amplitude() const { return A != 0.0 ? C / A : 0.0; }
};

namespace detail {

// Squared distance between measured (b, c) and the single-ψ excess model at V.
inline double joint_model_misfit(double v, double b, double c, FringeOrientation o) {
  const double plus = 0.5 * v * (1.0 + v);
  const double minus = -0.5 * v * (1.0 - v);
  const double mb = o == FringeOrientation::sum ? plus : minus;
  const double mc = o == FringeOrientation::sum ? minus : plus;
  return (mb - b) * (mb - b) + (mc - c) * (mc - c);
}

inline double minimize_unit_interval(const auto& f) {
  constexpr int coarse = 2000;
  int best = 0;
  double fbest = f(0.0);
  for (int i = 1; i <= coarse; ++i) {
    const double v = f(static_cast<double>(i) / coarse);
    if (v < fbest) {
      fbest = v;
      best = i;
    }
  }
  double lo = std::max(0.0, (best - 1.0) / coarse);
  double hi = std::min(1.0, (best + 1.0) / coarse);
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - r * (hi - lo), x2 = lo + r * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - r * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + r * (hi - lo);
      f2 = f(x2);
    }
  }
  const double mid = 0.5 * (lo + hi);
  return f(mid) <= fbest ? mid : static_cast<double>(best) / coarse;
}

}  // namespace detail

/// Least-squares fit of A + B cos(2π(x'+x'')/Λ) + C cos(2π(x'-x'')/Λ) to an
/// excess pattern, then the V in [0, 1] whose single-ψ excess
/// (B/A, C/A) = (V(1+V)/2, -V(1-V)/2) (mirrored for difference orientation)
/// is closest to the fitted amplitudes.
inline JointFit fit_joint_visibility(const JointPattern2D& excess, double period, RegionOfInterest roi) {
  if (!(period > 0.0)) throw Error(ErrorKind::invalid_parameter, "fringe period must be positive");
  if (roi.count == 0 || roi.first + roi.count > excess.size())
    throw Error(ErrorKind::out_of_range, "region of interest outside the grid");
  const auto& g = excess.grid;
  const double k = 2.0 * std::numbers::pi / period;
  std::vector<double> cp(roi.count), sp(roi.count);
  for (std::size_t i = 0; i < roi.count; ++i) {
    cp[i] = std::cos(k * g[roi.first + i]);
    sp[i] = std::sin(k * g[roi.first + i]);
  }
  Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < roi.count; ++i) {
    for (std::size_t j = 0; j < roi.count; ++j) {
      // cos(a ± b) from the per-axis tables
      const double cs = cp[i] * cp[j] - sp[i] * sp[j];
      const double cd = cp[i] * cp[j] + sp[i] * sp[j];
      const Eigen::Vector3d b(1.0, cs, cd);
      gram += b * b.transpose();
      rhs += b * excess.values(static_cast<Eigen::Index>(roi.first + i), static_cast<Eigen::Index>(roi.first + j));
    }
  }
  detail::check_gram<3>(gram, roi.count * roi.count, 3);
  const Eigen::Vector3d p = gram.ldlt().solve(rhs);
  JointFit fit;
  fit.A = p(0);
  fit.B = p(1);
  fit.C = p(2);
  double rss = 0.0;
  for (std::size_t i = 0; i < roi.count; ++i) {
    for (std::size_t j = 0; j < roi.count; ++j) {
      const double cs = cp[i] * cp[j] - sp[i] * sp[j];
      const double cd = cp[i] * cp[j] + sp[i] * sp[j];
      const double e = excess.values(static_cast<Eigen::Index>(roi.first + i),
                                     static_cast<Eigen::Index>(roi.first + j)) -
                       (p(0) + p(1) * cs + p(2) * cd);
      rss += e * e;
    }
  }
  fit.residual_norm = std::sqrt(rss);
  if (fit.A == 0.0) return fit;
  const double b = fit.B / fit.A;
  const double c = fit.C / fit.A;
  const double vs = detail::minimize_unit_interval([&](double v) { return detail::joint_model_misfit(v, b, c, FringeOrientation::sum); });
  const double vd = detail::minimize_unit_interval(
      [&](double v) { return detail::joint_model_misfit(v, b, c, FringeOrientation::difference); });
  if (detail::joint_model_misfit(vd, b, c, FringeOrientation::difference) <
      detail::joint_model_misfit(vs, b, c, FringeOrientation::sum)) {
    fit.V12 = vd;
    fit.orientation = FringeOrientation::difference;
  } else {
    fit.V12 = vs;
    fit.orientation = FringeOrientation::sum;
  }
  return fit;
}

inline JointFit fit_joint_visibility(const JointPattern2D& excess, double period) {
  return fit_joint_visibility(excess, period, full_region(excess.grid));
}

}  // namespace dslit
