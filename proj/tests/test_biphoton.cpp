#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dslit/biphoton.hpp"

using namespace dslit;

namespace {

constexpr double kLambda = 812e-9;
constexpr double kFocal = 50e-3;
constexpr double kSep = 0.7e-3;

SpatialGrid slit_plane() { return SpatialGrid(-kSep, kSep, 5); }

// Independent closed form for a top-hat of width b under 2f illumination.
double sinc_oracle(double u) { return u == 0.0 ? 1.0 : std::sin(std::numbers::pi * u) / (std::numbers::pi * u); }

ApertureCorrelations two_f_values(double b, std::size_t n) {
  const auto pump = PumpProfile::uniform(b, n);
  const auto h1 = fourier_2f_kernel(pump.grid(), slit_plane(), kLambda, kFocal);
  const SlitPair slits(kSep);
  return normalized_values(coherence_at_slits(pump, h1, slits), biphoton_at_slits(pump, h1, slits));
}

}  // namespace

TEST(Coherence, UniformKernelIsFullyCoherent) {
  const auto pump = PumpProfile::uniform(1e-4, 64);
  const auto h1 = LinearKernel::constant(pump.grid(), slit_plane(), cplx(1.0, 0.0));
  const auto g = coherence_at_slits(pump, h1, SlitPair(kSep));
  EXPECT_NEAR(g.G11, 1e-4, 1e-16);
  EXPECT_NEAR(g.G22, 1e-4, 1e-16);
  EXPECT_NEAR(std::abs(g.G12 - cplx(1e-4, 0.0)), 0.0, 1e-16);
  const auto p = biphoton_at_slits(pump, h1, SlitPair(kSep));
  EXPECT_NEAR(std::abs(p.P12 - cplx(1e-4, 0.0)), 0.0, 1e-16);
  const auto c = normalized_values(g, p);
  EXPECT_NEAR(std::abs(c.g1 - 1.0), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(c.psi - 1.0), 0.0, 1e-12);
}

TEST(Coherence, TwoFUniformPumpMatchesSinc) {
  for (double u : {0.25, 0.5, 1.0, 1.5}) {
    const double b = u * kLambda * kFocal / kSep;
    const auto c = two_f_values(b, 4096);
    const double expected = sinc_oracle(u);
    EXPECT_NEAR(c.g1.real(), expected, 1e-6 * std::max(std::abs(expected), 1e-3)) << "u = " << u;
    EXPECT_NEAR(c.g1.imag(), 0.0, 1e-12);
  }
}

TEST(Coherence, ScalingIntensityScalesValuesOnly) {
  const auto pump = PumpProfile::gaussian(1e-4, SpatialGrid(-2e-4, 2e-4, 301));
  const auto h1 = fresnel_kernel(pump.grid(), slit_plane(), kLambda, 0.1);
  const SlitPair slits(kSep);
  std::vector<cplx> w, w3;
  for (double i : pump.intensity()) {
    w.emplace_back(i);
    w3.emplace_back(3.0 * i);
  }
  const auto a = coherence_from_weights(w, h1, slits);
  const auto b = coherence_from_weights(w3, h1, slits);
  EXPECT_NEAR(b.G11, 3.0 * a.G11, 1e-12 * b.G11);
  EXPECT_NEAR(std::abs(b.G12 - 3.0 * a.G12), 0.0, 1e-12 * std::abs(b.G12));
  EXPECT_NEAR(std::abs(b.G12 / std::sqrt(b.G11 * b.G22) - a.G12 / std::sqrt(a.G11 * a.G22)), 0.0, 1e-14);
}

TEST(Coherence, ZeroPumpIsDegenerate) {
  const SpatialGrid g(-1e-4, 1e-4, 8);
  try {
    PumpProfile(PumpShape::uniform, 1e-4, g, std::vector<cplx>(8, cplx{}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_source);
  }
  const auto h1 = LinearKernel::constant(g, slit_plane(), cplx(1.0, 0.0));
  EXPECT_THROW(coherence_from_weights(std::vector<cplx>(8, cplx{}), h1, SlitPair(kSep)), Error);
}

TEST(Biphoton, TwoFUniformPumpEqualsCoherence) {
  for (double u : {0.3, 0.5, 0.9, 1.5}) {
    const auto c = two_f_values(u * kLambda * kFocal / kSep, 2048);
    EXPECT_NEAR(std::abs(c.psi - c.g1), 0.0, 1e-9) << "u = " << u;
  }
}

TEST(Biphoton, ConjugatePumpConjugatesValuesForRealKernel) {
  const SpatialGrid g(-1e-4, 1e-4, 40);
  ComplexMatrix v(5, 40);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (Eigen::Index r = 0; r < 5; ++r)
    for (Eigen::Index c = 0; c < 40; ++c) v(r, c) = u(rng);
  const LinearKernel h1(g, slit_plane(), v);
  std::vector<cplx> e(40), ec(40);
  for (std::size_t i = 0; i < 40; ++i) {
    e[i] = cplx(u(rng), u(rng));
    ec[i] = std::conj(e[i]);
  }
  const auto pump = PumpProfile(PumpShape::gaussian, 1e-4, g, e);
  const auto p = biphoton_at_slits(pump, h1, SlitPair(kSep));
  const auto q = biphoton_at_slits(pump.with_field(ec), h1, SlitPair(kSep));
  EXPECT_NEAR(std::abs(q.P11 - std::conj(p.P11)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(q.P12 - std::conj(p.P12)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(q.P22 - std::conj(p.P22)), 0.0, 1e-15);
}

TEST(Biphoton, SameSumAsCoherenceWhenKernelIsReal) {
  const SpatialGrid g(-1e-4, 1e-4, 33);
  ComplexMatrix v(5, 33);
  for (Eigen::Index r = 0; r < 5; ++r)
    for (Eigen::Index c = 0; c < 33; ++c) v(r, c) = std::cos(0.1 * static_cast<double>(r * c) + 0.2);
  const LinearKernel h1(g, slit_plane(), v);
  const auto pump = PumpProfile::gaussian(8e-5, g);
  const auto p = biphoton_at_slits(pump, h1, SlitPair(kSep));
  const auto c = coherence_from_weights(pump.field(), h1, SlitPair(kSep));
  EXPECT_EQ(c.G12, p.P12);
  EXPECT_EQ(c.G11, p.P11.real());
  EXPECT_EQ(c.G22, p.P22.real());
}

TEST(Normalize, EqualValuesGiveUnitCoherence) {
  const auto c = normalized_values({2.0, 2.0, cplx(2.0, 0.0)}, {cplx(1.0, 0.0), cplx(1.0, 0.0), cplx(0.0, 0.0)});
  EXPECT_DOUBLE_EQ(c.g1.real(), 1.0);
  EXPECT_DOUBLE_EQ(std::abs(c.psi), 0.0);
  EXPECT_EQ(c.orientation, FringeOrientation::sum);
}

TEST(Normalize, VanishingSelfTermsReportWhich) {
  try {
    normalized_values({0.0, 1.0, cplx{}}, {cplx(1.0, 0.0), cplx(1.0, 0.0), cplx{}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::normalization);
    EXPECT_NE(std::string(e.what()).find("G11"), std::string::npos);
  }
  EXPECT_THROW(normalized_values({1.0, 1.0, cplx{}}, {cplx{}, cplx{}, cplx{}}), Error);
}

TEST(Normalize, CrossDominanceInvertsRatio) {
  const auto c = normalized_values({1.0, 1.0, cplx(0.5, 0.0)}, {cplx(0.4, 0.0), cplx(0.4, 0.0), cplx(1.0, 0.0)});
  EXPECT_NEAR(c.psi.real(), 0.4, 1e-15);
  EXPECT_EQ(c.orientation, FringeOrientation::difference);
}

TEST(Normalize, HalfArgumentGivesTwoOverPi) {
  const auto c = two_f_values(0.5 * kLambda * kFocal / kSep, 4096);
  EXPECT_NEAR(c.psi.real(), 0.6366197723675814, 1e-6);
}

TEST(SincClosedForm, ReferenceValues) {
  EXPECT_DOUBLE_EQ(sinc(0.0), 1.0);
  EXPECT_NEAR(sinc(1e-10), 1.0, 1e-15);
  EXPECT_NEAR(sinc(1.0), 0.0, 1e-16);
  EXPECT_NEAR(sinc(1.5), -0.2122065907891938, 1e-15);
  EXPECT_NEAR(sinc(0.5), 0.6366197723675814, 1e-15);
  const double b = 1.5 * kLambda * kFocal / kSep;
  EXPECT_NEAR(psi_sinc_closed_form(b, kSep, kLambda, kFocal), -0.2122065907891938, 1e-12);
  EXPECT_THROW(psi_sinc_closed_form(0.0, kSep, kLambda, kFocal), Error);
}

TEST(RealPart, RejectsLargeImaginaryPart) {
  EXPECT_DOUBLE_EQ(real_part_checked(cplx(0.3, 1e-12), "x"), 0.3);
  EXPECT_THROW(real_part_checked(cplx(0.3, 1e-6), "x"), Error);
}

TEST(Properties, CoherenceMagnitudeBoundedForRandomPumps) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const SpatialGrid g(-2e-4, 2e-4, 128);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<cplx> e(g.size());
    for (auto& v : e) v = std::polar(u(rng), 2.0 * std::numbers::pi * u(rng));
    const PumpProfile pump(PumpShape::gaussian, 1e-4, g, e);
    const double d = 0.02 + 1.0 * u(rng);
    const auto h1 = trial % 2 ? fresnel_kernel(g, slit_plane(), kLambda, d)
                              : fourier_2f_kernel(g, slit_plane(), kLambda, kFocal);
    const auto c = normalized_values(coherence_at_slits(pump, h1, SlitPair(kSep)),
                                     biphoton_at_slits(pump, h1, SlitPair(kSep)));
    EXPECT_LE(std::abs(c.g1), 1.0 + 1e-12);
    EXPECT_LE(std::abs(c.psi), 1.0 + 1e-12);
  }
}

TEST(Properties, DualityAcrossTenWidths) {
  for (int k = 1; k <= 10; ++k) {
    const double b = 0.17 * k * kLambda * kFocal / kSep;
    const auto c = two_f_values(b, 2048);
    EXPECT_NEAR(std::abs(c.g1 - c.psi), 0.0, 1e-9) << "b = " << b;
  }
}

TEST(Properties, QuadratureConvergesUnderGridDoubling) {
  auto fresnel = [](std::size_t n) {
    const auto pump = PumpProfile::uniform(60e-6, n);
    const auto h1 = fresnel_kernel(pump.grid(), slit_plane(), kLambda, 0.063);
    const SlitPair s(kSep);
    return normalized_values(coherence_at_slits(pump, h1, s), biphoton_at_slits(pump, h1, s));
  };
  const auto a = fresnel(2048), b = fresnel(4096);
  EXPECT_LT(std::abs(a.g1 - b.g1) / std::abs(b.g1), 1e-6);
  EXPECT_LT(std::abs(a.psi - b.psi) / std::abs(b.psi), 1e-6);
}
