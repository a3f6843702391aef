#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <random>

#include "dslit/experiment.hpp"
#include "dslit/framepipe.hpp"
#include "test_util.hpp"

using namespace dslit;

namespace {

const double kPeriod = 812e-9 * 50e-3 / 0.7e-3;

// Stamps a 3×3 patch with a bright center.
void stamp(Frame& f, int r, int c, std::uint16_t peak = 60000, std::uint16_t side = 30000) {
  for (int dr = -1; dr <= 1; ++dr)
    for (int dc = -1; dc <= 1; ++dc) f.at(r + dr, c + dc) = side;
  f.at(r, c) = peak;
}

PhotonEvent ev(int r, int c) { return {r, c, 0}; }

CoincidenceAccumulator random_accumulator(int width, int frames, std::mt19937_64& rng) {
  CoincidenceAccumulator a(width);
  std::uniform_int_distribution<int> kind(0, 4), col(0, width - 1);
  for (int k = 0; k < frames; ++k) {
    Classification c;
    switch (kind(rng)) {
      case 0: c.kind = FrameClass::empty; break;
      case 1: c.kind = FrameClass::single; c.single = ev(250, col(rng)); break;
      case 2: c.kind = FrameClass::pair; c.pair = PairRecord{ev(250, col(rng)), ev(251, col(rng))}; break;
      case 3: c.kind = FrameClass::multi; break;
      default: c.kind = FrameClass::rejected; break;
    }
    a.accumulate(c);
  }
  return a;
}

ExperimentConfig closure_config(double psi) {
  ExperimentConfig cfg;
  cfg.psi = psi;
  return cfg;
}

AnalysisResult closure_run(double psi, std::uint64_t seed) {
  auto cfg = closure_config(psi);
  cfg.seed = seed;
  const auto src = compute_source(cfg);
  const auto acc = simulate_and_accumulate(simulation_pattern(cfg, src), cfg.camera,
                                           RunConfig{cfg.n_frames, cfg.mean_pairs, cfg.seed, cfg.threads});
  return analyze_accumulator(acc, cfg);
}

}  // namespace

TEST(Threshold, StrictlyAboveLevel) {
  Frame f(4, 1);
  f.pixels = {9, 10, 11, 65535};
  const auto b = threshold_frame(f, 10);
  EXPECT_EQ(b.bits, (std::vector<std::uint8_t>{0, 0, 1, 1}));
}

TEST(Detect, PatchCenterIsTheEvent) {
  Frame f(20, 20);
  stamp(f, 7, 11);
  const auto e = detect_photons(threshold_frame(f, 100), f);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e[0].row, 7);
  EXPECT_EQ(e[0].col, 11);
  EXPECT_EQ(e[0].peak, 60000);
}

TEST(Detect, SeparatePatchesSortedRowMajor) {
  Frame f(30, 20);
  stamp(f, 12, 3);
  stamp(f, 4, 25);
  const auto e = detect_photons(threshold_frame(f, 100), f);
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0].row, 4);
  EXPECT_EQ(e[1].row, 12);
}

TEST(Detect, SmallComponentsRejected) {
  Frame f(10, 10);
  f.at(2, 2) = 50000;
  f.at(6, 6) = f.at(6, 7) = f.at(7, 6) = 50000;
  EXPECT_TRUE(detect_photons(threshold_frame(f, 100), f).empty());
  f.at(7, 7) = 50000;
  EXPECT_EQ(detect_photons(threshold_frame(f, 100), f).size(), 1u);
}

TEST(Detect, TiesGoToFirstPixelRowMajor) {
  Frame f(10, 10);
  for (int r = 3; r <= 4; ++r)
    for (int c = 5; c <= 6; ++c) f.at(r, c) = 40000;
  const auto e = detect_photons(threshold_frame(f, 100), f);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e[0].row, 3);
  EXPECT_EQ(e[0].col, 5);
}

TEST(Detect, FusedDetectorMatchesTwoStage) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> pos(1, 62), val(0, 3000);
  for (int trial = 0; trial < 100; ++trial) {
    Frame f(64, 64);
    for (auto& p : f.pixels) p = static_cast<std::uint16_t>(val(rng));
    for (int k = 0; k < 4; ++k) stamp(f, pos(rng), pos(rng), static_cast<std::uint16_t>(40000 + k), 20000);
    PhotonDetector det(2500);
    EXPECT_EQ(det.detect(f).size(), detect_photons(threshold_frame(f, 2500), f).size());
    const auto a = det.detect(f);
    const auto b = detect_photons(threshold_frame(f, 2500), f);
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].row, b[i].row);
      EXPECT_EQ(a[i].col, b[i].col);
    }
  }
}

TEST(Classify, PairSeparationRule) {
  const PairFilter f;
  EXPECT_TRUE(f.accepts(5, 30));
  EXPECT_FALSE(f.accepts(12, 30));
  EXPECT_FALSE(f.accepts(10, 30));
  EXPECT_TRUE(f.accepts(-9, -30));
  EXPECT_FALSE(f.accepts(0, 0));
}

TEST(Classify, FrameKinds) {
  const PairFilter f;
  EXPECT_EQ(classify_and_filter({}, f).kind, FrameClass::empty);
  EXPECT_EQ(classify_and_filter({ev(250, 10)}, f).kind, FrameClass::single);
  EXPECT_EQ(classify_and_filter({ev(100, 10)}, f).kind, FrameClass::empty);
  const auto p = classify_and_filter({ev(255, 40), ev(250, 10)}, f);
  ASSERT_EQ(p.kind, FrameClass::pair);
  EXPECT_EQ(p.pair->first.col, 10);
  EXPECT_EQ(p.pair->second.col, 40);
  EXPECT_EQ(classify_and_filter({ev(242, 10), ev(254, 40)}, f).kind, FrameClass::rejected);
  EXPECT_EQ(classify_and_filter({ev(250, 10), ev(250, 40), ev(260, 300)}, f).kind, FrameClass::multi);
  EXPECT_EQ(classify_and_filter({ev(250, 10), ev(250, 40), ev(5, 300)}, f).kind, FrameClass::pair);
}

TEST(Accumulator, PairIncrementsFourCells) {
  CoincidenceAccumulator a(64);
  a.accumulate_pair({ev(250, 10), ev(252, 40)});
  EXPECT_EQ(a.at(10, 40), 1u);
  EXPECT_EQ(a.at(40, 10), 1u);
  EXPECT_EQ(a.at(10, 10), 1u);
  EXPECT_EQ(a.at(40, 40), 1u);
  std::uint64_t total = 0;
  for (auto v : a.sum()) total += v;
  EXPECT_EQ(total, 4u);
  EXPECT_EQ(a.frames_pair, 1u);
  EXPECT_EQ(a.frames_total, 1u);
  EXPECT_THROW(a.accumulate_pair({ev(250, 10), ev(250, 64)}), Error);
}

TEST(Accumulator, CountersPartitionFrames) {
  std::mt19937_64 rng(2);
  const auto a = random_accumulator(32, 1000, rng);
  EXPECT_EQ(a.frames_total, a.frames_empty + a.frames_single + a.frames_pair + a.frames_multi + a.pairs_rejected);
}

TEST(Accumulator, MergeIsOrderIndependent) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<CoincidenceAccumulator> parts;
    std::uniform_int_distribution<int> n(0, 200);
    for (int k = 0; k < 6; ++k) parts.push_back(random_accumulator(16, n(rng), rng));
    CoincidenceAccumulator ref(16);
    for (const auto& p : parts) ref.merge(p);
    std::shuffle(parts.begin(), parts.end(), rng);
    CoincidenceAccumulator left(16), right(16);
    for (std::size_t k = 0; k < 3; ++k) left.merge(parts[k]);
    for (std::size_t k = 3; k < parts.size(); ++k) right.merge(parts[k]);
    right.merge(left);
    EXPECT_EQ(right, ref);
    CoincidenceAccumulator with_identity = ref;
    with_identity.merge(CoincidenceAccumulator(16));
    EXPECT_EQ(with_identity, ref);
  }
  CoincidenceAccumulator a(8);
  EXPECT_THROW(a.merge(CoincidenceAccumulator(9)), Error);
}

TEST(Finalize, SinglePairEstimate) {
  CoincidenceAccumulator a(16);
  a.accumulate_pair({ev(250, 4), ev(250, 12)});
  a.accumulate(Classification{});
  const auto p = finalize(a, 24e-6);
  EXPECT_NEAR(p.values.sum() * p.grid.dx() * p.grid.dx(), 1.0, 1e-12);
  EXPECT_NEAR(p.values(4, 12), p.values(12, 4), 0.0);
  EXPECT_GT(p.values(4, 12), 0.0);
  // diagonal entries come from off-diagonal neighbors only
  EXPECT_DOUBLE_EQ(p.values(4, 4), 0.0);
  EXPECT_DOUBLE_EQ(p.values(0, 5), 0.0);
}

TEST(Finalize, DiagonalIsNeighborMean) {
  CoincidenceAccumulator a(8);
  a.accumulate_pair({ev(250, 2), ev(250, 3)});
  a.accumulate_pair({ev(250, 3), ev(250, 5)});
  const auto p = finalize(a, 24e-6, {1});
  // before normalization: row 3 neighbors (3,2)=1 and (3,4)=0
  const double unit = p.values(2, 3);
  EXPECT_NEAR(p.values(3, 3), 0.5 * unit, 1e-15);
  EXPECT_NEAR(p.values(0, 0), 0.0, 1e-15);
}

TEST(Finalize, SymmetricForRandomInput) {
  std::mt19937_64 rng(8);
  const auto a = random_accumulator(24, 3000, rng);
  const auto p = finalize(a, 24e-6);
  EXPECT_LT((p.values - p.values.transpose()).cwiseAbs().maxCoeff(), 1e-18);
  EXPECT_GE(p.values.minCoeff(), 0.0);
}

TEST(Finalize, EmptyEstimateRaises) {
  CoincidenceAccumulator a(8);
  a.accumulate(Classification{});
  try {
    finalize(a, 24e-6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::empty_estimate);
    EXPECT_EQ(exit_code_for(e), 3);
  }
}

TEST(Superpixel, BlockSums) {
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(8, 8);
  const auto b = superpixel_bin(ones, 4);
  ASSERT_EQ(b.rows(), 2);
  ASSERT_EQ(b.cols(), 2);
  EXPECT_TRUE(b.isApprox(Eigen::MatrixXd::Constant(2, 2, 16.0)));
  EXPECT_TRUE(superpixel_bin(ones, 1).isApprox(ones));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  Eigen::MatrixXd r(13, 10);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = u(rng);
  const auto rb = superpixel_bin(r, 3);
  EXPECT_EQ(rb.rows(), 5);
  EXPECT_EQ(rb.cols(), 4);
  EXPECT_NEAR(rb.sum(), r.sum(), 1e-12);
  EXPECT_THROW(superpixel_bin(r, 0), Error);
  EXPECT_EQ(superpixel_bin(std::vector<double>{1, 2, 3, 4, 5}, 2), (std::vector<double>{3, 7, 5}));
}

TEST(Marginal, RowSumsOfEstimate) {
  std::mt19937_64 rng(3);
  const auto a = random_accumulator(16, 2000, rng);
  const auto p = finalize(a, 24e-6);
  const auto m = estimate_marginal(p);
  const double dx = p.grid.dx();
  const Eigen::VectorXd rows = p.values.rowwise().sum() * dx;
  const Eigen::VectorXd cols = p.values.colwise().sum().transpose() * dx;
  EXPECT_LT((rows - cols).cwiseAbs().maxCoeff(), 1e-9 * rows.maxCoeff());
  double integral = 0.0;
  for (int i = 0; i < 16; ++i) {
    EXPECT_NEAR(m.values[static_cast<std::size_t>(i)], rows(i), 1e-12 * rows.maxCoeff());
    integral += m.values[static_cast<std::size_t>(i)] * dx;
  }
  EXPECT_NEAR(integral, 1.0, 1e-12);
}

TEST(Marginal, FlatJointGivesFlatMarginal) {
  const SpatialGrid g = SpatialGrid::centered(10, 1e-5);
  JointPattern2D p{g, Eigen::MatrixXd::Constant(10, 10, 0.01), JointKind::coincidence, false, 0.0};
  const auto m = estimate_marginal(p);
  for (double v : m.values) EXPECT_NEAR(v, m.values[0], 1e-12);
}

TEST(Accumulator, SyntheticPairsMatchTheirPdf) {
  const int n = 128;
  CameraModel cam;
  cam.width = n;
  ScopedWarningSink quiet(nullptr);
  const auto pdf = coincidence_pattern(0.5, kPeriod, cam.column_grid());
  const PairSampler sampler(pdf);
  std::mt19937_64 rng(21);
  CoincidenceAccumulator a(n);
  const int pairs = 100000;
  for (int k = 0; k < pairs; ++k) {
    const auto cell = sampler.sample_cell(rng);
    const int i = static_cast<int>(cell / n), j = static_cast<int>(cell % n);
    if (i == j) continue;
    a.accumulate_pair({ev(250, std::min(i, j)), ev(250, std::max(i, j))});
  }
  // unordered off-diagonal cells, binned 16×16
  const int f = 16, nb = n / f;
  Eigen::MatrixXd obs = Eigen::MatrixXd::Zero(nb, nb), expct = Eigen::MatrixXd::Zero(nb, nb);
  double off = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) off += pdf.values(i, j) + pdf.values(j, i);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      obs(i / f, j / f) += static_cast<double>(a.at(i, j));
      expct(i / f, j / f) += (pdf.values(i, j) + pdf.values(j, i)) / off * static_cast<double>(a.frames_pair);
    }
  double chi2 = 0.0;
  int bins = 0;
  for (int bi = 0; bi < nb; ++bi)
    for (int bj = bi; bj < nb; ++bj) {
      if (expct(bi, bj) <= 0.0) continue;
      chi2 += (obs(bi, bj) - expct(bi, bj)) * (obs(bi, bj) - expct(bi, bj)) / expct(bi, bj);
      ++bins;
    }
  const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(bins - 1), chi2));
  EXPECT_GT(p, 0.01) << "chi2 " << chi2 << " over " << bins << " bins";
}

TEST(Accidentals, FractionFromCounters) {
  CoincidenceAccumulator a(8);
  a.frames_empty = 800;
  a.frames_single = 160;
  a.frames_pair = 30;
  a.pairs_rejected = 10;
  EXPECT_DOUBLE_EQ(accidental_fraction(a), 160.0 * 160.0 / 1600.0 / 40.0);
  a.frames_empty = 0;
  EXPECT_DOUBLE_EQ(accidental_fraction(a), 0.0);
  a.frames_empty = 1;
  EXPECT_DOUBLE_EQ(accidental_fraction(a), 0.5);
}

TEST(Accidentals, SubtractionRemovesProductComponent) {
  const SpatialGrid g = SpatialGrid::centered(64, kPeriod / 16);
  const auto truth = coincidence_pattern(0.3, kPeriod, g);
  const auto m = marginal_pattern(truth);
  const Eigen::Map<const Eigen::VectorXd> v(m.values.data(), 64);
  const double eps = 0.2;
  JointPattern2D mixed = truth;
  mixed.values = (1 - eps) * truth.values + eps * v * v.transpose();
  // mixing with the product of marginals leaves the marginal unchanged
  const auto back = subtract_accidentals(mixed, eps);
  EXPECT_LT((back.values - truth.values).cwiseAbs().maxCoeff(), 1e-12 * truth.values.maxCoeff());
  EXPECT_TRUE(subtract_accidentals(truth, 0.0).values.isApprox(truth.values));
  EXPECT_THROW(subtract_accidentals(truth, 1.0), Error);
  EXPECT_THROW(subtract_accidentals(truth, -0.01), Error);
}

TEST(MarginalCheck, IdenticalSourcesPass) {
  const int n = 64;
  CameraModel cam;
  cam.width = n;
  ScopedWarningSink quiet(nullptr);
  const auto pdf = coincidence_pattern(0.6, kPeriod, cam.column_grid());
  const PairSampler sampler(pdf);
  std::mt19937_64 rng(4);
  CoincidenceAccumulator a(n);
  for (int k = 0; k < 50000; ++k) {
    const auto [x, y] = sampler.sample(rng);
    const int i = cam.position_column(x), j = cam.position_column(y);
    if (i != j) a.accumulate_pair({ev(250, std::min(i, j)), ev(250, std::max(i, j))});
    a.accumulate_single(ev(250, cam.position_column(std::bernoulli_distribution(0.5)(rng) ? x : y)));
  }
  const auto r = compare_marginals(a, finalize(a, cam.pitch));
  EXPECT_EQ(r.dof, 15);
  EXPECT_GT(r.p_value, 0.01);

  CoincidenceAccumulator only_pairs(n);
  only_pairs.accumulate_pair({ev(250, 1), ev(250, 9)});
  EXPECT_THROW(compare_marginals(only_pairs, finalize(only_pairs, cam.pitch)), Error);
}

TEST(AnalyzeFile, WorkerCountDoesNotChangeAccumulator) {
  TempDir dir;
  auto cfg = closure_config(0.6);
  cfg.camera.width = 128;
  cfg.camera.height = 64;
  cfg.camera.strip_first = 16;
  cfg.camera.strip_last = 47;
  cfg.n_frames = 400;
  cfg.mean_pairs = 1.0;
  cfg.output_dir = dir.path();
  std::ostringstream log;
  const auto path = cmd_simulate(cfg, log);
  const auto one = analyze_file(path, cfg.camera, 1);
  EXPECT_GT(one.frames_pair, 0u);
  EXPECT_EQ(one.frames_total, 400u);
  EXPECT_EQ(analyze_file(path, cfg.camera, 4), one);
  EXPECT_EQ(analyze_file(path, cfg.camera, 16), one);
  EXPECT_EQ(simulate_and_accumulate(simulation_pattern(cfg, compute_source(cfg)), cfg.camera,
                                    RunConfig{cfg.n_frames, cfg.mean_pairs, cfg.seed, 3}),
            one);
  auto wrong = cfg.camera;
  wrong.width = 64;
  EXPECT_THROW(analyze_file(path, wrong, 1), Error);
}

TEST(Closure, IncoherentLimit) {
  const auto r = closure_run(0.0, 1);
  EXPECT_NEAR(signed_visibility(r.marginal_fit), 0.0, 0.05);
  EXPECT_NEAR(r.joint_fit.V12, 1.0, 0.05);
}

TEST(Closure, CoherentLimit) {
  const auto r = closure_run(1.0, 1);
  EXPECT_NEAR(signed_visibility(r.marginal_fit), 1.0, 0.05);
  EXPECT_NEAR(r.joint_fit.V12, 0.0, 0.05);
}
