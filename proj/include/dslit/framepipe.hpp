#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <thread>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <Eigen/Dense>

#include "dslit/error.hpp"
#include "dslit/frame_file.hpp"
#include "dslit/patterns.hpp"
#include "dslit/sensor.hpp"

namespace dslit {

/// 0/1 raster, row-major.
struct BinaryImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  std::uint8_t at(int row, int col) const { return bits[static_cast<std::size_t>(row) * width + col]; }
  std::size_t count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }
};

/// 1 where the analog value strictly exceeds `level`.
inline BinaryImage threshold_frame(const Frame& frame, std::uint16_t level) {
  BinaryImage b{frame.width, frame.height, std::vector<std::uint8_t>(frame.pixels.size())};
  for (std::size_t i = 0; i < frame.pixels.size(); ++i) b.bits[i] = frame.pixels[i] > level ? 1 : 0;
  return b;
}

inline constexpr std::size_t kDefaultMinPatch = 4;

namespace detail {

// 8-connected components of `on` pixels; each component of at least min_patch
// pixels yields one event at its analog maximum (first in row-major order on ties).
template <class IsOn>
void collect_components(int width, int height, const std::vector<std::size_t>& seeds, IsOn is_on, const Frame& analog,
                        std::size_t min_patch, std::vector<std::uint8_t>& visited, std::vector<std::size_t>& stack,
                        std::vector<std::size_t>& touched, std::vector<PhotonEvent>& out) {
  for (const std::size_t seed : seeds) {
    if (visited[seed]) continue;
    visited[seed] = 1;
    touched.push_back(seed);
    stack.clear();
    stack.push_back(seed);
    std::size_t size = 0;
    std::size_t best = seed;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++size;
      const std::uint16_t v = analog.pixels[p];
      const std::uint16_t bv = analog.pixels[best];
      if (v > bv || (v == bv && p < best)) best = p;
      const int r = static_cast<int>(p / static_cast<std::size_t>(width));
      const int c = static_cast<int>(p % static_cast<std::size_t>(width));
      for (int dr = -1; dr <= 1; ++dr) {
        const int rr = r + dr;
        if (rr < 0 || rr >= height) continue;
        for (int dc = -1; dc <= 1; ++dc) {
          const int cc = c + dc;
          if ((dr == 0 && dc == 0) || cc < 0 || cc >= width) continue;
          const std::size_t q = static_cast<std::size_t>(rr) * width + cc;
          if (visited[q] || !is_on(q)) continue;
          visited[q] = 1;
          touched.push_back(q);
          stack.push_back(q);
        }
      }
    }
    if (size >= min_patch)
      out.push_back({static_cast<int>(best / static_cast<std::size_t>(width)),
                     static_cast<int>(best % static_cast<std::size_t>(width)), analog.pixels[best]});
  }
  std::sort(out.begin(), out.end(), [](const PhotonEvent& a, const PhotonEvent& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
}

}  // namespace detail

/// Photon events from a thresholded frame and its analog values.
inline std::vector<PhotonEvent> detect_photons(const BinaryImage& binary, const Frame& analog,
                                               std::size_t min_patch = kDefaultMinPatch) {
  if (binary.width != analog.width || binary.height != analog.height)
    throw Error(ErrorKind::invalid_parameter, "binary and analog frames differ in shape");
  std::vector<std::size_t> seeds;
  for (std::size_t i = 0; i < binary.bits.size(); ++i)
    if (binary.bits[i]) seeds.push_back(i);
  std::vector<std::uint8_t> visited(binary.bits.size(), 0);
  std::vector<std::size_t> stack, touched;
  std::vector<PhotonEvent> out;
  detail::collect_components(binary.width, binary.height, seeds, [&](std::size_t q) { return binary.bits[q] != 0; },
                             analog, min_patch, visited, stack, touched, out);
  return out;
}

/// Threshold + detection fused over one frame, reusing scratch buffers across frames.
class PhotonDetector {
 public:
  PhotonDetector(std::uint16_t level, std::size_t min_patch = kDefaultMinPatch) : level_(level), min_patch_(min_patch) {}

  std::vector<PhotonEvent> detect(const Frame& f) {
    if (visited_.size() != f.pixels.size()) visited_.assign(f.pixels.size(), 0);
    seeds_.clear();
    const std::uint16_t* px = f.pixels.data();
    const std::size_t n = f.pixels.size();
    constexpr std::size_t block = 64;
    for (std::size_t start = 0; start < n; start += block) {
      const std::size_t end = std::min(n, start + block);
      std::uint16_t mx = 0;
      for (std::size_t i = start; i < end; ++i) mx = std::max(mx, px[i]);
      if (mx <= level_) continue;
      for (std::size_t i = start; i < end; ++i)
        if (px[i] > level_) seeds_.push_back(i);
    }
    std::vector<PhotonEvent> out;
    if (seeds_.empty()) return out;
    touched_.clear();
    detail::collect_components(f.width, f.height, seeds_, [&](std::size_t q) { return px[q] > level_; }, f, min_patch_,
                               visited_, stack_, touched_, out);
    for (const std::size_t t : touched_) visited_[t] = 0;
    return out;
  }

 private:
  std::uint16_t level_;
  std::size_t min_patch_;
  std::vector<std::uint8_t> visited_;
  std::vector<std::size_t> seeds_, stack_, touched_;
};

/// Two photon registrations of a frame, ordered by column.
struct PairRecord {
  PhotonEvent first;
  PhotonEvent second;
};

enum class FrameClass { empty, single, pair, multi, rejected };

struct Classification {
  FrameClass kind = FrameClass::empty;
  std::optional<PairRecord> pair;
  std::optional<PhotonEvent> single;
};

struct PairFilter {
  int strip_first = 240;
  int strip_last = 271;
  double ratio = 1.0 / 3.0;

  /// |Δrow| < ratio·|Δcol|, strict; exact equality is rejected.
  bool accepts(int drow, int dcol) const {
    const double lhs = std::abs(drow);
    const double rhs = ratio * std::abs(dcol);
    return lhs < rhs && std::abs(lhs - rhs) > 1e-9 * std::max(1.0, rhs);
  }
};

/// Keeps in-strip events, then sorts the frame into empty / single / pair / multi;
/// two-event frames failing the vertical/horizontal separation rule are `rejected`.
inline Classification classify_and_filter(const std::vector<PhotonEvent>& events, const PairFilter& filter) {
  std::vector<PhotonEvent> in;
  for (const auto& e : events)
    if (e.row >= filter.strip_first && e.row <= filter.strip_last) in.push_back(e);
  Classification c;
  switch (in.size()) {
    case 0: c.kind = FrameClass::empty; break;
    case 1:
      c.kind = FrameClass::single;
      c.single = in[0];
      break;
    case 2: {
      auto a = in[0], b = in[1];
      if (b.col < a.col || (b.col == a.col && b.row < a.row)) std::swap(a, b);
      if (filter.accepts(b.row - a.row, b.col - a.col)) {
        c.kind = FrameClass::pair;
        c.pair = PairRecord{a, b};
      } else {
        c.kind = FrameClass::rejected;
      }
      break;
    }
    default: c.kind = FrameClass::multi; break;
  }
  return c;
}

/// Running sum of XᵀX over accepted pairs plus frame tallies. Sums of
/// accumulators are order-independent.
class CoincidenceAccumulator {
 public:
  explicit CoincidenceAccumulator(int width = 0)
      : width_(width),
        sum_(static_cast<std::size_t>(width) * static_cast<std::size_t>(width), 0),
        singles_(static_cast<std::size_t>(width), 0) {}

  int width() const { return width_; }
  std::uint64_t at(int i, int j) const { return sum_[static_cast<std::size_t>(i) * width_ + j]; }
  const std::vector<std::uint64_t>& sum() const { return sum_; }
  const std::vector<std::uint64_t>& singles() const { return singles_; }

  std::uint64_t frames_total = 0;
  std::uint64_t frames_empty = 0;
  std::uint64_t frames_single = 0;
  std::uint64_t frames_pair = 0;
  std::uint64_t frames_multi = 0;
  std::uint64_t pairs_rejected = 0;

  /// X has 1's at the two columns; XᵀX adds to (i,j), (j,i), (i,i), (j,j).
  void accumulate_pair(const PairRecord& p) {
    const int i = p.first.col, j = p.second.col;
    if (i < 0 || j < 0 || i >= width_ || j >= width_) throw Error(ErrorKind::out_of_range, "pair column outside strip");
    bump(i, j);
    bump(j, i);
    bump(i, i);
    bump(j, j);
    ++frames_pair;
    ++frames_total;
  }

  void accumulate_single(const PhotonEvent& e) {
    if (e.col < 0 || e.col >= width_) throw Error(ErrorKind::out_of_range, "event column outside strip");
    ++singles_[static_cast<std::size_t>(e.col)];
    ++frames_single;
    ++frames_total;
  }

  void accumulate(const Classification& c) {
    switch (c.kind) {
      case FrameClass::empty: ++frames_empty; ++frames_total; break;
      case FrameClass::single: accumulate_single(*c.single); break;
      case FrameClass::pair: accumulate_pair(*c.pair); break;
      case FrameClass::multi: ++frames_multi; ++frames_total; break;
      case FrameClass::rejected: ++pairs_rejected; ++frames_total; break;
    }
  }

  void merge(const CoincidenceAccumulator& o) {
    if (o.width_ != width_) throw Error(ErrorKind::composition, "accumulator widths differ");
    for (std::size_t k = 0; k < sum_.size(); ++k) sum_[k] += o.sum_[k];
    for (std::size_t k = 0; k < singles_.size(); ++k) singles_[k] += o.singles_[k];
    frames_total += o.frames_total;
    frames_empty += o.frames_empty;
    frames_single += o.frames_single;
    frames_pair += o.frames_pair;
    frames_multi += o.frames_multi;
    pairs_rejected += o.pairs_rejected;
  }

  bool operator==(const CoincidenceAccumulator&) const = default;

 private:
  void bump(int i, int j) { ++sum_[static_cast<std::size_t>(i) * width_ + j]; }

  int width_;
  std::vector<std::uint64_t> sum_;
  std::vector<std::uint64_t> singles_;
};

/// Per-frame reduction: detect, classify, accumulate.
class FrameProcessor {
 public:
  explicit FrameProcessor(const CameraModel& camera, double ratio = 1.0 / 3.0,
                          std::size_t min_patch = kDefaultMinPatch)
      : detector_(camera.threshold_level(), min_patch), filter_{camera.strip_first, camera.strip_last, ratio} {}

  void process(const Frame& f, CoincidenceAccumulator& acc) { acc.accumulate(classify_and_filter(detector_.detect(f), filter_)); }

  const PairFilter& filter() const { return filter_; }

 private:
  PhotonDetector detector_;
  PairFilter filter_;
};

struct FinalizeOptions {
  int resolution = 3;  // pixels; diagonal interpolation reach
};

/// G⁽²⁾ estimate on the column grid: average of XᵀX per frame, diagonal replaced
/// by the mean of up to `resolution` off-diagonal neighbors on each side,
/// symmetrized and unit-sum normalized.
inline JointPattern2D finalize(const CoincidenceAccumulator& acc, double pitch, const FinalizeOptions& opt = {}) {
  if (acc.frames_pair == 0) throw Error(ErrorKind::empty_estimate, "no accepted coincidence pairs");
  const int n = acc.width();
  Eigen::MatrixXd m(n, n);
  const double inv = 1.0 / static_cast<double>(acc.frames_total);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = static_cast<double>(acc.at(i, j)) * inv;
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    int k = 0;
    for (int d = 1; d <= opt.resolution; ++d) {
      if (i - d >= 0) {
        s += m(i, i - d);
        ++k;
      }
      if (i + d < n) {
        s += m(i, i + d);
        ++k;
      }
    }
    m(i, i) = k > 0 ? s / k : 0.0;
  }
  m = 0.5 * (m + m.transpose()).eval();
  JointPattern2D p{SpatialGrid::centered(static_cast<std::size_t>(n), pitch), std::move(m), JointKind::coincidence,
                   false, 0.0};
  normalize_unit_sum(p);
  return p;
}

/// Fraction of two-event frames whose photons come from different pairs.
/// With Poisson pair numbers, frames holding exactly one photon from each of two
/// pairs occur at rate singles² / (2 · empty) relative to the frame count.
inline double accidental_fraction(const CoincidenceAccumulator& acc) {
  const double candidates = static_cast<double>(acc.frames_pair + acc.pairs_rejected);
  if (acc.frames_empty == 0 || candidates <= 0.0) return 0.0;
  const double singles = static_cast<double>(acc.frames_single);
  const double accidental = singles * singles / (2.0 * static_cast<double>(acc.frames_empty));
  return std::clamp(accidental / candidates, 0.0, 0.5);
}

/// Removes a fraction `eps` of uncorrelated pairs, modeled as the product of the
/// estimate's own marginals, and renormalizes.
inline JointPattern2D subtract_accidentals(const JointPattern2D& estimate, double eps) {
  if (!(eps >= 0.0 && eps < 1.0)) throw Error(ErrorKind::invalid_parameter, "accidental fraction must lie in [0, 1)");
  const auto im = marginal_pattern(estimate);
  const Eigen::Map<const Eigen::VectorXd> v(im.values.data(), static_cast<Eigen::Index>(im.values.size()));
  JointPattern2D out = estimate;
  out.values = (estimate.values - eps * v * v.transpose()) / (1.0 - eps);
  return out;
}

/// Block sums over factor×factor cells; trailing rows/columns are zero-padded.
inline Eigen::MatrixXd superpixel_bin(const Eigen::MatrixXd& m, int factor = 4) {
  if (factor < 1) throw Error(ErrorKind::invalid_parameter, "binning factor must be positive");
  const auto rows = (m.rows() + factor - 1) / factor;
  const auto cols = (m.cols() + factor - 1) / factor;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(i / factor, j / factor) += m(i, j);
  return out;
}

inline std::vector<double> superpixel_bin(const std::vector<double>& v, int factor = 4) {
  if (factor < 1) throw Error(ErrorKind::invalid_parameter, "binning factor must be positive");
  std::vector<double> out((v.size() + static_cast<std::size_t>(factor) - 1) / static_cast<std::size_t>(factor), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) out[i / static_cast<std::size_t>(factor)] += v[i];
  return out;
}

/// Single-photon rate from the G⁽²⁾ estimate (row sums).
inline FringePattern1D estimate_marginal(const JointPattern2D& estimate) { return marginal_pattern(estimate); }

/// Histogram of photon columns from single-event frames, as a unit-integral density.
inline FringePattern1D singles_histogram(const CoincidenceAccumulator& acc, double pitch) {
  std::vector<double> v(acc.singles().begin(), acc.singles().end());
  double total = 0.0;
  for (double x : v) total += x;
  if (total > 0.0)
    for (auto& x : v) x /= total * pitch;
  return {SpatialGrid::centered(static_cast<std::size_t>(acc.width()), pitch), std::move(v), 0.0};
}

struct MarginalComparison {
  double chi_square = 0.0;
  int dof = 0;
  double p_value = 1.0;
  double pair_photons = 0.0;
  double single_photons = 0.0;
};

/// Two-sample chi-square between the marginal of the G⁽²⁾ estimate, scaled to the
/// number of photons in accepted pairs, and the single-frame histogram, both
/// binned into `factor`-pixel superpixels. Empty bin pairs are skipped.
inline MarginalComparison compare_marginals(const CoincidenceAccumulator& acc, const JointPattern2D& estimate,
                                            int factor = 4) {
  MarginalComparison r;
  r.pair_photons = 2.0 * static_cast<double>(acc.frames_pair);
  r.single_photons = static_cast<double>(acc.frames_single);
  if (r.pair_photons <= 0.0 || r.single_photons <= 0.0)
    throw Error(ErrorKind::empty_estimate, "marginal comparison needs both pair and single frames");
  const auto im = marginal_pattern(estimate);
  std::vector<double> a(im.values.size());
  const double dx = im.grid.dx();
  for (std::size_t k = 0; k < a.size(); ++k) a[k] = im.values[k] * dx * r.pair_photons;
  std::vector<double> b(acc.singles().begin(), acc.singles().end());
  a = superpixel_bin(a, factor);
  b = superpixel_bin(b, factor);
  const double k1 = std::sqrt(r.single_photons / r.pair_photons), k2 = 1.0 / k1;
  int bins = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double n = a[k] + b[k];
    if (n <= 0.0) continue;
    const double d = k1 * a[k] - k2 * b[k];
    r.chi_square += d * d / n;
    ++bins;
  }
  r.dof = std::max(1, bins - 1);
  r.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(r.dof), r.chi_square));
  return r;
}

/// Runs the frame reduction over frames [0, n) using `threads` workers, each
/// with a private accumulator over a contiguous index range; merged in range
/// order. `make_source()` is called once per worker and returns a callable
/// `(k, frame)` that fills frame k.
template <class SourceFactory>
CoincidenceAccumulator process_frames(std::uint64_t n, const CameraModel& camera, unsigned threads,
                                      SourceFactory make_source, double ratio = 1.0 / 3.0) {
  threads = std::max(1u, threads);
  std::vector<CoincidenceAccumulator> parts(threads, CoincidenceAccumulator(camera.width));
  auto work = [&](unsigned t) {
    const std::uint64_t lo = n * t / threads;
    const std::uint64_t hi = n * (t + 1) / threads;
    if (lo == hi) return;
    auto source = make_source();
    FrameProcessor proc(camera, ratio);
    Frame f(camera.width, camera.height);
    for (std::uint64_t k = lo; k < hi; ++k) {
      source(k, f);
      proc.process(f, parts[t]);
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
  }
  CoincidenceAccumulator total(camera.width);
  for (const auto& p : parts) total.merge(p);
  return total;
}

/// Simulates and reduces a run in memory, without a frame file.
inline CoincidenceAccumulator simulate_and_accumulate(const JointPattern2D& pattern, const CameraModel& camera,
                                                      const RunConfig& run, double ratio = 1.0 / 3.0) {
  camera.validate();
  const PairSampler sampler(pattern);
  return process_frames(
      run.n_frames, camera, run.threads,
      [&] {
        return [&](std::uint64_t k, Frame& f) {
          generate_frame_into(f, sampler, camera, run.mean_pairs_per_frame, run.seed, k);
        };
      },
      ratio);
}

/// Reduces a frame file; each worker reads its own index range through a private reader.
inline CoincidenceAccumulator analyze_file(const std::filesystem::path& path, const CameraModel& camera,
                                           unsigned threads, double ratio = 1.0 / 3.0) {
  const FrameReader probe(path);
  if (probe.header().width != camera.width || probe.header().height != camera.height)
    throw Error(ErrorKind::config, "frame file dimensions differ from the camera configuration");
  return process_frames(
      probe.frame_count(), camera, threads,
      [&path] {
        return [reader = std::make_shared<FrameReader>(path)](std::uint64_t k, Frame& f) {
          if (reader->next_index() != k) reader->seek(static_cast<std::uint32_t>(k));
          reader->read(f);
        };
      },
      ratio);
}

}  // namespace dslit
