#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "dslit/error.hpp"
#include "dslit/grid.hpp"
#include "dslit/patterns.hpp"
#include "dslit/random.hpp"

namespace dslit {

/// Intensified camera and its synthetic analog response. Analog levels are in
/// units of full_scale; the threshold sits below the dimmest patch neighbor.
struct CameraModel {
  int width = 512;
  int height = 512;
  double pitch = 24e-6;
  double efficiency = 0.5;
  int patch = 3;
  double full_scale = 65535.0;
  double peak_min = 0.6;
  double peak_max = 1.0;
  double neighbor_min = 0.4;  // fraction of the patch peak
  double neighbor_max = 0.8;
  double threshold = 0.2;  // fraction of full scale
  double dark_rate = 0.01; // single-pixel dark events per frame
  int strip_first = 240;   // inclusive row range of the analysis strip
  int strip_last = 271;

  void validate() const {
    if (width <= 0 || height <= 0 || width > 65535 || height > 65535)
      throw Error(ErrorKind::invalid_parameter, "camera dimensions must be in [1, 65535]");
    if (!(pitch > 0.0)) throw Error(ErrorKind::invalid_parameter, "pixel pitch must be positive");
    if (!(efficiency >= 0.0 && efficiency <= 1.0))
      throw Error(ErrorKind::invalid_parameter, "quantum efficiency must lie in [0, 1]");
    if (patch < 1 || patch % 2 == 0) throw Error(ErrorKind::invalid_parameter, "patch size must be odd");
    if (strip_first < 0 || strip_last >= height || strip_first > strip_last)
      throw Error(ErrorKind::invalid_parameter, "strip rows must lie within the sensor");
    if (!(0.0 < peak_min && peak_min <= peak_max && peak_max <= 1.0))
      throw Error(ErrorKind::invalid_parameter, "peak range must satisfy 0 < min <= max <= 1");
    if (!(0.0 < neighbor_min && neighbor_min <= neighbor_max && neighbor_max < 1.0))
      throw Error(ErrorKind::invalid_parameter, "neighbor range must satisfy 0 < min <= max < 1");
    if (!(threshold >= 0.0 && threshold < 1.0)) throw Error(ErrorKind::invalid_parameter, "threshold outside [0, 1)");
    if (!(dark_rate >= 0.0)) throw Error(ErrorKind::invalid_parameter, "dark rate must be non-negative");
  }

  std::uint16_t threshold_level() const { return static_cast<std::uint16_t>(std::lround(threshold * full_scale)); }
  int strip_rows() const { return strip_last - strip_first + 1; }

  /// Detector coordinate of a column center; columns are centered on the axis.
  double column_position(int col) const { return (col - 0.5 * (width - 1)) * pitch; }

  /// Column containing position x, or -1 when x falls off the sensor.
  int position_column(double x) const {
    const double c = std::floor(x / pitch + 0.5 * width);
    if (c < 0.0 || c >= width) return -1;
    return static_cast<int>(c);
  }

  /// Grid of column centers, the natural sampling grid for simulation pdfs.
  SpatialGrid column_grid() const { return SpatialGrid::centered(static_cast<std::size_t>(width), pitch); }
};

/// Analog raster, row-major, one u16 per pixel.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> pixels;

  Frame() = default;
  Frame(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}

  std::uint16_t& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }
  std::uint16_t at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
  void clear() { std::fill(pixels.begin(), pixels.end(), std::uint16_t{0}); }
  bool operator==(const Frame&) const = default;
};

struct PhotonEvent {
  int row = 0;
  int col = 0;
  std::uint16_t peak = 0;

  bool operator==(const PhotonEvent&) const = default;
};

/// Detector positions (x', x'') of one photon pair, meters.
using PositionPair = std::pair<double, double>;

/// Inverse-CDF sampler over the cells of a non-negative joint pattern.
class PairSampler {
 public:
  explicit PairSampler(const JointPattern2D& pdf) : grid_(pdf.grid), n_(pdf.size()) {
    cdf_.resize(n_ * n_);
    double acc = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        const double v = pdf.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorKind::invalid_pdf, "pdf has negative or non-finite entries");
        acc += v;
        cdf_[i * n_ + j] = acc;
      }
    }
    if (!(acc > 0.0)) throw Error(ErrorKind::invalid_pdf, "pdf has no mass");
    for (auto& c : cdf_) c /= acc;
    cdf_.back() = 1.0;
  }

  const SpatialGrid& grid() const { return grid_; }

  /// Flat cell index (i * n + j) drawn with probability proportional to the pdf.
  std::size_t sample_cell(Rng& rng) const {
    const double u = uniform01(rng);
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

  PositionPair sample(Rng& rng) const {
    const std::size_t cell = sample_cell(rng);
    const double dx = grid_.dx();
    const double x1 = grid_[cell / n_] + (uniform01(rng) - 0.5) * dx;
    const double x2 = grid_[cell % n_] + (uniform01(rng) - 0.5) * dx;
    return {x1, x2};
  }

 private:
  SpatialGrid grid_;
  std::size_t n_;
  std::vector<double> cdf_;
};

/// n i.i.d. photon-pair positions from a joint pdf.
inline std::vector<PositionPair> sample_pairs(const JointPattern2D& pdf, std::size_t n_pairs, Rng& rng) {
  const PairSampler sampler(pdf);
  std::vector<PositionPair> out;
  out.reserve(n_pairs);
  for (std::size_t k = 0; k < n_pairs; ++k) out.push_back(sampler.sample(rng));
  return out;
}

/// Photons of the pairs in one frame that survive detection. Each photon is kept
/// with probability η and placed on a row drawn uniformly within the strip.
/// Photons landing off the sensor columns are lost. Peak values are assigned at render.
inline std::vector<PhotonEvent> apply_detection(std::span<const PositionPair> pairs, double efficiency,
                                                const CameraModel& camera, Rng& rng) {
  if (!(efficiency >= 0.0 && efficiency <= 1.0))
    throw Error(ErrorKind::invalid_parameter, "quantum efficiency must lie in [0, 1]");
  std::bernoulli_distribution keep(efficiency);
  std::uniform_int_distribution<int> row(camera.strip_first, camera.strip_last);
  std::vector<PhotonEvent> events;
  for (const auto& [xa, xb] : pairs) {
    for (const double x : {xa, xb}) {
      const bool survives = keep(rng);
      const int r = row(rng);
      const int c = camera.position_column(x);
      if (survives && c >= 0) events.push_back({r, c, 0});
    }
  }
  return events;
}

/// Deposits one analog patch per event (unique maximum at the event pixel,
/// neighbors strictly dimmer but above threshold) plus single-pixel dark events.
/// Overlapping patches combine by maximum. Returns the events with their peaks.
inline std::vector<PhotonEvent> render_into(Frame& frame, std::span<const PhotonEvent> events,
                                            const CameraModel& camera, Rng& rng) {
  std::vector<PhotonEvent> placed;
  placed.reserve(events.size());
  const int half = camera.patch / 2;
  const double lo_peak = camera.peak_min * camera.full_scale;
  const double hi_peak = camera.peak_max * camera.full_scale;
  for (const auto& ev : events) {
    if (ev.row < 0 || ev.row >= frame.height || ev.col < 0 || ev.col >= frame.width)
      throw Error(ErrorKind::out_of_range, "event outside frame");
    const double peak = std::floor(lo_peak + uniform01(rng) * (hi_peak - lo_peak));
    const auto peak_u16 = static_cast<std::uint16_t>(std::clamp(peak, 1.0, 65535.0));
    for (int dr = -half; dr <= half; ++dr) {
      for (int dc = -half; dc <= half; ++dc) {
        const double frac = camera.neighbor_min + uniform01(rng) * (camera.neighbor_max - camera.neighbor_min);
        const int r = ev.row + dr;
        const int c = ev.col + dc;
        if (r < 0 || r >= frame.height || c < 0 || c >= frame.width) continue;
        std::uint16_t v = peak_u16;
        if (dr != 0 || dc != 0) v = static_cast<std::uint16_t>(std::min(std::floor(frac * peak), peak - 1.0));
        auto& px = frame.at(r, c);
        px = std::max(px, v);
      }
    }
    placed.push_back({ev.row, ev.col, peak_u16});
  }
  std::poisson_distribution<int> dark(camera.dark_rate);
  const int n_dark = camera.dark_rate > 0.0 ? dark(rng) : 0;
  std::uniform_int_distribution<int> rr(0, frame.height - 1), cc(0, frame.width - 1);
  const double lo_dark = camera.threshold * camera.full_scale + 1.0;
  for (int k = 0; k < n_dark; ++k) {
    const int r = rr(rng);
    const int c = cc(rng);
    const double v = lo_dark + uniform01(rng) * (camera.full_scale - lo_dark);
    auto& px = frame.at(r, c);
    px = std::max(px, static_cast<std::uint16_t>(std::min(v, 65535.0)));
  }
  return placed;
}

inline Frame render_frame(std::span<const PhotonEvent> events, const CameraModel& camera, Rng& rng) {
  Frame f(camera.width, camera.height);
  render_into(f, events, camera, rng);
  return f;
}

struct RunConfig {
  std::uint64_t n_frames = 240000;
  double mean_pairs_per_frame = 0.1;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

/// Frame k of a run: Poisson(mean) pairs from the pdf, detection, rendering.
/// Depends only on (sampler, camera, mean, seed, k).
inline void generate_frame_into(Frame& frame, const PairSampler& sampler, const CameraModel& camera,
                                double mean_pairs, std::uint64_t seed, std::uint64_t k) {
  Rng rng(frame_seed(seed, k));
  int n_pairs = 0;
  if (mean_pairs > 0.0) n_pairs = std::poisson_distribution<int>(mean_pairs)(rng);
  std::vector<PositionPair> pairs;
  pairs.reserve(static_cast<std::size_t>(n_pairs));
  for (int i = 0; i < n_pairs; ++i) pairs.push_back(sampler.sample(rng));
  const auto events = apply_detection(pairs, camera.efficiency, camera, rng);
  frame.clear();
  render_into(frame, events, camera, rng);
}

inline Frame generate_frame(const PairSampler& sampler, const CameraModel& camera, double mean_pairs,
                            std::uint64_t seed, std::uint64_t k) {
  Frame f(camera.width, camera.height);
  generate_frame_into(f, sampler, camera, mean_pairs, seed, k);
  return f;
}

/// Generates a run and hands frames to `sink` in index order. Workers fill
/// disjoint batches in parallel; output does not depend on the thread count.
inline void generate_run(const JointPattern2D& pattern, const CameraModel& camera, const RunConfig& run,
                         const std::function<void(std::uint64_t, const Frame&)>& sink) {
  camera.validate();
  if (run.mean_pairs_per_frame < 0.0) throw Error(ErrorKind::invalid_parameter, "mean pairs per frame is negative");
  const PairSampler sampler(pattern);
  const unsigned threads = std::max(1u, run.threads);
  const std::uint64_t batch = 8ull * threads;
  std::vector<Frame> buf(static_cast<std::size_t>(batch), Frame(camera.width, camera.height));
  for (std::uint64_t start = 0; start < run.n_frames; start += batch) {
    const std::uint64_t count = std::min(batch, run.n_frames - start);
    auto work = [&](unsigned t) {
      for (std::uint64_t i = t; i < count; i += threads)
        generate_frame_into(buf[static_cast<std::size_t>(i)], sampler, camera, run.mean_pairs_per_frame, run.seed,
                            start + i);
    };
    if (threads == 1) {
      work(0);
    } else {
      std::vector<std::jthread> pool;
      for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    }
    for (std::uint64_t i = 0; i < count; ++i) sink(start + i, buf[static_cast<std::size_t>(i)]);
  }
}

}  // namespace dslit
