#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dslit/biphoton.hpp"
#include "dslit/config.hpp"
#include "dslit/error.hpp"
#include "dslit/frame_file.hpp"
#include "dslit/framepipe.hpp"
#include "dslit/io.hpp"
#include "dslit/optics.hpp"
#include "dslit/patterns.hpp"
#include "dslit/sensor.hpp"
#include "dslit/visibility.hpp"

namespace dslit {

/// Slit-plane quantities for one geometry and the ψ that drives the patterns.
struct SourceModel {
  ApertureCorrelations correlations;  // direct quadrature of the coherence and biphoton sums
  double g1 = 0.0;
  double psi = 0.0;  // value used for patterns and analytic visibilities
  VisibilitySet analytic;
  VisibilitySet direct;  // from the complex quadrature ψ, may fall inside the circle
  double direct_residual = 0.0;
};

inline SpatialGrid slit_plane_grid(double separation) { return SpatialGrid(-separation, separation, 5); }

inline PumpProfile make_pump(const ExperimentConfig& cfg) {
  if (cfg.pump_shape == PumpShape::uniform) return PumpProfile::uniform(cfg.pump_width, cfg.pump_nodes);
  const double half = 1.5 * cfg.pump_width;
  return PumpProfile::gaussian(cfg.pump_width, SpatialGrid::midpoints(-half, half, cfg.pump_nodes));
}

inline LinearKernel illumination_kernel(const ExperimentConfig& cfg, const SpatialGrid& source,
                                        const SpatialGrid& slit_plane) {
  if (cfg.illumination == Illumination::fresnel)
    return fresnel_kernel(source, slit_plane, cfg.wavelength, cfg.distance);
  return fourier_2f_kernel(source, slit_plane, cfg.wavelength, cfg.focal_length);
}

/// Coherence and biphoton values at the slits by quadrature; ψ comes from the
/// explicit override, the direct biphoton ratio, or (default) the
/// rectangular-pump duality ψ = g1.
inline SourceModel compute_source(const ExperimentConfig& cfg) {
  const PumpProfile pump = make_pump(cfg);
  const SlitPair slits(cfg.separation);
  const LinearKernel h1 = illumination_kernel(cfg, pump.grid(), slit_plane_grid(cfg.separation));
  SourceModel m;
  m.correlations = normalized_values(coherence_at_slits(pump, h1, slits), biphoton_at_slits(pump, h1, slits));
  m.g1 = real_part_checked(m.correlations.g1, "g1");
  if (cfg.has_psi_override()) m.psi = cfg.psi;
  else if (cfg.psi_model == PsiModel::direct) m.psi = real_part_checked(m.correlations.psi, "psi");
  else m.psi = m.g1;
  m.analytic = visibilities_from_psi(std::clamp(m.psi, -1.0, 1.0));
  m.analytic.V1 = m.g1;
  m.direct = visibilities_from_complex_psi(m.correlations.psi);
  m.direct.V1 = m.g1;
  m.direct_residual = check_complementarity(m.direct, 0.0).residual;
  return m;
}

/// Integer number of fringe periods sampled `samples_per_period` times each.
inline SpatialGrid analytic_detector_grid(const ExperimentConfig& cfg) {
  return SpatialGrid::centered(cfg.pattern_periods * cfg.samples_per_period,
                               cfg.period() / static_cast<double>(cfg.samples_per_period));
}

struct PatternSet {
  FringePattern1D intensity;
  JointPattern2D coincidence;
  FringePattern1D marginal;
  JointPattern2D excess;
};

inline PatternSet compute_patterns(const ExperimentConfig& cfg, const SourceModel& src, const SpatialGrid& grid) {
  const SlitPair slits(cfg.separation);
  const LinearKernel h2 = fourier_2f_kernel(slit_plane_grid(cfg.separation), grid, cfg.wavelength, cfg.focal_length);
  auto corr = src.correlations;
  PatternSet s{intensity_general(h2, corr, slits, grid), coincidence_pattern(src.psi, cfg.period(), grid), {grid, {}, 0.0},
               {grid, {}, JointKind::excess, false, 0.0}};
  s.intensity.period = cfg.period();
  if (cfg.finite_slits) {
    const auto env = slit_envelope(cfg.slit_width, cfg.wavelength, cfg.focal_length, grid);
    apply_envelope(s.intensity, env);
    apply_envelope(s.coincidence, env);
  }
  s.marginal = marginal_pattern(s.coincidence);
  s.excess = excess_pattern(s.coincidence, s.marginal, integer_period_region(grid, cfg.period()));
  return s;
}

/// Pattern used to drive the Monte Carlo: the two-photon pdf on the camera's column grid.
inline JointPattern2D simulation_pattern(const ExperimentConfig& cfg, const SourceModel& src) {
  const SpatialGrid grid = cfg.camera.column_grid();
  JointPattern2D p = [&] {
    ScopedWarningSink quiet(nullptr);
    return coincidence_pattern(src.psi, cfg.period(), grid);
  }();
  if (cfg.finite_slits) apply_envelope(p, slit_envelope(cfg.slit_width, cfg.wavelength, cfg.focal_length, grid));
  return p;
}

struct AnalysisResult {
  CoincidenceAccumulator accumulator;
  JointPattern2D estimate;
  FringePattern1D marginal;
  FringePattern1D singles;
  JointPattern2D excess;
  FringeFit marginal_fit;
  FringeFit singles_fit;
  JointFit joint_fit;
  double accidental_fraction = 0.0;
  std::optional<MarginalComparison> marginal_check;
};

inline AnalysisResult analyze_accumulator(const CoincidenceAccumulator& acc, const ExperimentConfig& cfg) {
  JointPattern2D estimate = finalize(acc, cfg.camera.pitch);
  const double eps = cfg.subtract_accidentals ? accidental_fraction(acc) : 0.0;
  if (eps > 0.0) estimate = subtract_accidentals(estimate, eps);
  estimate.period = cfg.period();
  FringePattern1D marginal = estimate_marginal(estimate);
  marginal.period = cfg.period();
  FringePattern1D singles = singles_histogram(acc, cfg.camera.pitch);
  const auto roi = integer_period_region(estimate.grid, cfg.period());
  JointPattern2D excess = excess_pattern(estimate, marginal, roi);
  FringeFitOptions fopt;
  if (cfg.finite_slits)
    fopt.envelope = slit_envelope(cfg.slit_width, cfg.wavelength, cfg.focal_length, marginal.grid);
  const FringeFit marginal_fit = fit_fringe_visibility(marginal, cfg.period(), fopt);
  const FringeFit singles_fit = acc.frames_single > 0 ? fit_fringe_visibility(singles, cfg.period(), fopt) : FringeFit{};
  const JointFit joint_fit = fit_joint_visibility(excess, cfg.period(), roi);
  std::optional<MarginalComparison> check;
  if (acc.frames_single > 0) check = compare_marginals(acc, estimate);
  return AnalysisResult{acc,         std::move(estimate), std::move(marginal), std::move(singles),
                        std::move(excess), marginal_fit, singles_fit, joint_fit, eps, check};
}

/// Fitted marginal visibility with its sign restored from the fitted phase.
inline double signed_visibility(const FringeFit& f) {
  return std::cos(f.phase) < 0.0 ? -f.V : f.V;
}

namespace detail {

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw Error(ErrorKind::io, "cannot create output directory " + dir.string());
  const auto probe = dir / ".dslit_write_probe";
  std::ofstream t(probe);
  if (!t) throw Error(ErrorKind::io, "output directory " + dir.string() + " is not writable");
  t.close();
  std::filesystem::remove(probe, ec);
}

inline std::string g(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace detail

/// Writes intensity, coincidence, marginal and excess patterns (CSV + PGM).
inline SourceModel cmd_pattern(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  detail::ensure_dir(cfg.output_dir);
  const SourceModel src = compute_source(cfg);
  const auto grid = analytic_detector_grid(cfg);
  const auto set = compute_patterns(cfg, src, grid);
  const auto& dir = cfg.output_dir;
  write_pattern_csv(dir / "intensity.csv", set.intensity);
  write_pattern_csv(dir / "marginal.csv", set.marginal);
  write_joint_csv(dir / "coincidence.csv", set.coincidence);
  write_joint_csv(dir / "excess.csv", set.excess);
  write_pgm(dir / "intensity.pgm", set.intensity);
  write_pgm(dir / "coincidence.pgm", set.coincidence.values);
  write_pgm(dir / "excess.pgm", set.excess.values);
  log << "psi_A = " << detail::g(src.psi) << '\n'
      << "psi_A (biphoton quadrature) = " << detail::g(src.correlations.psi.real()) << (src.correlations.psi.imag() < 0 ? " - " : " + ")
      << detail::g(std::abs(src.correlations.psi.imag())) << "i (" << to_string(src.correlations.orientation)
      << " orientation)\n"
      << "g_A1 = " << detail::g(src.g1) << '\n'
      << "Lambda = " << detail::g(cfg.period()) << " m\n"
      << "V1 = " << detail::g(src.analytic.V1) << "\nV1m = " << detail::g(src.analytic.V1m)
      << "\nV12 = " << detail::g(src.analytic.V12) << '\n';
  return src;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& frames) {
  return std::filesystem::path(frames.string() + ".meta");
}

/// FNV-1a over a file's bytes.
inline std::uint64_t file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[static_cast<std::size_t>(i)]);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

/// Generates a frame file plus a sidecar holding the full configuration.
inline std::filesystem::path cmd_simulate(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  detail::ensure_dir(cfg.output_dir);
  const SourceModel src = compute_source(cfg);
  const JointPattern2D pdf = simulation_pattern(cfg, src);
  const auto path = cfg.output_dir / "frames.bifr";
  FrameFileHeader header;
  header.width = static_cast<std::uint16_t>(cfg.camera.width);
  header.height = static_cast<std::uint16_t>(cfg.camera.height);
  header.frame_count = static_cast<std::uint32_t>(cfg.n_frames);
  std::error_code ec;
  const auto space = std::filesystem::space(cfg.output_dir, ec);
  if (!ec && header.file_size() > space.available)
    throw Error(ErrorKind::io, "frame file needs " + std::to_string(header.file_size()) + " bytes but only " +
                                   std::to_string(space.available) + " are free; lower --frames");
  {
    FrameWriter writer(path, static_cast<std::uint16_t>(cfg.camera.width), static_cast<std::uint16_t>(cfg.camera.height),
                       static_cast<std::uint32_t>(cfg.n_frames));
    RunConfig run{cfg.n_frames, cfg.mean_pairs, cfg.seed, cfg.threads};
    generate_run(pdf, cfg.camera, run, [&](std::uint64_t, const Frame& f) { writer.write(f); });
    writer.close();
  }
  std::ofstream meta(sidecar_path(path));
  if (!meta) throw Error(ErrorKind::io, "cannot write " + sidecar_path(path).string());
  meta << "# frame file " << path.filename().string() << '\n' << dump_config(cfg);
  meta.close();
  log << "wrote " << cfg.n_frames << " frames to " << path.string() << '\n'
      << "psi_A = " << detail::g(src.psi) << '\n'
      << "checksum = " << std::hex << file_checksum(path) << std::dec << '\n';
  return path;
}

inline void write_analysis(const AnalysisResult& r, const std::filesystem::path& dir) {
  write_joint_csv(dir / "g2_estimate.csv", r.estimate);
  write_joint_csv(dir / "excess_estimate.csv", r.excess);
  write_pattern_csv(dir / "marginal_estimate.csv", r.marginal);
  write_pattern_csv(dir / "singles.csv", r.singles);
  write_pgm(dir / "g2_superpixel.pgm", superpixel_bin(r.estimate.values, 4));
  write_pgm(dir / "excess_superpixel.pgm", superpixel_bin(r.excess.values, 4));
  std::ofstream counters(dir / "counters.csv");
  if (!counters) throw Error(ErrorKind::io, "cannot write counters.csv");
  const auto& a = r.accumulator;
  counters << "frames_total,frames_empty,frames_single,frames_pair,frames_multi,pairs_rejected\n"
           << a.frames_total << ',' << a.frames_empty << ',' << a.frames_single << ',' << a.frames_pair << ','
           << a.frames_multi << ',' << a.pairs_rejected << '\n';
  std::ofstream fits(dir / "fits.csv");
  if (!fits) throw Error(ErrorKind::io, "cannot write fits.csv");
  fits << fringe_fit_csv_header() << '\n'
       << fringe_fit_csv_row("marginal", r.marginal_fit) << '\n'
       << fringe_fit_csv_row("singles", r.singles_fit) << '\n';
  fits.precision(17);
  fits << "joint_V12," << r.joint_fit.V12 << ",0," << r.joint_fit.A << ',' << r.joint_fit.residual_norm << '\n';
  counters.precision(17);
  counters << "accidental_fraction," << r.accidental_fraction << '\n';
  if (r.marginal_check)
    counters << "marginal_chi_square," << r.marginal_check->chi_square << "\nmarginal_dof," << r.marginal_check->dof
             << "\nmarginal_p_value," << r.marginal_check->p_value << '\n';
}

/// Reduces a frame file and fits the one- and two-photon visibilities.
inline AnalysisResult cmd_analyze(const std::filesystem::path& frames, const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  detail::ensure_dir(cfg.output_dir);
  const auto acc = analyze_file(frames, cfg.camera, cfg.threads, cfg.pair_ratio);
  auto r = analyze_accumulator(acc, cfg);
  write_analysis(r, cfg.output_dir);
  log << "frames " << acc.frames_total << " (empty " << acc.frames_empty << ", single " << acc.frames_single << ", pair "
      << acc.frames_pair << ", multi " << acc.frames_multi << ", rejected " << acc.pairs_rejected << ")\n"
      << "V1m = " << detail::g(signed_visibility(r.marginal_fit)) << " +/- " << detail::g(r.marginal_fit.std_error) << '\n'
      << "V12 = " << detail::g(r.joint_fit.V12) << " (" << to_string(r.joint_fit.orientation) << " fringes)\n"
      << "accidental fraction = " << detail::g(r.accidental_fraction) << '\n';
  if (r.marginal_check)
    log << "marginal vs singles: chi2 = " << detail::g(r.marginal_check->chi_square) << " (dof " << r.marginal_check->dof
        << "), p = " << detail::g(r.marginal_check->p_value) << '\n';
  return r;
}

struct SweepPoint {
  double distance = 0.0;
  SourceModel source;
  std::optional<double> mc_V1m;
  std::optional<double> mc_V12;
};

inline std::vector<SweepPoint> run_sweep(const ExperimentConfig& cfg, const std::vector<double>& distances, bool monte_carlo) {
  std::vector<SweepPoint> pts;
  for (double d : distances) {
    if (!(d > 0.0)) throw Error(ErrorKind::config, "sweep distances must be positive");
    ExperimentConfig c = cfg;
    c.distance = d;
    SweepPoint p{d, compute_source(c), {}, {}};
    if (monte_carlo) {
      const auto acc = simulate_and_accumulate(simulation_pattern(c, p.source), c.camera,
                                               RunConfig{c.n_frames, c.mean_pairs, c.seed, c.threads}, c.pair_ratio);
      const auto r = analyze_accumulator(acc, c);
      p.mc_V1m = signed_visibility(r.marginal_fit);
      p.mc_V12 = r.joint_fit.V12;
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

/// Visibility pairs versus source distance, plus the ideal complementarity circle.
inline std::vector<SweepPoint> cmd_sweep(const ExperimentConfig& cfg, const std::vector<double>& distances, bool monte_carlo,
                                         std::ostream& log) {
  cfg.validate();
  detail::ensure_dir(cfg.output_dir);
  const auto pts = run_sweep(cfg, distances, monte_carlo);
  std::ofstream out(cfg.output_dir / "sweep.csv");
  if (!out) throw Error(ErrorKind::io, "cannot write sweep.csv");
  out.precision(17);
  out << "distance_m,g1,psi,V1,V1m,V12,complementarity_residual,psi_direct_re,psi_direct_im,V1m_direct,V12_direct,mc_V1m,mc_V12\n";
  for (const auto& p : pts) {
    const auto& s = p.source;
    out << p.distance << ',' << s.g1 << ',' << s.psi << ',' << s.analytic.V1 << ',' << s.analytic.V1m << ','
        << s.analytic.V12 << ',' << check_complementarity(s.analytic, 0.0).residual << ',' << s.correlations.psi.real()
        << ',' << s.correlations.psi.imag() << ',' << s.direct.V1m << ',' << s.direct.V12 << ',';
    if (p.mc_V1m) out << *p.mc_V1m << ',' << *p.mc_V12;
    else out << ',';
    out << '\n';
    log << "d = " << detail::g(p.distance) << " m: V1m = " << detail::g(s.analytic.V1m) << ", V12 = " << detail::g(s.analytic.V12);
    if (p.mc_V1m) log << " (Monte Carlo V1m = " << detail::g(*p.mc_V1m) << ", V12 = " << detail::g(*p.mc_V12) << ")";
    log << '\n';
  }
  std::ofstream circle(cfg.output_dir / "circle.csv");
  if (!circle) throw Error(ErrorKind::io, "cannot write circle.csv");
  circle.precision(17);
  circle << "V12,V1m\n";
  for (int k = 0; k <= 100; ++k) {
    const double t = 0.5 * std::numbers::pi * k / 100.0;
    circle << std::cos(t) << ',' << std::sin(t) << '\n';
  }
  return pts;
}

/// Exit code for an error: 2 for configuration problems, 3 for data problems.
inline int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::config:
    case ErrorKind::invalid_parameter:
    case ErrorKind::out_of_range:
    case ErrorKind::invalid_coherence:
      return 2;
    default:
      return 3;
  }
}

}  // namespace dslit
