#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <type_traits>
#include <string>
#include <vector>

#include "dslit/biphoton.hpp"
#include "dslit/error.hpp"
#include "dslit/sensor.hpp"

namespace dslit {

enum class Illumination { fresnel, fourier_2f };
enum class PsiModel { duality, direct };

/// Geometry, camera and run settings. Defaults reproduce the double-slit
/// experiment: a = 0.70 mm slits of width 0.35 mm, f = 50 mm, λ = 812 nm,
/// 512×512 camera at 24 µm, η = 0.5, 240,000 frames.
struct ExperimentConfig {
  PumpShape pump_shape = PumpShape::uniform;
  double pump_width = 60e-6;  // effective source width b
  std::size_t pump_nodes = 2048;
  double distance = 0.54;  // source to slits
  Illumination illumination = Illumination::fresnel;
  double separation = 0.70e-3;
  double slit_width = 0.35e-3;
  bool finite_slits = false;
  double wavelength = 812e-9;
  double focal_length = 50e-3;
  PsiModel psi_model = PsiModel::duality;
  double psi = std::numeric_limits<double>::quiet_NaN();  // overrides the source model when set

  CameraModel camera;
  double pair_ratio = 1.0 / 3.0;
  bool subtract_accidentals = true;  // remove pairs built from photons of different pairs

  std::uint64_t n_frames = 240000;
  double mean_pairs = 0.1;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  std::size_t pattern_periods = 8;
  std::size_t samples_per_period = 16;

  std::filesystem::path output_dir = ".";

  bool has_psi_override() const { return !std::isnan(psi); }
  double period() const { return wavelength * focal_length / separation; }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0)) throw Error(ErrorKind::config, std::string(name) + " must be positive");
    };
    positive(pump_width, "pump_width");
    positive(distance, "distance");
    positive(separation, "separation");
    positive(wavelength, "wavelength");
    positive(focal_length, "focal_length");
    if (!(slit_width >= 0.0 && slit_width < separation))
      throw Error(ErrorKind::config, "slit_width must satisfy 0 <= w < separation");
    if (pump_nodes < 2) throw Error(ErrorKind::config, "pump_nodes must be at least 2");
    if (has_psi_override() && !(std::abs(psi) <= 1.0)) throw Error(ErrorKind::config, "psi must lie in [-1, 1]");
    if (!(mean_pairs >= 0.0)) throw Error(ErrorKind::config, "mean_pairs must be non-negative");
    if (!(pair_ratio > 0.0)) throw Error(ErrorKind::config, "pair_ratio must be positive");
    if (pattern_periods < 1 || samples_per_period < 2) throw Error(ErrorKind::config, "pattern grid too small");
    if (n_frames > 0xFFFFFFFFull) throw Error(ErrorKind::config, "frames must fit in 32 bits");
    try {
      camera.validate();
    } catch (const Error& e) {
      throw Error(ErrorKind::config, e.what());
    }
  }
};

namespace detail {

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  T out{};
  is >> out;
  if (!is || !(is >> std::ws).eof()) throw Error(ErrorKind::config, "bad value for " + key + ": '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw Error(ErrorKind::config, "bad boolean for " + key + ": '" + v + "'");
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <class T>
Field number_field(T ExperimentConfig::*member, const char* key) {
  return {[member, key](ExperimentConfig& c, const std::string& v) { c.*member = parse_number<T>(key, v); },
          [member](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt(c.*member);
            else return std::to_string(c.*member);
          }};
}

template <class T>
Field camera_field(T CameraModel::*member, const char* key) {
  return {[member, key](ExperimentConfig& c, const std::string& v) { c.camera.*member = parse_number<T>(key, v); },
          [member](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt(c.camera.*member);
            else return std::to_string(c.camera.*member);
          }};
}

inline const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> f;
    f["pump_shape"] = {[](ExperimentConfig& c, const std::string& v) {
                         if (v == "uniform") c.pump_shape = PumpShape::uniform;
                         else if (v == "gaussian") c.pump_shape = PumpShape::gaussian;
                         else throw Error(ErrorKind::config, "pump_shape must be uniform or gaussian");
                       },
                       [](const ExperimentConfig& c) {
                         return std::string(c.pump_shape == PumpShape::uniform ? "uniform" : "gaussian");
                       }};
    f["pump_width"] = number_field(&ExperimentConfig::pump_width, "pump_width");
    f["pump_nodes"] = number_field(&ExperimentConfig::pump_nodes, "pump_nodes");
    f["distance"] = number_field(&ExperimentConfig::distance, "distance");
    f["illumination"] = {[](ExperimentConfig& c, const std::string& v) {
                           if (v == "fresnel") c.illumination = Illumination::fresnel;
                           else if (v == "fourier-2f") c.illumination = Illumination::fourier_2f;
                           else throw Error(ErrorKind::config, "illumination must be fresnel or fourier-2f");
                         },
                         [](const ExperimentConfig& c) {
                           return std::string(c.illumination == Illumination::fresnel ? "fresnel" : "fourier-2f");
                         }};
    f["separation"] = number_field(&ExperimentConfig::separation, "separation");
    f["slit_width"] = number_field(&ExperimentConfig::slit_width, "slit_width");
    f["finite_slits"] = {[](ExperimentConfig& c, const std::string& v) { c.finite_slits = parse_bool("finite_slits", v); },
                         [](const ExperimentConfig& c) { return std::string(c.finite_slits ? "true" : "false"); }};
    f["wavelength"] = number_field(&ExperimentConfig::wavelength, "wavelength");
    f["focal_length"] = number_field(&ExperimentConfig::focal_length, "focal_length");
    f["psi_model"] = {[](ExperimentConfig& c, const std::string& v) {
                        if (v == "duality") c.psi_model = PsiModel::duality;
                        else if (v == "direct") c.psi_model = PsiModel::direct;
                        else throw Error(ErrorKind::config, "psi_model must be duality or direct");
                      },
                      [](const ExperimentConfig& c) {
                        return std::string(c.psi_model == PsiModel::duality ? "duality" : "direct");
                      }};
    f["psi"] = {[](ExperimentConfig& c, const std::string& v) {
                  c.psi = v == "none" ? std::numeric_limits<double>::quiet_NaN() : parse_number<double>("psi", v);
                },
                [](const ExperimentConfig& c) { return c.has_psi_override() ? fmt(c.psi) : std::string("none"); }};
    f["camera_width"] = camera_field(&CameraModel::width, "camera_width");
    f["camera_height"] = camera_field(&CameraModel::height, "camera_height");
    f["pixel_pitch"] = camera_field(&CameraModel::pitch, "pixel_pitch");
    f["efficiency"] = camera_field(&CameraModel::efficiency, "efficiency");
    f["patch"] = camera_field(&CameraModel::patch, "patch");
    f["threshold"] = camera_field(&CameraModel::threshold, "threshold");
    f["dark_rate"] = camera_field(&CameraModel::dark_rate, "dark_rate");
    f["strip_first"] = camera_field(&CameraModel::strip_first, "strip_first");
    f["strip_last"] = camera_field(&CameraModel::strip_last, "strip_last");
    f["pair_ratio"] = number_field(&ExperimentConfig::pair_ratio, "pair_ratio");
    f["subtract_accidentals"] = {
        [](ExperimentConfig& c, const std::string& v) { c.subtract_accidentals = parse_bool("subtract_accidentals", v); },
        [](const ExperimentConfig& c) { return std::string(c.subtract_accidentals ? "true" : "false"); }};
    f["frames"] = number_field(&ExperimentConfig::n_frames, "frames");
    f["mean_pairs"] = number_field(&ExperimentConfig::mean_pairs, "mean_pairs");
    f["seed"] = number_field(&ExperimentConfig::seed, "seed");
    f["threads"] = number_field(&ExperimentConfig::threads, "threads");
    f["pattern_periods"] = number_field(&ExperimentConfig::pattern_periods, "pattern_periods");
    f["samples_per_period"] = number_field(&ExperimentConfig::samples_per_period, "samples_per_period");
    return f;
  }();
  return table;
}

}  // namespace detail

inline void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const auto& f = detail::fields();
  const auto it = f.find(key);
  if (it == f.end()) throw Error(ErrorKind::config, "unknown config key '" + key + "'");
  it->second.set(cfg, value);
}

/// Applies `key = value` lines; '#' starts a comment.
inline void apply_config_text(ExperimentConfig& cfg, std::istream& in, const std::string& origin = "config") {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::config, origin + ":" + std::to_string(lineno) + ": expected key = value");
    set_config_value(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
}

inline void apply_config_file(ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::config, "cannot read config file " + path.string());
  apply_config_text(cfg, in, path.string());
}

/// Every key, one `key = value` line each, in a form apply_config_text reads back.
inline std::string dump_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  for (const auto& [key, field] : detail::fields()) os << key << " = " << field.get(cfg) << '\n';
  return os.str();
}

}  // namespace dslit
