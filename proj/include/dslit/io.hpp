#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dslit/error.hpp"
#include "dslit/patterns.hpp"

namespace dslit {

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out.precision(17);
  return out;
}

inline std::vector<std::vector<double>> read_csv_numbers(const std::filesystem::path& path, std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  bool header = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(ErrorKind::format, path.string() + ":" + std::to_string(lineno) + ": not a number");
      }
    }
    if (row.size() != columns)
      throw Error(ErrorKind::format, path.string() + ":" + std::to_string(lineno) + ": expected " +
                                         std::to_string(columns) + " columns");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

/// Columns: position_m,value.
inline void write_pattern_csv(const std::filesystem::path& path, const FringePattern1D& p) {
  auto out = detail::open_out(path);
  out << "position_m,value\n";
  for (std::size_t i = 0; i < p.values.size(); ++i) out << p.grid[i] << ',' << p.values[i] << '\n';
}

inline FringePattern1D read_pattern_csv(const std::filesystem::path& path, double period = 0.0) {
  const auto rows = detail::read_csv_numbers(path, 2);
  if (rows.size() < 2) throw Error(ErrorKind::format, path.string() + ": fewer than two samples");
  FringePattern1D p{SpatialGrid(rows.front()[0], rows.back()[0], rows.size()), {}, period};
  for (const auto& r : rows) p.values.push_back(r[1]);
  return p;
}

/// Columns: x_m,y_m,value in row-major order (x' slow, x'' fast).
inline void write_joint_csv(const std::filesystem::path& path, const JointPattern2D& p) {
  auto out = detail::open_out(path);
  out << "x_m,y_m,value\n";
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j)
      out << p.grid[i] << ',' << p.grid[j] << ',' << p.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))
          << '\n';
}

inline JointPattern2D read_joint_csv(const std::filesystem::path& path, JointKind kind, double period = 0.0) {
  const auto rows = detail::read_csv_numbers(path, 3);
  const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(rows.size()))));
  if (n < 2 || n * n != rows.size()) throw Error(ErrorKind::format, path.string() + ": not a square joint pattern");
  JointPattern2D p{SpatialGrid(rows.front()[1], rows.back()[1], n),
                   Eigen::MatrixXd(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)), kind, false, period};
  for (std::size_t k = 0; k < rows.size(); ++k)
    p.values(static_cast<Eigen::Index>(k / n), static_cast<Eigen::Index>(k % n)) = rows[k][2];
  p.unit_sum = std::abs(p.integral() - 1.0) < 1e-9;
  return p;
}

/// 8-bit binary portable graymap, linearly scaled from min (black) to max (white).
inline void write_pgm(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << "P5\n" << m.cols() << ' ' << m.rows() << "\n255\n";
  const double lo = m.minCoeff();
  const double hi = m.maxCoeff();
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  std::vector<unsigned char> row(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      row[static_cast<std::size_t>(j)] = static_cast<unsigned char>(std::lround((m(i, j) - lo) * scale));
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
}

/// A 1-D pattern drawn as a `height`-row strip.
inline void write_pgm(const std::filesystem::path& path, const FringePattern1D& p, int height = 32) {
  Eigen::MatrixXd m(height, static_cast<Eigen::Index>(p.values.size()));
  for (int r = 0; r < height; ++r)
    for (std::size_t j = 0; j < p.values.size(); ++j) m(r, static_cast<Eigen::Index>(j)) = p.values[j];
  write_pgm(path, m);
}

}  // namespace dslit
