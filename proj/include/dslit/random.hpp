#pragma once

#include <cstdint>
#include <random>

namespace dslit {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed for frame k of a run; independent of how frames are split across workers.
inline std::uint64_t frame_seed(std::uint64_t master, std::uint64_t frame_index) {
  return splitmix64(splitmix64(master) ^ splitmix64(frame_index + 0x632BE59BD9B4E019ull));
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace dslit
