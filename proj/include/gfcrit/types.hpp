#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gfcrit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Raised when a converged critical point has a (numerically) singular Hessian.
class NonMorseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for invalid experiment configurations (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent deterministic stream for (master seed, replicate index).
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng substream(std::uint64_t master, std::uint64_t index) {
  return Rng(substream_seed(master, index));
}

std::string format_double(double x);

}  // namespace gfcrit
