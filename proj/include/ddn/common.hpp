#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ddn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Rng = std::mt19937_64;

// Error taxonomy. The CLI maps these to distinct exit codes:
// ConfigError -> 2, DataError -> 3, everything else -> 4.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InternalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// splitmix64: cheap stateless mixer used to derive reproducible substreams.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Order-sensitive seed mixing; mix_seed(a,b) != mix_seed(b,a).
inline uint64_t mix_seed(std::initializer_list<uint64_t> parts) {
  uint64_t h = 0x8f1bbcdcbfa53e0bull;
  for (uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

inline Rng make_rng(std::initializer_list<uint64_t> parts) {
  return Rng(mix_seed(parts));
}

// Uniform in [0,1) from a hash value.
inline double hash_u01(uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Standard normal deviate as a pure function of a hash (Box-Muller).
// Keeps per-(id, day) draws independent of library distribution internals.
inline double hash_gauss(uint64_t h) {
  double u1 = hash_u01(splitmix64(h ^ 0x1234abcdull));
  double u2 = hash_u01(splitmix64(h ^ 0xfeed5678ull));
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace ddn
