#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pwe {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent run configuration; the CLI maps this to exit code 1.
struct ConfigError : Error {
  using Error::Error;
};

struct DimensionError : Error {
  using Error::Error;
};

// Pearson correlation is undefined for constant inputs; raised at the point
// of first contact with the degenerate data, naming the offender.
struct DegenerateVarianceError : Error {
  using Error::Error;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::string to_hex(std::uint64_t value);

// Uniform draw strictly inside (0,1), 53-bit resolution.
double uniform01(std::mt19937_64& rng);

// Deterministic standard-normal stream (Box-Muller over mt19937_64).
// Owning the transform keeps sampled artifacts stable across library
// versions, unlike std::normal_distribution.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}
  double next();

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace pwe
