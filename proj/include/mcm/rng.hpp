#pragma once

#include <array>
#include <cstdint>

#include "mcm/linalg.hpp"

namespace mcm {

/// Identifier written into instance metadata. Bump the version if any of the
/// algorithms or the draw order below changes.
inline constexpr const char* kRngTag = "xoshiro256++/boxmuller/v1";

std::uint64_t splitmix64(std::uint64_t& state);

/// xoshiro256++ seeded by four splitmix64 outputs of the user seed.
///
/// uniform() returns (next() >> 11) * 2^-53 in [0, 1).
/// gaussian() consumes exactly two uniforms u1, u2 and returns
/// sqrt(-2 ln(1 - u1)) * cos(2 pi u2); no value is cached between calls.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform();
  double gaussian();

  /// rows x cols Gaussian matrix filled in column-major order.
  Mat gaussian_matrix(Index rows, Index cols);
  Vec uniform_vector(Index size);

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace mcm
