#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace marginsel {

// Seeded generator whose draws are identical across standard libraries:
// the engine is std::mt19937_64 (fully specified), and the two distributions
// below are defined here instead of relying on std:: distributions, whose
// algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform01();

  // Uniform integer in [0, n); n must be > 0.
  std::size_t uniform_index(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

// Per-item seed derived from a run seed and a stable item key.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) noexcept;

// floor(x + 0.5) for non-negative x, with a small tolerance so that products
// such as 0.9 * 10 land on the intended integer.
std::size_t round_half_up(double x);

}  // namespace marginsel
