#include "marginsel/random.hpp"

#include <cmath>
#include <limits>

#include "marginsel/error.hpp"

namespace marginsel {

double Rng::uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) throw Error(Errc::kInvalidArgument, "uniform_index over an empty range");
  const std::uint64_t bound = n;
  // Reject the tail so that every residue is equally likely.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw = engine_();
  while (draw >= limit) draw = engine_();
  return static_cast<std::size_t>(draw % bound);
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) noexcept {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed ^ (fnv1a64(key) + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::size_t round_half_up(double x) {
  if (!(x >= 0.0) || !std::isfinite(x)) {
    throw Error(Errc::kInvalidArgument, "round_half_up expects a finite non-negative value");
  }
  return static_cast<std::size_t>(std::floor(x + 0.5 + 1e-9));
}

}  // namespace marginsel
