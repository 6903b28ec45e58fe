#include "detforge/core/rng.hpp"

#include <limits>

#include "detforge/core/error.hpp"

namespace detforge::core {

std::uint64_t SeededRng::below(std::uint64_t bound) {
  if (bound == 0) throw InvalidArgument("SeededRng::below: bound must be positive");
  // Largest multiple of bound that fits; draws above it are rejected.
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

double SeededRng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

}  // namespace detforge::core
