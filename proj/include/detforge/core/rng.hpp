#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace detforge::core {

/// Seeded generator whose draws are identical on every standard library.
/// std::mt19937_64's output sequence is fixed by the standard; the library
/// distributions are not, so integer draws go through rejection sampling here.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform integer in [0, bound). `bound` must be positive.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform real in [0, 1) with 53 random bits.
  double uniform();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace detforge::core
