#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace stance {

// Seeded generator with platform-independent draws. std::mt19937_64's output
// sequence is fixed by the standard; the distribution helpers here replace
// std::uniform_int_distribution, whose algorithm is not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  // `k` distinct indices from [0, n), in ascending order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

// Derives a sub-seed from a base seed and a label (FNV-1a over the label mixed
// with splitmix64) so independent streams stay stable when unrelated code
// changes its draw count.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

}  // namespace stance
