#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace lesanet {

using Rng = std::mt19937_64;

// Inverse-CDF sampler over non-negative weights. Entries with zero weight
// are never drawn.
class WeightedSampler {
 public:
  explicit WeightedSampler(std::span<const double> weights) {
    double total = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (!(weights[i] > 0.0)) continue;
      total += weights[i];
      support_.push_back(i);
      cumulative_.push_back(total);
    }
  }

  bool empty() const { return support_.empty(); }
  const std::vector<std::size_t>& support() const { return support_; }

  std::size_t operator()(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, cumulative_.back());
    double x = u(rng);
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), x);
    if (it == cumulative_.end()) --it;
    return support_[static_cast<std::size_t>(it - cumulative_.begin())];
  }

 private:
  std::vector<std::size_t> support_;
  std::vector<double> cumulative_;
};

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace lesanet
