// Copyright (c) 2026 jointtuner authors
// SPDX-License-Identifier: MIT
//
// Deterministic RNG. mt19937_64 drives everything; uniform/normal transforms
// are hand-rolled (Box-Muller) so streams are bit-identical across standard
// library implementations. Child streams derive from (seed, label) so
// components can be reordered without perturbing each other.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "jointtuner/tensor.hpp"

namespace jt {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t u64() { return gen_(); }

  // Uniform in [0,1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Modulo bias is irrelevant at our n << 2^64 scales.
    return gen_() % n;
  }

  // Standard normal via Box-Muller. Cached spare keeps draw count even.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;  // (0,1]
    double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;        // [0,1)
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double sigma) { return sigma * normal(); }

  void fill_normal(std::vector<double>& v, double sigma = 1.0) {
    for (auto& x : v) x = normal(sigma);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[below(i)]);
  }

  // Independent child stream for a named purpose.
  Rng split(const std::string& label) const {
    std::uint64_t h = fnv1a64(label);
    h = fnv1a64(&seed_, sizeof(seed_), h);
    return Rng(h);
  }

 private:
  std::mt19937_64 gen_;
  std::uint64_t seed_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace jt
