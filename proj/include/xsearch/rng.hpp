#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "math.hpp"

namespace xs {

// SplitMix64 finalizer, used to hash seeds into well-mixed stream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stable derivation of a stream seed from a base seed, a purpose tag and up
// to two indices. Every random decision in a run draws from a stream derived
// this way, which keeps runs replayable and streams independent.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a over the tag
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  h = mix64(h ^ mix64(base));
  h = mix64(h ^ mix64(a + 0x9e37));
  h = mix64(h ^ mix64(b + 0x79b9));
  return h;
}

// Deterministic generator. Uniforms come straight from the top 53 bits of
// mt19937_64 and normals go through the inverse CDF, so identical seeds give
// identical streams on any conforming standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // [0, 1)
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // (0, 1)
  double uniform_open() {
    const double u = uniform01();
    return u > 0.0 ? u : 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() { return norm_quantile(uniform_open()); }

  std::vector<double> normals(std::size_t n) {
    std::vector<double> out(n);
    for (auto& v : out) v = normal();
    return out;
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace xs
