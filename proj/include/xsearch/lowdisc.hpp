#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rng.hpp"

namespace xs {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace detail {
inline constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                                  31, 37, 41, 43, 47, 53, 59, 61, 67, 71,
                                  73, 79, 83, 89, 97, 101, 103, 107, 109, 113};
}

inline double radical_inverse(std::uint64_t i, int base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

// Halton point in [0,1)^d; indices should start at 1 to avoid the origin.
inline Vec halton_point(std::uint64_t index, int dim) {
  if (dim < 1 || dim > 30) throw std::invalid_argument("halton_point: dim out of range");
  Vec p(dim);
  for (int j = 0; j < dim; ++j) p[j] = radical_inverse(index, detail::kPrimes[j]);
  return p;
}

// Seeded Cranley-Patterson rotation: frac(halton + shift). Keeps the
// low-discrepancy structure while letting the restart pattern vary by seed.
class HaltonSequence {
 public:
  HaltonSequence(int dim, std::uint64_t seed) : dim_(dim), shift_(dim) {
    Rng rng(derive_seed(seed, "halton-shift"));
    for (int j = 0; j < dim; ++j) shift_[j] = rng.uniform01();
  }

  // Unrotated sequence.
  explicit HaltonSequence(int dim) : dim_(dim), shift_(Vec::Zero(dim)) {}

  Vec operator()(std::uint64_t index) const {
    Vec p = halton_point(index, dim_);
    for (int j = 0; j < dim_; ++j) {
      double v = p[j] + shift_[j];
      p[j] = v - std::floor(v);
    }
    return p;
  }

  int dim() const { return dim_; }

 private:
  int dim_;
  Vec shift_;
};

}  // namespace xs
