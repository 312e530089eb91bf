#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "lowdisc.hpp"

namespace xs {

// Squared-exponential (ARD) kernel hyperparameters. noise_var is the
// observation noise *variance* added to the Gram diagonal.
struct KernelParams {
  Vec lengthscales;
  double signal_var = 1.0;
  double noise_var = 0.01;

  int dim() const { return static_cast<int>(lengthscales.size()); }

  void validate() const {
    if (lengthscales.size() == 0) throw std::invalid_argument("kernel: empty lengthscales");
    for (int j = 0; j < dim(); ++j)
      if (!(lengthscales[j] > 0.0)) throw std::invalid_argument("kernel: lengthscale <= 0");
    if (!(signal_var > 0.0)) throw std::invalid_argument("kernel: signal_var <= 0");
    if (!(noise_var >= 0.0)) throw std::invalid_argument("kernel: noise_var < 0");
  }

  static KernelParams isotropic(int dim, double ell, double sf2 = 1.0, double noise = 0.01) {
    KernelParams p;
    p.lengthscales = Vec::Constant(dim, ell);
    p.signal_var = sf2;
    p.noise_var = noise;
    p.validate();
    return p;
  }
};

// Box bounds for the MAP hyperparameter fit, plus the fixed noise level and
// an optional quadratic penalty in log space (centered at the box midpoint).
struct HyperPriors {
  double ell_min = 0.01;
  double ell_max = 2.0;
  double sf2_min = 0.1;
  double sf2_max = 10.0;
  double fixed_noise_var = 0.01;
  double log_penalty_weight = 0.0;

  void validate() const {
    if (!(ell_min > 0.0 && ell_max > ell_min)) throw std::invalid_argument("priors: bad lengthscale box");
    if (!(sf2_min > 0.0 && sf2_max > sf2_min)) throw std::invalid_argument("priors: bad signal box");
    if (!(fixed_noise_var >= 0.0)) throw std::invalid_argument("priors: negative noise");
  }
};

// k(x, xhat) = sf2 * exp(-1/2 sum_j ((x_j-xhat_j)/l_j)^2)
inline double kernel_eval(const KernelParams& p, const Vec& x, const Vec& xhat) {
  if (x.size() != p.lengthscales.size() || xhat.size() != x.size())
    throw std::invalid_argument("kernel_eval: dimension mismatch");
  double s = 0.0;
  for (int j = 0; j < x.size(); ++j) {
    const double d = (x[j] - xhat[j]) / p.lengthscales[j];
    s += d * d;
  }
  return p.signal_var * std::exp(-0.5 * s);
}

// dk/dx_j = -(x_j - xhat_j)/l_j^2 * k(x, xhat)
inline double kernel_d1(const KernelParams& p, const Vec& x, const Vec& xhat, int j) {
  return -(x[j] - xhat[j]) / (p.lengthscales[j] * p.lengthscales[j]) * kernel_eval(p, x, xhat);
}

// d2k/dx_j dxhat_j = (1/l_j^2 - (x_j-xhat_j)^2/l_j^4) * k(x, xhat)
inline double kernel_d2(const KernelParams& p, const Vec& x, const Vec& xhat, int j) {
  const double l2 = p.lengthscales[j] * p.lengthscales[j];
  const double d = x[j] - xhat[j];
  return (1.0 / l2 - d * d / (l2 * l2)) * kernel_eval(p, x, xhat);
}

// Noise-free signal Gram matrix over rows of X.
inline Mat gram(const KernelParams& p, const Mat& X) {
  const int n = static_cast<int>(X.rows());
  Mat K(n, n);
  for (int i = 0; i < n; ++i) {
    K(i, i) = p.signal_var;
    for (int k = i + 1; k < n; ++k) {
      const double v = kernel_eval(p, X.row(i).transpose(), X.row(k).transpose());
      K(i, k) = v;
      K(k, i) = v;
    }
  }
  return K;
}

}  // namespace xs
