#pragma once

// Independent verification routes: dense linear-algebra reimplementations of
// the posterior quantities, adaptive quadrature for the folded-normal
// expectation, and an exact circulant-embedding sampler for stationary paths
// on a regular grid. Nothing here shares code with the production paths
// beyond the kernel definitions.

#include <fftw3.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <complex>
#include <vector>

#include "crossings.hpp"
#include "gp.hpp"

namespace xs::oracle {

// Posterior by explicit dense solve (column-pivoted QR, no Cholesky, no
// caching) for cross-checking GpModel::posterior.
inline PosteriorGaussian dense_posterior(const Dataset& data, const KernelParams& params,
                                         const Vec& x) {
  const int n = data.size();
  if (n == 0) return {0.0, params.signal_var};
  Mat K = gram(params, data.inputs());
  K.diagonal().array() += params.noise_var;
  Eigen::ColPivHouseholderQR<Mat> qr(K);
  Vec k(n);
  for (int i = 0; i < n; ++i) k[i] = kernel_eval(params, x, data.input(i));
  const Vec alpha = qr.solve(data.outputs());
  const Vec kik = qr.solve(k);
  return {k.dot(alpha), params.signal_var - k.dot(kik)};
}

// Gradient statistics under the virtual observation, built from the full
// (n+1) x (n+1) extended system with dense solves.
inline GradientPosterior dense_gradient_with_virtual(const Dataset& data,
                                                     const KernelParams& params, const Vec& x,
                                                     double u) {
  const int n = data.size();
  const int D = params.dim();
  const double jv = 1e-8;
  Mat KE(n + 1, n + 1);
  if (n > 0) {
    KE.topLeftCorner(n, n) = gram(params, data.inputs());
    KE.topLeftCorner(n, n).diagonal().array() += params.noise_var;
    for (int i = 0; i < n; ++i) {
      const double v = kernel_eval(params, x, data.input(i));
      KE(i, n) = v;
      KE(n, i) = v;
    }
  }
  KE(n, n) = params.signal_var + jv;
  Eigen::ColPivHouseholderQR<Mat> qr(KE);

  Vec rhs(n + 1);
  for (int i = 0; i < n; ++i) rhs[i] = data.output(i);
  rhs[n] = u;
  const Vec sol = qr.solve(rhs);

  GradientPosterior g;
  g.mean.resize(D);
  g.stddev.resize(D);
  Vec c(n + 1);
  for (int j = 0; j < D; ++j) {
    for (int i = 0; i < n; ++i) c[i] = kernel_d1(params, x, data.input(i), j);
    c[n] = 0.0;  // Cov(df/dx_j, f(x)) vanishes at the query point
    g.mean[j] = c.dot(sol);
    const double prior = params.signal_var / (params.lengthscales[j] * params.lengthscales[j]);
    g.stddev[j] = std::sqrt(std::max(0.0, prior - c.dot(qr.solve(c))));
  }
  return g;
}

// Central-difference gradient of the extended posterior mean
//   m_ext(x') = Cov(f(x'), [f(X); f(x)]) K_ext^{-1} [y; u]
// evaluated at x' = x. This is the numeric route the analytic gradient mean
// must reproduce.
inline Vec fd_extended_mean_gradient(const Dataset& data, const KernelParams& params, const Vec& x,
                                     double u, double h = 1e-5) {
  const int n = data.size();
  const int D = params.dim();
  const double jv = 1e-8;
  Mat KE(n + 1, n + 1);
  if (n > 0) {
    KE.topLeftCorner(n, n) = gram(params, data.inputs());
    KE.topLeftCorner(n, n).diagonal().array() += params.noise_var;
    for (int i = 0; i < n; ++i) {
      const double v = kernel_eval(params, x, data.input(i));
      KE(i, n) = v;
      KE(n, i) = v;
    }
  }
  KE(n, n) = params.signal_var + jv;
  Eigen::ColPivHouseholderQR<Mat> qr(KE);
  Vec rhs(n + 1);
  for (int i = 0; i < n; ++i) rhs[i] = data.output(i);
  rhs[n] = u;
  const Vec sol = qr.solve(rhs);

  auto mean_ext = [&](const Vec& q) {
    Vec c(n + 1);
    for (int i = 0; i < n; ++i) c[i] = kernel_eval(params, q, data.input(i));
    c[n] = kernel_eval(params, q, x);
    return c.dot(sol);
  };

  Vec g(D);
  Vec q = x;
  for (int j = 0; j < D; ++j) {
    const double x0 = x[j];
    q[j] = x0 + h;
    const double fp = mean_ext(q);
    q[j] = x0 - h;
    const double fm = mean_ext(q);
    q[j] = x0;
    g[j] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// E|m + v Z| by adaptive quadrature over the bulk of the standard normal,
// split at the kink when it falls inside the window.
inline double quad_folded_mean(double m, double v) {
  if (v == 0.0) return std::abs(m);
  boost::math::quadrature::tanh_sinh<double> integ;
  const double z0 = -m / v;
  auto f = [&](double z) { return std::abs(m + v * z) * norm_pdf(z); };
  const double lo = -40.0, hi = 40.0;
  if (z0 <= lo || z0 >= hi) return integ.integrate(f, lo, hi);
  return integ.integrate(f, lo, z0) + integ.integrate(f, z0, hi);
}

// Crossing intensity with both factors recomputed independently: dense
// extended-system statistics and quadrature instead of the closed form.
inline double quad_crossing_intensity(const Dataset& data, const KernelParams& params,
                                      const Vec& x, double u) {
  const auto post = dense_posterior(data, params, x);
  const double dens = norm_density(u, post.mean, std::max(post.var, 1e-300));
  if (dens == 0.0) return 0.0;
  const auto g = dense_gradient_with_virtual(data, params, x, u);
  double s = 0.0;
  for (int j = 0; j < g.mean.size(); ++j) s += quad_folded_mean(g.mean[j], g.stddev[j]);
  return dens * s;
}

// Exact sampler for a stationary one-dimensional GP on a regular grid via
// circulant embedding (the ring is padded to four times the grid so the
// squared-exponential embedding stays nonnegative definite). No jitter is
// involved, so sampled paths carry no white-noise component that would
// inflate level-crossing counts.
class CirculantSampler1D {
 public:
  CirculantSampler1D(double ell, double sf2, int n, double spacing) : n_(n) {
    m_ = 1;
    while (m_ < 4 * n) m_ <<= 1;
    std::vector<double> ring(m_);
    for (int j = 0; j < m_; ++j) {
      const int d = std::min(j, m_ - j);
      const double r = d * spacing / ell;
      ring[j] = sf2 * std::exp(-0.5 * r * r);
    }
    in_ = fftw_alloc_complex(m_);
    out_ = fftw_alloc_complex(m_);
    plan_ = fftw_plan_dft_1d(m_, in_, out_, FFTW_FORWARD, FFTW_ESTIMATE);

    for (int j = 0; j < m_; ++j) {
      in_[j][0] = ring[j];
      in_[j][1] = 0.0;
    }
    fftw_execute(plan_);
    scale_.resize(m_);
    for (int j = 0; j < m_; ++j)
      scale_[j] = std::sqrt(std::max(0.0, out_[j][0]) / static_cast<double>(m_));
  }

  CirculantSampler1D(const CirculantSampler1D&) = delete;
  CirculantSampler1D& operator=(const CirculantSampler1D&) = delete;

  ~CirculantSampler1D() {
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }

  // Two independent paths per transform (real and imaginary parts).
  void sample_pair(Rng& rng, std::vector<double>& a, std::vector<double>& b) {
    for (int j = 0; j < m_; ++j) {
      in_[j][0] = scale_[j] * rng.normal();
      in_[j][1] = scale_[j] * rng.normal();
    }
    fftw_execute(plan_);
    a.resize(n_);
    b.resize(n_);
    for (int j = 0; j < n_; ++j) {
      a[j] = out_[j][0];
      b[j] = out_[j][1];
    }
  }

  int grid_size() const { return n_; }

 private:
  int n_;
  int m_;
  fftw_complex* in_;
  fftw_complex* out_;
  fftw_plan plan_;
  std::vector<double> scale_;
};

struct RiceMcResult {
  double rate = 0.0;    // mean up-crossings per unit length
  double stderr_ = 0.0;
  long paths = 0;
};

// Empirical up-crossing rate of level u for prior paths on [0,1).
inline RiceMcResult mc_rice_upcrossings(const KernelParams& params, double u, int grid_n,
                                        long n_paths, std::uint64_t seed) {
  if (params.dim() != 1) throw std::invalid_argument("mc_rice_upcrossings: one-dimensional only");
  const double spacing = 1.0 / grid_n;
  CirculantSampler1D sampler(params.lengthscales[0], params.signal_var, grid_n, spacing);
  const double length = (grid_n - 1) * spacing;
  Rng rng(seed);
  std::vector<double> a, b;
  double s1 = 0.0, s2 = 0.0;
  long done = 0;
  while (done < n_paths) {
    sampler.sample_pair(rng, a, b);
    for (const auto* path : {&a, &b}) {
      if (done >= n_paths) break;
      long c = 0;
      for (int j = 0; j + 1 < grid_n; ++j)
        if ((*path)[j] <= u && (*path)[j + 1] > u) ++c;
      const double rate = static_cast<double>(c) / length;
      s1 += rate;
      s2 += rate * rate;
      ++done;
    }
  }
  RiceMcResult r;
  r.paths = done;
  r.rate = s1 / static_cast<double>(done);
  const double var = std::max(0.0, s2 / static_cast<double>(done) - r.rate * r.rate);
  r.stderr_ = std::sqrt(var / static_cast<double>(done));
  return r;
}

}  // namespace xs::oracle
