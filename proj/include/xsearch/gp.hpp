#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kernel.hpp"
#include "optimize.hpp"
#include "rng.hpp"

namespace xs {

// Observations live in the unit hypercube; outputs are unconstrained.
class Dataset {
 public:
  explicit Dataset(int dim) : dim_(dim), X_(0, dim), y_(0) {
    if (dim < 1) throw std::invalid_argument("Dataset: dim must be >= 1");
  }

  void add(const Vec& x, double y) {
    if (x.size() != dim_) throw std::invalid_argument("Dataset::add: dimension mismatch");
    for (int j = 0; j < dim_; ++j)
      if (x[j] < -1e-9 || x[j] > 1.0 + 1e-9)
        throw std::invalid_argument("Dataset::add: input outside the unit hypercube");
    if (!std::isfinite(y)) throw std::invalid_argument("Dataset::add: non-finite output");
    const int n = size();
    X_.conservativeResize(n + 1, dim_);
    y_.conservativeResize(n + 1);
    for (int j = 0; j < dim_; ++j) X_(n, j) = std::min(1.0, std::max(0.0, x[j]));
    y_[n] = y;
  }

  int size() const { return static_cast<int>(X_.rows()); }
  int dim() const { return dim_; }
  Vec input(int i) const { return X_.row(i).transpose(); }
  double output(int i) const { return y_[i]; }
  const Mat& inputs() const { return X_; }
  const Vec& outputs() const { return y_; }

 private:
  int dim_;
  Mat X_;
  Vec y_;
};

// One row per observation: D input coordinates then the output.
inline void write_table(std::ostream& os, const Dataset& d) {
  os << "#";
  for (int j = 0; j < d.dim(); ++j) os << " x" << (j + 1);
  os << " y\n";
  os.precision(17);
  for (int i = 0; i < d.size(); ++i) {
    for (int j = 0; j < d.dim(); ++j) os << d.inputs()(i, j) << " ";
    os << d.output(i) << "\n";
  }
}

inline Dataset read_table(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    const auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (row.size() < 2) throw std::runtime_error("read_table: row needs at least one input and the output");
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("read_table: inconsistent column count");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("read_table: no data rows");
  const int dim = static_cast<int>(rows.front().size()) - 1;
  Dataset d(dim);
  for (const auto& row : rows) {
    Vec x(dim);
    for (int j = 0; j < dim; ++j) x[j] = row[j];
    d.add(x, row[dim]);
  }
  return d;
}

struct PosteriorGaussian {
  double mean = 0.0;
  double var = 0.0;
};

// Per-dimension posterior over the gradient under the extra noise-free
// virtual observation f(x) = u.
struct GradientPosterior {
  Vec mean;    // mu_j(u)
  Vec stddev;  // nu_j
};

// Which variance enters the gradient envelope: the variance conditioned on
// data plus the virtual observation, or the prior derivative variance
// sf2 / l_j^2 with only the means conditioned.
enum class DerivVariance { extended, prior };

namespace detail {

struct CholFactor {
  Mat L;
  double jitter = 0.0;
};

// Cholesky with escalating diagonal jitter: none, then 1e-10*sf2 growing by
// tens up to 1e-4*sf2. Throws when even the largest jitter fails.
inline CholFactor chol_with_jitter(const Mat& A, double signal_var) {
  Eigen::LLT<Mat> llt(A);
  if (llt.info() == Eigen::Success) return {Mat(llt.matrixL()), 0.0};
  for (double jit = 1e-10 * signal_var; jit <= 1e-4 * signal_var * (1.0 + 1e-12); jit *= 10.0) {
    Mat Aj = A;
    Aj.diagonal().array() += jit;
    llt.compute(Aj);
    if (llt.info() == Eigen::Success) return {Mat(llt.matrixL()), jit};
  }
  throw std::runtime_error("chol_with_jitter: matrix not positive definite at max jitter");
}

}  // namespace detail

// Linearization of the virtual-observation gradient posterior at a fixed x:
// mu_j(u) = lin_const[j] + lin_u[j]*u while nu_j does not depend on u, so one
// bordered factorization serves every threshold evaluated at this point.
struct VirtualGradientSystem {
  double mean = 0.0;  // posterior mean of f(x) given data
  double var = 0.0;   // posterior variance of f(x) given data
  Vec lin_const;
  Vec lin_u;
  Vec nu;

  Vec grad_mean(double u) const { return lin_const + u * lin_u; }
};

class GpModel {
 public:
  GpModel(Dataset data, KernelParams params)
      : data_(std::move(data)), params_(std::move(params)) {
    params_.validate();
    if (data_.dim() != params_.dim()) throw std::invalid_argument("GpModel: dimension mismatch");
    const int n = data_.size();
    if (n == 0) return;
    Mat K = gram(params_, data_.inputs());
    K.diagonal().array() += params_.noise_var;
    auto cf = detail::chol_with_jitter(K, params_.signal_var);
    L_ = std::move(cf.L);
    jitter_ = cf.jitter;
    beta0_ = L_.triangularView<Eigen::Lower>().solve(data_.outputs());
    alpha_ = L_.transpose().triangularView<Eigen::Upper>().solve(beta0_);
  }

  const Dataset& data() const { return data_; }
  const KernelParams& params() const { return params_; }
  double jitter() const { return jitter_; }

  Vec cross_covariances(const Vec& x) const {
    const int n = data_.size();
    Vec k(n);
    for (int i = 0; i < n; ++i) k[i] = kernel_eval(params_, x, data_.input(i));
    return k;
  }

  PosteriorGaussian posterior(const Vec& x) const {
    if (x.size() != params_.dim()) throw std::invalid_argument("posterior: dimension mismatch");
    if (data_.size() == 0) return {0.0, params_.signal_var};
    const Vec k = cross_covariances(x);
    const Vec l = L_.triangularView<Eigen::Lower>().solve(k);
    PosteriorGaussian p;
    p.mean = k.dot(alpha_);
    p.var = std::max(0.0, params_.signal_var - l.squaredNorm());
    return p;
  }

  double posterior_mean(const Vec& x) const {
    if (data_.size() == 0) return 0.0;
    return cross_covariances(x).dot(alpha_);
  }

  // Builds the bordered extension of the cached factorization with the
  // noise-free virtual observation f(x) = u appended:
  //   K_ext = [[K + sn2 I, k(x)], [k(x)^T, k(x,x) + jv]]
  // so for each dimension j,
  //   mu_j(u)  = c_j^T K_ext^{-1} [y; u],   c_j = Cov(df/dx_j, [f(X); f(x)])
  //   nu_j^2   = d2k_jj(x,x) - c_j^T K_ext^{-1} c_j
  // Extending the cached Cholesky factor costs O(n^2) per query point.
  VirtualGradientSystem virtual_system(const Vec& x, DerivVariance mode = DerivVariance::extended) const {
    if (x.size() != params_.dim()) throw std::invalid_argument("virtual_system: dimension mismatch");
    const int n = data_.size();
    const int D = params_.dim();
    const double sf2 = params_.signal_var;
    const double jv = 1e-8;  // virtual-observation jitter

    VirtualGradientSystem sys;
    sys.lin_const = Vec::Zero(D);
    sys.lin_u = Vec::Zero(D);
    sys.nu = Vec::Zero(D);

    if (n == 0) {
      sys.mean = 0.0;
      sys.var = sf2;
      // Cov(df/dx_j, f(x)) at the same point vanishes for this kernel, so the
      // virtual observation leaves the prior gradient untouched either way.
      for (int j = 0; j < D; ++j) sys.nu[j] = std::sqrt(sf2) / params_.lengthscales[j];
      return sys;
    }

    const Vec k = cross_covariances(x);
    const Vec l = L_.triangularView<Eigen::Lower>().solve(k);
    sys.mean = l.dot(beta0_);
    sys.var = std::max(0.0, sf2 - l.squaredNorm());
    const double d = std::sqrt(sys.var + jv);

    Vec c(n);
    for (int j = 0; j < D; ++j) {
      for (int i = 0; i < n; ++i) c[i] = kernel_d1(params_, x, data_.input(i), j);
      const Vec w = L_.triangularView<Eigen::Lower>().solve(c);
      const double w_last = (0.0 - l.dot(w)) / d;  // Cov(df/dx_j, f(x)) = 0 at the query point
      sys.lin_u[j] = w_last / d;
      sys.lin_const[j] = w.dot(beta0_) - w_last * sys.mean / d;
      if (mode == DerivVariance::prior) {
        sys.nu[j] = std::sqrt(sf2) / params_.lengthscales[j];
      } else {
        const double prior_var = sf2 / (params_.lengthscales[j] * params_.lengthscales[j]);
        sys.nu[j] = std::sqrt(std::max(0.0, prior_var - w.squaredNorm() - w_last * w_last));
      }
    }
    return sys;
  }

  GradientPosterior gradient_with_virtual(const Vec& x, double u,
                                          DerivVariance mode = DerivVariance::extended) const {
    const auto sys = virtual_system(x, mode);
    return {sys.grad_mean(u), sys.nu};
  }

 private:
  Dataset data_;
  KernelParams params_;
  double jitter_ = 0.0;
  Mat L_;
  Vec beta0_;  // L^{-1} y
  Vec alpha_;  // (K + sn2 I)^{-1} y
};

// MAP fit of log lengthscales and log signal variance inside the prior box,
// observation noise held fixed. Multistart projected L-BFGS with the
// analytic marginal-likelihood gradient; deterministic given the seed, and
// the best evaluated candidate wins even if every local search stalls.
inline KernelParams fit_hyperparameters(const Dataset& data, const HyperPriors& priors,
                                        int restarts, std::uint64_t seed) {
  priors.validate();
  if (data.size() == 0) throw std::invalid_argument("fit_hyperparameters: empty dataset");
  const int n = data.size();
  const int D = data.dim();
  const int P = D + 1;  // log l_1..D, log sf2

  // Pairwise squared differences per dimension, computed once.
  std::vector<Mat> sq(D, Mat(n, n));
  for (int j = 0; j < D; ++j)
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        const double d = data.inputs()(i, j) - data.inputs()(k, j);
        sq[j](i, k) = d * d;
      }

  Vec lo(P), hi(P);
  for (int j = 0; j < D; ++j) {
    lo[j] = std::log(priors.ell_min);
    hi[j] = std::log(priors.ell_max);
  }
  lo[D] = std::log(priors.sf2_min);
  hi[D] = std::log(priors.sf2_max);
  const Vec mid = 0.5 * (lo + hi);
  const double w = priors.log_penalty_weight;
  const double noise = priors.fixed_noise_var;

  // Log marginal likelihood (plus optional penalty), with gradient:
  //   dL/dtheta = 1/2 tr((aa^T - K^{-1}) dK/dtheta)
  auto objective = [&](const Vec& th, Vec* grad) -> double {
    Mat K0(n, n);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int j = 0; j < D; ++j) s += sq[j](i, k) * std::exp(-2.0 * th[j]);
        K0(i, k) = std::exp(th[D]) * std::exp(-0.5 * s);
      }
    Mat K = K0;
    K.diagonal().array() += noise;
    Eigen::LLT<Mat> llt(K);
    if (llt.info() != Eigen::Success) {
      if (grad) grad->setZero();
      return -1e300;
    }
    const Mat L = llt.matrixL();
    const Vec alpha = llt.solve(data.outputs());
    double logdet = 0.0;
    for (int i = 0; i < n; ++i) logdet += std::log(L(i, i));
    double val = -0.5 * data.outputs().dot(alpha) - logdet - 0.5 * n * std::log(2.0 * kPi);
    if (w > 0.0) val -= w * (th - mid).squaredNorm();
    if (grad) {
      grad->resize(P);
      const Mat M = alpha * alpha.transpose() - llt.solve(Mat::Identity(n, n));
      for (int j = 0; j < D; ++j) {
        const Mat dK = K0.cwiseProduct(sq[j]) * std::exp(-2.0 * th[j]);
        (*grad)[j] = 0.5 * M.cwiseProduct(dK).sum();
      }
      (*grad)[D] = 0.5 * M.cwiseProduct(K0).sum();
      if (w > 0.0) *grad -= 2.0 * w * (th - mid);
    }
    return val;
  };

  ObjectiveFn fval = [&](const Vec& th) { return objective(th, nullptr); };
  auto fgrad = [&](const Vec& th, Vec& g) { objective(th, &g); };

  auto starts = detail::halton_starts(P, restarts, derive_seed(seed, "hyper-starts"));
  BoxOptResult best;
  bool have = false;
  for (int r = 0; r < restarts; ++r) {
    detail::LbfgsBox solver{fval, fgrad, lo, hi, 200};
    BoxOptResult res = solver.run(lo + starts[r].cwiseProduct(hi - lo));
    if (!have || res.value > best.value) {
      best = res;
      have = true;
    }
  }

  KernelParams out;
  out.lengthscales = best.x.head(D).array().exp();
  out.signal_var = std::exp(best.x[D]);
  out.noise_var = noise;
  out.validate();
  return out;
}

// Joint draw of prior function values on an arbitrary set of points.
inline Vec sample_prior_on_grid(const KernelParams& params, const std::vector<Vec>& grid,
                                std::uint64_t seed) {
  params.validate();
  const int n = static_cast<int>(grid.size());
  if (n == 0) return Vec(0);
  Mat X(n, params.dim());
  for (int i = 0; i < n; ++i) {
    if (grid[i].size() != params.dim())
      throw std::invalid_argument("sample_prior_on_grid: dimension mismatch");
    X.row(i) = grid[i].transpose();
  }
  Mat K = gram(params, X);
  auto cf = detail::chol_with_jitter(K, params.signal_var);
  Rng rng(seed);
  Vec z(n);
  for (int i = 0; i < n; ++i) z[i] = rng.normal();
  return cf.L.triangularView<Eigen::Lower>() * z;
}

}  // namespace xs
