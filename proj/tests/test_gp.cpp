#include <catch_amalgamated.hpp>

#include <xsearch/gp.hpp>
#include <xsearch/lowdisc.hpp>
#include <xsearch/oracles.hpp>
#include <xsearch/rng.hpp>

#include <cmath>
#include <sstream>

using namespace xs;

namespace {

Vec vec1(double a) {
  Vec v(1);
  v << a;
  return v;
}

Dataset random_dataset(int dim, int n, std::uint64_t seed, double y_scale = 1.0) {
  Rng rng(seed);
  Dataset d(dim);
  for (int i = 0; i < n; ++i) {
    Vec x(dim);
    for (int j = 0; j < dim; ++j) x[j] = rng.uniform01();
    d.add(x, y_scale * (2.0 * rng.uniform01() - 1.0));
  }
  return d;
}

}  // namespace

TEST_CASE("posterior reproduces the prior on the empty dataset", "[gp]") {
  const KernelParams p = KernelParams::isotropic(2, 0.3, 1.7);
  GpModel m(Dataset(2), p);
  Vec x(2);
  x << 0.4, 0.9;
  const PosteriorGaussian post = m.posterior(x);
  CHECK(post.mean == 0.0);
  CHECK(post.var == 1.7);
}

TEST_CASE("single-observation posterior closed form", "[gp]") {
  Dataset d(1);
  d.add(vec1(0.5), 1.0);
  GpModel m(d, KernelParams::isotropic(1, 0.4, 1.0, 0.01));
  const PosteriorGaussian post = m.posterior(vec1(0.5));
  CHECK(post.mean == Catch::Approx(1.0 / 1.01).epsilon(1e-12));
  CHECK(post.var == Catch::Approx(1.0 - 1.0 / 1.01).epsilon(1e-9));
}

TEST_CASE("posterior matches a dense-solve oracle", "[gp]") {
  const Dataset d = random_dataset(2, 5, 31);
  const KernelParams p = KernelParams::isotropic(2, 0.35, 1.2, 0.01);
  GpModel m(d, p);
  HaltonSequence grid(2);
  for (int i = 1; i <= 20; ++i) {
    const Vec x = grid(i);
    const PosteriorGaussian a = m.posterior(x);
    const PosteriorGaussian b = oracle::dense_posterior(d, p, x);
    CHECK(a.mean == Catch::Approx(b.mean).margin(1e-10));
    CHECK(a.var == Catch::Approx(b.var).margin(1e-10));
  }
}

TEST_CASE("posterior variance never grows as data accumulates", "[gp]") {
  const KernelParams p = KernelParams::isotropic(2, 0.3, 1.0, 0.01);
  const Dataset full = random_dataset(2, 12, 77);
  HaltonSequence grid(2);
  std::vector<Vec> queries;
  for (int i = 1; i <= 10; ++i) queries.push_back(grid(i));

  Dataset growing(2);
  std::vector<double> prev(queries.size(), p.signal_var);
  for (int i = 0; i < full.size(); ++i) {
    growing.add(full.input(i), full.output(i));
    GpModel m(growing, p);
    for (std::size_t k = 0; k < queries.size(); ++k) {
      const double v = m.posterior(queries[k]).var;
      CHECK(v <= prev[k] + 1e-9);
      prev[k] = v;
    }
  }
}

TEST_CASE("virtual-observation gradient on the empty dataset", "[gp]") {
  KernelParams p;
  p.lengthscales = Vec(2);
  p.lengthscales << 0.2, 0.5;
  p.signal_var = 2.0;
  GpModel m(Dataset(2), p);
  Vec x(2);
  x << 0.3, 0.8;
  const GradientPosterior g = m.gradient_with_virtual(x, -1.3);
  const double sf = std::sqrt(2.0);
  CHECK(g.mean[0] == Catch::Approx(0.0).margin(1e-12));
  CHECK(g.mean[1] == Catch::Approx(0.0).margin(1e-12));
  CHECK(g.stddev[0] == Catch::Approx(sf / 0.2).epsilon(1e-9));
  CHECK(g.stddev[1] == Catch::Approx(sf / 0.5).epsilon(1e-9));
}

TEST_CASE("virtual-observation gradient matches finite differences in 1D", "[gp]") {
  const Dataset d = random_dataset(1, 3, 9);
  const KernelParams p = KernelParams::isotropic(1, 0.3, 1.0, 0.01);
  GpModel m(d, p);
  const Vec x = vec1(0.62);
  const double u = d.outputs().minCoeff() - 0.3;
  const GradientPosterior g = m.gradient_with_virtual(x, u);
  const Vec fd = oracle::fd_extended_mean_gradient(d, p, x, u);
  CHECK(g.mean[0] == Catch::Approx(fd[0]).epsilon(1e-5));
}

TEST_CASE("gradient mean matches finite differences across dimensions", "[gp]") {
  int config = 0;
  for (int dim : {1, 2, 4}) {
    for (int trial = 0; trial < 34; ++trial) {
      if (config >= 100) break;
      ++config;
      Rng rng(derive_seed(555, "fd-config", config));
      const int n = 3 + static_cast<int>(rng.uniform01() * 6);
      Dataset d(dim);
      for (int i = 0; i < n; ++i) {
        Vec xi(dim);
        for (int j = 0; j < dim; ++j) xi[j] = rng.uniform01();
        d.add(xi, 2.0 * rng.uniform01() - 1.0);
      }
      KernelParams p;
      p.lengthscales = Vec(dim);
      for (int j = 0; j < dim; ++j) p.lengthscales[j] = 0.15 + 0.5 * rng.uniform01();
      p.signal_var = 0.5 + rng.uniform01();
      p.noise_var = 0.01;
      GpModel m(d, p);
      Vec x(dim);
      for (int j = 0; j < dim; ++j) x[j] = 0.05 + 0.9 * rng.uniform01();
      const double u = d.outputs().minCoeff() - 0.5 * rng.uniform01();

      const GradientPosterior g = m.gradient_with_virtual(x, u);
      const Vec fd = oracle::fd_extended_mean_gradient(d, p, x, u);
      const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-6);
      for (int j = 0; j < dim; ++j) {
        CHECK(std::abs(g.mean[j] - fd[j]) / scale < 1e-4);
      }
    }
  }
  CHECK(config == 100);
}

TEST_CASE("mirrored data zeroes the gradient on the symmetry plane", "[gp]") {
  Dataset d(2);
  auto add_pair = [&](double x1, double x2, double y) {
    Vec a(2), b(2);
    a << x1, x2;
    b << 1.0 - x1, x2;
    d.add(a, y);
    d.add(b, y);
  };
  add_pair(0.2, 0.3, 0.7);
  add_pair(0.35, 0.8, -0.4);
  add_pair(0.1, 0.55, 0.2);
  GpModel m(d, KernelParams::isotropic(2, 0.3, 1.0, 0.01));
  Vec x(2);
  x << 0.5, 0.6;
  const GradientPosterior g = m.gradient_with_virtual(x, -1.0);
  CHECK(std::abs(g.mean[0]) < 1e-9);
}

TEST_CASE("fitted lengthscales follow an input rescaling", "[gp][hyper]") {
  const double c = 0.5;
  Dataset a(1), b(1);
  HaltonSequence seq(1);
  for (int i = 1; i <= 12; ++i) {
    const double x = seq(i)[0];
    const double y = std::sin(3.0 * x) - 0.4 * x;
    a.add(vec1(x), y);
    b.add(vec1(c * x), y);
  }
  HyperPriors pa;
  pa.fixed_noise_var = 1e-4;
  HyperPriors pb = pa;
  pb.ell_min = c * pa.ell_min;
  pb.ell_max = c * pa.ell_max;
  const KernelParams fa = fit_hyperparameters(a, pa, 5, 321);
  const KernelParams fb = fit_hyperparameters(b, pb, 5, 321);
  CHECK(fb.lengthscales[0] == Catch::Approx(c * fa.lengthscales[0]).epsilon(1e-6));
  CHECK(fb.signal_var == Catch::Approx(fa.signal_var).epsilon(1e-6));
}

TEST_CASE("lengthscale recovery from prior samples", "[gp][hyper]") {
  const KernelParams truth = KernelParams::isotropic(1, 0.2, 1.0, 0.0);
  HaltonSequence seq(1);
  std::vector<Vec> grid;
  for (int i = 1; i <= 50; ++i) grid.push_back(seq(i));
  HyperPriors priors;
  priors.fixed_noise_var = 1e-4;

  int hits = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Vec y = sample_prior_on_grid(truth, grid, derive_seed(808, "recovery", trial));
    Dataset d(1);
    for (int i = 0; i < 50; ++i) d.add(grid[i], y[i]);
    const KernelParams fit = fit_hyperparameters(d, priors, 5, derive_seed(808, "fit", trial));
    if (fit.lengthscales[0] >= 0.1 && fit.lengthscales[0] <= 0.4) ++hits;
  }
  CHECK(hits >= 18);
}

TEST_CASE("all-zero outputs drive the signal variance to its lower bound", "[gp][hyper]") {
  Dataset d(1);
  HaltonSequence seq(1);
  for (int i = 1; i <= 10; ++i) d.add(seq(i), 0.0);
  HyperPriors priors;
  const KernelParams fit = fit_hyperparameters(d, priors, 5, 12);
  CHECK(fit.signal_var <= priors.sf2_min * (1.0 + 1e-6));
}

TEST_CASE("prior sample at a single point is standard normal on average", "[gp]") {
  const KernelParams p = KernelParams::isotropic(1, 0.3, 1.0, 0.0);
  std::vector<Vec> grid{vec1(0.5)};
  double s = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) s += sample_prior_on_grid(p, grid, derive_seed(42, "one-pt", i))[0];
  CHECK(std::abs(s / n) < 0.03);
}

TEST_CASE("duplicate grid points receive identical sample values", "[gp]") {
  const KernelParams p = KernelParams::isotropic(1, 0.3, 1.0, 0.0);
  std::vector<Vec> grid{vec1(0.25), vec1(0.25), vec1(0.8)};
  const Vec y = sample_prior_on_grid(p, grid, 5150);
  CHECK(std::abs(y[0] - y[1]) < 1e-3);
}

TEST_CASE("prior samples on a long grid have close to unit variance", "[gp]") {
  const KernelParams p = KernelParams::isotropic(1, 0.1, 1.0, 0.0);
  HaltonSequence seq(1);
  std::vector<Vec> grid;
  for (int i = 1; i <= 500; ++i) grid.push_back(seq(i));
  double s1 = 0.0, s2 = 0.0;
  long n = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const Vec y = sample_prior_on_grid(p, grid, derive_seed(99, "var-rep", rep));
    for (int i = 0; i < y.size(); ++i) {
      s1 += y[i];
      s2 += y[i] * y[i];
      ++n;
    }
  }
  const double mean = s1 / n;
  const double var = s2 / n - mean * mean;
  CHECK(var > 0.8);
  CHECK(var < 1.2);
}

TEST_CASE("datasets round-trip through the plain-text table format", "[gp][io]") {
  const Dataset d = random_dataset(3, 7, 1234, 5.0);
  std::ostringstream os;
  write_table(os, d);
  std::istringstream is(os.str());
  const Dataset back = read_table(is);
  REQUIRE(back.size() == d.size());
  REQUIRE(back.dim() == d.dim());
  for (int i = 0; i < d.size(); ++i) {
    CHECK(back.output(i) == d.output(i));
    for (int j = 0; j < d.dim(); ++j) CHECK(back.input(i)[j] == d.input(i)[j]);
  }
}

TEST_CASE("table reader rejects malformed input", "[gp][io]") {
  std::istringstream empty("# x1 y\n");
  CHECK_THROWS_AS(read_table(empty), std::runtime_error);
  std::istringstream ragged("0.1 0.2 1.0\n0.3 2.0\n");
  CHECK_THROWS_AS(read_table(ragged), std::runtime_error);
  std::istringstream one_col("0.5\n");
  CHECK_THROWS_AS(read_table(one_col), std::runtime_error);
}

TEST_CASE("dataset construction rejects bad rows", "[gp]") {
  Dataset d(1);
  CHECK_THROWS_AS(d.add(vec1(1.5), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(d.add(vec1(0.5), std::numeric_limits<double>::infinity()),
                  std::invalid_argument);
  Vec wrong(2);
  wrong << 0.2, 0.3;
  CHECK_THROWS_AS(d.add(wrong, 0.0), std::invalid_argument);
}

TEST_CASE("factorization recovers from duplicated noise-free inputs", "[gp]") {
  Dataset d(1);
  d.add(vec1(0.4), 1.0);
  d.add(vec1(0.4), 1.0);
  GpModel m(d, KernelParams::isotropic(1, 0.3, 1.0, 0.0));
  const PosteriorGaussian post = m.posterior(vec1(0.7));
  CHECK(std::isfinite(post.mean));
  CHECK(std::isfinite(post.var));
  CHECK(post.var >= 0.0);
}
