#pragma once

#include <algorithm>
#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "lowdisc.hpp"

namespace xs {

using ObjectiveFn = std::function<double(const Vec&)>;

struct BoxOptResult {
  Vec x;
  double value = 0.0;
  int start_index = 0;
  long evals = 0;
};

struct ConstrainedOptResult {
  Vec x;
  double value = 0.0;
  double phi = 0.0;
  int start_index = 0;
};

namespace detail {

inline Vec clip_box(Vec x, const Vec& lo, const Vec& hi) {
  for (int j = 0; j < x.size(); ++j) x[j] = std::min(hi[j], std::max(lo[j], x[j]));
  return x;
}

// Projected L-BFGS ascent over a box. The gradient callback may be empty, in
// which case central differences with step h are used (2*dim evals each).
// Every objective evaluation counts against `budget`; the best candidate seen
// anywhere (start, line-search trial, accepted iterate) is returned, so a
// failed line search still falls back to the best evaluated point.
struct LbfgsBox {
  const ObjectiveFn& f;
  std::function<void(const Vec&, Vec&)> grad;  // optional analytic gradient of f
  Vec lo, hi;
  long budget = 200;
  double fd_step = 1e-6;
  int memory = 8;

  long used = 0;
  Vec best_x;
  double best_f = -std::numeric_limits<double>::infinity();

  double eval(const Vec& x, bool candidate) {
    ++used;
    const double v = f(x);
    if (candidate && v > best_f) {
      best_f = v;
      best_x = x;
    }
    return v;
  }

  void gradient(const Vec& x, double /*fx*/, Vec& g) {
    if (grad) {
      grad(x, g);
      return;
    }
    const int d = static_cast<int>(x.size());
    g.resize(d);
    Vec xp = x;
    for (int j = 0; j < d; ++j) {
      const double x0 = x[j];
      xp[j] = x0 + fd_step;
      const double fp = eval(xp, false);
      xp[j] = x0 - fd_step;
      const double fm = eval(xp, false);
      xp[j] = x0;
      g[j] = (fp - fm) / (2.0 * fd_step);
    }
  }

  // Gradient with ascent directions blocked at active bounds zeroed out.
  Vec projected(const Vec& x, const Vec& g) const {
    Vec pg = g;
    for (int j = 0; j < x.size(); ++j) {
      if (x[j] <= lo[j] && g[j] < 0.0) pg[j] = 0.0;
      if (x[j] >= hi[j] && g[j] > 0.0) pg[j] = 0.0;
    }
    return pg;
  }

  BoxOptResult run(const Vec& start) {
    const int d = static_cast<int>(start.size());
    Vec x = clip_box(start, lo, hi);
    double fx = eval(x, true);
    Vec g(d);
    if (used < budget) gradient(x, fx, g); else g.setZero();
    std::deque<Vec> ss, ys;  // ys holds descent-convention differences
    std::deque<double> rhos;

    while (used < budget) {
      Vec pg = projected(x, g);
      if (pg.lpNorm<Eigen::Infinity>() < 1e-9 * std::max(1.0, std::abs(fx))) break;

      // Two-loop recursion for the ascent direction H*g.
      Vec q = pg;
      std::vector<double> alpha(ss.size());
      for (int i = static_cast<int>(ss.size()) - 1; i >= 0; --i) {
        alpha[i] = rhos[i] * ss[i].dot(q);
        q -= alpha[i] * ys[i];
      }
      if (!ss.empty()) q *= ss.back().dot(ys.back()) / ys.back().squaredNorm();
      for (std::size_t i = 0; i < ss.size(); ++i) {
        const double beta = rhos[i] * ys[i].dot(q);
        q += (alpha[i] - beta) * ss[i];
      }
      Vec dir = q;
      if (dir.dot(pg) <= 0.0) dir = pg;  // safeguard: fall back to steepest ascent

      double t = 1.0;
      bool accepted = false;
      Vec xn;
      double fn = 0.0;
      for (int ls = 0; ls < 25 && used < budget; ++ls) {
        xn = clip_box(x + t * dir, lo, hi);
        fn = eval(xn, true);
        if (fn >= fx + 1e-4 * g.dot(xn - x)) {
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      if (!accepted) break;
      if ((xn - x).lpNorm<Eigen::Infinity>() < 1e-13) break;
      if (used >= budget) break;

      Vec gn(d);
      gradient(xn, fn, gn);
      const Vec s = xn - x, y = gn - g;
      const double sy = s.dot(y);
      if (-sy > 1e-12 * s.norm() * y.norm()) {  // curvature check, ascent problem
        ss.push_back(s);
        ys.push_back(-y);
        rhos.push_back(1.0 / (-sy));
        if (static_cast<int>(ss.size()) > memory) {
          ss.pop_front();
          ys.pop_front();
          rhos.pop_front();
        }
      }
      x = xn;
      fx = fn;
      g = gn;
    }
    BoxOptResult r;
    r.x = best_x;
    r.value = best_f;
    r.evals = used;
    return r;
  }
};

inline std::vector<Vec> halton_starts(int dim, int count, std::uint64_t seed) {
  HaltonSequence hs(dim, seed);
  std::vector<Vec> out;
  out.reserve(count);
  for (int r = 0; r < count; ++r) out.push_back(hs(r + 1));
  return out;
}

}  // namespace detail

// Multi-start box-constrained maximization over [0,1]^dim (or a supplied box).
// Deterministic given the seed: quasi-random starts, fixed iteration order,
// strict improvement so ties resolve to the lowest start index.
inline BoxOptResult maximize_box(const ObjectiveFn& f, const Vec& lo, const Vec& hi,
                                 int restarts, std::uint64_t seed, long eval_budget = 200,
                                 std::function<void(const Vec&, Vec&)> grad = nullptr) {
  const int dim = static_cast<int>(lo.size());
  auto starts = detail::halton_starts(dim, restarts, seed);
  BoxOptResult best;
  bool have = false;
  for (int r = 0; r < restarts; ++r) {
    detail::LbfgsBox solver{f, grad, lo, hi, eval_budget};
    Vec x0 = lo + starts[r].cwiseProduct(hi - lo);
    BoxOptResult res = solver.run(x0);
    res.start_index = r;
    if (!have || res.value > best.value) {
      best = res;
      have = true;
    }
  }
  return best;
}

inline BoxOptResult maximize_unconstrained(const ObjectiveFn& f, int dim, int restarts,
                                           std::uint64_t seed, long eval_budget = 200) {
  return maximize_box(f, Vec::Zero(dim), Vec::Ones(dim), restarts, seed, eval_budget);
}

namespace detail {

// Lexicographic value for feasibility-first Nelder-Mead: any feasible point
// beats any infeasible one, feasible points compare by objective, infeasible
// ones by constraint violation. Nelder-Mead only needs comparisons, which is
// what makes this derivative-free treatment of the probabilistic constraint
// work without a dedicated NLP solver.
struct LexValue {
  bool feasible = false;
  double value = -std::numeric_limits<double>::infinity();
  double violation = std::numeric_limits<double>::infinity();

  bool operator>(const LexValue& o) const {
    if (feasible != o.feasible) return feasible;
    if (feasible) return value > o.value;
    return violation < o.violation;
  }
};

}  // namespace detail

// Maximizes f subject to phi(x) >= rho over [0,1]^dim with feasibility-first
// Nelder-Mead from quasi-random starts (feasible starts are tried first).
// Returns nullopt when no evaluated point satisfied the constraint.
inline std::optional<ConstrainedOptResult> maximize_constrained(
    const ObjectiveFn& f, const ObjectiveFn& phi, double rho, int dim, int restarts,
    std::uint64_t seed, long eval_budget = 200) {
  using detail::LexValue;
  long used = 0;
  const long cap_total = eval_budget * static_cast<long>(restarts);

  bool have_best = false;
  ConstrainedOptResult best;
  LexValue best_val;

  auto eval = [&](const Vec& x) -> LexValue {
    ++used;
    LexValue v;
    const double p = phi(x);
    v.feasible = p >= rho;
    if (v.feasible) {
      v.value = f(x);
      v.violation = 0.0;
      if (!have_best || v.value > best_val.value || !best_val.feasible) {
        best = {x, v.value, p, 0};
        best_val = v;
        have_best = true;
      }
    } else {
      v.violation = rho - p;
    }
    return v;
  };

  auto starts = detail::halton_starts(dim, restarts, derive_seed(seed, "nm-starts"));
  // Order starts feasibility-first (by phi value), objective untouched.
  std::vector<std::pair<double, int>> order;
  order.reserve(starts.size());
  for (int r = 0; r < restarts; ++r) {
    order.emplace_back(phi(starts[r]), r);
    ++used;
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  for (const auto& [phi0, idx] : order) {
    if (used >= cap_total) break;
    const Vec& x0 = starts[idx];
    const long restart_cap = std::min(cap_total, used + eval_budget);

    // Initial simplex inside the box.
    std::vector<Vec> pts(dim + 1, x0);
    for (int j = 0; j < dim; ++j) {
      double step = 0.08;
      if (x0[j] + step > 1.0) step = -0.08;
      pts[j + 1][j] = std::min(1.0, std::max(0.0, x0[j] + step));
    }
    std::vector<LexValue> vals(dim + 1);
    for (int i = 0; i <= dim && used < restart_cap; ++i) vals[i] = eval(pts[i]);

    auto centroid_excl = [&](int worst) {
      Vec c = Vec::Zero(dim);
      for (int i = 0; i <= dim; ++i)
        if (i != worst) c += pts[i];
      return Vec((c / dim).eval());
    };
    auto clip01 = [&](Vec x) { return detail::clip_box(std::move(x), Vec::Zero(dim), Vec::Ones(dim)); };

    while (used < restart_cap) {
      // Order simplex: index of best / worst / second worst.
      int b = 0, w = 0, sw = 0;
      for (int i = 1; i <= dim; ++i) {
        if (vals[i] > vals[b]) b = i;
        if (vals[w] > vals[i]) w = i;
      }
      sw = (w == 0) ? 1 : 0;
      for (int i = 0; i <= dim; ++i)
        if (i != w && vals[sw] > vals[i]) sw = i;

      double diam = 0.0;
      for (int i = 0; i <= dim; ++i) diam = std::max(diam, (pts[i] - pts[b]).lpNorm<Eigen::Infinity>());
      if (diam < 1e-10) break;

      const Vec c = centroid_excl(w);
      const Vec xr = clip01(c + (c - pts[w]));
      LexValue vr = eval(xr);
      if (vr > vals[b]) {
        const Vec xe = clip01(c + 2.0 * (c - pts[w]));
        if (used < restart_cap) {
          LexValue ve = eval(xe);
          if (ve > vr) {
            pts[w] = xe;
            vals[w] = ve;
            continue;
          }
        }
        pts[w] = xr;
        vals[w] = vr;
        continue;
      }
      if (vr > vals[sw]) {
        pts[w] = xr;
        vals[w] = vr;
        continue;
      }
      const Vec xc = clip01(c + 0.5 * (pts[w] - c));
      if (used >= restart_cap) break;
      LexValue vc = eval(xc);
      if (vc > vals[w]) {
        pts[w] = xc;
        vals[w] = vc;
        continue;
      }
      // Shrink toward the best vertex.
      for (int i = 0; i <= dim && used < restart_cap; ++i) {
        if (i == b) continue;
        pts[i] = clip01(pts[b] + 0.5 * (pts[i] - pts[b]));
        vals[i] = eval(pts[i]);
      }
    }
  }

  if (!have_best || !best_val.feasible) return std::nullopt;
  return best;
}

}  // namespace xs
