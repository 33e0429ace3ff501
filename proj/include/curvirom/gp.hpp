#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "curvirom/core.hpp"

// Gaussian-process regression with the rational quadratic kernel
//
//   k(a, b) = sigma2 * (1 + |a-b|^2 / (2 alpha ell^2))^(-alpha)
//
// Hyperparameters maximize the log marginal likelihood by a budgeted
// multi-start Nelder-Mead search in log space. Targets are standardized
// internally (skipped for a single sample or zero variance so closed-form
// small cases stay exact); inputs can be normalized to [0,1]^p through a
// bounds box stored in the model. Training rows are sorted lexicographically
// before fitting, so row order cannot affect the fit.

namespace curvirom {

template <class Scalar>
struct RqParams {
  Scalar sigma2 = 1;   // signal variance
  Scalar ell = 1;      // length scale
  Scalar alpha = 1;    // shape (squared-exponential limit as alpha -> inf)
  Scalar noise = 1e-6; // observation noise variance
};

using RqParamsd = RqParams<double>;

// Log-space search box, one row per hyperparameter in the order
// (sigma2, ell, alpha, noise).
inline constexpr double kGpBoxLo[4] = {1e-4, 1e-2, 1e-2, 1e-10};
inline constexpr double kGpBoxHi[4] = {1e+2, 1e+1, 1e+3, 1e-2};

template <class Scalar>
void check_rq_params(const RqParams<Scalar>& p) {
  using std::isfinite;
  if (!(isfinite(p.sigma2) && isfinite(p.ell) && isfinite(p.alpha) && isfinite(p.noise)))
    throw InputError("rq params must be finite");
  if (!(p.sigma2 > Scalar(0) && p.ell > Scalar(0) && p.alpha > Scalar(0) && p.noise >= Scalar(0)))
    throw InputError("rq params must be positive (noise nonnegative)");
}

//! Kernel value for a pair of points.
template <class Scalar>
Scalar rq_kernel(const Vec<Scalar>& a, const Vec<Scalar>& b, const RqParams<Scalar>& p) {
  check_rq_params(p);
  if (a.size() != b.size()) throw InputError("rq_kernel: dimension mismatch");
  const Scalar d2 = (a - b).squaredNorm();
  using std::exp;
  using std::log1p;
  return p.sigma2 * exp(-p.alpha * log1p(d2 / (Scalar(2) * p.alpha * p.ell * p.ell)));
}

//! Gram matrix of the rows of X (no noise term).
template <class Scalar>
Mat<Scalar> rq_kernel_matrix(const Mat<Scalar>& X, const RqParams<Scalar>& p) {
  check_rq_params(p);
  const index_t n = X.rows();
  const Vec<Scalar> sq = X.rowwise().squaredNorm();
  Mat<Scalar> d2 = (-Scalar(2)) * (X * X.transpose());
  d2.colwise() += sq;
  d2.rowwise() += sq.transpose();
  d2 = d2.cwiseMax(Scalar(0));
  const Scalar s = Scalar(1) / (Scalar(2) * p.alpha * p.ell * p.ell);
  Mat<Scalar> K(n, n);
  using std::exp;
  using std::log1p;
  for (index_t j = 0; j < n; ++j) {
    for (index_t i = 0; i < n; ++i) {
      K(i, j) = p.sigma2 * exp(-p.alpha * log1p(d2(i, j) * s));
    }
  }
  return K;
}

template <class Scalar>
struct GpPrediction {
  Scalar mean;
  Scalar variance;  // latent (noise-free) posterior variance, clipped at 0
};

template <class Scalar>
struct GpModel {
  Mat<Scalar> X;        // training inputs, normalized, rows sorted
  Vec<Scalar> y;        // raw targets, same row order as X
  RqParams<Scalar> params;  // standardized-target units
  Mat<Scalar> chol_l;   // lower Cholesky factor of K + (noise + jitter) I
  Vec<Scalar> weights;  // (K + (noise + jitter) I)^{-1} y_std
  Scalar y_mean = 0, y_scale = 1;
  Scalar jitter = 0;    // extra diagonal needed to factorize, 0 if none
  Scalar lml = 0;       // achieved log marginal likelihood (standardized)
  Vec<Scalar> in_lo, in_hi;  // input normalization box; empty = identity

  index_t count() const { return X.rows(); }
  index_t input_dim() const { return X.cols(); }
};

using GpModeld = GpModel<double>;

template <class Scalar>
struct GpFitOptions {
  std::uint64_t seed = 0;
  int opt_budget = 400;   // total likelihood evaluations across all starts
  int multistarts = 8;
  bool fix_noise = false; // pin noise to fixed_noise instead of searching it
  Scalar fixed_noise = Scalar(1e-10);
  Vec<Scalar> in_lo, in_hi;  // optional input normalization box
};

using GpFitOptionsd = GpFitOptions<double>;

//! Prior (de-standardized) signal variance, the far-field prediction variance.
template <class Scalar>
Scalar prior_variance(const GpModel<Scalar>& m) {
  return m.y_scale * m.y_scale * m.params.sigma2;
}

//! Log marginal likelihood of (X, y) under the kernel parameters. Throws
//! ConditioningError when K + noise I cannot be factorized.
template <class Scalar>
Scalar log_marginal_likelihood(const Mat<Scalar>& X, const Vec<Scalar>& y,
                               const RqParams<Scalar>& p) {
  if (X.rows() != y.size() || X.rows() < 1)
    throw InputError("log_marginal_likelihood: shape mismatch");
  Mat<Scalar> K = rq_kernel_matrix(X, p);
  K.diagonal().array() += p.noise;
  Eigen::LLT<Mat<Scalar>> llt(K);
  if (llt.info() != Eigen::Success)
    throw ConditioningError("log_marginal_likelihood: covariance not positive definite");
  const Vec<Scalar> a = llt.solve(y);
  const Scalar logdet_half = llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const Scalar n = Scalar(X.rows());
  const Scalar two_pi = Scalar(2) * Scalar(EIGEN_PI);
  using std::log;
  return Scalar(-0.5) * y.dot(a) - logdet_half - Scalar(0.5) * n * log(two_pi);
}

namespace detail {

template <class Scalar>
std::optional<Scalar> try_lml(const Mat<Scalar>& X, const Vec<Scalar>& y,
                              const RqParams<Scalar>& p) {
  Mat<Scalar> K = rq_kernel_matrix(X, p);
  K.diagonal().array() += p.noise;
  Eigen::LLT<Mat<Scalar>> llt(K);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Vec<Scalar> a = llt.solve(y);
  const Scalar logdet_half = llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  using std::log;
  return Scalar(-0.5) * y.dot(a) - logdet_half -
         Scalar(0.5) * Scalar(X.rows()) * log(Scalar(2) * Scalar(EIGEN_PI));
}

// Nelder-Mead minimization inside a box, capped at max_evals objective
// evaluations. Proposals are clamped to the box, which is adequate for the
// smooth likelihood surfaces seen here.
template <class Scalar, class F>
std::pair<Vec<Scalar>, Scalar> nelder_mead_min(F&& f, const Vec<Scalar>& x0,
                                               const Vec<Scalar>& lo, const Vec<Scalar>& hi,
                                               int max_evals) {
  const index_t d = x0.size();
  auto clamp = [&](Vec<Scalar> v) {
    for (index_t k = 0; k < d; ++k) v[k] = std::min(std::max(v[k], lo[k]), hi[k]);
    return v;
  };
  int evals = 0;
  Vec<Scalar> best_x = clamp(x0);
  Scalar best_f = std::numeric_limits<Scalar>::infinity();
  auto eval = [&](const Vec<Scalar>& v) {
    ++evals;
    const Scalar fv = f(v);
    if (fv < best_f) {
      best_f = fv;
      best_x = v;
    }
    return fv;
  };

  std::vector<Vec<Scalar>> xs;
  std::vector<Scalar> fs;
  xs.push_back(clamp(x0));
  fs.push_back(eval(xs[0]));
  for (index_t k = 0; k < d; ++k) {
    Vec<Scalar> v = xs[0];
    const Scalar step = Scalar(0.5) * (hi[k] - lo[k]) / Scalar(8);
    v[k] = v[k] + step <= hi[k] ? v[k] + step : v[k] - step;
    xs.push_back(clamp(v));
    fs.push_back(eval(xs.back()));
  }

  std::vector<index_t> order(xs.size());
  std::iota(order.begin(), order.end(), index_t(0));
  auto sort_simplex = [&]() {
    std::sort(order.begin(), order.end(),
              [&](index_t a, index_t b) { return fs[a] < fs[b]; });
  };

  while (evals < max_evals) {
    sort_simplex();
    const index_t best = order.front();
    const index_t worst = order.back();
    const index_t second = order[order.size() - 2];

    Vec<Scalar> centroid = Vec<Scalar>::Zero(d);
    for (index_t id : order) {
      if (id != worst) centroid += xs[id];
    }
    centroid /= Scalar(d);

    const Vec<Scalar> xr = clamp(centroid + (centroid - xs[worst]));
    const Scalar fr = eval(xr);
    if (fr < fs[best]) {
      const Vec<Scalar> xe = clamp(centroid + Scalar(2) * (centroid - xs[worst]));
      const Scalar fe = evals < max_evals ? eval(xe) : fr;
      if (fe < fr) {
        xs[worst] = xe;
        fs[worst] = fe;
      } else {
        xs[worst] = xr;
        fs[worst] = fr;
      }
    } else if (fr < fs[second]) {
      xs[worst] = xr;
      fs[worst] = fr;
    } else {
      const Vec<Scalar> xc = clamp(centroid + Scalar(0.5) * (xs[worst] - centroid));
      const Scalar fc = evals < max_evals ? eval(xc) : fr;
      if (fc < fs[worst]) {
        xs[worst] = xc;
        fs[worst] = fc;
      } else {
        for (index_t id : order) {
          if (id == best) continue;
          xs[id] = clamp(xs[best] + Scalar(0.5) * (xs[id] - xs[best]));
          if (evals >= max_evals) break;
          fs[id] = eval(xs[id]);
        }
      }
    }
  }
  return {best_x, best_f};
}

}  // namespace detail

//! Fit hyperparameters and the predictive factorization.
template <class Scalar>
GpModel<Scalar> gp_fit(const Mat<Scalar>& X_in, const Vec<Scalar>& y_in,
                       const GpFitOptions<Scalar>& opts = {}) {
  const index_t n = X_in.rows();
  const index_t p = X_in.cols();
  if (n < 1 || p < 1) throw InputError("gp_fit: empty training set");
  if (y_in.size() != n) throw InputError("gp_fit: X/y row count mismatch");
  if (!all_finite(X_in) || !all_finite(y_in)) throw DataError("gp_fit: non-finite training data");
  if (opts.opt_budget < 1 || opts.multistarts < 1)
    throw InputError("gp_fit: budget and multistarts must be positive");
  if (opts.in_lo.size() != opts.in_hi.size())
    throw InputError("gp_fit: normalization bounds size mismatch");
  if (opts.in_lo.size() != 0 && opts.in_lo.size() != p)
    throw InputError("gp_fit: normalization bounds dimension mismatch");

  GpModel<Scalar> m;
  m.in_lo = opts.in_lo;
  m.in_hi = opts.in_hi;
  Mat<Scalar> Xn = X_in;
  if (m.in_lo.size() != 0) {
    for (index_t k = 0; k < p; ++k) {
      if (!(m.in_hi[k] > m.in_lo[k]))
        throw InputError("gp_fit: normalization bounds must satisfy hi > lo");
      Xn.col(k) = (Xn.col(k).array() - m.in_lo[k]) / (m.in_hi[k] - m.in_lo[k]);
    }
  }

  // Canonical row order makes the fit invariant to input permutation.
  std::vector<index_t> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), index_t(0));
  std::sort(perm.begin(), perm.end(), [&](index_t a, index_t b) {
    for (index_t c = 0; c < p; ++c) {
      if (Xn(a, c) != Xn(b, c)) return Xn(a, c) < Xn(b, c);
    }
    return y_in[a] < y_in[b];
  });
  m.X.resize(n, p);
  m.y.resize(n);
  for (index_t r = 0; r < n; ++r) {
    m.X.row(r) = Xn.row(perm[static_cast<std::size_t>(r)]);
    m.y[r] = y_in[perm[static_cast<std::size_t>(r)]];
  }

  if (n >= 2) {
    m.y_mean = m.y.mean();
    const Scalar var = (m.y.array() - m.y_mean).square().sum() / Scalar(n);
    using std::sqrt;
    m.y_scale = var > Scalar(0) ? sqrt(var) : Scalar(1);
  }
  const Vec<Scalar> ys = (m.y.array() - m.y_mean) / m.y_scale;

  const int d = opts.fix_noise ? 3 : 4;
  Vec<Scalar> lo(d), hi(d);
  using std::log;
  for (int k = 0; k < d; ++k) {
    lo[k] = Scalar(log(kGpBoxLo[k]));
    hi[k] = Scalar(log(kGpBoxHi[k]));
  }
  auto params_of = [&](const Vec<Scalar>& th) {
    RqParams<Scalar> q;
    using std::exp;
    q.sigma2 = exp(th[0]);
    q.ell = exp(th[1]);
    q.alpha = exp(th[2]);
    q.noise = opts.fix_noise ? opts.fixed_noise : exp(th[3]);
    return q;
  };
  auto objective = [&](const Vec<Scalar>& th) -> Scalar {
    const auto v = detail::try_lml(m.X, ys, params_of(th));
    return v ? -*v : Scalar(1e300);
  };

  const int per_start = std::max(opts.opt_budget / opts.multistarts, d + 2);
  Vec<Scalar> best_th = Scalar(0.5) * (lo + hi);
  Scalar best_f = Scalar(1e300);
  for (int s = 0; s < opts.multistarts; ++s) {
    Vec<Scalar> x0(d);
    if (s == 0) {
      x0 = Scalar(0.5) * (lo + hi);
    } else {
      std::mt19937_64 rng(child_seed(opts.seed, static_cast<std::uint64_t>(s)));
      for (int k = 0; k < d; ++k)
        x0[k] = lo[k] + Scalar(uniform01(rng)) * (hi[k] - lo[k]);
    }
    auto [th, fv] = detail::nelder_mead_min(objective, x0, lo, hi, per_start);
    if (fv < best_f) {
      best_f = fv;
      best_th = th;
    }
  }
  m.params = params_of(best_th);

  // Final factorization; escalate jitter tenfold from 1e-10 when the noise
  // level alone cannot make the system positive definite.
  Mat<Scalar> K = rq_kernel_matrix(m.X, m.params);
  K.diagonal().array() += m.params.noise;
  Eigen::LLT<Mat<Scalar>> llt(K);
  Scalar jit = 0;
  while (llt.info() != Eigen::Success) {
    const Scalar next = jit == Scalar(0) ? Scalar(1e-10) : jit * Scalar(10);
    if (next > Scalar(1e-4))
      throw ConditioningError("gp_fit: covariance not positive definite even at max jitter");
    K.diagonal().array() += next - jit;  // raise the total shift to `next`
    jit = next;
    llt.compute(K);
  }
  m.jitter = jit;
  m.chol_l = llt.matrixL();
  m.weights = llt.solve(ys);
  // Iterative refinement; with near-singular K the raw solve can lose 8+
  // digits, which shows up directly in training-point reproduction. Guarded
  // by the computable residual so a diverging step is never kept.
  Vec<Scalar> resid = ys - K * m.weights;
  for (int step = 0; step < 3; ++step) {
    const Scalar rn = resid.norm();
    if (!(rn > Scalar(0))) break;
    const Vec<Scalar> refined = m.weights + llt.solve(resid);
    const Vec<Scalar> next = ys - K * refined;
    if (!(next.norm() < rn)) break;
    m.weights = refined;
    resid = next;
  }
  {
    const Scalar logdet_half = m.chol_l.diagonal().array().log().sum();
    m.lml = Scalar(-0.5) * ys.dot(m.weights) - logdet_half -
            Scalar(0.5) * Scalar(n) * log(Scalar(2) * Scalar(EIGEN_PI));
  }
  return m;
}

//! Posterior mean and latent variance at a query point.
template <class Scalar>
GpPrediction<Scalar> gp_predict(const GpModel<Scalar>& m, const Vec<Scalar>& x_in) {
  if (x_in.size() != m.input_dim()) throw InputError("gp_predict: dimension mismatch");
  if (!all_finite(x_in)) throw InputError("gp_predict: non-finite query");
  Vec<Scalar> x = x_in;
  if (m.in_lo.size() != 0) {
    x = (x_in.array() - m.in_lo.array()) / (m.in_hi.array() - m.in_lo.array());
  }
  const index_t n = m.count();
  Vec<Scalar> k(n);
  using std::exp;
  using std::log1p;
  const Scalar s = Scalar(1) / (Scalar(2) * m.params.alpha * m.params.ell * m.params.ell);
  for (index_t r = 0; r < n; ++r) {
    const Scalar d2 = (m.X.row(r).transpose() - x).squaredNorm();
    k[r] = m.params.sigma2 * exp(-m.params.alpha * log1p(d2 * s));
  }
  const Scalar mean_std = k.dot(m.weights);
  const Vec<Scalar> v =
      m.chol_l.template triangularView<Eigen::Lower>().solve(k);
  Scalar var_std = m.params.sigma2 - v.squaredNorm();
  if (var_std < Scalar(0)) var_std = 0;
  return {m.y_mean + m.y_scale * mean_std, m.y_scale * m.y_scale * var_std};
}

}  // namespace curvirom
