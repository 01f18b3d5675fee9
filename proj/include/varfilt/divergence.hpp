#pragma once

#include <cstdint>

#include "varfilt/covariance.hpp"

namespace varfilt {

struct GaussianDist {
  Vec mean;
  Covariance cov;
};

/// The three scalars of the closed-form L^2 objective, with
/// M = diag(d)^{-1} Sigma_p. Computed with O(n) identities when Sigma_p is
/// diagonal plus low rank.
struct L2Workspace {
  double trace_m = 0.0;
  double trace_m2 = 0.0;
  double logdet_m = 0.0;
};

/// 1/2 (tr(Sq^-1 Sp) - n + |mu_p - mu_q|^2_{Sq^-1} + log |Sq|/|Sp|).
double kl_gaussian(const GaussianDist& p, const GaussianDist& q);

/// Forward-KL (EP) optimal diagonal: the diagonal of the posterior.
DiagCov ep_project(const Covariance& post_cov);

/// Reverse-KL (ELBO) optimal diagonal: d_i = 1 / (P^-1)_ii.
DiagCov elbo_project(const Covariance& post_cov);

L2Workspace l2_workspace(const Covariance& sigma_p, const DiagCov& d);

/// Closed-form squared L^2 information pseudometric between N(mu, Sigma_p)
/// and N(mu, diag(d)):
///   n/2 - tr(M) + tr(M^2)/2 + (tr M - log|M| - n)^2 / 4.
double l2_objective(const Covariance& sigma_p, const DiagCov& d);

/// Analytic gradient of l2_objective with respect to d, component-wise.
Vec l2_gradient(const Covariance& sigma_p, const DiagCov& d);

struct L2ProjectResult {
  DiagCov d;
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct L2ProjectOptions {
  double tol = -1.0;      // gradient inf-norm threshold; < 0 means 1e-8 * n
  int max_iters = 500;
  double armijo_c = 1e-4;
  double shrink = 0.5;
};

/// Minimizes l2_objective over positive d by gradient descent on log d with
/// backtracking line search, starting from d0 (callers usually pass the EP
/// diagonal). Non-convergence returns the best iterate with the flag unset.
L2ProjectResult l2_project(const Covariance& sigma_p, const DiagCov& d0,
                           const L2ProjectOptions& opts = {});

struct McEstimate {
  double estimate = 0.0;
  double std_err = 0.0;
};

/// Monte Carlo estimate of E_p |log p/q|^r, the r-th power of the L^r
/// information pseudometric. Test oracle only; samples theta from p densely.
McEstimate lr_mc_oracle(const GaussianDist& p, const GaussianDist& q, double r,
                        int samples, std::uint64_t seed);

}  // namespace varfilt
