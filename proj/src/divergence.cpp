#include "varfilt/divergence.hpp"

#include <algorithm>
#include <cmath>

#include "varfilt/rng.hpp"

namespace varfilt {

namespace {

void check_positive(const Vec& d) {
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d[i] <= 0.0) throw std::invalid_argument("d must be positive");
}

double trace_qinv_p(const Covariance& sigma_q, const Covariance& sigma_p) {
  if (const auto* dq = std::get_if<DiagCov>(&sigma_q))
    return cov_diagonal(sigma_p).cwiseQuotient(dq->d).sum();
  const Mat dense_p = to_dense(sigma_p);
  const Mat dense_q = to_dense(sigma_q);
  Eigen::LLT<Mat> llt(dense_q);
  if (llt.info() != Eigen::Success)
    throw singularity_error("covariance is not SPD");
  return llt.solve(dense_p).trace();
}

// sum_l (Sigma_p)_il^2 / d_l for every i; the gradient kernel of tr(M^2).
Vec row_weighted_sq(const Covariance& sigma_p, const Vec& d) {
  const Eigen::Index n = d.size();
  if (const auto* diag = std::get_if<DiagCov>(&sigma_p))
    return diag->d.cwiseProduct(diag->d).cwiseQuotient(d);
  if (const auto* p = std::get_if<DiagPlusLowRank>(&sigma_p)) {
    const std::size_t k = p->terms.size();
    // W_km = sum_l u_k,l u_m,l / d_l
    Mat w = Mat::Zero(k, k);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b)
        w(a, b) = p->terms[a].u.cwiseProduct(p->terms[b].u).cwiseQuotient(d).sum();
    Vec s_diag = Vec::Zero(n);
    for (const auto& term : p->terms)
      s_diag += term.c * term.u.cwiseProduct(term.u);
    Vec g = p->d.cwiseProduct(p->d).cwiseQuotient(d) +
            2.0 * p->d.cwiseProduct(s_diag).cwiseQuotient(d);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b)
        g += p->terms[a].c * p->terms[b].c * w(a, b) *
             p->terms[a].u.cwiseProduct(p->terms[b].u);
    return g;
  }
  const Mat& m = std::get<DenseCov>(sigma_p).m;
  Vec g(n);
  for (Eigen::Index i = 0; i < n; ++i)
    g[i] = m.row(i).transpose().cwiseProduct(m.row(i).transpose()).cwiseQuotient(d).sum();
  return g;
}

double trace_m2(const Covariance& sigma_p, const Vec& d) {
  // tr(M^2) = sum_ij (Sigma_p)_ij^2 / (d_i d_j)
  return row_weighted_sq(sigma_p, d).cwiseQuotient(d).sum();
}

double l2_from_workspace(const L2Workspace& w, Eigen::Index n) {
  const double a = w.trace_m - w.logdet_m - static_cast<double>(n);
  return 0.5 * static_cast<double>(n) - w.trace_m + 0.5 * w.trace_m2 +
         0.25 * a * a;
}

}  // namespace

double kl_gaussian(const GaussianDist& p, const GaussianDist& q) {
  const Eigen::Index n = p.mean.size();
  if (q.mean.size() != n || cov_dim(p.cov) != n || cov_dim(q.cov) != n)
    throw std::invalid_argument("kl_gaussian: dimension mismatch");
  const Vec diff = p.mean - q.mean;
  return 0.5 * (trace_qinv_p(q.cov, p.cov) - static_cast<double>(n) +
                diff.dot(solve(q.cov, diff)) + logdet(q.cov) - logdet(p.cov));
}

DiagCov ep_project(const Covariance& post_cov) {
  return DiagCov{cov_diagonal(post_cov)};
}

DiagCov elbo_project(const Covariance& post_cov) {
  return DiagCov{inverse_diagonal(post_cov).cwiseInverse()};
}

L2Workspace l2_workspace(const Covariance& sigma_p, const DiagCov& d) {
  if (cov_dim(sigma_p) != d.dim())
    throw std::invalid_argument("l2_workspace: dimension mismatch");
  check_positive(d.d);
  L2Workspace w;
  w.trace_m = cov_diagonal(sigma_p).cwiseQuotient(d.d).sum();
  w.trace_m2 = trace_m2(sigma_p, d.d);
  w.logdet_m = logdet(sigma_p) - d.d.array().log().sum();
  return w;
}

double l2_objective(const Covariance& sigma_p, const DiagCov& d) {
  return l2_from_workspace(l2_workspace(sigma_p, d), d.dim());
}

Vec l2_gradient(const Covariance& sigma_p, const DiagCov& d) {
  if (cov_dim(sigma_p) != d.dim())
    throw std::invalid_argument("l2_gradient: dimension mismatch");
  check_positive(d.d);
  const L2Workspace w = l2_workspace(sigma_p, d);
  const double a = w.trace_m - w.logdet_m - static_cast<double>(d.dim());
  const Vec p_diag = cov_diagonal(sigma_p);
  const Vec g = row_weighted_sq(sigma_p, d.d);
  const Vec d2 = d.d.cwiseProduct(d.d);
  // dF/dd_i = -dt1 + dt2/2 + (a/2)(dt1 - dlogdet)
  //   with dt1 = -p_ii/d_i^2, dt2 = -2 g_i/d_i^2, dlogdet = -1/d_i.
  return p_diag.cwiseQuotient(d2) - g.cwiseQuotient(d2) +
         0.5 * a * (d.d.cwiseInverse() - p_diag.cwiseQuotient(d2));
}

L2ProjectResult l2_project(const Covariance& sigma_p, const DiagCov& d0,
                           const L2ProjectOptions& opts) {
  check_positive(d0.d);
  const Eigen::Index n = d0.dim();
  const double tol = opts.tol >= 0.0 ? opts.tol : 1e-8 * static_cast<double>(n);

  Vec z = d0.d.array().log();
  Vec d = d0.d;
  double f = l2_objective(sigma_p, DiagCov{d});
  double step = 1.0;

  L2ProjectResult best{DiagCov{d}, f, false, 0};
  for (int it = 0; it < opts.max_iters; ++it) {
    const Vec grad_d = l2_gradient(sigma_p, DiagCov{d});
    if (grad_d.lpNorm<Eigen::Infinity>() < tol) {
      best = {DiagCov{d}, f, true, it};
      return best;
    }
    const Vec grad_z = grad_d.cwiseProduct(d);  // chain rule through d = e^z
    const double gg = grad_z.squaredNorm();

    step = std::min(step * 2.0, 1.0);
    bool accepted = false;
    while (step > 1e-18) {
      const Vec z_try = z - step * grad_z;
      const Vec d_try = z_try.array().exp();
      const double f_try = l2_objective(sigma_p, DiagCov{d_try});
      if (f_try <= f - opts.armijo_c * step * gg) {
        z = z_try;
        d = d_try;
        f = f_try;
        accepted = true;
        break;
      }
      step *= opts.shrink;
    }
    if (!accepted) break;  // stalled at machine precision
  }
  if (f <= best.objective) best = {DiagCov{d}, f, false, opts.max_iters};
  return best;
}

McEstimate lr_mc_oracle(const GaussianDist& p, const GaussianDist& q, double r,
                        int samples, std::uint64_t seed) {
  if (samples < 2) throw std::invalid_argument("need at least 2 samples");
  if (r < 1.0) throw std::invalid_argument("exponent must be >= 1");
  const Eigen::Index n = p.mean.size();
  if (q.mean.size() != n || cov_dim(p.cov) != n || cov_dim(q.cov) != n)
    throw std::invalid_argument("lr_mc_oracle: dimension mismatch");

  const Mat sp = to_dense(p.cov);
  const Mat sq = to_dense(q.cov);
  Eigen::LLT<Mat> llt_p(sp), llt_q(sq);
  if (llt_p.info() != Eigen::Success || llt_q.info() != Eigen::Success)
    throw singularity_error("covariance is not SPD");
  const Mat chol_p = llt_p.matrixL();
  const double ld_p = logdet(Covariance{DenseCov{sp}});
  const double ld_q = logdet(Covariance{DenseCov{sq}});

  Rng rng(Rng::derive_key(seed, 77));
  double sum = 0.0, sum_sq = 0.0;
  Vec z(n);
  for (int s = 0; s < samples; ++s) {
    for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.next_normal();
    const Vec theta = p.mean + chol_p * z;
    const double qf_p = z.squaredNorm();  // (theta - mu_p)' Sp^-1 (theta - mu_p)
    const Vec dq = theta - q.mean;
    const double qf_q = dq.dot(llt_q.solve(dq));
    const double log_ratio = -0.5 * (qf_p - qf_q + ld_p - ld_q);
    const double v = std::pow(std::abs(log_ratio), r);
    sum += v;
    sum_sq += v * v;
  }
  McEstimate out;
  const double ns = static_cast<double>(samples);
  out.estimate = sum / ns;
  const double var = std::max(0.0, sum_sq / ns - out.estimate * out.estimate);
  out.std_err = std::sqrt(var / ns);
  return out;
}

}  // namespace varfilt
