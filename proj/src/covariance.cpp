#include "varfilt/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace varfilt {

namespace {

void check_dim(Eigen::Index a, Eigen::Index b) {
  if (a != b) throw std::invalid_argument("covariance: dimension mismatch");
}

// Sherman-Morrison state for a DiagPlusLowRank matrix: P^{-1} = D^{-1} -
// sum_k beta_k v_k v_k^T with v_k = A_{k-1}^{-1} u_k.
struct SmFactors {
  std::vector<double> beta;
  std::vector<Vec> v;
};

SmFactors sm_factorize(const DiagPlusLowRank& p) {
  SmFactors f;
  for (const auto& term : p.terms) {
    Vec v = term.u.cwiseQuotient(p.d);
    for (std::size_t j = 0; j < f.v.size(); ++j)
      v -= f.beta[j] * f.v[j] * f.v[j].dot(term.u);
    const double denom = 1.0 + term.c * term.u.dot(v);
    if (denom <= 0.0 && term.c < 0.0)
      throw singularity_error("rank-one downdate makes matrix singular");
    if (std::abs(denom) < 1e-300)
      throw singularity_error("rank-one update denominator vanished");
    f.beta.push_back(term.c / denom);
    f.v.push_back(std::move(v));
  }
  return f;
}

}  // namespace

Eigen::Index cov_dim(const Covariance& cov) {
  return std::visit([](const auto& p) { return p.dim(); }, cov);
}

Mat to_dense(const DiagCov& p) { return Mat(p.d.asDiagonal()); }

Mat to_dense(const DiagPlusLowRank& p) {
  Mat m = Mat(p.d.asDiagonal());
  for (const auto& term : p.terms) m += term.c * term.u * term.u.transpose();
  return m;
}

Mat to_dense(const DenseCov& p) { return p.m; }

Mat to_dense(const Covariance& p) {
  return std::visit([](const auto& c) { return to_dense(c); }, p);
}

Vec cov_diagonal(const Covariance& cov) {
  if (const auto* d = std::get_if<DiagCov>(&cov)) return d->d;
  if (const auto* p = std::get_if<DiagPlusLowRank>(&cov)) {
    Vec diag = p->d;
    for (const auto& term : p->terms)
      diag += term.c * term.u.cwiseProduct(term.u);
    return diag;
  }
  return std::get<DenseCov>(cov).m.diagonal();
}

Vec mat_vec(const DiagCov& p, const Vec& v) {
  check_dim(p.dim(), v.size());
  return p.d.cwiseProduct(v);
}

Vec mat_vec(const DiagPlusLowRank& p, const Vec& v) {
  check_dim(p.dim(), v.size());
  Vec out = p.d.cwiseProduct(v);
  for (const auto& term : p.terms) out += term.c * term.u.dot(v) * term.u;
  return out;
}

Vec mat_vec(const DenseCov& p, const Vec& v) {
  check_dim(p.dim(), v.size());
  return p.m * v;
}

Vec mat_vec(const Covariance& p, const Vec& v) {
  return std::visit([&](const auto& c) { return mat_vec(c, v); }, p);
}

double quad_form(const Covariance& p, const Vec& v) {
  return v.dot(mat_vec(p, v));
}

Vec solve(const DiagCov& p, const Vec& b) {
  check_dim(p.dim(), b.size());
  return b.cwiseQuotient(p.d);
}

Vec solve(const DiagPlusLowRank& p, const Vec& b) {
  check_dim(p.dim(), b.size());
  const SmFactors f = sm_factorize(p);
  Vec x = b.cwiseQuotient(p.d);
  for (std::size_t k = 0; k < f.v.size(); ++k)
    x -= f.beta[k] * f.v[k] * f.v[k].dot(b);
  return x;
}

Vec solve(const DenseCov& p, const Vec& b) {
  check_dim(p.dim(), b.size());
  Eigen::LLT<Mat> llt(p.m);
  if (llt.info() != Eigen::Success)
    throw singularity_error("dense covariance is not SPD");
  return llt.solve(b);
}

Vec solve(const Covariance& p, const Vec& b) {
  return std::visit([&](const auto& c) { return solve(c, b); }, p);
}

double logdet(const DiagCov& p) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.d.size(); ++i) {
    if (p.d[i] <= 0.0) throw singularity_error("non-positive diagonal");
    s += std::log(p.d[i]);
  }
  return s;
}

double logdet(const DiagPlusLowRank& p) {
  // det(A_k) = det(A_{k-1}) * (1 + c_k u_k^T A_{k-1}^{-1} u_k); the diagonal
  // core may carry negative entries mid-recursion, so track the sign of the
  // full product and reject only an overall non-positive determinant.
  double log_abs = 0.0;
  int sign = 1;
  for (Eigen::Index i = 0; i < p.d.size(); ++i) {
    if (p.d[i] == 0.0) throw singularity_error("zero diagonal entry");
    log_abs += std::log(std::abs(p.d[i]));
    if (p.d[i] < 0.0) sign = -sign;
  }
  SmFactors f;
  for (const auto& term : p.terms) {
    Vec v = term.u.cwiseQuotient(p.d);
    for (std::size_t j = 0; j < f.v.size(); ++j)
      v -= f.beta[j] * f.v[j] * f.v[j].dot(term.u);
    const double denom = 1.0 + term.c * term.u.dot(v);
    if (denom == 0.0) throw singularity_error("singular rank-one update");
    log_abs += std::log(std::abs(denom));
    if (denom < 0.0) sign = -sign;
    f.beta.push_back(term.c / denom);
    f.v.push_back(std::move(v));
  }
  if (sign <= 0) throw singularity_error("matrix has non-positive determinant");
  return log_abs;
}

double logdet(const DenseCov& p) {
  Eigen::LLT<Mat> llt(p.m);
  if (llt.info() != Eigen::Success)
    throw singularity_error("dense covariance is not SPD");
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.dim(); ++i)
    s += 2.0 * std::log(llt.matrixL()(i, i));
  return s;
}

double logdet(const Covariance& p) {
  return std::visit([](const auto& c) { return logdet(c); }, p);
}

Vec inverse_diagonal(const Covariance& p) {
  if (const auto* d = std::get_if<DiagCov>(&p)) return d->d.cwiseInverse();
  if (const auto* s = std::get_if<DiagPlusLowRank>(&p)) {
    const SmFactors f = sm_factorize(*s);
    Vec diag = s->d.cwiseInverse();
    for (std::size_t k = 0; k < f.v.size(); ++k)
      diag -= f.beta[k] * f.v[k].cwiseProduct(f.v[k]);
    return diag;
  }
  const auto& dense = std::get<DenseCov>(p);
  Eigen::LLT<Mat> llt(dense.m);
  if (llt.info() != Eigen::Success)
    throw singularity_error("dense covariance is not SPD");
  return llt.solve(Mat::Identity(dense.dim(), dense.dim())).diagonal();
}

Vec kf_gain(const Covariance& prior, const Vec& x, double meas_var) {
  if (meas_var <= 0.0)
    throw std::invalid_argument("measurement variance must be positive");
  const Vec px = mat_vec(prior, x);
  return px / (x.dot(px) + meas_var);
}

KfResult kf_update(const Covariance& prior, const Vec& x, double meas_var) {
  if (meas_var <= 0.0)
    throw std::invalid_argument("measurement variance must be positive");
  const Vec px = mat_vec(prior, x);
  const double s = x.dot(px) + meas_var;
  KfResult out;
  out.gain = px / s;

  if (px.squaredNorm() == 0.0) {
    out.posterior = prior;  // uninformative observation
    return out;
  }
  if (const auto* d = std::get_if<DiagCov>(&prior)) {
    DiagPlusLowRank post;
    post.d = d->d;
    post.terms.push_back({-1.0 / s, px});
    out.posterior = std::move(post);
  } else if (const auto* p = std::get_if<DiagPlusLowRank>(&prior)) {
    if (static_cast<int>(p->terms.size()) >= DiagPlusLowRank::kMaxRank)
      throw capacity_error("rank budget exceeded; project before updating");
    DiagPlusLowRank post = *p;
    post.terms.push_back({-1.0 / s, px});
    out.posterior = std::move(post);
  } else {
    const auto& dense = std::get<DenseCov>(prior);
    out.posterior = DenseCov{dense.m - px * px.transpose() / s};
  }
  return out;
}

namespace {

struct SecularPole {
  double d;
  double w;       // merged sum of u_i^2
  int multiplicity;
};

double secular_f(double lambda, double c, const std::vector<SecularPole>& poles) {
  double s = 0.0;
  for (const auto& p : poles) s += p.w / (p.d - lambda);
  return 1.0 + c * s;
}

// Root of the secular function on the open interval (lo, hi); `increasing`
// gives the sign pattern (f < 0 left of the root when increasing).
double secular_bisect(double lo, double hi, double c,
                      const std::vector<SecularPole>& poles, bool increasing,
                      double tol) {
  for (int iter = 0; iter < 200 && hi - lo > tol; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double f = secular_f(mid, c, poles);
    const bool go_right = increasing ? (f < 0.0) : (f > 0.0);
    (go_right ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double min_eig_diag_plus_rank1(const Vec& d, double c, const Vec& u) {
  check_dim(d.size(), u.size());
  if (d.size() == 0) throw std::invalid_argument("empty matrix");

  double inactive_min = std::numeric_limits<double>::infinity();
  std::vector<SecularPole> poles;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (u[i] == 0.0) {
      inactive_min = std::min(inactive_min, d[i]);
    } else {
      poles.push_back({d[i], u[i] * u[i], 1});
    }
  }
  if (c == 0.0 || poles.empty()) return d.minCoeff();

  std::sort(poles.begin(), poles.end(),
            [](const SecularPole& a, const SecularPole& b) { return a.d < b.d; });
  std::vector<SecularPole> merged;
  for (const auto& p : poles) {
    if (!merged.empty() && merged.back().d == p.d) {
      merged.back().w += p.w;
      merged.back().multiplicity += 1;
    } else {
      merged.push_back(p);
    }
  }

  double total_w = 0.0;
  double scale = 0.0;
  for (const auto& p : merged) {
    total_w += p.w;
    scale = std::max(scale, std::abs(p.d));
  }
  scale = std::max({scale, std::abs(c) * total_w, 1e-30});
  const double tol = 1e-12 * scale;

  const SecularPole& first = merged.front();
  double active_min;
  if (c > 0.0) {
    if (first.multiplicity > 1) {
      // The smallest pole survives as an eigenvalue and lies below every root.
      active_min = first.d;
    } else {
      const double hi = merged.size() > 1 ? merged[1].d : first.d + c * total_w;
      active_min = secular_bisect(first.d, hi, c, merged, /*increasing=*/true, tol);
    }
  } else {
    double lo = first.d - std::abs(c) * total_w - tol;
    while (secular_f(lo, c, merged) <= 0.0) lo -= std::max(scale, tol);
    active_min = secular_bisect(lo, first.d, c, merged, /*increasing=*/false, tol);
  }
  return std::min(active_min, inactive_min);
}

double sandwich_violation(const DiagCov& prev, const Vec& x, double meas_var,
                          const DiagCov& cand) {
  check_dim(prev.dim(), cand.dim());
  check_dim(prev.dim(), x.size());
  for (Eigen::Index i = 0; i < prev.dim(); ++i) {
    if (cand.d[i] > prev.d[i])
      throw std::invalid_argument("candidate exceeds previous covariance");
  }
  // cand - P_kf = diag(cand - prev) + (P x)(P x)^T / s
  const Vec px = prev.d.cwiseProduct(x);
  const double s = x.dot(px) + meas_var;
  return min_eig_diag_plus_rank1(cand.d - prev.d, 1.0 / s, px);
}

}  // namespace varfilt
