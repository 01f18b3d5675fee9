#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <variant>
#include <vector>

namespace varfilt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct singularity_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct capacity_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct feasibility_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Diagonal covariance diag(d), d_i > 0.
struct DiagCov {
  Vec d;

  Eigen::Index dim() const { return d.size(); }
};

struct LowRankTerm {
  double c = 0.0;  // signed weight; c < 0 for Kalman downdates
  Vec u;
};

/// D + sum_k c_k u_k u_k^T with at most kMaxRank terms. The represented
/// matrix must be SPD; individual diagonal entries may go negative in
/// intermediate H-infinity corrections, so SPD is checked in tests rather
/// than on construction.
struct DiagPlusLowRank {
  static constexpr int kMaxRank = 2;

  Vec d;
  std::vector<LowRankTerm> terms;

  Eigen::Index dim() const { return d.size(); }
};

/// Full symmetric matrix. Kalman baseline and universal test oracle;
/// quadratic in memory by design.
struct DenseCov {
  Mat m;

  Eigen::Index dim() const { return m.rows(); }
};

using Covariance = std::variant<DiagCov, DiagPlusLowRank, DenseCov>;

Eigen::Index cov_dim(const Covariance& cov);

Mat to_dense(const DiagCov& p);
Mat to_dense(const DiagPlusLowRank& p);
Mat to_dense(const DenseCov& p);
Mat to_dense(const Covariance& p);

/// Diagonal of the represented matrix, O(n) for structured forms.
Vec cov_diagonal(const Covariance& cov);

/// P v in O(n * rank) for structured P.
Vec mat_vec(const DiagCov& p, const Vec& v);
Vec mat_vec(const DiagPlusLowRank& p, const Vec& v);
Vec mat_vec(const DenseCov& p, const Vec& v);
Vec mat_vec(const Covariance& p, const Vec& v);

/// v^T P v.
double quad_form(const Covariance& p, const Vec& v);

/// P^{-1} b via iterated Sherman-Morrison over the low-rank terms.
Vec solve(const DiagCov& p, const Vec& b);
Vec solve(const DiagPlusLowRank& p, const Vec& b);
Vec solve(const DenseCov& p, const Vec& b);
Vec solve(const Covariance& p, const Vec& b);

/// log det P via the matrix determinant lemma.
double logdet(const DiagCov& p);
double logdet(const DiagPlusLowRank& p);
double logdet(const DenseCov& p);
double logdet(const Covariance& p);

/// Diagonal of P^{-1}, O(n * rank) for structured P.
Vec inverse_diagonal(const Covariance& p);

struct KfResult {
  Vec gain;
  Covariance posterior;
};

/// Scalar-observation Kalman gain K = P x / (x^T P x + R).
Vec kf_gain(const Covariance& prior, const Vec& x, double meas_var);

/// Rank-one Kalman covariance update
///   posterior = P - (P x)(P x)^T / (x^T P x + R).
/// A structured prior of rank k yields rank k + 1 (throws capacity_error
/// past kMaxRank); a dense prior stays dense.
KfResult kf_update(const Covariance& prior, const Vec& x, double meas_var);

/// Smallest eigenvalue of diag(d) + c u u^T by bisection on the secular
/// equation 1 + c sum_i u_i^2 / (d_i - lambda) = 0. Works for any real d;
/// components with u_i = 0 are handled exactly.
double min_eig_diag_plus_rank1(const Vec& d, double c, const Vec& u);

/// lambda_min(cand - P_kf) where P_kf = kf_update(prev, x, R). Requires
/// cand <= prev component-wise; a strictly negative return certifies that
/// the candidate violates the P_kf <= P sandwich bound.
double sandwich_violation(const DiagCov& prev, const Vec& x, double meas_var,
                          const DiagCov& cand);

}  // namespace varfilt
