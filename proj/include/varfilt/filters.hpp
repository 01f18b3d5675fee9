#pragma once

#include <optional>
#include <string>
#include <vector>

#include "varfilt/covariance.hpp"
#include "varfilt/model.hpp"

namespace varfilt {

enum class FilterKind { KalmanDense, VIEP, L2, VIHinf, L2Hinf };

FilterKind filter_kind_from_name(const std::string& name);
std::string filter_kind_name(FilterKind kind);

enum class CorrInputChoice {
  Literal_xt,  // correction uses the stored x_t, as printed
  Next_xt1,    // correction uses the newly arrived x_{t+1}
};

struct HinfConfig {
  double gamma_eps = 1e-3;  // feasibility margin, gamma <= (1-eps)*gamma_max
  CorrInputChoice corr_x_choice = CorrInputChoice::Literal_xt;
  bool diagonalize_posterior = true;
  // Robustness weight S is fixed to the identity.
};

struct HinfGainResult {
  Vec gain;
  DiagPlusLowRank posterior;
};

/// H-infinity covariance and gain at robustness level gamma:
///   post = (diag(1/d) - gamma I + x x^T / R)^{-1},  K = post x / R.
/// gamma = 0 reduces exactly to the Kalman update.
HinfGainResult hinf_gain(const DiagCov& prior_d, const Vec& x, double meas_var,
                         double gamma);

/// Supremum of feasible gamma: lambda_min(diag(1/d) + x x^T / R). Any
/// gamma strictly below keeps the corrected precision positive definite.
double gamma_max(const DiagCov& prior_d, const Vec& x, double meas_var);

/// Gain-matching: gamma* minimizing |K_hinf(gamma) - K_kf| over the bracket
/// [0, (1 - gamma_eps) * min(gamma_max, 1/max(d))], where K_kf is the exact
/// Kalman gain from p_kf at x_next. The upper cap keeps every inflated
/// variance d_i / (1 - gamma d_i) positive.
double optimize_gamma(const DiagCov& p_lr, const DiagPlusLowRank& p_kf,
                      const Vec& x_next, double meas_var,
                      const HinfConfig& cfg = {});

/// Working set carried between steps by the H-infinity variants.
struct PendingCorrection {
  DiagCov p_lr;          // projected diagonal posterior at the last step
  DiagPlusLowRank p_kf;  // one-step-exact posterior from the same prior
  Vec x_prev;
};

struct FilterState {
  FilterKind kind = FilterKind::KalmanDense;
  Vec mean;
  Covariance cov;
  std::optional<PendingCorrection> pending;
  int step = 0;
  std::vector<double> gamma_trace;  // chosen gamma* per correction
};

/// Fresh state at the problem's prior N(prior_mean, prior_var I).
FilterState make_filter(FilterKind kind, const ProblemSpec& spec);

/// One assimilation step; pure state-in/state-out.
FilterState assimilate(const FilterState& state, const Observation& obs,
                       double meas_var, const HinfConfig& cfg = {});

}  // namespace varfilt
