#include "varfilt/filters.hpp"

#include <cmath>

#include "varfilt/divergence.hpp"
#include "varfilt/golden.hpp"

namespace varfilt {

namespace {

constexpr double kTinyCore = 1e-300;

// Solution of (diag(a) + x x^T / R) z = x / R via Sherman-Morrison on the
// diagonal core. Entries of a may be negative or nearly zero inside the
// feasible gamma range; the cancellation in z = w / (R + x'w) keeps the
// result finite.
Vec hinf_gain_only(const DiagCov& prior_d, const Vec& x, double meas_var,
                   double gamma) {
  Vec w(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double a = 1.0 / prior_d.d[i] - gamma;
    if (std::abs(a) < kTinyCore) a = a < 0.0 ? -kTinyCore : kTinyCore;
    w[i] = x[i] / a;
  }
  return w / (meas_var + x.dot(w));
}

Covariance projected_posterior(FilterKind kind, const Covariance& post) {
  if (kind == FilterKind::VIEP || kind == FilterKind::VIHinf)
    return ep_project(post);
  return l2_project(post, ep_project(post)).d;
}

}  // namespace

FilterKind filter_kind_from_name(const std::string& name) {
  if (name == "kf") return FilterKind::KalmanDense;
  if (name == "viep") return FilterKind::VIEP;
  if (name == "l2") return FilterKind::L2;
  if (name == "vih") return FilterKind::VIHinf;
  if (name == "l2h") return FilterKind::L2Hinf;
  throw std::invalid_argument("unknown filter name: " + name);
}

std::string filter_kind_name(FilterKind kind) {
  switch (kind) {
    case FilterKind::KalmanDense: return "kf";
    case FilterKind::VIEP: return "viep";
    case FilterKind::L2: return "l2";
    case FilterKind::VIHinf: return "vih";
    case FilterKind::L2Hinf: return "l2h";
  }
  throw std::invalid_argument("invalid filter kind");
}

double gamma_max(const DiagCov& prior_d, const Vec& x, double meas_var) {
  if (meas_var <= 0.0)
    throw std::invalid_argument("measurement variance must be positive");
  return min_eig_diag_plus_rank1(prior_d.d.cwiseInverse(), 1.0 / meas_var, x);
}

HinfGainResult hinf_gain(const DiagCov& prior_d, const Vec& x, double meas_var,
                         double gamma) {
  if (prior_d.dim() != x.size())
    throw std::invalid_argument("hinf_gain: dimension mismatch");
  if (gamma != 0.0 && gamma >= gamma_max(prior_d, x, meas_var))
    throw feasibility_error("gamma violates the positivity condition");

  Vec a(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    a[i] = 1.0 / prior_d.d[i] - gamma;
    if (std::abs(a[i]) < kTinyCore) a[i] = a[i] < 0.0 ? -kTinyCore : kTinyCore;
  }
  const Vec w = x.cwiseQuotient(a);
  const double denom = meas_var + x.dot(w);

  HinfGainResult out;
  out.posterior.d = a.cwiseInverse();
  if (w.squaredNorm() > 0.0) out.posterior.terms.push_back({-1.0 / denom, w});
  out.gain = w / denom;
  return out;
}

double optimize_gamma(const DiagCov& p_lr, const DiagPlusLowRank& p_kf,
                      const Vec& x_next, double meas_var,
                      const HinfConfig& cfg) {
  const Vec k_ref = kf_gain(Covariance{p_kf}, x_next, meas_var);
  // Beyond 1/max(d) the corrected precision diag(1/d) - gamma I turns
  // indefinite; the gain there can flip signs and match almost any
  // reference, which destabilizes the filter. Search only the contiguous
  // feasible region around zero where every inflated variance stays
  // positive.
  const double hi =
      (1.0 - cfg.gamma_eps) *
      std::min(gamma_max(p_lr, x_next, meas_var), 1.0 / p_lr.d.maxCoeff());
  const auto objective = [&](double gamma) {
    return (hinf_gain_only(p_lr, x_next, meas_var, gamma) - k_ref).norm();
  };

  // Coarse scan to bracket the global minimum; the gain mismatch is smooth
  // over the feasible interval but not guaranteed unimodal.
  constexpr int kScanPoints = 64;
  int best_idx = 0;
  double best_f = objective(0.0);
  for (int i = 1; i <= kScanPoints; ++i) {
    const double g = hi * static_cast<double>(i) / kScanPoints;
    const double f = objective(g);
    if (f < best_f) {
      best_f = f;
      best_idx = i;
    }
  }
  const double cell = hi / kScanPoints;
  const double lo_br = std::max(0.0, (best_idx - 1) * cell);
  const double hi_br = std::min(hi, (best_idx + 1) * cell);
  auto [gamma_star, f_star] = golden_section(objective, lo_br, hi_br, 1e-8);
  // Boundary minima allowed; prefer gamma = 0 when it is not beaten.
  if (objective(0.0) <= f_star) return 0.0;
  return gamma_star;
}

FilterState make_filter(FilterKind kind, const ProblemSpec& spec) {
  spec.validate();
  FilterState state;
  state.kind = kind;
  state.mean = spec.prior_mean;
  if (kind == FilterKind::KalmanDense) {
    state.cov = DenseCov{spec.prior_var * Mat::Identity(spec.n, spec.n)};
  } else {
    state.cov = DiagCov{Vec::Constant(spec.n, spec.prior_var)};
  }
  return state;
}

namespace {

FilterState plain_projected_step(const FilterState& state,
                                 const Observation& obs, double meas_var) {
  const KfResult kf = kf_update(state.cov, obs.x, meas_var);
  FilterState next = state;
  next.mean = state.mean + kf.gain * (obs.y - obs.x.dot(state.mean));
  next.cov = state.kind == FilterKind::KalmanDense
                 ? kf.posterior
                 : projected_posterior(state.kind, kf.posterior);
  next.step = state.step + 1;
  return next;
}

// The robust variants defer the gamma choice until the next observation
// arrives: the stored diagonal posterior is replaced by the corrected
// P (I - gamma P + x_c R^-1 x_c' P)^-1 with the matched gamma*, and the
// arriving observation is then assimilated from that prior. Corrections
// whose inflation is within floating-point noise of the identity are
// skipped, so a collapsed gamma bracket degenerates exactly to the plain
// projected filter.
FilterState augmented_step(const FilterState& state, const Observation& obs,
                           double meas_var, const HinfConfig& cfg) {
  FilterState next = state;

  Covariance prior = state.cov;
  if (state.pending) {
    const PendingCorrection& pend = *state.pending;
    const double gamma =
        optimize_gamma(pend.p_lr, pend.p_kf, obs.x, meas_var, cfg);
    next.gamma_trace.push_back(gamma);
    if (gamma * pend.p_lr.d.maxCoeff() > 1e-9) {
      // The gamma bracket stays below 1/max(d) <= gamma_max(p_lr, x) for
      // every x, so the correction is feasible at either input choice.
      if (cfg.diagonalize_posterior) {
        // Diagonalized correction keeps only the core inflation
        // d -> d / (1 - gamma d): combined with the Kalman update below,
        // the posterior is exactly the H-infinity recursion
        // (diag(1/d) - gamma I + x x'/R)^-1 with the observation counted
        // once. Re-applying the correction's rank-one term here would
        // shrink variances along an already-assimilated direction, which
        // compounds into severe overconfidence.
        Vec inflated(pend.p_lr.d.size());
        for (Eigen::Index i = 0; i < inflated.size(); ++i)
          inflated[i] = pend.p_lr.d[i] / (1.0 - gamma * pend.p_lr.d[i]);
        prior = DiagCov{inflated};
      } else {
        // Diagnostic mode: carry the printed correction verbatim, rank-one
        // term included, with either the stored or the arriving input.
        const Vec& x_corr = cfg.corr_x_choice == CorrInputChoice::Literal_xt
                                ? pend.x_prev
                                : obs.x;
        prior = hinf_gain(pend.p_lr, x_corr, meas_var, gamma).posterior;
      }
    }
  }

  const KfResult kf = kf_update(prior, obs.x, meas_var);
  next.mean = state.mean + kf.gain * (obs.y - obs.x.dot(state.mean));

  const DiagCov projected =
      std::get<DiagCov>(projected_posterior(state.kind, kf.posterior));
  next.cov = projected;

  DiagPlusLowRank p_kf_store;
  if (const auto* p = std::get_if<DiagPlusLowRank>(&kf.posterior)) {
    p_kf_store = *p;
  } else if (const auto* d = std::get_if<DiagCov>(&kf.posterior)) {
    p_kf_store.d = d->d;  // uninformative observation left the prior diagonal
  } else {
    throw std::logic_error("augmented step produced a dense posterior");
  }
  next.pending = PendingCorrection{projected, std::move(p_kf_store), obs.x};
  next.step = state.step + 1;
  return next;
}

}  // namespace

FilterState assimilate(const FilterState& state, const Observation& obs,
                       double meas_var, const HinfConfig& cfg) {
  if (obs.x.size() != state.mean.size())
    throw std::invalid_argument("assimilate: dimension mismatch");
  switch (state.kind) {
    case FilterKind::KalmanDense:
    case FilterKind::VIEP:
    case FilterKind::L2:
      return plain_projected_step(state, obs, meas_var);
    case FilterKind::VIHinf:
    case FilterKind::L2Hinf:
      return augmented_step(state, obs, meas_var, cfg);
  }
  throw std::invalid_argument("invalid filter kind");
}

}  // namespace varfilt
