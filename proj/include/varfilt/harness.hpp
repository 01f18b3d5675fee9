#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "varfilt/filters.hpp"
#include "varfilt/model.hpp"

namespace varfilt {

struct RunMetrics {
  double final_mse = 0.0;
  double final_wcse = 0.0;
  std::vector<double> per_step_wcse;   // length T
  std::vector<double> gamma_trace;     // H-infinity kinds only
  double runtime_ms = 0.0;
};

struct SweepRecord {
  int dim = 0;
  FilterKind filter = FilterKind::KalmanDense;
  int problems = 0;
  int steps = 0;
  std::uint64_t seed = 0;
  double mse_mean = 0.0, mse_lo = 0.0, mse_hi = 0.0;
  double wcse_mean = 0.0, wcse_lo = 0.0, wcse_hi = 0.0;
};

/// (1/n) |estimate - truth|^2.
double mse(const Vec& estimate, const Vec& truth);

/// max_i |estimate_i - truth_i| / sqrt(var_diag_i).
double wcse(const Vec& estimate, const Vec& truth, const Vec& var_diag);

/// Assimilates all spec.horizon observations in order, recording the
/// worst-case scaled error against the filter's own variance estimates.
RunMetrics run_filter(const ProblemSpec& spec, const GroundTruth& truth,
                      FilterKind kind, const HinfConfig& cfg = {});

/// Per (dim, kind): `problems` independent seeded problems, every filter
/// seeing identical data, aggregated into means and 93% empirical-quantile
/// intervals (3.5% / 96.5%). Deterministic for any worker count; worker
/// count capped by the VARFILT_THREADS environment variable.
std::vector<SweepRecord> sweep(const std::vector<int>& dims, int problems,
                               int steps, const std::vector<FilterKind>& kinds,
                               std::uint64_t master_seed,
                               const HinfConfig& cfg = {});

/// H-infinity cost diagnostic with S = I and the process-noise term dropped:
///   sum_t |theta - est_t|^2 / (|theta - est_0|^2 / P0 + sum_t eta_t^2 / R).
double hinf_cost(const std::vector<Vec>& estimates, const GroundTruth& truth,
                 const ProblemSpec& spec);

/// `count` points on the `level` confidence ellipse of a 2-D Gaussian.
std::vector<Eigen::Vector2d> ellipse_points(const Vec& mean, const Mat& cov,
                                            double level, int count);

std::string sweep_to_csv(const std::vector<SweepRecord>& records);
std::string sweep_to_svg(const std::vector<SweepRecord>& records,
                         bool use_wcse);

}  // namespace varfilt
