#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "varfilt/covariance.hpp"

namespace varfilt {

/// One randomized linear-Gaussian parameter-estimation problem:
/// y_t = x_t^T theta + eta_t with identity dynamics and no process noise.
struct ProblemSpec {
  int n = 1;              // state dimension
  int m = 1;              // observation dimension, fixed 1
  int horizon = 1000;     // number of observed steps T
  Vec xbar;               // input mean, length n
  double input_var = 0.5;
  double meas_var = 0.1;
  Vec prior_mean;         // length n, zero by default
  double prior_var = 1.0;
  std::uint64_t seed = 0;

  void validate() const;

  /// One `key = value` per line, for reproduction records.
  std::string to_text() const;
  static ProblemSpec from_text(const std::string& text);
};

struct Observation {
  Vec x;
  double y = 0.0;
};

struct GroundTruth {
  Vec theta;        // true parameter, length n
  Vec noise_draws;  // per-step measurement noise, length horizon
};

/// Deterministic given (n, seed): xbar from a standard normal, theta from
/// the N(0, I) prior, noise draws at variance meas_var.
std::pair<ProblemSpec, GroundTruth> generate_problem(int n, std::uint64_t seed,
                                                     int horizon = 1000);

/// Observation at step t. A pure function of (spec, truth, t): per-step RNG
/// streams are derived from (seed, t), so out-of-order and parallel replay
/// give bit-identical values.
Observation stream(const ProblemSpec& spec, const GroundTruth& truth, int t);

}  // namespace varfilt
