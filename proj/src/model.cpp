#include "varfilt/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "varfilt/rng.hpp"

namespace varfilt {

namespace {

// Stream ids for key derivation; step streams use kStepBase + t.
constexpr std::uint64_t kXbarStream = 1;
constexpr std::uint64_t kThetaStream = 2;
constexpr std::uint64_t kNoiseStream = 3;
constexpr std::uint64_t kStepBase = 1000;

Vec draw_normal_vec(Rng& rng, int n, double mean, double stddev) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = mean + stddev * rng.next_normal();
  return v;
}

}  // namespace

void ProblemSpec::validate() const {
  if (n < 1) throw std::invalid_argument("state dimension must be >= 1");
  if (m != 1) throw std::invalid_argument("only scalar observations supported");
  if (horizon < 0) throw std::invalid_argument("horizon must be >= 0");
  if (input_var <= 0.0) throw std::invalid_argument("input_var must be positive");
  if (meas_var <= 0.0) throw std::invalid_argument("meas_var must be positive");
  if (prior_var <= 0.0) throw std::invalid_argument("prior_var must be positive");
  if (xbar.size() != n || prior_mean.size() != n)
    throw std::invalid_argument("vector length does not match dimension");
}

std::string ProblemSpec::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "n = " << n << "\n"
     << "m = " << m << "\n"
     << "horizon = " << horizon << "\n"
     << "input_var = " << input_var << "\n"
     << "meas_var = " << meas_var << "\n"
     << "prior_var = " << prior_var << "\n"
     << "seed = " << seed << "\n";
  os << "xbar =";
  for (int i = 0; i < n; ++i) os << " " << xbar[i];
  os << "\nprior_mean =";
  for (int i = 0; i < n; ++i) os << " " << prior_mean[i];
  os << "\n";
  return os.str();
}

ProblemSpec ProblemSpec::from_text(const std::string& text) {
  ProblemSpec spec;
  std::istringstream is(text);
  std::string line;
  std::vector<double> xbar, prior_mean;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("malformed spec line: " + line);
    std::string key = line.substr(0, eq);
    key.erase(key.find_last_not_of(' ') + 1);
    std::istringstream val(line.substr(eq + 1));
    if (key == "n") val >> spec.n;
    else if (key == "m") val >> spec.m;
    else if (key == "horizon") val >> spec.horizon;
    else if (key == "input_var") val >> spec.input_var;
    else if (key == "meas_var") val >> spec.meas_var;
    else if (key == "prior_var") val >> spec.prior_var;
    else if (key == "seed") val >> spec.seed;
    else if (key == "xbar") {
      double x;
      while (val >> x) xbar.push_back(x);
    } else if (key == "prior_mean") {
      double x;
      while (val >> x) prior_mean.push_back(x);
    } else {
      throw std::invalid_argument("unknown spec key: " + key);
    }
  }
  spec.xbar = Eigen::Map<const Vec>(xbar.data(), xbar.size());
  spec.prior_mean = Eigen::Map<const Vec>(prior_mean.data(), prior_mean.size());
  spec.validate();
  return spec;
}

std::pair<ProblemSpec, GroundTruth> generate_problem(int n, std::uint64_t seed,
                                                     int horizon) {
  if (n < 1) throw std::invalid_argument("state dimension must be >= 1");
  if (horizon < 0) throw std::invalid_argument("horizon must be >= 0");

  ProblemSpec spec;
  spec.n = n;
  spec.horizon = horizon;
  spec.seed = seed;
  spec.prior_mean = Vec::Zero(n);

  Rng xbar_rng(Rng::derive_key(seed, kXbarStream));
  spec.xbar = draw_normal_vec(xbar_rng, n, 0.0, 1.0);

  GroundTruth truth;
  Rng theta_rng(Rng::derive_key(seed, kThetaStream));
  truth.theta = draw_normal_vec(theta_rng, n, 0.0, std::sqrt(spec.prior_var));

  const double noise_sd = std::sqrt(spec.meas_var);
  truth.noise_draws = Vec(horizon);
  for (int t = 0; t < horizon; ++t) {
    Rng rng(Rng::derive_key(seed, kNoiseStream, static_cast<std::uint64_t>(t)));
    truth.noise_draws[t] = noise_sd * rng.next_normal();
  }
  return {std::move(spec), std::move(truth)};
}

Observation stream(const ProblemSpec& spec, const GroundTruth& truth, int t) {
  spec.validate();
  if (t < 0 || t >= spec.horizon)
    throw std::invalid_argument("step index out of range");
  if (truth.theta.size() != spec.n || truth.noise_draws.size() < spec.horizon)
    throw std::invalid_argument("ground truth does not match spec");

  Rng rng(Rng::derive_key(spec.seed, kStepBase + static_cast<std::uint64_t>(t)));
  const double input_sd = std::sqrt(spec.input_var);
  Observation obs;
  obs.x = Vec(spec.n);
  for (int i = 0; i < spec.n; ++i)
    obs.x[i] = spec.xbar[i] + input_sd * rng.next_normal();
  obs.y = obs.x.dot(truth.theta) + truth.noise_draws[t];
  return obs;
}

}  // namespace varfilt
