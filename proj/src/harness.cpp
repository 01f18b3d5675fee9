#include "varfilt/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <thread>

#include "varfilt/rng.hpp"

namespace varfilt {

namespace {

constexpr std::uint64_t kProblemStream = 4242;

std::uint64_t problem_seed(std::uint64_t master_seed, int dim, int problem) {
  return Rng::derive_key(master_seed, kProblemStream + static_cast<std::uint64_t>(dim),
                         static_cast<std::uint64_t>(problem));
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(h);
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

int worker_count() {
  if (const char* env = std::getenv("VARFILT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double mse(const Vec& estimate, const Vec& truth) {
  if (estimate.size() != truth.size())
    throw std::invalid_argument("mse: length mismatch");
  return (estimate - truth).squaredNorm() / static_cast<double>(truth.size());
}

double wcse(const Vec& estimate, const Vec& truth, const Vec& var_diag) {
  if (estimate.size() != truth.size() || estimate.size() != var_diag.size())
    throw std::invalid_argument("wcse: length mismatch");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < estimate.size(); ++i) {
    if (var_diag[i] <= 0.0)
      throw std::invalid_argument("wcse: non-positive variance");
    worst = std::max(worst,
                     std::abs(estimate[i] - truth[i]) / std::sqrt(var_diag[i]));
  }
  return worst;
}

RunMetrics run_filter(const ProblemSpec& spec, const GroundTruth& truth,
                      FilterKind kind, const HinfConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  FilterState state = make_filter(kind, spec);
  RunMetrics metrics;
  metrics.per_step_wcse.reserve(spec.horizon);
  for (int t = 0; t < spec.horizon; ++t) {
    try {
      state = assimilate(state, stream(spec, truth, t), spec.meas_var, cfg);
    } catch (const std::exception& e) {
      throw std::runtime_error("filter " + filter_kind_name(kind) + " failed at step " +
                               std::to_string(t) + ": " + e.what());
    }
    metrics.per_step_wcse.push_back(
        wcse(state.mean, truth.theta, cov_diagonal(state.cov)));
  }
  metrics.final_mse = mse(state.mean, truth.theta);
  metrics.final_wcse = spec.horizon > 0
                           ? metrics.per_step_wcse.back()
                           : wcse(state.mean, truth.theta, cov_diagonal(state.cov));
  metrics.gamma_trace = state.gamma_trace;
  metrics.runtime_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - start)
                           .count();
  return metrics;
}

std::vector<SweepRecord> sweep(const std::vector<int>& dims, int problems,
                               int steps, const std::vector<FilterKind>& kinds,
                               std::uint64_t master_seed,
                               const HinfConfig& cfg) {
  if (dims.empty() || kinds.empty())
    throw std::invalid_argument("sweep: empty dimension or filter list");
  if (problems < 1 || steps < 0)
    throw std::invalid_argument("sweep: invalid problem or step count");

  struct Cell {
    double mse = 0.0;
    double wcse = 0.0;
  };
  const std::size_t n_cells = dims.size() * kinds.size() * problems;
  std::vector<Cell> cells(n_cells);
  std::vector<std::string> errors(n_cells);

  // Work items are independent; results land in pre-assigned slots, so the
  // outcome is identical for any worker count.
  std::atomic<std::size_t> cursor{0};
  auto work = [&] {
    for (std::size_t idx = cursor.fetch_add(1); idx < n_cells;
         idx = cursor.fetch_add(1)) {
      const std::size_t di = idx / (kinds.size() * problems);
      const std::size_t ki = (idx / problems) % kinds.size();
      const int pi = static_cast<int>(idx % problems);
      try {
        auto [spec, truth] = generate_problem(
            dims[di], problem_seed(master_seed, dims[di], pi), steps);
        const RunMetrics m = run_filter(spec, truth, kinds[ki], cfg);
        cells[idx] = {m.final_mse, m.final_wcse};
      } catch (const std::exception& e) {
        errors[idx] = "dim " + std::to_string(dims[di]) + ", filter " +
                      filter_kind_name(kinds[ki]) + ", problem " +
                      std::to_string(pi) + ": " + e.what();
      }
    }
  };

  const int n_workers = std::min<int>(worker_count(), static_cast<int>(n_cells));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  for (const auto& err : errors)
    if (!err.empty()) throw std::runtime_error("sweep failed: " + err);

  std::vector<SweepRecord> records;
  for (std::size_t di = 0; di < dims.size(); ++di) {
    for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
      std::vector<double> mses(problems), wcses(problems);
      for (int pi = 0; pi < problems; ++pi) {
        const std::size_t idx = (di * kinds.size() + ki) * problems + pi;
        mses[pi] = cells[idx].mse;
        wcses[pi] = cells[idx].wcse;
      }
      SweepRecord rec;
      rec.dim = dims[di];
      rec.filter = kinds[ki];
      rec.problems = problems;
      rec.steps = steps;
      rec.seed = master_seed;
      rec.mse_mean = std::accumulate(mses.begin(), mses.end(), 0.0) / problems;
      rec.mse_lo = quantile(mses, 0.035);
      rec.mse_hi = quantile(mses, 0.965);
      rec.wcse_mean =
          std::accumulate(wcses.begin(), wcses.end(), 0.0) / problems;
      rec.wcse_lo = quantile(wcses, 0.035);
      rec.wcse_hi = quantile(wcses, 0.965);
      records.push_back(rec);
    }
  }
  std::sort(records.begin(), records.end(),
            [](const SweepRecord& a, const SweepRecord& b) {
              if (a.dim != b.dim) return a.dim < b.dim;
              return filter_kind_name(a.filter) < filter_kind_name(b.filter);
            });
  return records;
}

double hinf_cost(const std::vector<Vec>& estimates, const GroundTruth& truth,
                 const ProblemSpec& spec) {
  double numer = 0.0;
  for (const auto& est : estimates) numer += (truth.theta - est).squaredNorm();
  double denom = (truth.theta - spec.prior_mean).squaredNorm() / spec.prior_var;
  for (Eigen::Index t = 0; t < truth.noise_draws.size(); ++t)
    denom += truth.noise_draws[t] * truth.noise_draws[t] / spec.meas_var;
  if (denom == 0.0) throw std::invalid_argument("hinf_cost: zero denominator");
  return numer / denom;
}

std::vector<Eigen::Vector2d> ellipse_points(const Vec& mean, const Mat& cov,
                                            double level, int count) {
  if (mean.size() != 2 || cov.rows() != 2 || cov.cols() != 2)
    throw std::invalid_argument("ellipse_points: expects 2-D inputs");
  if (level <= 0.0 || level >= 1.0)
    throw std::invalid_argument("ellipse_points: level must be in (0, 1)");
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success)
    throw singularity_error("ellipse covariance is not SPD");
  const Mat chol = llt.matrixL();
  const double radius = std::sqrt(-2.0 * std::log(1.0 - level));  // chi2(2)
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double phi = 2.0 * M_PI * static_cast<double>(i) / count;
    const Eigen::Vector2d unit(std::cos(phi), std::sin(phi));
    pts.emplace_back(mean + radius * (chol * unit));
  }
  return pts;
}

std::string sweep_to_csv(const std::vector<SweepRecord>& records) {
  std::ostringstream os;
  os << "dim,filter,problems,steps,seed,mse_mean,mse_lo,mse_hi,"
        "wcse_mean,wcse_lo,wcse_hi\n";
  for (const auto& r : records) {
    os << r.dim << ',' << filter_kind_name(r.filter) << ',' << r.problems
       << ',' << r.steps << ',' << r.seed << ',' << format_double(r.mse_mean)
       << ',' << format_double(r.mse_lo) << ',' << format_double(r.mse_hi)
       << ',' << format_double(r.wcse_mean) << ',' << format_double(r.wcse_lo)
       << ',' << format_double(r.wcse_hi) << '\n';
  }
  return os.str();
}

namespace {

struct PlotStyle {
  const char* color;
  double dim_nudge;  // multiplicative x offset to keep error bars readable
};

PlotStyle style_for(FilterKind kind) {
  switch (kind) {
    case FilterKind::KalmanDense: return {"#000000", 1.00};
    case FilterKind::VIEP: return {"#d62728", 0.96};
    case FilterKind::L2: return {"#2ca02c", 0.98};
    case FilterKind::VIHinf: return {"#1f77b4", 1.02};
    case FilterKind::L2Hinf: return {"#9467bd", 1.04};
  }
  return {"#000000", 1.0};
}

}  // namespace

std::string sweep_to_svg(const std::vector<SweepRecord>& records,
                         bool use_wcse) {
  constexpr double w = 640, h = 480, margin = 60;
  double xmin = 1e300, xmax = 0, ymin = 1e300, ymax = 0;
  for (const auto& r : records) {
    const double lo = use_wcse ? r.wcse_lo : r.mse_lo;
    const double hi = use_wcse ? r.wcse_hi : r.mse_hi;
    xmin = std::min(xmin, static_cast<double>(r.dim));
    xmax = std::max(xmax, static_cast<double>(r.dim));
    ymin = std::min(ymin, std::max(lo, 1e-12));
    ymax = std::max(ymax, hi);
  }
  if (records.empty() || ymin >= ymax) {
    ymin = 0.1;
    ymax = 10.0;
  }
  const auto px = [&](double dim) {
    return margin + (std::log(dim) - std::log(xmin)) /
                        (std::log(xmax) - std::log(xmin) + 1e-300) *
                        (w - 2 * margin);
  };
  const auto py = [&](double v) {
    v = std::max(v, 1e-12);
    return h - margin - (std::log(v) - std::log(ymin)) /
                            (std::log(ymax) - std::log(ymin) + 1e-300) *
                            (h - 2 * margin);
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
     << "\" height=\"" << h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\">"
     << (use_wcse ? "worst-case scaled error" : "mean square error")
     << " vs dimension (log-log)</text>\n";

  std::vector<FilterKind> kinds;
  for (const auto& r : records)
    if (std::find(kinds.begin(), kinds.end(), r.filter) == kinds.end())
      kinds.push_back(r.filter);

  for (const auto kind : kinds) {
    const PlotStyle st = style_for(kind);
    std::ostringstream line;
    for (const auto& r : records) {
      if (r.filter != kind) continue;
      const double x = px(r.dim * st.dim_nudge);
      const double mean = use_wcse ? r.wcse_mean : r.mse_mean;
      const double lo = use_wcse ? r.wcse_lo : r.mse_lo;
      const double hi = use_wcse ? r.wcse_hi : r.mse_hi;
      line << (line.tellp() > 0 ? " " : "") << x << "," << py(mean);
      os << "<line x1=\"" << x << "\" y1=\"" << py(lo) << "\" x2=\"" << x
         << "\" y2=\"" << py(hi) << "\" stroke=\"" << st.color << "\"/>\n";
      os << "<circle cx=\"" << x << "\" cy=\"" << py(mean)
         << "\" r=\"3\" fill=\"" << st.color << "\"/>\n";
    }
    os << "<polyline fill=\"none\" stroke=\"" << st.color << "\" points=\""
       << line.str() << "\"/>\n";
  }
  double ly = 40;
  for (const auto kind : kinds) {
    os << "<text x=\"" << w - margin - 60 << "\" y=\"" << ly << "\" fill=\""
       << style_for(kind).color << "\">" << filter_kind_name(kind)
       << "</text>\n";
    ly += 16;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace varfilt
