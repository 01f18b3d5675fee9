// Python bindings for the structured-covariance filtering library. The
// surface mirrors the main C++ operations on dense NumPy inputs: diagonal
// projections, the robust gain machinery, single filter runs, and the
// benchmark sweep.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "varfilt/divergence.hpp"
#include "varfilt/filters.hpp"
#include "varfilt/harness.hpp"
#include "varfilt/model.hpp"

namespace py = pybind11;
using namespace varfilt;

namespace {

Covariance dense_or_diag(const Mat& m) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("covariance must be square");
  return DenseCov{m};
}

std::vector<FilterKind> parse_kinds(const std::vector<std::string>& names) {
  std::vector<FilterKind> kinds;
  kinds.reserve(names.size());
  for (const auto& name : names) kinds.push_back(filter_kind_from_name(name));
  return kinds;
}

py::dict record_to_dict(const SweepRecord& r) {
  py::dict d;
  d["dim"] = r.dim;
  d["filter"] = filter_kind_name(r.filter);
  d["problems"] = r.problems;
  d["steps"] = r.steps;
  d["seed"] = r.seed;
  d["mse_mean"] = r.mse_mean;
  d["mse_lo"] = r.mse_lo;
  d["mse_hi"] = r.mse_hi;
  d["wcse_mean"] = r.wcse_mean;
  d["wcse_lo"] = r.wcse_lo;
  d["wcse_hi"] = r.wcse_hi;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Sequential filters with diagonal-plus-low-rank covariances for "
      "high-dimensional linear-Gaussian parameter estimation";

  py::register_exception<singularity_error>(m, "SingularityError",
                                            PyExc_ArithmeticError);
  py::register_exception<capacity_error>(m, "CapacityError",
                                         PyExc_RuntimeError);
  py::register_exception<feasibility_error>(m, "FeasibilityError",
                                            PyExc_ValueError);

  m.def("filter_names", [] {
    return std::vector<std::string>{"kf", "viep", "l2", "vih", "l2h"};
  });

  m.def(
      "ep_project",
      [](const Mat& cov) -> Vec { return ep_project(dense_or_diag(cov)).d; },
      py::arg("cov"),
      "Forward-KL optimal diagonal approximation (the covariance diagonal).");

  m.def(
      "elbo_project",
      [](const Mat& cov) -> Vec { return elbo_project(dense_or_diag(cov)).d; },
      py::arg("cov"),
      "Reverse-KL optimal diagonal, d_i = 1 / (P^-1)_ii.");

  m.def(
      "l2_objective",
      [](const Mat& cov, const Vec& d) {
        return l2_objective(dense_or_diag(cov), DiagCov{d});
      },
      py::arg("cov"), py::arg("d"),
      "Closed-form squared L2 information pseudometric to diag(d).");

  m.def(
      "l2_project",
      [](const Mat& cov) {
        const Covariance c = dense_or_diag(cov);
        const L2ProjectResult r = l2_project(c, ep_project(c));
        return py::make_tuple(r.d.d, r.objective, r.converged);
      },
      py::arg("cov"),
      "Minimizing diagonal of the L2 objective; returns (d, value, "
      "converged).");

  m.def(
      "kl_gaussian",
      [](const Vec& mean_p, const Mat& cov_p, const Vec& mean_q,
         const Mat& cov_q) {
        return kl_gaussian({mean_p, dense_or_diag(cov_p)},
                           {mean_q, dense_or_diag(cov_q)});
      },
      py::arg("mean_p"), py::arg("cov_p"), py::arg("mean_q"), py::arg("cov_q"),
      "KL(p || q) between Gaussians.");

  m.def(
      "kalman_update",
      [](const Vec& prior_diag, const Vec& x, double meas_var) {
        const KfResult r =
            kf_update(Covariance{DiagCov{prior_diag}}, x, meas_var);
        return py::make_tuple(r.gain, to_dense(r.posterior));
      },
      py::arg("prior_diag"), py::arg("x"), py::arg("meas_var"),
      "Kalman gain and posterior covariance for a diagonal prior and a "
      "scalar observation along x; returns (gain, posterior).");

  m.def(
      "hinf_gain",
      [](const Vec& prior_diag, const Vec& x, double meas_var, double gamma) {
        const HinfGainResult r =
            hinf_gain(DiagCov{prior_diag}, x, meas_var, gamma);
        return py::make_tuple(r.gain, to_dense(Covariance{r.posterior}));
      },
      py::arg("prior_diag"), py::arg("x"), py::arg("meas_var"),
      py::arg("gamma"),
      "Robust gain and posterior (diag(1/d) - gamma I + x x'/R)^-1; gamma = 0 "
      "reduces to the Kalman update.");

  m.def(
      "gamma_max",
      [](const Vec& prior_diag, const Vec& x, double meas_var) {
        return gamma_max(DiagCov{prior_diag}, x, meas_var);
      },
      py::arg("prior_diag"), py::arg("x"), py::arg("meas_var"),
      "Supremum of feasible robustness levels for hinf_gain.");

  m.def(
      "run_filter",
      [](const std::string& filter, int dim, int steps, std::uint64_t seed) {
        const auto [spec, truth] = generate_problem(dim, seed, steps);
        const RunMetrics metrics =
            run_filter(spec, truth, filter_kind_from_name(filter));
        py::dict out;
        out["final_mse"] = metrics.final_mse;
        out["final_wcse"] = metrics.final_wcse;
        out["per_step_wcse"] = metrics.per_step_wcse;
        out["gamma_trace"] = metrics.gamma_trace;
        out["runtime_ms"] = metrics.runtime_ms;
        return out;
      },
      py::arg("filter"), py::arg("dim"), py::arg("steps"), py::arg("seed"),
      "Run one filter on a seeded random problem and report its error "
      "metrics.");

  m.def(
      "sweep",
      [](const std::vector<int>& dims, int problems, int steps,
         const std::vector<std::string>& filters, std::uint64_t seed) {
        const auto records =
            sweep(dims, problems, steps, parse_kinds(filters), seed);
        py::list out;
        for (const auto& r : records) out.append(record_to_dict(r));
        return out;
      },
      py::arg("dims"), py::arg("problems"), py::arg("steps"),
      py::arg("filters"), py::arg("seed"),
      "Benchmark sweep over dimensions and filters; deterministic for a "
      "given seed.");

  m.def(
      "sweep_csv",
      [](const std::vector<int>& dims, int problems, int steps,
         const std::vector<std::string>& filters, std::uint64_t seed) {
        return sweep_to_csv(
            sweep(dims, problems, steps, parse_kinds(filters), seed));
      },
      py::arg("dims"), py::arg("problems"), py::arg("steps"),
      py::arg("filters"), py::arg("seed"),
      "Benchmark sweep rendered as CSV text.");

  m.def(
      "ellipse_points",
      [](const Vec& mean, const Mat& cov, double level, int count) {
        const auto pts = ellipse_points(mean, cov, level, count);
        Mat out(static_cast<Eigen::Index>(pts.size()), 2);
        for (std::size_t i = 0; i < pts.size(); ++i)
          out.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
        return out;
      },
      py::arg("mean"), py::arg("cov"), py::arg("level") = 0.93,
      py::arg("count") = 128,
      "Points on the confidence ellipse of a 2-D Gaussian.");
}
