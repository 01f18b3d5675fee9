#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "varfilt/divergence.hpp"
#include "varfilt/harness.hpp"

namespace {

using namespace varfilt;

std::vector<int> parse_dims(const std::string& csv) {
  std::vector<int> dims;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      const int d = std::stoi(item);
      if (d < 1) throw std::invalid_argument("dim < 1");
      dims.push_back(d);
    } catch (const std::exception&) {
      throw CLI::ValidationError("--dims", "malformed dimension list: " + csv);
    }
  }
  if (dims.empty())
    throw CLI::ValidationError("--dims", "empty dimension list");
  return dims;
}

std::vector<FilterKind> parse_filters(const std::string& csv) {
  std::vector<FilterKind> kinds;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      kinds.push_back(filter_kind_from_name(item));
    } catch (const std::exception& e) {
      throw CLI::ValidationError("--filters", e.what());
    }
  }
  if (kinds.empty())
    throw CLI::ValidationError("--filters", "empty filter list");
  return kinds;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CLI::ValidationError("--out", "cannot write " + path);
  out << content;
  if (!out) throw CLI::ValidationError("--out", "write failed for " + path);
}

struct SweepArgs {
  std::string dims = "2,4,8,16,32,64";
  int problems = 32;
  int steps = 1000;
  std::string filters = "kf,viep,l2,vih,l2h";
  std::uint64_t seed = 1;
  std::string out;
  std::string svg;
  std::string corr_x = "literal";
  bool keep_rank = false;
};

int run_sweep(const SweepArgs& args) {
  HinfConfig cfg;
  cfg.corr_x_choice = args.corr_x == "next" ? CorrInputChoice::Next_xt1
                                            : CorrInputChoice::Literal_xt;
  cfg.diagonalize_posterior = !args.keep_rank;
  const auto records = sweep(parse_dims(args.dims), args.problems, args.steps,
                             parse_filters(args.filters), args.seed, cfg);
  write_file(args.out, sweep_to_csv(records));
  if (!args.svg.empty())
    write_file(args.svg, sweep_to_svg(records, /*use_wcse=*/false));
  return 0;
}

struct TraceArgs {
  std::string filter = "viep";
  int dim = 50;
  int steps = 1000;
  std::uint64_t seed = 1;
  std::string out;
};

int run_trace(const TraceArgs& args) {
  auto [spec, truth] = generate_problem(args.dim, args.seed, args.steps);
  const RunMetrics m =
      run_filter(spec, truth, filter_kind_from_name(args.filter));
  std::ostringstream os;
  os.precision(17);
  os << "step,wcse\n";
  for (std::size_t t = 0; t < m.per_step_wcse.size(); ++t)
    os << t << "," << m.per_step_wcse[t] << "\n";
  write_file(args.out, os.str());
  return 0;
}

struct EllipseArgs {
  std::uint64_t seed = 1;
  int obs = 3;
  int points = 256;
  double level = 0.90;
  std::string out;
};

int run_ellipse(const EllipseArgs& args) {
  auto [spec, truth] = generate_problem(2, args.seed, std::max(args.obs, 1));
  FilterState state = make_filter(FilterKind::KalmanDense, spec);
  for (int t = 0; t < args.obs; ++t)
    state = assimilate(state, stream(spec, truth, t), spec.meas_var);

  const Mat post = to_dense(state.cov);
  struct Entry {
    const char* name;
    Mat cov;
  };
  const std::vector<Entry> entries = {
      {"true", post},
      {"ep", to_dense(ep_project(state.cov))},
      {"elbo", to_dense(elbo_project(state.cov))},
      {"l2", to_dense(l2_project(state.cov, ep_project(state.cov)).d)},
  };

  std::ostringstream os;
  os.precision(17);
  os << "# seed = " << args.seed << "\n# obs = " << args.obs
     << "\n# level = " << args.level << "\n";
  os << "method,px,py\n";
  for (const auto& entry : entries) {
    for (const auto& p :
         ellipse_points(state.mean, entry.cov, args.level, args.points))
      os << entry.name << "," << p.x() << "," << p.y() << "\n";
  }
  write_file(args.out, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential variational filtering benchmark harness"};
  app.require_subcommand(1);

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand(
      "sweep", "Run a dimension sweep and write aggregated CSV");
  sweep_cmd->add_option("--dims", sweep_args.dims, "comma-separated dimensions");
  sweep_cmd->add_option("--problems", sweep_args.problems, "problems per dim");
  sweep_cmd->add_option("--steps", sweep_args.steps, "observations per run");
  sweep_cmd->add_option("--filters", sweep_args.filters,
                        "comma list of kf,viep,l2,vih,l2h");
  sweep_cmd->add_option("--seed", sweep_args.seed, "master seed");
  sweep_cmd->add_option("--out", sweep_args.out, "output CSV path")->required();
  sweep_cmd->add_option("--svg", sweep_args.svg, "optional SVG plot path");
  sweep_cmd->add_option("--corr-x", sweep_args.corr_x,
                        "input used in the H-inf correction")
      ->check(CLI::IsMember({"literal", "next"}));
  sweep_cmd->add_flag("--keep-rank", sweep_args.keep_rank,
                      "carry the full diag+rank-1 H-inf posterior");

  TraceArgs trace_args;
  auto* trace_cmd = app.add_subcommand(
      "trace", "Write the per-step worst-case scaled error of one run");
  trace_cmd->add_option("--filter", trace_args.filter, "filter name");
  trace_cmd->add_option("--dim", trace_args.dim, "state dimension");
  trace_cmd->add_option("--steps", trace_args.steps, "observations");
  trace_cmd->add_option("--seed", trace_args.seed, "seed");
  trace_cmd->add_option("--out", trace_args.out, "output CSV path")->required();

  EllipseArgs ellipse_args;
  auto* ellipse_cmd = app.add_subcommand(
      "ellipse", "Confidence ellipses of the posterior and its projections");
  ellipse_cmd->add_option("--seed", ellipse_args.seed, "seed");
  ellipse_cmd->add_option("--obs", ellipse_args.obs, "observations to absorb");
  ellipse_cmd->add_option("--points", ellipse_args.points, "points per ellipse");
  ellipse_cmd->add_option("--level", ellipse_args.level, "confidence level");
  ellipse_cmd->add_option("--out", ellipse_args.out, "output CSV path")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (sweep_cmd->parsed()) return run_sweep(sweep_args);
    if (trace_cmd->parsed()) return run_trace(trace_args);
    if (ellipse_cmd->parsed()) return run_ellipse(ellipse_args);
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
