#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "qcwass/io/config.hpp"
#include "qcwass/io/csv.hpp"
#include "qcwass/io/json.hpp"
#include "qcwass/project.hpp"
#include "qcwass/smooth.hpp"
#include "qcwass/study.hpp"

namespace qcwass::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kSolverError = 3, kEmptyClass = 4 };

// Where the study comes from and the command-line overrides applied on top.
struct SourceOptions {
  std::string config;
  std::string builtin;
  std::optional<std::size_t> n;
  std::optional<Seed> seed;
  std::optional<std::size_t> theta_points;
  bool resample_per_theta = false;
  std::optional<unsigned> threads;
  std::optional<std::string> mode;
  std::optional<int> degree;
};

struct ProjectOptions {
  SourceOptions source;
  std::string input;
  double theta = 0.0;
  std::string out = "project";
  std::size_t grid = 1001;
};

struct StudyOptions {
  SourceOptions source;
  std::optional<std::string> csv;
  std::optional<std::string> json;
};

struct FitPolyOptions {
  std::optional<std::string> empirical;
  bool header = false;
  std::optional<std::string> dist;
  std::optional<std::string> constraints_file;
  std::vector<std::string> constraints;
  int degree = 9;
  std::string json = "fit_poly.json";
  std::string table = "fit_poly.csv";
  std::size_t grid = 1001;
  std::optional<unsigned> threads;
};

// --threads, else QCWASS_THREADS, else 1.
inline unsigned resolve_threads(std::optional<unsigned> flag) {
  if (flag) return std::max(1u, *flag);
  if (const char* env = std::getenv("QCWASS_THREADS")) {
    const double v = io::parse_number(env, "QCWASS_THREADS");
    if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("QCWASS_THREADS: expected a positive integer");
    return static_cast<unsigned>(v);
  }
  return 1;
}

inline io::StudyConfig resolve_config(const SourceOptions& o) {
  if (o.config.empty() == o.builtin.empty()) throw ConfigError("give exactly one of a config file or --builtin");
  io::StudyConfig cfg = o.config.empty() ? io::builtin_config(o.builtin) : io::load_config(o.config);
  auto& spec = cfg.spec;
  if (o.n) {
    if (*o.n == 0) throw ConfigError("--n: must be at least 1");
    spec.n = *o.n;
  }
  if (o.seed) spec.seed = *o.seed;
  if (o.theta_points) spec.theta = theta_grid(*o.theta_points);
  if (o.resample_per_theta) spec.resample_per_theta = true;
  if (o.threads || std::getenv("QCWASS_THREADS")) spec.threads = resolve_threads(o.threads);
  if (o.mode) {
    if (*o.mode == "exact") {
      spec.mode.kind = ProjectionMode::exact;
    } else if (*o.mode == "smooth") {
      spec.mode.kind = ProjectionMode::smooth;
    } else {
      throw ConfigError("--mode: expected exact or smooth");
    }
  }
  if (o.degree) {
    if (*o.degree < 1) throw ConfigError("--degree: must be at least 1");
    spec.mode.degree = *o.degree;
  }
  return cfg;
}

inline io::Json sampled_smooth(const SmoothGqf& g, std::size_t points) {
  return io::sampled_gqf(g, g, points);
}

inline void write_gqf_table(const std::string& path, const io::Json& sampled) {
  io::write_curve_csv(path, "level", "quantile", sampled.at("levels").get<std::vector<double>>(),
                      sampled.at("values").get<std::vector<double>>());
}

// Projection of one input at one intensity. Writes <out>.json and the
// sampled gqf to <out>.csv; prints the W2 cost.
inline void cmd_project(const ProjectOptions& o, std::ostream& log) {
  if (o.grid < 2) throw ConfigError("--grid: need at least two points");
  const auto cfg = resolve_config(o.source);
  const auto& spec = cfg.spec;
  const auto& names = spec.input_names();
  const auto it = std::find(names.begin(), names.end(), o.input);
  if (it == names.end()) throw ConfigError("--input: unknown input '" + o.input + "'");
  const auto scheme = std::find_if(spec.schemes.begin(), spec.schemes.end(),
                                   [&](const InputScheme& s) { return s.input == o.input; });
  if (scheme == spec.schemes.end()) throw ConfigError("--input: no perturbation scheme for '" + o.input + "'");
  const auto marginal = study_marginals(spec)[static_cast<std::size_t>(it - names.begin())];
  const ConstraintList constraints = materialize(scheme->scheme, o.theta);

  io::Json doc;
  double cost = 0.0;
  if (spec.mode.kind == ProjectionMode::exact) {
    const auto r = project_exact(marginal, constraints);
    cost = w2_cost(r);
    doc = io::to_json(r, o.grid);
  } else {
    SmoothOptions opts;
    opts.threads = spec.threads;
    const auto g = fit_smooth(marginal, constraints, spec.mode.degree, opts);
    cost = std::sqrt(l2_squared_to_base(g, marginal));
    doc = io::to_json(g);
    doc["gqf"] = sampled_smooth(g, o.grid);
  }
  doc["input"] = o.input;
  doc["theta"] = o.theta;
  doc["w2_cost"] = cost;
  io::write_json(o.out + ".json", doc);
  write_gqf_table(o.out + ".csv", doc.at("gqf"));
  log << "w2_cost " << io::format_number(cost) << '\n';
  log << "wrote " << o.out << ".json " << o.out << ".csv\n";
}

inline void cmd_study(const StudyOptions& o, std::ostream& log) {
  auto cfg = resolve_config(o.source);
  if (o.csv) cfg.output.csv = *o.csv;
  if (o.json) cfg.output.json = *o.json;
  const auto result = run_study(cfg.spec);
  io::write_study_csv(cfg.output.csv, result);
  io::write_json(cfg.output.json, io::to_json(result));
  log << "study " << cfg.source << ": " << result.records.size() << " theta points, n = " << result.n << '\n';
  log << "wrote " << cfg.output.csv << ' ' << cfg.output.json << '\n';
}

// "alpha:value" pairs from the command line or an (alpha, value) CSV whose
// first row may be a header.
inline ConstraintList read_constraints(const FitPolyOptions& o) {
  ConstraintList out;
  if (o.constraints_file) {
    const auto rows = io::detail::read_lines(*o.constraints_file);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto fields = io::split_fields(rows[k].second);
      const std::string where = *o.constraints_file + ":" + std::to_string(rows[k].first);
      if (fields.size() != 2) throw ConfigError(where + ": expected alpha,value");
      if (k == 0 && !fields[0].empty() && !(std::isdigit(static_cast<unsigned char>(fields[0][0])) ||
                                            fields[0][0] == '.' || fields[0][0] == '-' || fields[0][0] == '+')) {
        continue;
      }
      out.push_back({io::parse_number(fields[0], where), io::parse_number(fields[1], where)});
    }
  }
  for (const auto& c : o.constraints) {
    const auto colon = c.find(':');
    if (colon == std::string::npos) throw ConfigError("--constraint '" + c + "': expected alpha:value");
    out.push_back({io::parse_number(std::string_view(c).substr(0, colon), "--constraint"),
                   io::parse_number(std::string_view(c).substr(colon + 1), "--constraint")});
  }
  if (out.empty()) throw ConfigError("fit-poly: no constraints given");
  return out;
}

inline void cmd_fit_poly(const FitPolyOptions& o, std::ostream& log) {
  if (o.degree < 1) throw ConfigError("--degree: must be at least 1, got " + std::to_string(o.degree));
  if (o.grid < 2) throw ConfigError("--grid: need at least two points");
  if (o.empirical.has_value() == o.dist.has_value()) throw ConfigError("give exactly one of --empirical or --dist");
  const UnivariateMeasure p = o.empirical ? UnivariateMeasure::empirical(io::read_column_csv(*o.empirical, o.header))
                                          : io::parse_dist_spec(*o.dist);
  const ConstraintList constraints = read_constraints(o);
  SmoothOptions opts;
  opts.threads = resolve_threads(o.threads);
  const auto g = fit_smooth(p, constraints, o.degree, opts);
  const double cost = std::sqrt(l2_squared_to_base(g, p));
  io::Json doc = io::to_json(g);
  doc["w2_cost"] = cost;
  io::write_json(o.json, doc);
  std::vector<double> x(o.grid), y(o.grid);
  for (std::size_t k = 0; k < o.grid; ++k) {
    x[k] = static_cast<double>(k) / static_cast<double>(o.grid - 1);
    y[k] = g(x[k]);
  }
  io::write_curve_csv(o.table, "x", "G", x, y);
  log << "w2_cost " << io::format_number(cost) << '\n';
  log << "wrote " << o.json << ' ' << o.table << '\n';
}

inline int exit_code_of_current_exception(std::ostream& err) {
  try {
    throw;
  } catch (const EmptyClassError& e) {
    err << "error: empty perturbation class: " << e.what() << '\n';
    return kEmptyClass;
  } catch (const InfeasibleError& e) {
    err << "error: infeasible constraints: " << e.what() << '\n';
    return kEmptyClass;
  } catch (const SolverError& e) {
    err << "error: solver: " << e.what() << '\n';
    return kSolverError;
  } catch (const QuadratureError& e) {
    err << "error: quadrature: " << e.what() << '\n';
    return kSolverError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

inline void add_source_options(CLI::App* cmd, SourceOptions& s) {
  cmd->add_option("config", s.config, "YAML study configuration");
  cmd->add_option("--builtin", s.builtin, "Built-in study instead of a config file")
      ->check(CLI::IsMember({"flood", "classifier"}));
  cmd->add_option("--n", s.n, "Sample size");
  cmd->add_option("--seed", s.seed, "Master seed");
  cmd->add_option("--theta-points", s.theta_points, "Equispaced theta grid on [-1, 1]");
  cmd->add_flag("--resample-per-theta", s.resample_per_theta, "Fresh sample at every theta");
  cmd->add_option("--threads", s.threads, "Worker cap (default QCWASS_THREADS or 1)");
  cmd->add_option("--mode", s.mode, "exact or smooth");
  cmd->add_option("--degree", s.degree, "Polynomial degree in smooth mode");
}

// Parses `args` (without the program name) and runs one command.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quantile-constrained Wasserstein projections and perturbation studies"};
  app.name("qcwass");
  app.require_subcommand(1);

  ProjectOptions project;
  auto* p = app.add_subcommand("project", "Project one input at one theta and write its perturbed gqf");
  add_source_options(p, project.source);
  p->add_option("--input", project.input, "Input name")->required();
  p->add_option("--theta", project.theta, "Perturbation intensity in [-1, 1]")->required();
  p->add_option("--out", project.out, "Output prefix for .json and .csv");
  p->add_option("--grid", project.grid, "Number of levels in the sampled gqf");

  StudyOptions study;
  auto* s = app.add_subcommand("study", "Run a perturbation study over the theta grid");
  add_source_options(s, study.source);
  s->add_option("--csv", study.csv, "Long-format results (theta, metric, value)");
  s->add_option("--json", study.json, "Results with the baseline record");

  FitPolyOptions fit;
  auto* f = app.add_subcommand("fit-poly", "Fit a monotone piecewise polynomial gqf under quantile constraints");
  f->add_option("--empirical", fit.empirical, "Single-column CSV sample");
  f->add_flag("--header", fit.header, "The sample CSV has a header row");
  f->add_option("--dist", fit.dist, "Distribution, e.g. 'normal(35, 5) [20, 50]'");
  f->add_option("--constraints", fit.constraints_file, "CSV of alpha,value rows");
  f->add_option("--constraint", fit.constraints, "alpha:value (repeatable)");
  f->add_option("--degree", fit.degree, "Polynomial degree");
  f->add_option("--json", fit.json, "SmoothGqf output");
  f->add_option("--table", fit.table, "(x, G(x)) table output");
  f->add_option("--grid", fit.grid, "Rows of the table");
  f->add_option("--threads", fit.threads, "Worker cap (default QCWASS_THREADS or 1)");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    if (p->parsed()) cmd_project(project, out);
    if (s->parsed()) cmd_study(study, out);
    if (f->parsed()) cmd_fit_poly(fit, out);
  } catch (...) {
    return exit_code_of_current_exception(err);
  }
  return kOk;
}

}  // namespace qcwass::cli
