#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qcwass/error.hpp"
#include "qcwass/measures.hpp"
#include "qcwass/parallel.hpp"
#include "qcwass/perturb.hpp"
#include "qcwass/project.hpp"
#include "qcwass/random.hpp"
#include "qcwass/smooth.hpp"
#include "qcwass/transport.hpp"

namespace qcwass {

// Maximal annual water level of the river model:
// Zv + (Q / (B Ks sqrt((Zm - Zv) / L)))^(3/5).
inline double flood_model(double q, double ks, double zv, double zm, double l, double b) {
  if (!(ks > 0.0) || !(b > 0.0) || !(l > 0.0)) throw DomainError("flood_model: require ks, b, l > 0");
  if (!(zm > zv)) throw DomainError("flood_model: require zm > zv (slope must be positive)");
  if (!(q >= 0.0)) throw DomainError("flood_model: require q >= 0");
  return zv + std::pow(q / (b * ks * std::sqrt((zm - zv) / l)), 0.6);
}

enum class OutputKind { scalar, label };

struct BlackBoxModel {
  std::vector<std::string> input_names;
  std::function<double(std::span<const double>)> evaluate;
  OutputKind output = OutputKind::scalar;
  // When false, calls are serialized by the study harness.
  bool concurrent = true;
};

struct ScalarRecord {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct LabelRecord {
  std::map<long long, double> proportions;
  double shift_rate = 0.0;
};

inline ScalarRecord aggregate_scalar(const std::vector<double>& outputs) {
  if (outputs.empty()) throw ShapeError("aggregate_scalar: no outputs");
  const EmpiricalModel emp{EmpiricalSample(outputs)};
  const double n = static_cast<double>(outputs.size());
  ScalarRecord r;
  double sum = 0.0;
  for (double y : outputs) sum += y;
  r.mean = sum / n;
  double ss = 0.0;
  for (double y : outputs) ss += (y - r.mean) * (y - r.mean);
  r.sd = outputs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  r.q025 = emp.quantile_left(0.025);
  r.q975 = emp.quantile_left(0.975);
  r.min = emp.support().lower;
  r.max = emp.support().upper;
  return r;
}

inline long long label_of(double y) { return std::llround(y); }

// Class proportions of `outputs` (over the classes seen in either vector) and
// the fraction of positions whose label differs from `baseline`.
inline LabelRecord aggregate_labels(const std::vector<double>& outputs, const std::vector<double>& baseline) {
  if (outputs.empty()) throw ShapeError("aggregate_labels: no outputs");
  if (outputs.size() != baseline.size()) {
    throw ShapeError("aggregate_labels: " + std::to_string(outputs.size()) + " labels against a baseline of " +
                     std::to_string(baseline.size()));
  }
  LabelRecord r;
  for (double y : baseline) r.proportions[label_of(y)] = 0.0;
  std::size_t changed = 0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const long long k = label_of(outputs[i]);
    r.proportions[k] += 1.0;
    if (k != label_of(baseline[i])) ++changed;
  }
  const double n = static_cast<double>(outputs.size());
  for (auto& [k, v] : r.proportions) v /= n;
  r.shift_rate = static_cast<double>(changed) / n;
  return r;
}

// Extra named statistics computed from the raw outputs of one theta point.
using QoiPlugin = std::function<std::vector<std::pair<std::string, double>>(const std::vector<double>&)>;

struct Dataset {
  std::vector<std::string> names;
  Eigen::MatrixXd values;
};

struct InputScheme {
  std::string input;
  PerturbationScheme scheme;
};

enum class ProjectionMode { exact, smooth };

struct StudyMode {
  ProjectionMode kind = ProjectionMode::exact;
  int degree = 9;
};

struct StudySpec {
  BlackBoxModel model;
  std::optional<JointInputModel> joint;
  std::optional<Dataset> dataset;
  std::vector<InputScheme> schemes;
  std::vector<double> theta = theta_grid();
  StudyMode mode;
  std::size_t n = 10000;
  Seed seed = 0;
  bool resample_per_theta = false;
  unsigned threads = 1;
  QoiPlugin qoi;

  const std::vector<std::string>& input_names() const { return joint ? joint->names : dataset->names; }
};

struct ThetaRecord {
  double theta = 0.0;
  std::optional<ScalarRecord> scalar;
  std::optional<LabelRecord> labels;
  std::vector<std::pair<std::string, double>> extra;
};

struct StudyResult {
  std::vector<double> theta;
  std::vector<ThetaRecord> records;
  ThetaRecord baseline;
  OutputKind output = OutputKind::scalar;
  std::size_t n = 0;
  Seed seed = 0;
  bool resample_per_theta = false;
};

// Flattened (metric, value) pairs of a record, in a fixed order.
inline std::vector<std::pair<std::string, double>> record_metrics(const ThetaRecord& r) {
  std::vector<std::pair<std::string, double>> out;
  if (r.scalar) {
    const auto& s = *r.scalar;
    out = {{"mean", s.mean}, {"sd", s.sd}, {"q0.025", s.q025}, {"q0.975", s.q975}, {"min", s.min}, {"max", s.max}};
  }
  if (r.labels) {
    for (const auto& [k, v] : r.labels->proportions) out.emplace_back("proportion_" + std::to_string(k), v);
    out.emplace_back("shift_rate", r.labels->shift_rate);
  }
  out.insert(out.end(), r.extra.begin(), r.extra.end());
  return out;
}

namespace detail {

// Rethrows the active library exception with `context` prepended, keeping
// its type.
[[noreturn]] inline void rethrow_with_context(const std::string& context) {
  try {
    throw;
  } catch (const EmptyClassError& e) {
    throw EmptyClassError(context + e.what(), e.first_index(), e.second_index());
  } catch (const InfeasibleError& e) {
    throw InfeasibleError(context + e.what());
  } catch (const SolverError& e) {
    throw SolverError(context + e.what());
  } catch (const QuadratureError& e) {
    throw QuadratureError(context + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(context + e.what());
  } catch (const ShapeError& e) {
    throw ShapeError(context + e.what());
  } catch (const LinearAlgebraError& e) {
    throw LinearAlgebraError(context + e.what());
  } catch (const DomainError& e) {
    throw DomainError(context + e.what());
  }
}

inline std::vector<double> evaluate_rows(const BlackBoxModel& model, const Eigen::MatrixXd& x, std::mutex& serial) {
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  std::vector<double> row(static_cast<std::size_t>(x.cols()));
  std::unique_lock lock(serial, std::defer_lock);
  if (!model.concurrent) lock.lock();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
    out[static_cast<std::size_t>(i)] = model.evaluate(row);
  }
  return out;
}

}  // namespace detail

// Marginal law of every input: the declared marginal for a joint model, the
// empirical measure of the column for a dataset.
inline std::vector<UnivariateMeasure> study_marginals(const StudySpec& spec) {
  if (spec.joint) return spec.joint->marginals;
  std::vector<UnivariateMeasure> out;
  for (Eigen::Index j = 0; j < spec.dataset->values.cols(); ++j) {
    const auto& col = spec.dataset->values.col(j);
    out.push_back(UnivariateMeasure::empirical(std::vector<double>(col.data(), col.data() + col.size())));
  }
  return out;
}

// Transport maps of every input at intensity theta; inputs without a scheme
// get the identity.
inline std::vector<TransportMap> study_maps(const StudySpec& spec, const std::vector<UnivariateMeasure>& marginals,
                                            double theta) {
  const auto& names = spec.input_names();
  std::vector<TransportMap> maps;
  for (const auto& m : marginals) maps.push_back(TransportMap::identity(m));
  for (const auto& s : spec.schemes) {
    const auto it = std::find(names.begin(), names.end(), s.input);
    if (it == names.end()) throw ConfigError("scheme refers to unknown input '" + s.input + "'");
    const auto j = static_cast<std::size_t>(it - names.begin());
    try {
      const ConstraintList constraints = materialize(s.scheme, theta);
      if (spec.mode.kind == ProjectionMode::exact) {
        maps[j] = TransportMap(marginals[j], project_exact(marginals[j], constraints));
      } else {
        SmoothOptions opts;
        opts.threads = 1;
        maps[j] = TransportMap(marginals[j], fit_smooth(marginals[j], constraints, spec.mode.degree, opts));
      }
    } catch (const Error&) {
      detail::rethrow_with_context("theta " + detail::fmt_double(theta) + ", input " + s.input + ": ");
    }
  }
  return maps;
}

inline void validate_study(const StudySpec& spec) {
  if (!spec.model.evaluate) throw ConfigError("study: model has no evaluator");
  if (spec.joint.has_value() == spec.dataset.has_value()) {
    throw ConfigError("study: exactly one of a joint model or a dataset is required");
  }
  if (spec.schemes.empty()) throw ConfigError("study: at least one perturbation scheme is required");
  if (spec.theta.empty()) throw ConfigError("study: empty theta grid");
  for (double t : spec.theta) {
    if (!(t >= -1.0 && t <= 1.0)) throw DomainError("study: theta " + detail::fmt_double(t) + " outside [-1, 1]");
  }
  if (spec.n == 0) throw ConfigError("study: n must be at least 1");
  if (spec.mode.kind == ProjectionMode::smooth && spec.mode.degree < 1) {
    throw ConfigError("study: smoothing degree must be at least 1");
  }
  if (spec.dataset && spec.resample_per_theta) {
    throw ConfigError("study: resampling per theta requires a parametric joint model");
  }
  const auto& names = spec.input_names();
  if (spec.dataset && static_cast<std::size_t>(spec.dataset->values.cols()) != names.size()) {
    throw ShapeError("study: dataset column count does not match its names");
  }
  if (!spec.model.input_names.empty() && spec.model.input_names != names) {
    throw ConfigError("study: model inputs do not match the input model");
  }
}

// Sampling, intervention, prediction and aggregation over the theta grid.
// By default every theta perturbs the same base sample, so differences
// between theta points come from the transport maps only.
inline StudyResult run_study(const StudySpec& spec) {
  validate_study(spec);
  const auto marginals = study_marginals(spec);
  std::mutex serial;

  SamplingOptions sampling;
  sampling.threads = 1;
  const Eigen::MatrixXd base =
      spec.joint ? sample_joint(*spec.joint, nullptr, spec.n, spec.seed, sampling) : spec.dataset->values;
  const std::vector<double> baseline_outputs = detail::evaluate_rows(spec.model, base, serial);

  auto make_record = [&](double theta, const std::vector<double>& outputs) {
    ThetaRecord r;
    r.theta = theta;
    if (spec.model.output == OutputKind::scalar) {
      r.scalar = aggregate_scalar(outputs);
    } else {
      r.labels = aggregate_labels(outputs, baseline_outputs);
    }
    if (spec.qoi) r.extra = spec.qoi(outputs);
    return r;
  };

  StudyResult result;
  result.theta = spec.theta;
  result.output = spec.model.output;
  result.n = static_cast<std::size_t>(base.rows());
  result.seed = spec.seed;
  result.resample_per_theta = spec.resample_per_theta;
  result.baseline = make_record(0.0, baseline_outputs);
  result.records.resize(spec.theta.size());

  parallel_for(spec.theta.size(), spec.threads, [&](std::size_t k) {
    const double theta = spec.theta[k];
    const auto maps = study_maps(spec, marginals, theta);
    Eigen::MatrixXd x;
    if (spec.resample_per_theta) {
      x = sample_joint(*spec.joint, &maps, spec.n, derive_seed(spec.seed, k + 1), sampling);
    } else {
      x = perturb_dataset(base, maps);
    }
    result.records[k] = make_record(theta, detail::evaluate_rows(spec.model, x, serial));
  });
  return result;
}

// ---------------------------------------------------------------------------
// Built-in river flood configuration.

inline JointInputModel flood_inputs() {
  JointInputModel m;
  m.names = {"Q", "Ks", "Zv", "Zm", "L", "B"};
  m.marginals = {
      UnivariateMeasure::truncated_gumbel(1013.0, 558.0, 500.0, 3000.0),
      UnivariateMeasure::truncated_gaussian(35.0, 5.0, 20.0, 50.0),
      UnivariateMeasure::triangular(49.0, 50.0, 51.0),
      UnivariateMeasure::triangular(54.0, 55.0, 56.0),
      UnivariateMeasure::triangular(4990.0, 5000.0, 5010.0),
      UnivariateMeasure::triangular(295.0, 300.0, 305.0),
  };
  m.correlation = Eigen::MatrixXd::Identity(6, 6);
  m.correlation(0, 1) = m.correlation(1, 0) = 0.5;
  m.correlation(2, 3) = m.correlation(3, 2) = 0.3;
  m.correlation(4, 5) = m.correlation(5, 4) = 0.3;
  return m;
}

inline BlackBoxModel flood_black_box() {
  BlackBoxModel m;
  m.input_names = {"Q", "Ks", "Zv", "Zm", "L", "B"};
  m.evaluate = [](std::span<const double> x) { return flood_model(x[0], x[1], x[2], x[3], x[4], x[5]); };
  return m;
}

// Fixed perturbations of Q, L and Zm plus the theta-driven dilatation of the
// Ks domain [20, 50] with eta = 2.
inline std::vector<InputScheme> flood_schemes(const JointInputModel& inputs) {
  const auto& q = inputs.marginals[inputs.index_of("Q")];
  const auto& l = inputs.marginals[inputs.index_of("L")];
  const auto& zm = inputs.marginals[inputs.index_of("Zm")];

  ConstraintList q_fixed = {{0.0, 500.0}, {1.0, 3200.0}};
  for (const auto& c : preserve_quantiles(q, {0.5})) q_fixed.push_back(c);
  for (const auto& c : offset_quantiles(q, {{0.15, 75.0}, {0.75, -125.0}})) q_fixed.push_back(c);

  ConstraintList l_fixed = {{0.0, 4988.0}, {1.0, 5012.0}};
  for (const auto& c : preserve_quantiles(l, {0.5})) l_fixed.push_back(c);

  ConstraintList zm_fixed = {{0.0, 54.0}, {1.0, 56.0}};
  for (const auto& c : preserve_quantiles(zm, {0.5})) zm_fixed.push_back(c);
  for (const auto& c : offset_quantiles(zm, {{0.8, 0.1}, {0.9, 0.1}, {0.25, -0.05}})) zm_fixed.push_back(c);

  return {
      {"Q", PerturbationScheme::explicit_list({}, q_fixed)},
      {"Ks", PerturbationScheme::dilatation(20.0, 50.0, 2.0)},
      {"L", PerturbationScheme::explicit_list({}, l_fixed)},
      {"Zm", PerturbationScheme::explicit_list({}, zm_fixed)},
  };
}

inline StudySpec flood_study(std::size_t n = 10000, Seed seed = 0) {
  StudySpec spec;
  spec.model = flood_black_box();
  spec.joint = flood_inputs();
  spec.schemes = flood_schemes(*spec.joint);
  spec.mode = {ProjectionMode::smooth, 12};
  spec.n = n;
  spec.seed = seed;
  return spec;
}

// ---------------------------------------------------------------------------
// Synthetic classifier: a logistic score on the first feature, thresholded at
// 1/2, so the decision boundary is x1 = boundary. The default boundary sits
// at the shifted 0.8-quantile of X1.

struct ClassifierFixture {
  double boundary = 16.0;
  double steepness = 2.0;
  double shift_level = 0.8;
  double eta0 = 13.5;
  double eta1 = 18.5;
};

inline JointInputModel classifier_inputs() {
  JointInputModel m;
  m.names = {"X1", "X2"};
  m.marginals = {UnivariateMeasure::uniform(0.0, 20.0), UnivariateMeasure::triangular(0.0, 5.0, 10.0)};
  m.correlation = Eigen::MatrixXd::Identity(2, 2);
  m.correlation(0, 1) = m.correlation(1, 0) = 0.4;
  return m;
}

inline BlackBoxModel classifier_black_box(const ClassifierFixture& f = {}) {
  BlackBoxModel m;
  m.input_names = {"X1", "X2"};
  m.output = OutputKind::label;
  m.evaluate = [f](std::span<const double> x) {
    const double score = 1.0 / (1.0 + std::exp(-f.steepness * (x[0] - f.boundary)));
    return score >= 0.5 ? 1.0 : 0.0;
  };
  return m;
}

// Shift of the X1 quantile at `shift_level` within [eta0, eta1], with the
// support and the lower quantiles 0.1, 0.15, ..., 0.6 held fixed.
inline std::vector<InputScheme> classifier_schemes(const JointInputModel& inputs, const ClassifierFixture& f = {}) {
  const auto& x1 = inputs.marginals[inputs.index_of("X1")];
  const auto support = x1.support();
  ConstraintList fixed = {{0.0, support.lower}, {1.0, support.upper}};
  for (int k = 2; k <= 12; ++k) {
    const double a = k / 20.0;
    fixed.push_back({a, x1.quantile_left(a)});
  }
  return {{"X1", PerturbationScheme::shift(f.shift_level, x1.quantile_left(f.shift_level), f.eta0, f.eta1, fixed)}};
}

inline StudySpec classifier_study(std::size_t n = 100000, Seed seed = 0, const ClassifierFixture& f = {}) {
  StudySpec spec;
  spec.model = classifier_black_box(f);
  spec.joint = classifier_inputs();
  spec.schemes = classifier_schemes(*spec.joint, f);
  spec.theta = theta_grid(11);
  spec.mode = {ProjectionMode::smooth, 9};
  spec.n = n;
  spec.seed = seed;
  return spec;
}

}  // namespace qcwass
