#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qcwass/error.hpp"
#include "qcwass/project.hpp"
#include "qcwass/smooth.hpp"
#include "qcwass/study.hpp"

namespace qcwass::io {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

inline Json to_json(const SolverReport& r) {
  return Json{{"converged", r.converged},
              {"newton_steps", r.newton_steps},
              {"duality_gap", r.duality_gap},
              {"primal_residual", r.primal_residual},
              {"dual_residual", r.dual_residual},
              {"min_eigenvalue", r.min_eigenvalue}};
}

inline std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Levels k / (points - 1); the last point uses the left-continuous gqf so
// that the upper endpoint is reported.
template <class Right, class Left>
Json sampled_gqf(const Right& right, const Left& left, std::size_t points) {
  std::vector<double> levels(points), values(points);
  for (std::size_t k = 0; k < points; ++k) {
    levels[k] = static_cast<double>(k) / static_cast<double>(points - 1);
    values[k] = k + 1 == points ? left(1.0) : right(levels[k]);
  }
  return Json{{"levels", levels}, {"values", values}};
}

inline Json to_json(const SmoothGqf& g) {
  Json segments = Json::array();
  for (const auto& s : g.segments()) {
    segments.push_back(Json{{"t0", s.t0},
                            {"t1", s.t1},
                            {"local", to_vector(s.local)},
                            {"monomial", to_vector(s.monomial())},
                            {"objective", s.objective},
                            {"solver", to_json(s.report)}});
  }
  return Json{{"version", kFormatVersion},
              {"kind", "smooth_gqf"},
              {"degree", g.degree()},
              {"knots", g.knots()},
              {"scaling", {{"offset", g.scaling().offset}, {"scale", g.scaling().scale}}},
              {"segments", segments}};
}

// Inverse of to_json(SmoothGqf); solver diagnostics are not restored.
inline SmoothGqf smooth_gqf_from_json(const Json& j) {
  try {
    if (j.at("kind") != "smooth_gqf") throw ConfigError("smooth gqf json: unexpected kind");
    const int degree = j.at("degree").get<int>();
    const ValueScaling scaling{j.at("scaling").at("offset").get<double>(), j.at("scaling").at("scale").get<double>()};
    std::vector<SegmentFit> segments;
    for (const auto& s : j.at("segments")) {
      const auto local = s.at("local").get<std::vector<double>>();
      if (static_cast<int>(local.size()) != degree + 1) throw ConfigError("smooth gqf json: coefficient count");
      SegmentFit fit{s.at("t0").get<double>(), s.at("t1").get<double>(), degree, scaling,
                     Eigen::Map<const Eigen::VectorXd>(local.data(), static_cast<Eigen::Index>(local.size())),
                     SolverReport{}, s.value("objective", 0.0)};
      segments.push_back(std::move(fit));
    }
    return SmoothGqf(j.at("knots").get<std::vector<double>>(), std::move(segments));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("smooth gqf json: ") + e.what());
  }
}

inline Json to_json(const PiecewiseGqf& g, std::size_t grid_points = 1001) {
  Json constraints = Json::array();
  for (const auto& c : g.constraints()) constraints.push_back(Json{{"alpha", c.alpha}, {"value", c.b}});
  Json segments = Json::array();
  for (const auto& s : g.segments()) {
    segments.push_back(Json{{"alpha", s.alpha}, {"value", s.value}, {"lower", s.lower}, {"upper", s.upper}});
  }
  Json atoms = Json::array();
  for (const auto& a : g.atoms()) atoms.push_back(Json{{"location", a.location}, {"mass", a.mass}});
  Json gaps = Json::array();
  for (const auto& v : g.zero_mass_intervals()) gaps.push_back(Json{{"lower", v.lower}, {"upper", v.upper}});
  return Json{{"version", kFormatVersion},
              {"kind", "piecewise_gqf"},
              {"base", g.base().describe()},
              {"constraints", constraints},
              {"segments", segments},
              {"atoms", atoms},
              {"zero_mass_intervals", gaps},
              {"gqf", sampled_gqf([&](double y) { return g.quantile_right(y); },
                                  [&](double y) { return g.quantile_left(y); }, grid_points)}};
}

inline Json metrics_json(const ThetaRecord& r) {
  Json out = Json::object();
  for (const auto& [name, value] : record_metrics(r)) out[name] = value;
  return out;
}

inline Json to_json(const StudyResult& result) {
  Json records = Json::array();
  for (const auto& r : result.records) records.push_back(Json{{"theta", r.theta}, {"metrics", metrics_json(r)}});
  return Json{{"version", kFormatVersion},
              {"output", result.output == OutputKind::scalar ? "scalar" : "label"},
              {"n", result.n},
              {"seed", result.seed},
              {"resample_per_theta", result.resample_per_theta},
              {"theta", result.theta},
              {"baseline", metrics_json(result.baseline)},
              {"records", records}};
}

inline void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(path + ": cannot open file for writing");
  out << j.dump(2) << '\n';
}

inline Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open file");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace qcwass::io
