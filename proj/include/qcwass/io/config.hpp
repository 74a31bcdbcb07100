#pragma once

#include <algorithm>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "qcwass/error.hpp"
#include "qcwass/io/csv.hpp"
#include "qcwass/perturb.hpp"
#include "qcwass/study.hpp"

namespace qcwass::io {

inline constexpr int kConfigVersion = 1;

struct OutputPaths {
  std::string csv = "study.csv";
  std::string json = "study.json";
};

struct StudyConfig {
  StudySpec spec;
  OutputPaths output;
  std::string source;
};

// Marginal written in the compact notation
//   uniform(a, b)   triangular(a, mode, b)   normal(mean, sd) [lo, hi]
//   gumbel(location, scale) [lo, hi]   empirical(path) or empirical(path, header)
// Gaussian and Gumbel marginals need truncation bounds. Relative CSV paths
// are resolved against `base_dir`.
inline UnivariateMeasure parse_dist_spec(const std::string& text, const std::filesystem::path& base_dir = {}) {
  const auto fail = [&](const std::string& msg) -> ConfigError {
    return ConfigError("distribution '" + text + "': " + msg);
  };
  const auto open = text.find('(');
  const auto close = text.find(')');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw fail("expected name(arguments)");
  }
  std::string name(trim(std::string_view(text).substr(0, open)));
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
  const auto args = split_fields(std::string_view(text).substr(open + 1, close - open - 1));
  const std::string_view rest = trim(std::string_view(text).substr(close + 1));

  if (name == "empirical") {
    if (!rest.empty() || args.empty() || args.size() > 2 || (args.size() == 2 && args[1] != "header")) {
      throw fail("expected empirical(path) or empirical(path, header)");
    }
    std::filesystem::path p(args[0]);
    if (p.is_relative()) p = base_dir / p;
    return UnivariateMeasure::empirical(read_column_csv(p.string(), args.size() == 2));
  }

  std::vector<double> a;
  for (const auto& s : args) a.push_back(parse_number(s, "distribution '" + text + "'"));
  std::optional<std::pair<double, double>> bounds;
  if (!rest.empty()) {
    if (rest.front() != '[' || rest.back() != ']') throw fail("truncation bounds must be written [lo, hi]");
    const auto b = split_fields(rest.substr(1, rest.size() - 2));
    if (b.size() != 2) throw fail("truncation bounds must be written [lo, hi]");
    bounds = {parse_number(b[0], "distribution '" + text + "'"), parse_number(b[1], "distribution '" + text + "'")};
  }
  const auto arity = [&](std::size_t k, bool truncated) {
    if (a.size() != k) throw fail("expected " + std::to_string(k) + " parameters");
    if (truncated != bounds.has_value()) throw fail(truncated ? "missing truncation bounds" : "unexpected bounds");
  };
  try {
    if (name == "uniform" || name == "u") {
      arity(2, false);
      return UnivariateMeasure::uniform(a[0], a[1]);
    }
    if (name == "triangular" || name == "t") {
      arity(3, false);
      return UnivariateMeasure::triangular(a[0], a[1], a[2]);
    }
    if (name == "normal" || name == "gaussian" || name == "n") {
      arity(2, true);
      return UnivariateMeasure::truncated_gaussian(a[0], a[1], bounds->first, bounds->second);
    }
    if (name == "gumbel" || name == "g") {
      arity(2, true);
      return UnivariateMeasure::truncated_gumbel(a[0], a[1], bounds->first, bounds->second);
    }
  } catch (const DomainError& e) {
    throw fail(e.what());
  }
  throw fail("unknown distribution '" + name + "'");
}

// A YAML node together with its dotted path, for anchored error messages.
class Field {
 public:
  Field(YAML::Node node, std::string path, std::string source, YAML::Mark mark)
      : node_(std::move(node)), path_(std::move(path)), source_(std::move(source)), mark_(mark) {}

  const std::string& path() const noexcept { return path_; }
  const YAML::Node& node() const noexcept { return node_; }

  [[noreturn]] void fail(const std::string& msg) const {
    std::string where = source_;
    if (!mark_.is_null()) where += ":" + std::to_string(mark_.line + 1) + ":" + std::to_string(mark_.column + 1);
    throw ConfigError(where + ": " + (path_.empty() ? std::string("<root>") : path_) + ": " + msg);
  }

  bool has(const std::string& key) const { return node_.IsMap() && node_[key].IsDefined(); }

  Field at(const std::string& key) const {
    if (!node_.IsMap()) fail("expected a mapping");
    const YAML::Node child = node_[key];
    if (!child.IsDefined() || child.IsNull()) Field(node_, join(key), source_, mark_).fail("missing field");
    return Field(child, join(key), source_, child.Mark());
  }

  std::optional<Field> get(const std::string& key) const {
    if (!has(key) || node_[key].IsNull()) return std::nullopt;
    return at(key);
  }

  std::vector<Field> items() const {
    if (!node_.IsSequence()) fail("expected a list");
    std::vector<Field> out;
    for (std::size_t i = 0; i < node_.size(); ++i) {
      out.emplace_back(node_[i], path_ + "[" + std::to_string(i) + "]", source_, node_[i].Mark());
    }
    return out;
  }

  void allow_keys(std::initializer_list<const char*> keys) const {
    if (!node_.IsMap()) fail("expected a mapping");
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
        Field(kv.first, join(key), source_, kv.first.Mark()).fail("unknown field");
      }
    }
  }

  std::string text() const {
    if (!node_.IsScalar()) fail("expected a scalar");
    return node_.Scalar();
  }

  double number() const { return parse(node_, "a number", [](const YAML::Node& n) { return n.as<double>(); }); }

  long long integer() const {
    return parse(node_, "an integer", [](const YAML::Node& n) { return n.as<long long>(); });
  }

  std::size_t count(long long min) const {
    const long long v = integer();
    if (v < min) fail("must be at least " + std::to_string(min));
    return static_cast<std::size_t>(v);
  }

  bool boolean() const { return parse(node_, "true or false", [](const YAML::Node& n) { return n.as<bool>(); }); }

  std::pair<double, double> interval() const {
    const auto v = items();
    if (v.size() != 2) fail("expected [lower, upper]");
    return {v[0].number(), v[1].number()};
  }

 private:
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class F>
  auto parse(const YAML::Node& n, const char* what, F f) const -> decltype(f(n)) {
    if (!n.IsScalar()) fail(std::string("expected ") + what);
    try {
      return f(n);
    } catch (const YAML::Exception&) {
      fail(std::string("expected ") + what + ", found '" + n.Scalar() + "'");
    }
  }

  YAML::Node node_;
  std::string path_;
  std::string source_;
  YAML::Mark mark_;
};

namespace detail {

// (alpha, value) | (alpha, preserve: true) | (alpha, offset: delta), the last
// two relative to the base gqf of the input.
inline QuantileConstraint parse_constraint(const Field& f, const UnivariateMeasure& base) {
  f.allow_keys({"alpha", "value", "preserve", "offset"});
  const double alpha = f.at("alpha").number();
  if (!(alpha >= 0.0 && alpha <= 1.0)) f.at("alpha").fail("level outside [0, 1]");
  const int given = static_cast<int>(f.has("value")) + static_cast<int>(f.has("preserve")) +
                    static_cast<int>(f.has("offset"));
  if (given != 1) f.fail("give exactly one of value, preserve, offset");
  if (const auto v = f.get("value")) return {alpha, v->number()};
  if (const auto p = f.get("preserve")) {
    if (!p->boolean()) p->fail("only 'preserve: true' is meaningful");
    return {alpha, base.quantile_left(alpha)};
  }
  return {alpha, base.quantile_left(alpha) + f.at("offset").number()};
}

inline ConstraintList parse_constraints(const std::optional<Field>& f, const UnivariateMeasure& base) {
  ConstraintList out;
  if (!f) return out;
  for (const auto& item : f->items()) out.push_back(parse_constraint(item, base));
  return out;
}

inline PerturbationScheme parse_scheme(const Field& f, const UnivariateMeasure& base) {
  const std::string kind = f.at("kind").text();
  const ConstraintList fixed = parse_constraints(f.get("fixed"), base);
  try {
    if (kind == "shift") {
      f.allow_keys({"input", "kind", "alpha", "p_alpha", "eta", "fixed"});
      const double alpha = f.at("alpha").number();
      if (!(alpha >= 0.0 && alpha <= 1.0)) f.at("alpha").fail("level outside [0, 1]");
      const double p_alpha = f.has("p_alpha") ? f.at("p_alpha").number() : base.quantile_left(alpha);
      const auto [eta0, eta1] = f.at("eta").interval();
      return PerturbationScheme::shift(alpha, p_alpha, eta0, eta1, fixed);
    }
    if (kind == "dilatation") {
      f.allow_keys({"input", "kind", "omega", "eta", "fixed"});
      const auto support = base.support();
      const auto [o0, o1] = f.has("omega") ? f.at("omega").interval() : std::pair{support.lower, support.upper};
      return PerturbationScheme::dilatation(o0, o1, f.at("eta").number(), fixed);
    }
    if (kind == "explicit") {
      f.allow_keys({"input", "kind", "constraints", "fixed"});
      return PerturbationScheme::explicit_list(parse_constraints(f.get("constraints"), base), fixed);
    }
  } catch (const DomainError& e) {
    f.fail(e.what());
  }
  f.at("kind").fail("unknown scheme kind '" + kind + "' (shift, dilatation, explicit)");
}

inline Eigen::MatrixXd parse_correlation(const Field& f, const std::vector<std::string>& names) {
  const auto d = static_cast<Eigen::Index>(names.size());
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(d, d);
  if (const auto m = f.get("matrix")) {
    const auto rows = m->items();
    if (static_cast<Eigen::Index>(rows.size()) != d) m->fail("expected " + std::to_string(d) + " rows");
    for (Eigen::Index i = 0; i < d; ++i) {
      const auto cols = rows[static_cast<std::size_t>(i)].items();
      if (static_cast<Eigen::Index>(cols.size()) != d) rows[static_cast<std::size_t>(i)].fail("wrong row length");
      for (Eigen::Index j = 0; j < d; ++j) r(i, j) = cols[static_cast<std::size_t>(j)].number();
    }
  }
  if (const auto p = f.get("pairs")) {
    for (const auto& item : p->items()) {
      const auto v = item.items();
      if (v.size() != 3) item.fail("expected [input, input, correlation]");
      const auto index = [&](const Field& n) {
        const auto it = std::find(names.begin(), names.end(), n.text());
        if (it == names.end()) n.fail("unknown input '" + n.text() + "'");
        return it - names.begin();
      };
      const auto i = index(v[0]);
      const auto j = index(v[1]);
      if (i == j) item.fail("a pair needs two different inputs");
      r(i, j) = r(j, i) = v[2].number();
    }
  }
  try {
    correlation_factor(r);
  } catch (const Error& e) {
    f.fail(e.what());
  }
  return r;
}

inline BlackBoxModel parse_model(const Field& f, std::size_t inputs) {
  std::string kind;
  std::optional<Field> params;
  if (f.node().IsScalar()) {
    kind = f.text();
  } else {
    f.allow_keys({"kind", "boundary", "steepness"});
    kind = f.at("kind").text();
    params = f;
  }
  BlackBoxModel m;
  if (kind == "flood") {
    if (params && (params->has("boundary") || params->has("steepness"))) f.fail("flood model takes no parameters");
    m = flood_black_box();
  } else if (kind == "classifier") {
    ClassifierFixture fixture;
    if (params && params->has("boundary")) fixture.boundary = params->at("boundary").number();
    if (params && params->has("steepness")) fixture.steepness = params->at("steepness").number();
    m = classifier_black_box(fixture);
  } else {
    f.fail("unknown model '" + kind + "' (flood, classifier)");
  }
  if (m.input_names.size() != inputs) {
    f.fail("model '" + kind + "' takes " + std::to_string(m.input_names.size()) + " inputs, config declares " +
           std::to_string(inputs));
  }
  return m;
}

}  // namespace detail

// Validated study description from a parsed YAML document. Input files are
// resolved against `base_dir`.
inline StudyConfig parse_config(const YAML::Node& doc, const std::string& source,
                                const std::filesystem::path& base_dir = {}) {
  const Field root(doc, "", source, doc.Mark());
  if (!doc.IsMap()) root.fail("expected a mapping at top level");
  root.allow_keys({"version", "inputs", "copula", "model", "schemes", "theta", "mode", "n", "seed",
                   "resample_per_theta", "threads", "output"});
  if (root.at("version").integer() != kConfigVersion) {
    root.at("version").fail("unsupported version (expected " + std::to_string(kConfigVersion) + ")");
  }

  StudyConfig cfg;
  cfg.source = source;
  StudySpec& spec = cfg.spec;

  const auto copula = root.get("copula");
  std::string copula_kind = "gaussian";
  if (copula) copula_kind = copula->at("kind").text();
  if (copula_kind == "empirical") {
    copula->allow_keys({"kind", "dataset"});
    if (root.has("inputs")) root.at("inputs").fail("inputs come from the dataset columns with an empirical copula");
    const Field path = copula->at("dataset");
    std::filesystem::path p(path.text());
    if (p.is_relative()) p = base_dir / p;
    if (!std::filesystem::exists(p)) path.fail("file '" + p.string() + "' does not exist");
    spec.dataset = read_dataset_csv(p.string());
  } else if (copula_kind == "gaussian") {
    JointInputModel joint;
    for (const auto& item : root.at("inputs").items()) {
      item.allow_keys({"name", "dist", "csv", "header"});
      const std::string name = item.at("name").text();
      if (std::find(joint.names.begin(), joint.names.end(), name) != joint.names.end()) {
        item.at("name").fail("duplicate input '" + name + "'");
      }
      if (item.has("dist") == item.has("csv")) item.fail("give exactly one of dist, csv");
      try {
        if (const auto d = item.get("dist")) {
          joint.marginals.push_back(parse_dist_spec(d->text(), base_dir));
        } else {
          const Field csv = item.at("csv");
          std::filesystem::path p(csv.text());
          if (p.is_relative()) p = base_dir / p;
          if (!std::filesystem::exists(p)) csv.fail("file '" + p.string() + "' does not exist");
          const bool header = item.has("header") && item.at("header").boolean();
          joint.marginals.push_back(UnivariateMeasure::empirical(read_column_csv(p.string(), header)));
        }
      } catch (const ConfigError& e) {
        if (std::string(e.what()).rfind(source, 0) == 0) throw;
        item.fail(e.what());
      }
      joint.names.push_back(name);
    }
    if (joint.names.empty()) root.at("inputs").fail("at least one input is required");
    if (copula) {
      copula->allow_keys({"kind", "matrix", "pairs"});
      joint.correlation = detail::parse_correlation(*copula, joint.names);
    } else {
      joint.correlation = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(joint.names.size()),
                                                    static_cast<Eigen::Index>(joint.names.size()));
    }
    spec.joint = std::move(joint);
  } else {
    copula->at("kind").fail("unknown copula '" + copula_kind + "' (gaussian, empirical)");
  }

  const auto& names = spec.input_names();
  spec.model = detail::parse_model(root.at("model"), names.size());
  spec.model.input_names = names;

  const auto marginals = study_marginals(spec);
  for (const auto& item : root.at("schemes").items()) {
    const Field input = item.at("input");
    const auto it = std::find(names.begin(), names.end(), input.text());
    if (it == names.end()) input.fail("unknown input '" + input.text() + "'");
    const auto j = static_cast<std::size_t>(it - names.begin());
    spec.schemes.push_back({input.text(), detail::parse_scheme(item, marginals[j])});
  }
  if (spec.schemes.empty()) root.at("schemes").fail("at least one scheme is required");

  if (const auto t = root.get("theta")) {
    if (t->node().IsMap()) {
      t->allow_keys({"points"});
      spec.theta = theta_grid(t->at("points").count(2));
    } else {
      spec.theta.clear();
      for (const auto& v : t->items()) {
        const double theta = v.number();
        if (!(theta >= -1.0 && theta <= 1.0)) v.fail("theta outside [-1, 1]");
        spec.theta.push_back(theta);
      }
      if (spec.theta.empty()) t->fail("empty theta grid");
    }
  }

  if (const auto m = root.get("mode")) {
    const std::string kind = m->node().IsScalar() ? m->text() : m->at("kind").text();
    if (!m->node().IsScalar()) m->allow_keys({"kind", "degree"});
    if (kind == "exact") {
      spec.mode.kind = ProjectionMode::exact;
      if (m->has("degree")) m->at("degree").fail("exact mode takes no degree");
    } else if (kind == "smooth") {
      spec.mode.kind = ProjectionMode::smooth;
      if (m->node().IsMap() && m->has("degree")) {
        spec.mode.degree = static_cast<int>(m->at("degree").count(1));
      }
    } else {
      m->fail("unknown mode '" + kind + "' (exact, smooth)");
    }
  }

  if (const auto n = root.get("n")) spec.n = n->count(1);
  if (const auto s = root.get("seed")) spec.seed = static_cast<Seed>(s->count(0));
  if (const auto r = root.get("resample_per_theta")) spec.resample_per_theta = r->boolean();
  if (spec.dataset && spec.resample_per_theta) {
    root.at("resample_per_theta").fail("resampling needs a gaussian copula model");
  }
  if (const auto t = root.get("threads")) spec.threads = static_cast<unsigned>(t->count(1));

  if (const auto out = root.get("output")) {
    out->allow_keys({"csv", "json"});
    if (const auto c = out->get("csv")) cfg.output.csv = c->text();
    if (const auto j = out->get("json")) cfg.output.json = j->text();
  }
  return cfg;
}

inline StudyConfig parse_config_text(const std::string& text, const std::string& source = "<config>",
                                     const std::filesystem::path& base_dir = {}) {
  YAML::Node doc;
  try {
    doc = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                      ": " + e.msg);
  }
  return parse_config(doc, source, base_dir);
}

inline StudyConfig load_config(const std::string& path) {
  if (!std::filesystem::exists(path)) throw ConfigError(path + ": file does not exist");
  YAML::Node doc;
  try {
    doc = YAML::LoadFile(path);
  } catch (const YAML::Exception& e) {
    throw ConfigError(path + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                      ": " + e.msg);
  }
  return parse_config(doc, path, std::filesystem::path(path).parent_path());
}

// Built-in studies: "flood" (smooth degree 12) and "classifier".
inline StudyConfig builtin_config(const std::string& name) {
  StudyConfig cfg;
  cfg.source = "builtin:" + name;
  if (name == "flood") {
    cfg.spec = flood_study(10000, 0);
  } else if (name == "classifier") {
    cfg.spec = classifier_study(10000, 0);
  } else {
    throw ConfigError("unknown built-in study '" + name + "' (flood, classifier)");
  }
  cfg.output = {name + ".csv", name + ".json"};
  return cfg;
}

}  // namespace qcwass::io
