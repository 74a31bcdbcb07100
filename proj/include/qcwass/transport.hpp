#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qcwass/error.hpp"
#include "qcwass/measures.hpp"
#include "qcwass/parallel.hpp"
#include "qcwass/project.hpp"
#include "qcwass/random.hpp"
#include "qcwass/smooth.hpp"

namespace qcwass {

// Monotone map x -> F^<-_Q(F_P(x)) carrying the marginal P onto Q.
class TransportMap {
 public:
  TransportMap(UnivariateMeasure source, UnivariateMeasure target)
      : source_(std::move(source)), target_(std::move(target)) {}

  TransportMap(UnivariateMeasure source, PiecewiseGqf target)
      : source_(std::move(source)),
        target_(as_measure(target)),
        identity_(target.is_identity() && target.base().model_ptr() == source_.model_ptr()) {}

  TransportMap(UnivariateMeasure source, SmoothGqf target)
      : source_(std::move(source)), target_(as_measure(std::move(target))) {}

  static TransportMap identity(UnivariateMeasure source) {
    TransportMap t(source, source);
    t.identity_ = true;
    return t;
  }

  const UnivariateMeasure& source() const noexcept { return source_; }
  const UnivariateMeasure& target() const noexcept { return target_; }

  // True when the map is known to fix every point of the source support.
  bool is_identity() const noexcept { return identity_ || source_.model_ptr() == target_.model_ptr(); }

  double operator()(double x) const {
    if (is_identity()) return x;
    return target_.quantile_left(source_.cdf(x));
  }

 private:
  UnivariateMeasure source_;
  UnivariateMeasure target_;
  bool identity_ = false;
};

inline double apply_map(const TransportMap& t, double x) { return t(x); }

namespace detail {

// Row order of a column with ties broken by first occurrence.
inline std::vector<std::size_t> stable_order(const Eigen::Ref<const Eigen::VectorXd>& column) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(column.size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return column[static_cast<Eigen::Index>(a)] < column[static_cast<Eigen::Index>(b)];
  });
  return idx;
}

inline bool is_column_measure(const UnivariateMeasure& m, const Eigen::Ref<const Eigen::VectorXd>& column) {
  const auto* emp = m.as<EmpiricalModel>();
  if (!emp || emp->sample().size() != static_cast<std::size_t>(column.size())) return false;
  std::vector<double> sorted(column.data(), column.data() + column.size());
  std::sort(sorted.begin(), sorted.end());
  const auto v = emp->sample().values();
  return std::equal(sorted.begin(), sorted.end(), v.begin(), v.end());
}

}  // namespace detail

// Applies maps[j] to column j. When a map's source is the empirical measure
// of its own column, the row of stable rank k (1-based) receives
// F^<-_Q(k / n); ties therefore keep their original relative order.
inline Eigen::MatrixXd perturb_dataset(const Eigen::MatrixXd& data, const std::vector<TransportMap>& maps,
                                       unsigned threads = 1) {
  if (static_cast<std::size_t>(data.cols()) != maps.size()) {
    throw ShapeError("perturb_dataset: " + std::to_string(maps.size()) + " maps for " +
                     std::to_string(data.cols()) + " columns");
  }
  Eigen::MatrixXd out = data;
  const auto n = static_cast<std::size_t>(data.rows());
  parallel_for(maps.size(), threads, [&](std::size_t j) {
    const auto& map = maps[j];
    if (map.is_identity()) return;
    const auto col = static_cast<Eigen::Index>(j);
    if (detail::is_column_measure(map.source(), data.col(col))) {
      const auto order = detail::stable_order(data.col(col));
      for (std::size_t k = 0; k < n; ++k) {
        const double level = static_cast<double>(k + 1) / static_cast<double>(n);
        out(static_cast<Eigen::Index>(order[k]), col) = map.target().quantile_left(level);
      }
    } else {
      for (Eigen::Index i = 0; i < data.rows(); ++i) out(i, col) = map(data(i, col));
    }
  });
  return out;
}

// Marginals tied together by a Gaussian copula with correlation matrix R.
struct JointInputModel {
  std::vector<std::string> names;
  std::vector<UnivariateMeasure> marginals;
  Eigen::MatrixXd correlation;

  std::size_t dimension() const noexcept { return marginals.size(); }

  std::size_t index_of(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw ConfigError("unknown input '" + name + "'");
    return static_cast<std::size_t>(it - names.begin());
  }
};

// Lower Cholesky factor of a correlation matrix, after checking symmetry and
// the unit diagonal.
inline Eigen::MatrixXd correlation_factor(const Eigen::MatrixXd& r) {
  if (r.rows() != r.cols()) throw ShapeError("correlation matrix is not square");
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    if (std::abs(r(i, i) - 1.0) > 1e-12) throw LinearAlgebraError("correlation matrix: diagonal entry is not 1");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (std::abs(r(i, j) - r(j, i)) > 1e-12) throw LinearAlgebraError("correlation matrix is not symmetric");
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(r);
  if (llt.info() != Eigen::Success) throw LinearAlgebraError("correlation matrix is not positive definite");
  Eigen::MatrixXd l = llt.matrixL();
  if (!l.allFinite() || (l.diagonal().array() <= 0.0).any()) {
    throw LinearAlgebraError("correlation matrix is not positive definite");
  }
  return l;
}

struct SamplingOptions {
  unsigned threads = 1;
  std::size_t block_rows = 4096;
};

// n draws from the joint model, optionally pushed through per-input transport
// maps. Rows are generated in fixed-size blocks, each with its own stream
// derived from `seed`, so the output does not depend on the thread count.
inline Eigen::MatrixXd sample_joint(const JointInputModel& model, const std::vector<TransportMap>* maps, std::size_t n,
                                    Seed seed, const SamplingOptions& opts = {}) {
  const std::size_t d = model.dimension();
  if (d == 0) throw ShapeError("sample_joint: model has no inputs");
  if (static_cast<std::size_t>(model.correlation.rows()) != d) {
    throw ShapeError("sample_joint: correlation matrix size does not match the marginals");
  }
  if (maps && maps->size() != d) throw ShapeError("sample_joint: one transport map per input required");
  if (n == 0) throw DomainError("sample_joint: n must be at least 1");
  const Eigen::MatrixXd l = correlation_factor(model.correlation);
  const auto di = static_cast<Eigen::Index>(d);

  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), di);
  const std::size_t blocks = (n + opts.block_rows - 1) / opts.block_rows;
  parallel_for(blocks, opts.threads, [&](std::size_t b) {
    Rng rng(derive_seed(seed, b));
    NormalSource normal;
    Eigen::VectorXd z(di);
    const std::size_t end = std::min(n, (b + 1) * opts.block_rows);
    for (std::size_t row = b * opts.block_rows; row < end; ++row) {
      for (Eigen::Index j = 0; j < di; ++j) z[j] = normal(rng);
      const Eigen::VectorXd y = l * z;
      for (Eigen::Index j = 0; j < di; ++j) {
        const double u = detail::normal_cdf(y[j]);
        double x = model.marginals[static_cast<std::size_t>(j)].quantile_left(u);
        if (maps) x = (*maps)[static_cast<std::size_t>(j)](x);
        out(static_cast<Eigen::Index>(row), j) = x;
      }
    }
  });
  return out;
}

// Average ranks (1-based), ties sharing the mean rank.
inline Eigen::VectorXd average_ranks(const Eigen::Ref<const Eigen::VectorXd>& column) {
  const auto order = detail::stable_order(column);
  Eigen::VectorXd ranks(column.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && column[static_cast<Eigen::Index>(order[j + 1])] ==
                                       column[static_cast<Eigen::Index>(order[i])]) {
      ++j;
    }
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[static_cast<Eigen::Index>(order[k])] = rank;
    i = j + 1;
  }
  return ranks;
}

inline Eigen::MatrixXd pearson_matrix(const Eigen::MatrixXd& data) {
  const Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered;
  const Eigen::VectorXd sd = cov.diagonal().array().sqrt();
  return cov.array() / (sd * sd.transpose()).array();
}

inline Eigen::MatrixXd spearman_matrix(const Eigen::MatrixXd& data) {
  Eigen::MatrixXd ranks(data.rows(), data.cols());
  for (Eigen::Index j = 0; j < data.cols(); ++j) ranks.col(j) = average_ranks(data.col(j));
  return pearson_matrix(ranks);
}

}  // namespace qcwass
