#pragma once

#include <hgr/classify/standardize.hpp>
#include <hgr/error.hpp>
#include <hgr/features.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace hgr::classify {

struct LdaOptions {
  double shrinkage = 0.0;
  double tol = 1e-4;
  std::vector<double> priors{};  // empty: uniform
  bool standardize = true;
  bool keep_covariance = true;
};

struct LdaModel {
  std::vector<int> classes;
  Eigen::MatrixXd class_means;  // K x p, standardized space
  Eigen::MatrixXd pooled_cov;   // shrunk estimate; empty unless kept
  double shrinkage = 0.0;
  double tol = 1e-4;
  Eigen::VectorXd priors;
  Standardizer standardizer;
  Eigen::MatrixXd weights;  // p x K: shrunk-covariance inverse times class means
  Eigen::VectorXd bias;     // K
  std::vector<ColumnId> schema;

  Eigen::Index n_features() const { return weights.rows(); }

  /// Discriminant scores, one column per class.
  Eigen::MatrixXd decision(const Eigen::MatrixXd& X) const {
    if (X.cols() != n_features()) fail(ErrorCode::SchemaMismatch, "feature count differs from training");
    Eigen::MatrixXd s = standardizer.apply(X) * weights;
    s.rowwise() += bias.transpose();
    return s;
  }
};

namespace detail {

/// Row-wise argmax; exact ties go to the earliest (lowest id) class.
inline std::vector<int> argmax_rows(const Eigen::MatrixXd& scores, const std::vector<int>& classes) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < scores.cols(); ++k)
      if (scores(i, k) > scores(i, best)) best = k;
    out[static_cast<std::size_t>(i)] = classes[static_cast<std::size_t>(best)];
  }
  return out;
}

inline std::vector<int> class_set(const std::vector<int>& y) {
  std::vector<int> c(y.begin(), y.end());
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

/// Everything about a training set that does not depend on the shrinkage,
/// so a grid can be swept with one factorization per point.
/// When p > n the n x n Gram of the centered data is used (Woodbury).
class LdaProblem {
 public:
  LdaProblem(const Eigen::MatrixXd& X, const std::vector<int>& y) {
    if (static_cast<std::size_t>(X.rows()) != y.size()) fail(ErrorCode::LengthMismatch, "rows and labels differ");
    classes_ = class_set(y);
    if (classes_.size() < 2) fail(ErrorCode::InvalidArgument, "LDA needs at least two classes");
    const auto K = static_cast<Eigen::Index>(classes_.size());
    n_ = X.rows();
    p_ = X.cols();
    std::map<int, Eigen::Index> index;
    for (Eigen::Index k = 0; k < K; ++k) index[classes_[static_cast<std::size_t>(k)]] = k;
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(K), 0);
    means_ = Eigen::MatrixXd::Zero(K, p_);
    for (Eigen::Index i = 0; i < n_; ++i) {
      const auto k = index[y[static_cast<std::size_t>(i)]];
      means_.row(k) += X.row(i);
      ++counts[static_cast<std::size_t>(k)];
    }
    for (Eigen::Index k = 0; k < K; ++k) {
      if (counts[static_cast<std::size_t>(k)] < 2)
        fail(ErrorCode::ClassTooSmall, "class " + std::to_string(classes_[static_cast<std::size_t>(k)]) +
                                           " has fewer than 2 rows");
      means_.row(k) /= static_cast<double>(counts[static_cast<std::size_t>(k)]);
    }
    xc_.resize(n_, p_);
    for (Eigen::Index i = 0; i < n_; ++i) xc_.row(i) = X.row(i) - means_.row(index[y[static_cast<std::size_t>(i)]]);
    dof_ = static_cast<double>(n_ - K);
    trace_ = xc_.squaredNorm();
    dual_ = p_ > n_;
    if (dual_) {
      inner_ = Eigen::MatrixXd::Zero(n_, n_);
      inner_.selfadjointView<Eigen::Lower>().rankUpdate(xc_);
      inner_ = inner_.selfadjointView<Eigen::Lower>();
      xcm_ = xc_ * means_.transpose();
    } else {
      inner_ = Eigen::MatrixXd::Zero(p_, p_);
      inner_.selfadjointView<Eigen::Lower>().rankUpdate(xc_.transpose());
      inner_ = inner_.selfadjointView<Eigen::Lower>();
    }
  }

  const std::vector<int>& classes() const { return classes_; }
  const Eigen::MatrixXd& means() const { return means_; }
  Eigen::Index features() const { return p_; }

  /// Average per-feature variance of the pooled covariance (trace / p).
  double scale() const { return trace_ / (dof_ * static_cast<double>(p_)); }

  /// (1 - lambda) * pooled + lambda * scale * I
  Eigen::MatrixXd covariance(double lambda) const {
    Eigen::MatrixXd s = dual_ ? Eigen::MatrixXd(xc_.transpose() * xc_) : inner_;
    s *= (1.0 - lambda) / dof_;
    s.diagonal().array() += lambda * scale();
    return s;
  }

  struct Solution {
    Eigen::MatrixXd weights;
    Eigen::VectorXd bias;
  };

  Solution solve(double lambda, double tol, const Eigen::VectorXd& log_priors) const {
    if (lambda < 0.0 || lambda > 1.0) fail(ErrorCode::InvalidArgument, "shrinkage must lie in [0, 1]");
    if (!(tol > 0.0)) fail(ErrorCode::InvalidArgument, "tol must be positive");
    const double c = scale();
    if (!(c > 0.0)) fail(ErrorCode::SingularCovariance, "pooled covariance is zero");
    Solution s;
    if (lambda == 1.0) {
      s.weights = means_.transpose() / c;
    } else if (!dual_) {
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(covariance(lambda));
      const Eigen::VectorXd d = ldlt.vectorD();
      if (ldlt.info() != Eigen::Success || d.minCoeff() < tol * c)
        fail(ErrorCode::SingularCovariance, "shrunk covariance is not positive definite");
      s.weights = ldlt.solve(means_.transpose());
    } else {
      if (lambda < tol) fail(ErrorCode::SingularCovariance, "more features than pooled degrees of freedom");
      // (aI + b Xc'Xc)^-1 = (I - Xc' (a/b I + Xc Xc')^-1 Xc) / a
      const double a = lambda * c;
      const double b = (1.0 - lambda) / dof_;
      Eigen::MatrixXd g = inner_;
      g.diagonal().array() += a / b;
      const Eigen::LLT<Eigen::MatrixXd> llt(g);
      if (llt.info() != Eigen::Success) fail(ErrorCode::SingularCovariance, "Woodbury system is not positive definite");
      s.weights = (means_.transpose() - xc_.transpose() * llt.solve(xcm_)) / a;
    }
    const auto K = means_.rows();
    s.bias.resize(K);
    for (Eigen::Index k = 0; k < K; ++k) s.bias(k) = -0.5 * means_.row(k).dot(s.weights.col(k)) + log_priors(k);
    return s;
  }

 private:
  std::vector<int> classes_;
  Eigen::Index n_ = 0, p_ = 0;
  double dof_ = 0.0, trace_ = 0.0;
  bool dual_ = false;
  Eigen::MatrixXd means_, xc_, inner_, xcm_;
};

inline Eigen::VectorXd resolve_priors(const std::vector<double>& priors, std::size_t K) {
  if (priors.empty()) return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(K), std::log(1.0 / static_cast<double>(K)));
  if (priors.size() != K) fail(ErrorCode::InvalidArgument, "one prior per class required");
  Eigen::VectorXd out(static_cast<Eigen::Index>(K));
  for (std::size_t k = 0; k < K; ++k) {
    if (!(priors[k] > 0.0)) fail(ErrorCode::InvalidArgument, "priors must be positive");
    out(static_cast<Eigen::Index>(k)) = std::log(priors[k]);
  }
  return out;
}

}  // namespace detail

/// Shrinkage LDA. X is standardized internally unless opts.standardize is false.
inline LdaModel lda_fit(const Eigen::MatrixXd& X, const std::vector<int>& y, const LdaOptions& opts = {}) {
  LdaModel m;
  m.standardizer = opts.standardize ? Standardizer::fit(X) : Standardizer::identity(X.cols());
  const detail::LdaProblem prob(opts.standardize ? m.standardizer.apply(X) : X, y);
  m.classes = prob.classes();
  m.priors = detail::resolve_priors(opts.priors, m.classes.size());
  auto sol = prob.solve(opts.shrinkage, opts.tol, m.priors);
  m.priors = m.priors.array().exp();
  m.class_means = prob.means();
  m.shrinkage = opts.shrinkage;
  m.tol = opts.tol;
  m.weights = std::move(sol.weights);
  m.bias = std::move(sol.bias);
  if (opts.keep_covariance) m.pooled_cov = prob.covariance(opts.shrinkage);
  return m;
}

inline LdaModel lda_fit(const FeatureMatrix& fm, const LdaOptions& opts = {}) {
  auto m = lda_fit(fm.data, fm.labels(), opts);
  m.schema = fm.cols;
  return m;
}

inline std::vector<int> lda_predict(const LdaModel& m, const Eigen::MatrixXd& X) {
  return detail::argmax_rows(m.decision(X), m.classes);
}

inline std::vector<int> lda_predict(const LdaModel& m, const FeatureMatrix& fm) {
  if (!m.schema.empty() && fm.cols != m.schema) fail(ErrorCode::SchemaMismatch, "feature columns differ from training");
  return lda_predict(m, fm.data);
}

}  // namespace hgr::classify
