#pragma once

#include <hgr/classify/lda.hpp>
#include <hgr/classify/standardize.hpp>
#include <hgr/error.hpp>
#include <hgr/features.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace hgr::classify {

enum class Kernel { Linear, Rbf };

constexpr std::string_view to_string(Kernel k) { return k == Kernel::Linear ? "linear" : "rbf"; }

struct SvmOptions {
  Kernel kernel = Kernel::Linear;
  double C = 1.0;
  double gamma = 0.0;  // rbf; <= 0 selects 1 / (p * var(X))
  double eps = 1e-3;   // KKT tolerance
  std::size_t max_iter = 0;  // 0: max(10^7, 100 l)
  bool standardize = true;
};

/// One binary soft-margin machine: f(x) = sum coef_i K(sv_i, x) - rho;
/// f > 0 votes for `pos`.
struct BinaryMachine {
  int pos = 0, neg = 0;
  std::vector<Eigen::Index> sv;  // indices into the training rows
  std::vector<double> coef;      // y_i * alpha_i
  std::vector<double> alpha;     // all dual variables of the pair, training order
  double rho = 0.0;
  double kkt_violation = 0.0;
  std::size_t iterations = 0;
};

struct SvmModel {
  Kernel kernel = Kernel::Linear;
  double C = 1.0;
  double gamma = 0.0;
  Standardizer standardizer;
  std::vector<int> classes;
  Eigen::MatrixXd support;  // standardized training rows referenced by machines
  std::vector<BinaryMachine> machines;
  std::vector<ColumnId> schema;

  double max_kkt_violation() const {
    double v = 0.0;
    for (const auto& m : machines) v = std::max(v, m.kkt_violation);
    return v;
  }

  Eigen::MatrixXd kernel_with(const Eigen::MatrixXd& Z) const;
  Eigen::MatrixXd decision(const Eigen::MatrixXd& X) const;  // rows x machines
};

namespace detail {

inline double default_gamma(const Eigen::MatrixXd& Z) {
  const double n = static_cast<double>(Z.size());
  const double mean = Z.sum() / n;
  const double var = (Z.array() - mean).square().sum() / n;
  return var > 0.0 ? 1.0 / (static_cast<double>(Z.cols()) * var) : 1.0;
}

inline Eigen::MatrixXd gram(const Eigen::MatrixXd& Z) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(Z.rows(), Z.rows());
  g.selfadjointView<Eigen::Lower>().rankUpdate(Z);
  return g.selfadjointView<Eigen::Lower>();
}

/// exp(-gamma |a - b|^2) from inner products and squared norms.
inline Eigen::MatrixXd rbf_from_inner(const Eigen::MatrixXd& inner, const Eigen::VectorXd& row_sq,
                                      const Eigen::VectorXd& col_sq, double gamma) {
  Eigen::MatrixXd k(inner.rows(), inner.cols());
  for (Eigen::Index j = 0; j < inner.cols(); ++j)
    for (Eigen::Index i = 0; i < inner.rows(); ++i)
      k(i, j) = std::exp(-gamma * std::max(0.0, row_sq(i) + col_sq(j) - 2.0 * inner(i, j)));
  return k;
}

/// Dual SMO with second-order working-set selection:
///   min 1/2 a'Qa - e'a,  0 <= a <= C,  y'a = 0,  Q_ij = y_i y_j K_ij.
struct SmoResult {
  std::vector<double> alpha;
  double rho = 0.0;
  double violation = 0.0;
  std::size_t iterations = 0;
};

inline SmoResult smo(const Eigen::MatrixXd& K, const std::vector<Eigen::Index>& idx, const std::vector<double>& y,
                     double C, double eps, std::size_t max_iter) {
  constexpr double kTau = 1e-12;
  const std::size_t l = idx.size();
  std::vector<double> a(l, 0.0), G(l, -1.0), QD(l);
  for (std::size_t t = 0; t < l; ++t) QD[t] = K(idx[t], idx[t]);
  auto Q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * K(idx[i], idx[j]); };
  auto upper = [&](std::size_t t) { return a[t] >= C; };
  auto lower = [&](std::size_t t) { return a[t] <= 0.0; };
  if (max_iter == 0) max_iter = std::max<std::size_t>(10'000'000, 100 * l);

  SmoResult r;
  const double inf = std::numeric_limits<double>::infinity();
  while (true) {
    double gmax = -inf, gmax2 = -inf;
    std::ptrdiff_t i = -1, j = -1;
    for (std::size_t t = 0; t < l; ++t) {
      const double v = y[t] > 0 ? (upper(t) ? -inf : -G[t]) : (lower(t) ? -inf : G[t]);
      if (v >= gmax && v > -inf) {
        gmax = v;
        i = static_cast<std::ptrdiff_t>(t);
      }
    }
    double best = inf;
    if (i >= 0) {
      const auto ii = static_cast<std::size_t>(i);
      for (std::size_t t = 0; t < l; ++t) {
        double grad_diff;
        if (y[t] > 0) {
          if (lower(t)) continue;
          gmax2 = std::max(gmax2, G[t]);
          grad_diff = gmax + G[t];
        } else {
          if (upper(t)) continue;
          gmax2 = std::max(gmax2, -G[t]);
          grad_diff = gmax - G[t];
        }
        if (grad_diff > 0.0) {
          double quad = QD[ii] + QD[t] - 2.0 * y[ii] * Q(ii, t);
          if (quad <= 0.0) quad = kTau;
          const double obj = -grad_diff * grad_diff / quad;
          if (obj <= best) {
            best = obj;
            j = static_cast<std::ptrdiff_t>(t);
          }
        }
      }
    }
    r.violation = gmax + gmax2;
    if (i < 0 || j < 0 || r.violation < eps) break;
    if (r.iterations >= max_iter)
      fail(ErrorCode::NonConvergence, "SMO hit the iteration cap with KKT violation " + std::to_string(r.violation));
    ++r.iterations;

    const auto ii = static_cast<std::size_t>(i), jj = static_cast<std::size_t>(j);
    const double qij = Q(ii, jj);
    const double ai = a[ii], aj = a[jj];
    if (y[ii] != y[jj]) {
      double quad = QD[ii] + QD[jj] + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-G[ii] - G[jj]) / quad;
      const double diff = a[ii] - a[jj];
      a[ii] += delta;
      a[jj] += delta;
      if (diff > 0.0) {
        if (a[jj] < 0.0) { a[jj] = 0.0; a[ii] = diff; }
      } else if (a[ii] < 0.0) {
        a[ii] = 0.0; a[jj] = -diff;
      }
      if (diff > 0.0) {
        if (a[ii] > C) { a[ii] = C; a[jj] = C - diff; }
      } else if (a[jj] > C) {
        a[jj] = C; a[ii] = C + diff;
      }
    } else {
      double quad = QD[ii] + QD[jj] - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (G[ii] - G[jj]) / quad;
      const double sum = a[ii] + a[jj];
      a[ii] -= delta;
      a[jj] += delta;
      if (sum > C) {
        if (a[ii] > C) { a[ii] = C; a[jj] = sum - C; }
      } else if (a[jj] < 0.0) {
        a[jj] = 0.0; a[ii] = sum;
      }
      if (sum > C) {
        if (a[jj] > C) { a[jj] = C; a[ii] = sum - C; }
      } else if (a[ii] < 0.0) {
        a[ii] = 0.0; a[jj] = sum;
      }
    }
    const double dai = a[ii] - ai, daj = a[jj] - aj;
    for (std::size_t t = 0; t < l; ++t) G[t] += Q(ii, t) * dai + Q(jj, t) * daj;
  }

  // rho: mean of y*G over free variables, else midpoint of the feasible interval
  double ub = inf, lb = -inf, sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < l; ++t) {
    const double yg = y[t] * G[t];
    if (upper(t)) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  r.rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  r.alpha = std::move(a);
  return r;
}

/// One-vs-one training on a precomputed training kernel.
inline std::vector<BinaryMachine> train_ovo(const Eigen::MatrixXd& K, const std::vector<int>& y,
                                            const std::vector<int>& classes, double C, double eps,
                                            std::size_t max_iter) {
  if (!(C > 0.0)) fail(ErrorCode::InvalidArgument, "C must be positive");
  std::vector<std::vector<Eigen::Index>> members(classes.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto k = std::lower_bound(classes.begin(), classes.end(), y[i]) - classes.begin();
    members[static_cast<std::size_t>(k)].push_back(static_cast<Eigen::Index>(i));
  }
  std::vector<BinaryMachine> out;
  for (std::size_t a = 0; a < classes.size(); ++a)
    for (std::size_t b = a + 1; b < classes.size(); ++b) {
      std::vector<Eigen::Index> idx = members[a];
      idx.insert(idx.end(), members[b].begin(), members[b].end());
      std::vector<double> yy(idx.size(), -1.0);
      std::fill(yy.begin(), yy.begin() + static_cast<std::ptrdiff_t>(members[a].size()), 1.0);
      auto r = smo(K, idx, yy, C, eps, max_iter);
      BinaryMachine m;
      m.pos = classes[a];
      m.neg = classes[b];
      m.rho = r.rho;
      m.kkt_violation = r.violation;
      m.iterations = r.iterations;
      for (std::size_t t = 0; t < idx.size(); ++t)
        if (r.alpha[t] > 0.0) {
          m.sv.push_back(idx[t]);
          m.coef.push_back(yy[t] * r.alpha[t]);
        }
      m.alpha = std::move(r.alpha);
      out.push_back(std::move(m));
    }
  return out;
}

/// Kt: test x train kernel. Majority vote; ties go to the lowest class id.
inline std::vector<int> predict_ovo(const Eigen::MatrixXd& Kt, const std::vector<BinaryMachine>& machines,
                                    const std::vector<int>& classes) {
  std::vector<int> out(static_cast<std::size_t>(Kt.rows()));
  std::vector<int> votes(classes.size());
  auto slot = [&](int c) { return static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), c) - classes.begin()); };
  for (Eigen::Index r = 0; r < Kt.rows(); ++r) {
    std::fill(votes.begin(), votes.end(), 0);
    for (const auto& m : machines) {
      double f = -m.rho;
      for (std::size_t s = 0; s < m.sv.size(); ++s) f += m.coef[s] * Kt(r, m.sv[s]);
      ++votes[slot(f > 0.0 ? m.pos : m.neg)];
    }
    const auto best = std::max_element(votes.begin(), votes.end()) - votes.begin();
    out[static_cast<std::size_t>(r)] = classes[static_cast<std::size_t>(best)];
  }
  return out;
}

}  // namespace detail

inline Eigen::MatrixXd SvmModel::kernel_with(const Eigen::MatrixXd& Z) const {
  Eigen::MatrixXd inner = Z * support.transpose();
  if (kernel == Kernel::Linear) return inner;
  return detail::rbf_from_inner(inner, Z.rowwise().squaredNorm(), support.rowwise().squaredNorm(), gamma);
}

inline Eigen::MatrixXd SvmModel::decision(const Eigen::MatrixXd& X) const {
  if (X.cols() != support.cols()) fail(ErrorCode::SchemaMismatch, "feature count differs from training");
  const Eigen::MatrixXd Kt = kernel_with(standardizer.apply(X));
  Eigen::MatrixXd f(X.rows(), static_cast<Eigen::Index>(machines.size()));
  for (std::size_t m = 0; m < machines.size(); ++m)
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      double v = -machines[m].rho;
      for (std::size_t s = 0; s < machines[m].sv.size(); ++s) v += machines[m].coef[s] * Kt(r, machines[m].sv[s]);
      f(r, static_cast<Eigen::Index>(m)) = v;
    }
  return f;
}

inline SvmModel svm_fit(const Eigen::MatrixXd& X, const std::vector<int>& y, const SvmOptions& opts = {}) {
  if (static_cast<std::size_t>(X.rows()) != y.size()) fail(ErrorCode::LengthMismatch, "rows and labels differ");
  SvmModel m;
  m.kernel = opts.kernel;
  m.C = opts.C;
  m.classes = detail::class_set(y);
  if (m.classes.size() < 2) fail(ErrorCode::InvalidArgument, "SVM needs at least two classes");
  for (int c : m.classes)
    if (std::count(y.begin(), y.end(), c) < 2) fail(ErrorCode::ClassTooSmall, "class " + std::to_string(c) + " has fewer than 2 rows");
  m.standardizer = opts.standardize ? Standardizer::fit(X) : Standardizer::identity(X.cols());
  m.support = m.standardizer.apply(X);
  m.gamma = opts.gamma > 0.0 ? opts.gamma : detail::default_gamma(m.support);
  Eigen::MatrixXd K = detail::gram(m.support);
  if (m.kernel == Kernel::Rbf) {
    const Eigen::VectorXd sq = K.diagonal();
    K = detail::rbf_from_inner(K, sq, sq, m.gamma);
  }
  m.machines = detail::train_ovo(K, y, m.classes, opts.C, opts.eps, opts.max_iter);
  return m;
}

inline SvmModel svm_fit(const FeatureMatrix& fm, const SvmOptions& opts = {}) {
  auto m = svm_fit(fm.data, fm.labels(), opts);
  m.schema = fm.cols;
  return m;
}

inline std::vector<int> svm_predict(const SvmModel& m, const Eigen::MatrixXd& X) {
  if (X.cols() != m.support.cols()) fail(ErrorCode::SchemaMismatch, "feature count differs from training");
  return detail::predict_ovo(m.kernel_with(m.standardizer.apply(X)), m.machines, m.classes);
}

inline std::vector<int> svm_predict(const SvmModel& m, const FeatureMatrix& fm) {
  if (!m.schema.empty() && fm.cols != m.schema) fail(ErrorCode::SchemaMismatch, "feature columns differ from training");
  return svm_predict(m, fm.data);
}

}  // namespace hgr::classify
