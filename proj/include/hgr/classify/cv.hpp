#pragma once

#include <hgr/classify/dbi.hpp>
#include <hgr/classify/lda.hpp>
#include <hgr/classify/standardize.hpp>
#include <hgr/classify/svm.hpp>
#include <hgr/core.hpp>
#include <hgr/features.hpp>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace hgr::classify {

enum class Family { Lda, Svm };

constexpr std::string_view to_string(Family f) { return f == Family::Lda ? "lda" : "svm"; }

inline std::optional<Family> parse_family(std::string_view s) {
  if (s == "lda") return Family::Lda;
  if (s == "svm") return Family::Svm;
  return std::nullopt;
}

struct GridPoint {
  Family family = Family::Lda;
  double shrinkage = 0.0;  // lda
  double tol = 1e-4;       // lda
  double C = 1.0;          // svm
  Kernel kernel = Kernel::Linear;

  std::string label() const {
    char buf[96];
    if (family == Family::Lda)
      std::snprintf(buf, sizeof buf, "lda(shrinkage=%g,tol=%g)", shrinkage, tol);
    else
      std::snprintf(buf, sizeof buf, "svm(C=%g,kernel=%s)", C, std::string(to_string(kernel)).c_str());
    return buf;
  }

  bool operator==(const GridPoint&) const = default;
};

inline nlohmann::json to_json(const GridPoint& g) {
  if (g.family == Family::Lda) return {{"family", "lda"}, {"shrinkage", g.shrinkage}, {"tol", g.tol}};
  return {{"family", "svm"}, {"C", g.C}, {"kernel", std::string(to_string(g.kernel))}};
}

struct Grid {
  std::vector<GridPoint> points;

  static Grid lda(std::vector<double> shrinkage = {0.0, 0.1, 0.3, 0.5, 1.0}, std::vector<double> tol = {1e-4, 1e-2}) {
    Grid g;
    for (double s : shrinkage)
      for (double t : tol) g.points.push_back({Family::Lda, s, t, 1.0, Kernel::Linear});
    return g;
  }

  static Grid svm(std::vector<double> C = {0.1, 1.0, 10.0, 100.0}, std::vector<Kernel> kernels = {Kernel::Linear, Kernel::Rbf}) {
    Grid g;
    for (double c : C)
      for (Kernel k : kernels) g.points.push_back({Family::Svm, 0.0, 1e-4, c, k});
    return g;
  }

  static Grid single(GridPoint p) { return {{p}}; }
};

struct CvPlan {
  std::size_t folds = 4;  // one held-out repetition per fold
  double svm_eps = 1e-3;
  std::size_t svm_max_iter = 0;
};

struct Fold {
  int test_repetition = 0;
  std::vector<Eigen::Index> train, test;
};

/// Leave-one-repetition-out folds. Every (gesture, repetition) pair must be
/// present and the number of repetitions must equal plan.folds.
inline std::vector<Fold> make_folds(const std::vector<RowId>& rows, const CvPlan& plan = {}) {
  std::set<int> reps, gestures;
  std::set<std::pair<int, int>> pairs;
  for (const auto& r : rows) {
    reps.insert(r.repetition);
    gestures.insert(r.gesture);
    pairs.insert({r.gesture, r.repetition});
  }
  if (reps.size() != plan.folds)
    fail(ErrorCode::MissingRepetition, "found " + std::to_string(reps.size()) + " repetitions, plan needs " +
                                           std::to_string(plan.folds));
  for (int g : gestures)
    for (int r : reps)
      if (!pairs.contains({g, r}))
        fail(ErrorCode::MissingRepetition, "gesture " + std::to_string(g) + " lacks repetition " + std::to_string(r));
  std::vector<Fold> folds;
  for (int r : reps) {
    Fold f;
    f.test_repetition = r;
    for (std::size_t i = 0; i < rows.size(); ++i)
      (rows[i].repetition == r ? f.test : f.train).push_back(static_cast<Eigen::Index>(i));
    folds.push_back(std::move(f));
  }
  return folds;
}

namespace detail {

inline std::vector<int> take(const std::vector<int>& y, const std::vector<Eigen::Index>& idx) {
  std::vector<int> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = y[static_cast<std::size_t>(idx[i])];
  return out;
}

inline double accuracy(const std::vector<int>& truth, const std::vector<int>& pred) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == pred[i];
  return truth.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(truth.size());
}

inline bool recoverable(const Error& e) {
  return e.code() == ErrorCode::SingularCovariance || e.code() == ErrorCode::NonConvergence;
}

/// Fits every grid point on `train` (standardized on train rows only) and
/// predicts `test`. Points that cannot be fitted yield nullopt.
inline std::vector<std::optional<std::vector<int>>> predict_grid(const Eigen::MatrixXd& X, const std::vector<int>& y,
                                                                 const std::vector<Eigen::Index>& train,
                                                                 const std::vector<Eigen::Index>& test,
                                                                 const std::vector<GridPoint>& grid, const CvPlan& plan) {
  const Eigen::MatrixXd Xtr = X(train, Eigen::all);
  const auto st = Standardizer::fit(Xtr);
  const Eigen::MatrixXd Ztr = st.apply(Xtr);
  const Eigen::MatrixXd Zte = st.apply(X(test, Eigen::all));
  const auto ytr = take(y, train);
  const auto classes = class_set(ytr);

  std::vector<std::optional<std::vector<int>>> out(grid.size());
  std::optional<LdaProblem> lda;
  std::optional<Eigen::MatrixXd> k_lin, kt_lin, k_rbf, kt_rbf;
  double gamma = 0.0;
  Eigen::VectorXd sq_tr, sq_te;

  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto& pt = grid[g];
    try {
      if (pt.family == Family::Lda) {
        if (!lda) lda.emplace(Ztr, ytr);
        const auto priors = resolve_priors({}, lda->classes().size());
        const auto sol = lda->solve(pt.shrinkage, pt.tol, priors);
        Eigen::MatrixXd s = Zte * sol.weights;
        s.rowwise() += sol.bias.transpose();
        out[g] = argmax_rows(s, lda->classes());
      } else {
        if (!k_lin) {
          k_lin = gram(Ztr);
          kt_lin = Zte * Ztr.transpose();
          sq_tr = k_lin->diagonal();
          sq_te = Zte.rowwise().squaredNorm();
          gamma = default_gamma(Ztr);
        }
        if (pt.kernel == Kernel::Rbf && !k_rbf) {
          k_rbf = rbf_from_inner(*k_lin, sq_tr, sq_tr, gamma);
          kt_rbf = rbf_from_inner(*kt_lin, sq_te, sq_tr, gamma);
        }
        const bool rbf = pt.kernel == Kernel::Rbf;
        const auto machines = train_ovo(rbf ? *k_rbf : *k_lin, ytr, classes, pt.C, plan.svm_eps, plan.svm_max_iter);
        out[g] = predict_ovo(rbf ? *kt_rbf : *kt_lin, machines, classes);
      }
    } catch (const Error& e) {
      if (!recoverable(e)) throw;
    }
  }
  return out;
}

struct Selection {
  std::size_t best = 0;
  std::vector<double> inner_accuracy;  // NaN: point failed in some inner fold
};

/// Nested selection on the training repetitions of one outer fold.
inline Selection select_point(const Eigen::MatrixXd& X, const std::vector<int>& y, const std::vector<RowId>& rows,
                              const Fold& outer, const Grid& grid, const CvPlan& plan) {
  std::set<int> inner_reps;
  for (auto i : outer.train) inner_reps.insert(rows[static_cast<std::size_t>(i)].repetition);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Selection sel;
  sel.inner_accuracy.assign(grid.points.size(), 0.0);
  if (grid.points.size() == 1) return sel;  // nothing to choose
  for (int held : inner_reps) {
    std::vector<Eigen::Index> tr, te;
    for (auto i : outer.train) (rows[static_cast<std::size_t>(i)].repetition == held ? te : tr).push_back(i);
    const auto preds = predict_grid(X, y, tr, te, grid.points, plan);
    const auto truth = take(y, te);
    for (std::size_t g = 0; g < preds.size(); ++g)
      sel.inner_accuracy[g] += preds[g] ? accuracy(truth, *preds[g]) / static_cast<double>(inner_reps.size()) : nan;
  }
  bool found = false;
  for (std::size_t g = 0; g < grid.points.size(); ++g) {
    const double v = sel.inner_accuracy[g];
    if (std::isnan(v)) continue;
    if (!found || v > sel.inner_accuracy[sel.best]) {
      sel.best = g;
      found = true;
    }
  }
  if (!found) fail(ErrorCode::SingularCovariance, "no grid point could be fitted on the training folds");
  return sel;
}

}  // namespace detail

struct FoldResult {
  int test_repetition = 0;
  std::size_t n_train = 0, n_test = 0;
  double accuracy = 0.0;
  GridPoint best;
  std::vector<double> inner_accuracy;
};

struct EvalResult {
  Family family = Family::Lda;
  std::vector<FoldResult> folds;
  double mean_accuracy = 0.0;
  Eigen::MatrixXi confusion = Eigen::MatrixXi::Zero(kNumGestures, kNumGestures);  // rows: truth
  double dbi = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_features = 0;

  std::vector<double> fold_accuracies() const {
    std::vector<double> v;
    for (const auto& f : folds) v.push_back(f.accuracy);
    return v;
  }
};

/// DBI of the z-scored feature space; NaN when two centroids coincide.
inline double feature_space_dbi(const FeatureMatrix& fm) {
  try {
    return davies_bouldin(Standardizer::fit(fm.data).apply(fm.data), fm.labels());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::CoincidentCentroids) throw;
    return std::numeric_limits<double>::quiet_NaN();
  }
}

struct CvOptions {
  bool compute_dbi = true;
};

/// Leave-one-repetition-out CV with nested grid search on the training
/// repetitions; the selected point is refit on the whole training fold.
inline EvalResult cv_evaluate(const FeatureMatrix& fm, const CvPlan& plan, const Grid& grid, const CvOptions& opt = {}) {
  if (grid.points.empty()) fail(ErrorCode::InvalidArgument, "empty hyperparameter grid");
  const auto y = fm.labels();
  for (int g : y)
    if (g < 0 || g >= kNumGestures) fail(ErrorCode::InvalidArgument, "gesture id out of range");
  EvalResult res;
  res.family = grid.points.front().family;
  res.n_features = static_cast<std::size_t>(fm.data.cols());
  for (const auto& fold : make_folds(fm.rows, plan)) {
    const auto sel = detail::select_point(fm.data, y, fm.rows, fold, grid, plan);
    const auto& best = grid.points[sel.best];
    const auto preds = detail::predict_grid(fm.data, y, fold.train, fold.test, {best}, plan);
    if (!preds[0]) fail(ErrorCode::SingularCovariance, "selected point " + best.label() + " failed on the training fold");
    const auto truth = detail::take(y, fold.test);
    FoldResult fr;
    fr.test_repetition = fold.test_repetition;
    fr.n_train = fold.train.size();
    fr.n_test = fold.test.size();
    fr.accuracy = detail::accuracy(truth, *preds[0]);
    fr.best = best;
    fr.inner_accuracy = sel.inner_accuracy;
    for (std::size_t i = 0; i < truth.size(); ++i) res.confusion(truth[i], (*preds[0])[i]) += 1;
    res.folds.push_back(std::move(fr));
  }
  double s = 0.0;
  for (const auto& f : res.folds) s += f.accuracy;
  res.mean_accuracy = s / static_cast<double>(res.folds.size());
  if (opt.compute_dbi) res.dbi = feature_space_dbi(fm);
  return res;
}

using FittedModel = std::variant<LdaModel, SvmModel>;

/// The model cv_evaluate scores on fold `fold_index`, as a public model object.
inline FittedModel fit_fold_model(const FeatureMatrix& fm, const CvPlan& plan, const Grid& grid, std::size_t fold_index) {
  const auto folds = make_folds(fm.rows, plan);
  const auto& fold = folds.at(fold_index);
  const auto y = fm.labels();
  const auto sel = detail::select_point(fm.data, y, fm.rows, fold, grid, plan);
  const auto& best = grid.points[sel.best];
  const Eigen::MatrixXd Xtr = fm.data(fold.train, Eigen::all);
  const auto ytr = detail::take(y, fold.train);
  if (best.family == Family::Lda) {
    LdaOptions o;
    o.shrinkage = best.shrinkage;
    o.tol = best.tol;
    return lda_fit(Xtr, ytr, o);
  }
  SvmOptions o;
  o.C = best.C;
  o.kernel = best.kernel;
  o.eps = plan.svm_eps;
  o.max_iter = plan.svm_max_iter;
  return svm_fit(Xtr, ytr, o);
}

/// Shuffles gesture labels among the rows of each repetition (chance control).
inline void permute_labels_within_repetition(FeatureMatrix& fm, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::map<int, std::vector<std::size_t>> by_rep;
  for (std::size_t i = 0; i < fm.rows.size(); ++i) by_rep[fm.rows[i].repetition].push_back(i);
  for (auto& [rep, idx] : by_rep) {
    std::vector<int> labels;
    for (auto i : idx) labels.push_back(fm.rows[i].gesture);
    // Fisher-Yates with an explicit draw so results do not depend on the std::shuffle implementation
    for (std::size_t k = labels.size(); k > 1; --k) {
      const auto j = static_cast<std::size_t>(rng() % k);
      std::swap(labels[k - 1], labels[j]);
    }
    for (std::size_t k = 0; k < idx.size(); ++k) fm.rows[idx[k]].gesture = labels[k];
  }
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const EvalResult& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : r.folds) {
    nlohmann::json inner = nlohmann::json::array();
    for (double v : f.inner_accuracy) inner.push_back(num(v));
    folds.push_back({{"test_repetition", f.test_repetition},
                     {"n_train", f.n_train},
                     {"n_test", f.n_test},
                     {"accuracy", f.accuracy},
                     {"best", to_json(f.best)},
                     {"inner_accuracy", inner}});
  }
  nlohmann::json confusion = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < r.confusion.cols(); ++j) row.push_back(r.confusion(i, j));
    confusion.push_back(std::move(row));
  }
  return {{"family", std::string(to_string(r.family))},
          {"mean_accuracy", r.mean_accuracy},
          {"fold_accuracies", r.fold_accuracies()},
          {"folds", folds},
          {"dbi", num(r.dbi)},
          {"n_features", r.n_features},
          {"confusion", confusion}};
}

inline std::string confusion_csv(const Eigen::MatrixXi& c, bool row_normalized = false) {
  std::string out = "truth\\predicted";
  for (auto n : kGestureNames) out += "," + std::string(n);
  out += '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    out += std::string(kGestureNames[static_cast<std::size_t>(i)]);
    const double total = c.row(i).sum();
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      if (row_normalized)
        std::snprintf(buf, sizeof buf, ",%.6g", total > 0 ? c(i, j) / total : 0.0);
      else
        std::snprintf(buf, sizeof buf, ",%d", c(i, j));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace hgr::classify
