#pragma once

#include <hgr/classify/lda.hpp>
#include <hgr/error.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <vector>

namespace hgr::classify {

/// Davies-Bouldin index; S_i is the mean Euclidean distance to the centroid.
inline double davies_bouldin(const Eigen::MatrixXd& X, const std::vector<int>& y) {
  if (static_cast<std::size_t>(X.rows()) != y.size()) fail(ErrorCode::LengthMismatch, "rows and labels differ");
  const auto classes = detail::class_set(y);
  if (classes.size() < 2) fail(ErrorCode::InvalidArgument, "DBI needs at least two classes");
  const auto K = static_cast<Eigen::Index>(classes.size());
  auto slot = [&](int c) { return std::lower_bound(classes.begin(), classes.end(), c) - classes.begin(); };

  Eigen::MatrixXd centroid = Eigen::MatrixXd::Zero(K, X.cols());
  Eigen::VectorXd count = Eigen::VectorXd::Zero(K);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const auto k = slot(y[static_cast<std::size_t>(i)]);
    centroid.row(k) += X.row(i);
    count(k) += 1.0;
  }
  for (Eigen::Index k = 0; k < K; ++k) centroid.row(k) /= count(k);
  Eigen::VectorXd S = Eigen::VectorXd::Zero(K);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const auto k = slot(y[static_cast<std::size_t>(i)]);
    S(k) += (X.row(i) - centroid.row(k)).norm();
  }
  S.array() /= count.array();

  double total = 0.0;
  for (Eigen::Index i = 0; i < K; ++i) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < K; ++j) {
      if (i == j) continue;
      const double m = (centroid.row(i) - centroid.row(j)).norm();
      if (!(m > 0.0)) fail(ErrorCode::CoincidentCentroids, "two class centroids coincide");
      worst = std::max(worst, (S(i) + S(j)) / m);
    }
    total += worst;
  }
  return total / static_cast<double>(K);
}

}  // namespace hgr::classify
