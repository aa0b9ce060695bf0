#pragma once

#include <Eigen/Dense>

#include <cmath>

namespace hgr::classify {

/// Per-column z-score. Population std; constant columns keep scale 1.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& X) {
    Standardizer s;
    const double n = static_cast<double>(X.rows());
    s.mean = X.colwise().sum() / n;
    s.scale.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double v = (X.col(j).array() - s.mean(j)).square().sum() / n;
      const double sd = std::sqrt(v);
      s.scale(j) = sd > 0.0 && std::isfinite(sd) ? sd : 1.0;
    }
    return s;
  }

  static Standardizer identity(Eigen::Index p) {
    return {Eigen::RowVectorXd::Zero(p), Eigen::RowVectorXd::Ones(p)};
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const {
    return (X.rowwise() - mean).array().rowwise() / scale.array();
  }
};

}  // namespace hgr::classify
