// Lawson-Hanson active-set solver for min ||A x - b|| subject to x >= 0.
#pragma once

#include <Eigen/Dense>

#include <vector>

namespace clickstat::detail {

/// Nonnegative least squares. Returns the solution; the residual can be
/// recomputed by the caller. Tolerance defaults to a scale-aware value.
inline Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                            double tol = -1.0) {
  const int n = static_cast<int>(a.cols());
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);

  Eigen::VectorXd w = a.transpose() * (b - a * x);
  if (tol < 0.0)
    tol = 10.0 * std::numeric_limits<double>::epsilon() *
          a.cwiseAbs().colwise().sum().maxCoeff() * b.cwiseAbs().maxCoeff();

  auto solve_passive = [&](std::vector<int>& idx) {
    idx.clear();
    for (int i = 0; i < n; ++i)
      if (passive[static_cast<std::size_t>(i)]) idx.push_back(i);
    Eigen::MatrixXd ap(a.rows(), static_cast<int>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) ap.col(static_cast<int>(j)) = a.col(idx[j]);
    return Eigen::VectorXd(ap.colPivHouseholderQr().solve(b));
  };

  const int max_outer = 3 * n + 30;
  std::vector<int> idx;
  for (int outer = 0; outer < max_outer; ++outer) {
    // pick the most violated dual coordinate among the active set
    int best = -1;
    double best_w = tol;
    for (int i = 0; i < n; ++i) {
      if (!passive[static_cast<std::size_t>(i)] && w(i) > best_w) {
        best_w = w(i);
        best = i;
      }
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;

    for (int inner = 0; inner < max_outer; ++inner) {
      Eigen::VectorXd z = solve_passive(idx);
      bool all_positive = true;
      for (std::size_t j = 0; j < idx.size(); ++j)
        if (z(static_cast<int>(j)) <= 0.0) { all_positive = false; break; }
      if (all_positive) {
        x.setZero();
        for (std::size_t j = 0; j < idx.size(); ++j) x(idx[j]) = z(static_cast<int>(j));
        break;
      }
      // step toward z until the first passive coordinate hits zero
      double alpha = 1.0;
      for (std::size_t j = 0; j < idx.size(); ++j) {
        const double zj = z(static_cast<int>(j));
        if (zj <= 0.0) {
          const double xj = x(idx[j]);
          const double a_j = xj / (xj - zj);
          if (a_j < alpha) alpha = a_j;
        }
      }
      for (std::size_t j = 0; j < idx.size(); ++j) {
        const double zj = z(static_cast<int>(j));
        const double xj = x(idx[j]);
        x(idx[j]) = xj + alpha * (zj - xj);
      }
      for (std::size_t j = 0; j < idx.size(); ++j) {
        if (x(idx[j]) <= 1e-14) {
          x(idx[j]) = 0.0;
          passive[static_cast<std::size_t>(idx[j])] = false;
        }
      }
    }
    w = a.transpose() * (b - a * x);
  }
  return x;
}

} // namespace clickstat::detail
