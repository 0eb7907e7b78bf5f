#pragma once

#include <Eigen/Dense>

#include "mixreg/rng.hpp"

namespace mixreg::testutil {

inline Eigen::MatrixXd random_matrix(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd out(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) out(r, c) = rng.next_gaussian();
  }
  return out;
}

inline Eigen::VectorXd random_vector(int n, Rng& rng) {
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) out(i) = rng.next_gaussian();
  return out;
}

inline bool bitwise_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return (a.array() == b.array()).all();
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace mixreg::testutil
