#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace mixreg::ad {

// Reverse-mode tape over dense matrices. Nodes are referenced by index;
// values live for the life of the tape, gradients are allocated during the
// backward sweep. Column/row indices at this layer are 0-based.
class Tape {
 public:
  int input(Eigen::MatrixXd value);

  const Eigen::MatrixXd& value(int node) const { return values_[static_cast<size_t>(node)]; }
  // Zero matrix if the node never received a gradient.
  Eigen::MatrixXd grad(int node) const;

  // Seeds the (1x1) root with gradient one and sweeps the tape in reverse.
  void backward(int root);

  int size() const { return static_cast<int>(values_.size()); }

 private:
  friend int matmul(Tape&, int, int);
  friend int matmul_tn(Tape&, int, int);
  friend int add(Tape&, int, int);
  friend int scale(Tape&, int, double);
  friend int hadamard(Tape&, int, int);
  friend int hadamard_const(Tape&, int, Eigen::MatrixXd);
  friend int add_col_broadcast(Tape&, int, int);
  friend int strict_prefix_softmax(Tape&, int);
  friend int layernorm_cols(Tape&, int);
  friend int gelu(Tape&, int);
  friend int select_cols(Tape&, int, std::vector<int>);
  friend int sum_sq_scaled(Tape&, int, Eigen::MatrixXd, double);

  int push(Eigen::MatrixXd value, std::function<void(Tape&)> back);
  void accum(int node, const Eigen::MatrixXd& g);

  std::vector<Eigen::MatrixXd> values_;
  std::vector<Eigen::MatrixXd> grads_;
  std::vector<std::function<void(Tape&)>> backs_;
};

int matmul(Tape& t, int a, int b);     // A * B
int matmul_tn(Tape& t, int a, int b);  // A^T * B
int add(Tape& t, int a, int b);
int scale(Tape& t, int a, double s);
int hadamard(Tape& t, int a, int b);
// Elementwise product with a constant matrix (dropout masks and the like).
int hadamard_const(Tape& t, int a, Eigen::MatrixXd mask);
// Adds a column vector to every column of a.
int add_col_broadcast(Tape& t, int a, int bias);
// Treats column i of a square logit matrix as scores over rows; softmax is
// taken over rows 0..i-1 only, other rows become zero, and column 0 (which
// has no valid rows) is all zero.
int strict_prefix_softmax(Tape& t, int a);
// Per column: sqrt(rows) * (v - mean) / ||v - mean||, zero column when the
// centered norm vanishes.
int layernorm_cols(Tape& t, int a);
// 0.5 * u * (1 + erf(u / sqrt(2))), elementwise.
int gelu(Tape& t, int a);
int select_cols(Tape& t, int a, std::vector<int> cols);
// 1x1 node holding coeff * sum((a - target)^2).
int sum_sq_scaled(Tape& t, int a, Eigen::MatrixXd target, double coeff);

}  // namespace mixreg::ad
