#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "mixreg/mixtures.hpp"

namespace mixreg {

// Operators on a state matrix H. All row and column indices in this module
// are 1-based and all ranges are inclusive, matching the operator
// definitions; every operator returns a new matrix and leaves entries
// outside its declared write region untouched.

enum class OpKind {
  copydown,
  copyover,
  mulop,
  affineop,
  scaledagg,
  softmaxop,
  divop,
  movop,
  sigmoidop,
};

// One operator application with its index arguments. Fields are only
// meaningful for the op kinds that use them.
struct CircuitStep {
  OpKind kind{};
  int k = 0, kp = 0, kpp = 0;     // k, k', k''
  int l = 0, lp = 0, lpp = 0;     // l, l', l''
  int j = 0;                      // divop divisor row
  int target_col = 0;             // scaledagg destination column
  double alpha = 0.0;             // scaledagg coefficient
  Eigen::MatrixXd w, wp;          // affineop W, W'
  Eigen::VectorXd b;              // affineop offset
  std::vector<int> cols;          // column set I
};

// For columns i in cols: rows kp..kp+(l-k) receive rows k..l of the same
// column.
Eigen::MatrixXd apply_copydown(const Eigen::MatrixXd& h, int k, int kp, int l,
                               const std::vector<int>& cols);
// For columns i in cols: rows kp..kp+(l-k) receive rows k..l of column i-1.
Eigen::MatrixXd apply_copyover(const Eigen::MatrixXd& h, int k, int kp, int l,
                               const std::vector<int>& cols);
// For columns i in cols: row kpp+t receives H(k+t, i) * H(kp+t, i).
Eigen::MatrixXd apply_mulop(const Eigen::MatrixXd& h, int k, int kp, int kpp, int l,
                            const std::vector<int>& cols);
// For columns i in cols: rows kpp..lpp receive W * H(k:l, i) + Wp * H(kp:lp, i) + b.
Eigen::MatrixXd apply_affineop(const Eigen::MatrixXd& h, int k, int kp, int kpp, int l, int lp,
                               int lpp, const Eigen::MatrixXd& w, const Eigen::MatrixXd& wp,
                               const Eigen::VectorXd& b, const std::vector<int>& cols);
// Rows kp..kp+(l-k) of column target_col receive alpha * sum over j in cols
// of rows k..l of column j. cols must be causal: every j < target_col.
Eigen::MatrixXd apply_scaledagg(const Eigen::MatrixXd& h, double alpha, int k, int l, int kp,
                                int target_col, const std::vector<int>& cols);
// In the final column only: rows kp..kp+(l-k) receive the softmax of rows
// k..l.
Eigen::MatrixXd apply_softmaxop(const Eigen::MatrixXd& h, int k, int l, int kp);
// For columns i in cols: row kp+t receives H(k+t, i) / H(j, i). A zero
// divisor entry signals a fault.
Eigen::MatrixXd apply_divop(const Eigen::MatrixXd& h, int j, int k, int kp, int l,
                            const std::vector<int>& cols);
// For columns i in cols: row kp+t receives H(k+t, i).
Eigen::MatrixXd apply_movop(const Eigen::MatrixXd& h, int k, int kp, int l,
                            const std::vector<int>& cols);
// In the final column only: row kp receives 1 / (1 + exp(-H(k, q))).
Eigen::MatrixXd apply_sigmoidop(const Eigen::MatrixXd& h, int k, int kp);

Eigen::MatrixXd apply_step(const Eigen::MatrixXd& h, const CircuitStep& step);

// Read-arithmetic-write operator: per column i, reads the prefix average of
// the read-row block over prefix_map(i), combines it with the same column's
// mix-row block (elementwise product or addition), and writes the result
// through theta_write into the write rows.
struct RawParams {
  enum class Mode { elementwise_mul, add };
  Mode mode = Mode::add;
  std::vector<int> read_rows;   // I
  std::vector<int> mix_rows;    // J (may be empty)
  std::vector<int> write_rows;  // K
  Eigen::MatrixXd theta_read;   // r x |I|
  Eigen::MatrixXd theta_mix;    // r x |J|
  Eigen::MatrixXd theta_write;  // |K| x r
  // prefix_map(i) is a subset of columns 1..i (self-reads allowed; strictly
  // causal maps only touch 1..i-1).
  std::function<std::vector<int>(int)> prefix_map;
  // Literal semantics write every column, using a zero prefix read when
  // prefix_map(i) is empty; lowered operators instead skip those columns so
  // untouched columns pass through, as a residual stream does when nothing
  // is attended to.
  bool write_on_empty = true;
};

Eigen::MatrixXd apply_raw(const Eigen::MatrixXd& h, const RawParams& params);

// Rewrites a copydown / copyover / scaledagg step as RAW parameters whose
// application reproduces the direct operator exactly. Other op kinds are
// rejected.
RawParams lower_to_raw(const CircuitStep& step);

// State encoding of a prompt: a (2d + 4m + 2) x (2k + 1) matrix whose only
// nonzero entries are the covariates in rows 1..d of odd columns and the
// labels in row 1 of even columns.
Eigen::MatrixXd encode_prompt(const Prompt& prompt, int m);

// The nine-step operator pipeline that evaluates the posterior-mean
// predictor for this mixture on length-k prompts: duplicate covariates,
// align them with the labels, form per-component residuals, square them,
// aggregate with coefficient -1/(2 sigma^2) into the query column, softmax,
// multiply by the query residuals, and sum. Requires sigma > 0 and k >= 1.
std::vector<CircuitStep> build_posterior_circuit(const MixtureSpec& spec, int k);

// encode_prompt, the nine steps, then the bottom-right entry.
double run_circuit(const Prompt& prompt, const MixtureSpec& spec);

// All intermediate states H^(0)..H^(9).
std::vector<Eigen::MatrixXd> run_circuit_stages(const Prompt& prompt, const MixtureSpec& spec);

// Operator sequence computing softmax of rows k..l of column final_col
// (which must be the state's last column) into rows kp..kp+(l-k), using only
// affine, sigmoid, div and mov operators plus a scratch block of
// 3*(l-k+1)+2 rows starting at scratch_row; the scratch block is zeroed
// again at the end.
std::vector<CircuitStep> softmax_via_sigmoid_steps(int k, int l, int kp, int scratch_row,
                                                   int final_col);

}  // namespace mixreg
