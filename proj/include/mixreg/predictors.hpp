#pragma once

#include <Eigen/Dense>

#include "mixreg/mixtures.hpp"

namespace mixreg {

// Posterior weights over components together with the resulting predictor.
struct PosteriorSummary {
  Eigen::VectorXd probs;   // length m, nonnegative, sums to 1
  Eigen::VectorXd w_hat;   // length d, probs-weighted component average
  double prediction = 0;   // <w_hat, x_{k+1}>
  // Set when sigma == 0 and the exponential weights degenerated to the
  // uniform distribution over exact squared-loss minimizers.
  bool noiseless_limit = false;
};

struct PosteriorProbs {
  Eigen::VectorXd probs;
  bool noiseless_limit = false;
};

// Residuals r_{ij} = <w_j, x_i> - y_i for the k labeled rows; the query row
// k+1 carries <w_j, x_{k+1}> with no label subtracted. Shape (k+1) x m.
Eigen::MatrixXd residual_matrix(const Prompt& prompt, const Eigen::MatrixXd& components);

// p_j proportional to exp(-(1/2 sigma^2) sum_i r_{ij}^2), normalized.
// Computed in the log domain with a max shift, so any finite residuals are
// safe. sigma == 0 yields the uniform distribution over the components with
// minimal squared loss, flagged via noiseless_limit.
PosteriorProbs posterior_probs(const Prompt& prompt, const MixtureSpec& spec);

// The posterior-mean predictor: w_hat = sum_j p_j w_j and the prediction
// <w_hat, x_{k+1}>. w_hat does not depend on the query covariate.
PosteriorSummary posterior_mean_predict(const Prompt& prompt, const MixtureSpec& spec);

// Predicts with the single component minimizing in-prompt squared loss.
// Ties break toward the lowest component index.
double argmin_predict(const Prompt& prompt, const Eigen::MatrixXd& components);
int argmin_component(const Prompt& prompt, const Eigen::MatrixXd& components);  // 0-based

// Minimum-Euclidean-norm least squares over the k labeled pairs
// (pseudoinverse with relative singular value cutoff 1e-10); k = 0 gives the
// zero predictor.
double ols_predict(const Prompt& prompt);
Eigen::VectorXd ols_weights(const Prompt& prompt);

}  // namespace mixreg
