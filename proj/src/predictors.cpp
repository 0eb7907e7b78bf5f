#include "mixreg/predictors.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mixreg {

Eigen::MatrixXd residual_matrix(const Prompt& prompt, const Eigen::MatrixXd& components) {
  const int k = prompt.k();
  const int m = static_cast<int>(components.rows());
  if (prompt.d() != components.cols()) {
    throw std::invalid_argument("residual_matrix: component dimension mismatch");
  }
  Eigen::MatrixXd r(k + 1, m);
  for (int i = 0; i <= k; ++i) {
    r.row(i) = (components * prompt.xs[i]).transpose();
    if (i < k) r.row(i).array() -= prompt.ys[i];
  }
  return r;
}

namespace {

// Column sums of squared residuals over the labeled rows only.
Eigen::VectorXd squared_loss_per_component(const Prompt& prompt, const Eigen::MatrixXd& components) {
  const Eigen::MatrixXd r = residual_matrix(prompt, components);
  const int k = prompt.k();
  return r.topRows(k).colwise().squaredNorm().transpose();
}

}  // namespace

PosteriorProbs posterior_probs(const Prompt& prompt, const MixtureSpec& spec) {
  validate(prompt, spec);
  const Eigen::VectorXd loss = squared_loss_per_component(prompt, spec.components);
  const int m = spec.m();
  PosteriorProbs out;
  out.probs.resize(m);

  if (spec.sigma == 0.0) {
    // Exponential weights degenerate to the uniform distribution over the
    // exact loss minimizers.
    out.noiseless_limit = true;
    const double min_loss = loss.minCoeff();
    int count = 0;
    for (int j = 0; j < m; ++j) {
      out.probs[j] = (loss[j] == min_loss) ? 1.0 : 0.0;
      count += (loss[j] == min_loss);
    }
    out.probs /= static_cast<double>(count);
    return out;
  }

  const Eigen::VectorXd logits = -loss / (2.0 * spec.sigma * spec.sigma);
  const double shift = logits.maxCoeff();
  out.probs = (logits.array() - shift).exp();
  out.probs /= out.probs.sum();
  return out;
}

PosteriorSummary posterior_mean_predict(const Prompt& prompt, const MixtureSpec& spec) {
  PosteriorProbs p = posterior_probs(prompt, spec);
  PosteriorSummary summary;
  summary.probs = std::move(p.probs);
  summary.noiseless_limit = p.noiseless_limit;
  summary.w_hat = spec.components.transpose() * summary.probs;
  summary.prediction = summary.w_hat.dot(prompt.query_x());
  return summary;
}

int argmin_component(const Prompt& prompt, const Eigen::MatrixXd& components) {
  const Eigen::VectorXd loss = squared_loss_per_component(prompt, components);
  int best = 0;
  for (int j = 1; j < loss.size(); ++j) {
    if (loss[j] < loss[best]) best = j;
  }
  return best;
}

double argmin_predict(const Prompt& prompt, const Eigen::MatrixXd& components) {
  const int j = argmin_component(prompt, components);
  return components.row(j).dot(prompt.query_x());
}

Eigen::VectorXd ols_weights(const Prompt& prompt) {
  const int k = prompt.k();
  const int d = prompt.d();
  if (k == 0) return Eigen::VectorXd::Zero(d);

  Eigen::MatrixXd design(k, d);
  Eigen::VectorXd labels(k);
  for (int i = 0; i < k; ++i) {
    design.row(i) = prompt.xs[i].transpose();
    labels[i] = prompt.ys[i];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  return svd.solve(labels);
}

double ols_predict(const Prompt& prompt) {
  return ols_weights(prompt).dot(prompt.query_x());
}

}  // namespace mixreg
