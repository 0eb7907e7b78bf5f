#include "mixreg/em.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mixreg {
namespace {

// Per-prompt log densities up to the shared -k*log(sigma*sqrt(2*pi)) term:
// entry (i, j) is -(1/2 sigma^2) * sum_l (y_l - <x_l, w_j>)^2.
Eigen::MatrixXd log_fit_matrix(const std::vector<Prompt>& prompts, const Eigen::MatrixXd& weights,
                               double sigma) {
  const int n = static_cast<int>(prompts.size());
  const int m = static_cast<int>(weights.rows());
  Eigen::MatrixXd log_fit(n, m);
  const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
  for (int i = 0; i < n; ++i) {
    const Prompt& prompt = prompts[i];
    Eigen::VectorXd loss = Eigen::VectorXd::Zero(m);
    for (int l = 0; l < prompt.k(); ++l) {
      loss += ((weights * prompt.xs[l]).array() - prompt.ys[l]).square().matrix();
    }
    log_fit.row(i) = (-inv_two_var * loss).transpose();
  }
  return log_fit;
}

}  // namespace

EMState em_init(int m, int d, Rng& rng) {
  if (m < 1 || d < 1) throw std::invalid_argument("em_init: m and d must be >= 1");
  EMState state;
  state.weights = sample_components(m, d, rng);
  state.mix.resize(m);
  for (int j = 0; j < m; ++j) state.mix[j] = -std::log(rng.next_uniform());
  state.mix /= state.mix.sum();
  state.resp.resize(0, m);
  state.iteration = 0;
  return state;
}

EMState em_e_step(EMState state, const std::vector<Prompt>& prompts, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("em_e_step: sigma must be > 0");
  const int n = static_cast<int>(prompts.size());
  const int m = static_cast<int>(state.weights.rows());

  const Eigen::MatrixXd log_fit = log_fit_matrix(prompts, state.weights, sigma);
  state.resp.resize(n, m);
  state.log_likelihood = 0.0;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd log_post(m);
    for (int j = 0; j < m; ++j) {
      log_post[j] = std::log(state.mix[j]) + log_fit(i, j);
    }
    const double shift = log_post.maxCoeff();
    if (!std::isfinite(shift)) {
      throw std::runtime_error("em_e_step: all components have zero likelihood for a prompt");
    }
    Eigen::VectorXd row = (log_post.array() - shift).exp();
    const double normalizer = row.sum();
    state.resp.row(i) = (row / normalizer).transpose();
    state.log_likelihood += shift + std::log(normalizer) -
                            prompts[i].k() * std::log(sigma * std::sqrt(2.0 * std::numbers::pi));
  }
  return state;
}

EMState em_m_step(EMState state, const std::vector<Prompt>& prompts, double ridge,
                  std::vector<std::string>* warnings) {
  const int n = static_cast<int>(prompts.size());
  const int m = static_cast<int>(state.weights.rows());
  const int d = static_cast<int>(state.weights.cols());
  if (state.resp.rows() != n) {
    throw std::invalid_argument("em_m_step: responsibilities not populated");
  }

  state.mix = state.resp.colwise().mean().transpose();

  // Per-prompt sufficient statistics, accumulated in fixed index order.
  std::vector<Eigen::MatrixXd> gram(n);
  std::vector<Eigen::VectorXd> moment(n);
  for (int i = 0; i < n; ++i) {
    gram[i] = Eigen::MatrixXd::Zero(d, d);
    moment[i] = Eigen::VectorXd::Zero(d);
    const Prompt& prompt = prompts[i];
    for (int l = 0; l < prompt.k(); ++l) {
      gram[i].noalias() += prompt.xs[l] * prompt.xs[l].transpose();
      moment[i].noalias() += prompt.ys[l] * prompt.xs[l];
    }
  }

  for (int j = 0; j < m; ++j) {
    Eigen::MatrixXd a = ridge * Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < n; ++i) {
      a.noalias() += state.resp(i, j) * gram[i];
      b.noalias() += state.resp(i, j) * moment[i];
    }
    const Eigen::VectorXd w = a.ldlt().solve(b);
    if (w.allFinite()) {
      state.weights.row(j) = w.transpose();
    } else if (warnings != nullptr) {
      warnings->push_back("em_m_step: singular weighted Gram for component " +
                          std::to_string(j + 1) + "; keeping previous weights");
    }
  }
  ++state.iteration;
  return state;
}

EMResult em_fit(const std::vector<Prompt>& prompts, int m, const EMConfig& config, Rng& rng) {
  if (prompts.empty()) throw std::invalid_argument("em_fit: need at least one prompt");
  if (!(config.sigma > 0.0)) throw std::invalid_argument("em_fit: sigma must be > 0");
  const int d = prompts.front().d();

  EMResult best;
  std::vector<std::string> warnings;
  for (int restart = 0; restart < std::max(1, config.restarts); ++restart) {
    Rng stream = rng.substream("restart").substream(static_cast<std::uint64_t>(restart));
    EMState state = em_init(m, d, stream);
    EMResult result;

    while (state.iteration < config.t_max) {
      const Eigen::MatrixXd previous = state.weights;
      state = em_e_step(std::move(state), prompts, config.sigma);
      state = em_m_step(std::move(state), prompts, config.ridge, &warnings);

      // max over current components of the distance to the nearest component
      // of the previous iterate.
      double shift = 0.0;
      for (int j = 0; j < m; ++j) {
        double nearest = std::numeric_limits<double>::infinity();
        for (int jp = 0; jp < m; ++jp) {
          nearest = std::min(nearest, (state.weights.row(j) - previous.row(jp)).norm());
        }
        shift = std::max(shift, nearest);
      }
      if (shift <= config.tol) {
        result.converged = true;
        break;
      }
    }

    state = em_e_step(std::move(state), prompts, config.sigma);
    result.weights = state.weights;
    result.mix = state.mix;
    result.iterations = state.iteration;
    result.log_likelihood = state.log_likelihood;
    if (restart == 0 || result.log_likelihood > best.log_likelihood) {
      best = result;
    }
  }
  best.warnings = std::move(warnings);
  return best;
}

double oracle_pred_error(const Eigen::MatrixXd& estimated, const MixtureSpec& spec,
                         bool normalized) {
  if (estimated.rows() < 1) throw std::invalid_argument("oracle_pred_error: empty estimate");
  if (estimated.cols() != spec.d()) {
    throw std::invalid_argument("oracle_pred_error: dimension mismatch");
  }
  double total = 0.0;
  for (int j = 0; j < spec.m(); ++j) {
    double nearest = std::numeric_limits<double>::infinity();
    for (int e = 0; e < estimated.rows(); ++e) {
      nearest = std::min(nearest, (spec.components.row(j) - estimated.row(e)).squaredNorm());
    }
    total += nearest;
  }
  const double value = spec.sigma * spec.sigma + total / spec.m();
  return normalized ? value / spec.d() : value;
}

}  // namespace mixreg
