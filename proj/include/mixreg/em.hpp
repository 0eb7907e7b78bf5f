#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <vector>

#include "mixreg/mixtures.hpp"
#include "mixreg/rng.hpp"

namespace mixreg {

struct EMConfig {
  int t_max = 20000;     // iteration cap
  double tol = 0.001;    // stopping threshold on max_j min_j' ||w_j^(t) - w_j'^(t-1)||
  double ridge = 1e-8;   // M-step regularizer
  double sigma = 1.0;    // noise level, assumed known
  int restarts = 1;      // independent initializations; best log-likelihood wins
};

struct EMState {
  Eigen::MatrixXd weights;  // m x d
  Eigen::VectorXd mix;      // m, probability vector
  Eigen::MatrixXd resp;     // n x m responsibilities, rows sum to 1 after an E-step
  int iteration = 0;
  // Observed-data log-likelihood accumulated from the E-step row normalizers.
  double log_likelihood = -std::numeric_limits<double>::infinity();
};

struct EMResult {
  Eigen::MatrixXd weights;
  Eigen::VectorXd mix;
  int iterations = 0;
  bool converged = false;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  std::vector<std::string> warnings;
};

// Mixing weights uniform on the simplex, component rows uniform on the
// sphere of radius sqrt(d), responsibilities zeroed.
EMState em_init(int m, int d, Rng& rng);

// Per-prompt responsibilities: gamma_{ij} proportional to
// pi_j * prod_l phi((y_l - <x_l, w_j>) / sigma), computed in the log domain
// and normalized per row. Also refreshes state.log_likelihood.
EMState em_e_step(EMState state, const std::vector<Prompt>& prompts, double sigma);

// Mixing weights from responsibility column means; each component solves its
// responsibility-weighted least squares over all labeled pairs, with `ridge`
// added to the Gram diagonal. A component whose system stays singular keeps
// its previous weights and appends a warning.
EMState em_m_step(EMState state, const std::vector<Prompt>& prompts, double ridge,
                  std::vector<std::string>* warnings = nullptr);

// Alternates E and M steps until iteration > t_max or
// max_j min_j' ||w_j^(t) - w_j'^(t-1)||_2 <= tol. With restarts > 1, keeps
// the run with the best final log-likelihood.
EMResult em_fit(const std::vector<Prompt>& prompts, int m, const EMConfig& config, Rng& rng);

// sigma^2 plus the mean over true components of the squared distance to the
// nearest estimated component; divided by d when normalized is set.
double oracle_pred_error(const Eigen::MatrixXd& estimated, const MixtureSpec& spec,
                         bool normalized = false);

}  // namespace mixreg
