#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mixreg/rng.hpp"

namespace mixreg {

// A discrete, uniformly weighted mixture of linear maps: m component vectors
// of dimension d (one per row of `components`) plus a label noise level.
struct MixtureSpec {
  Eigen::MatrixXd components;  // m x d, row j is component w_j
  double sigma = 0.0;          // label noise standard deviation, >= 0

  int m() const { return static_cast<int>(components.rows()); }
  int d() const { return static_cast<int>(components.cols()); }
};

// One prompt: covariates x_1..x_{k+1}, labels y_1..y_k, plus the held-out
// query label y_{k+1} and the index of the component that generated the
// prompt. The latent index and query label are for evaluation only; no
// predictor may read them.
struct Prompt {
  std::vector<Eigen::VectorXd> xs;  // k+1 vectors of dimension d
  std::vector<double> ys;           // k labels
  int latent_index = 1;             // 1-based component index
  double query_y = 0.0;             // y_{k+1}

  int k() const { return static_cast<int>(ys.size()); }
  int d() const { return xs.empty() ? 0 : static_cast<int>(xs.front().size()); }
  const Eigen::VectorXd& query_x() const { return xs.back(); }
};

// Throws std::invalid_argument if the mixture or prompt violates its shape
// invariants.
void validate(const MixtureSpec& spec);
void validate(const Prompt& prompt);
void validate(const Prompt& prompt, const MixtureSpec& spec);

// Draws m component vectors, each uniform on the sphere of radius sqrt(d).
Eigen::MatrixXd sample_components(int m, int d, Rng& rng);

// Convenience: spec with freshly sampled components.
MixtureSpec sample_spec(int m, int d, double sigma, Rng& rng);

// Draws one prompt of length k from the mixture: latent component uniform,
// covariates i.i.d. standard normal, labels <w, x> + sigma * noise. kappa
// rescales each covariate (query included) before labels are formed; the
// underlying draws do not depend on kappa, so runs with a shared seed are
// paired across kappa values.
Prompt sample_prompt(const MixtureSpec& spec, int k, Rng& rng, double kappa = 1.0);

// Returns spec with every component row multiplied by alpha. Rejects
// alpha <= 0.
MixtureSpec shift_weight_scale(const MixtureSpec& spec, double alpha);

// Returns spec with every component shifted by (eps / sqrt(d)) * 1_d, an
// additive perturbation of norm eps. Rejects eps < 0.
MixtureSpec shift_weight_add(const MixtureSpec& spec, double eps);

// Deterministic, counter-addressed prompt source. Prompt (k, index) is a
// pure function of (seed, k, index), so distinct workers can sample any
// subset without coordination, and sources that share a seed but differ in
// kappa or in shifted component sets reuse the same underlying draws.
class PromptSource {
 public:
  PromptSource(MixtureSpec spec, std::uint64_t seed, double kappa = 1.0);

  Prompt at(int k, std::uint64_t index) const;

  const MixtureSpec& spec() const { return spec_; }
  double kappa() const { return kappa_; }
  std::uint64_t seed() const { return seed_; }

 private:
  MixtureSpec spec_;
  std::uint64_t seed_ = 0;
  double kappa_ = 1.0;
  Rng prompt_root_;
};

// Prompt sampler for the covariate-scale shift: identical to sampling from
// `spec` except every covariate is scaled by kappa. Rejects kappa <= 0.
PromptSource shift_covariate_scale(const MixtureSpec& spec, double kappa, std::uint64_t seed);

}  // namespace mixreg
