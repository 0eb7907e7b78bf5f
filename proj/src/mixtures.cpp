#include "mixreg/mixtures.hpp"

#include <cmath>
#include <stdexcept>

namespace mixreg {

void validate(const MixtureSpec& spec) {
  if (spec.components.rows() < 1 || spec.components.cols() < 1) {
    throw std::invalid_argument("MixtureSpec: components must be a nonempty m x d matrix");
  }
  if (!(spec.sigma >= 0.0)) {
    throw std::invalid_argument("MixtureSpec: sigma must be >= 0");
  }
}

void validate(const Prompt& prompt) {
  if (prompt.xs.size() != prompt.ys.size() + 1) {
    throw std::invalid_argument("Prompt: len(xs) must equal len(ys) + 1");
  }
  if (prompt.d() < 1) throw std::invalid_argument("Prompt: covariates must be nonempty");
  for (const auto& x : prompt.xs) {
    if (x.size() != prompt.d()) {
      throw std::invalid_argument("Prompt: covariate dimensions must agree");
    }
  }
  if (prompt.latent_index < 1) throw std::invalid_argument("Prompt: latent_index must be >= 1");
}

void validate(const Prompt& prompt, const MixtureSpec& spec) {
  validate(prompt);
  if (prompt.latent_index > spec.m()) {
    throw std::invalid_argument("Prompt: latent_index out of range");
  }
  if (prompt.d() != spec.d()) {
    throw std::invalid_argument("Prompt: covariate dimension mismatch");
  }
}

Eigen::MatrixXd sample_components(int m, int d, Rng& rng) {
  if (m < 1 || d < 1) {
    throw std::invalid_argument("sample_components: m and d must be >= 1");
  }
  const double radius = std::sqrt(static_cast<double>(d));
  Eigen::MatrixXd components(m, d);
  for (int j = 0; j < m; ++j) {
    double norm = 0.0;
    Eigen::VectorXd row(d);
    do {
      for (int i = 0; i < d; ++i) row[i] = rng.next_gaussian();
      norm = row.norm();
    } while (norm == 0.0);
    components.row(j) = (radius / norm) * row.transpose();
  }
  return components;
}

MixtureSpec sample_spec(int m, int d, double sigma, Rng& rng) {
  MixtureSpec spec{sample_components(m, d, rng), sigma};
  validate(spec);
  return spec;
}

Prompt sample_prompt(const MixtureSpec& spec, int k, Rng& rng, double kappa) {
  validate(spec);
  if (k < 0) throw std::invalid_argument("sample_prompt: k must be >= 0");
  if (!(kappa > 0.0)) throw std::invalid_argument("sample_prompt: kappa must be > 0");

  // Key the draw streams off one counter value so repeated calls on the same
  // generator advance it and yield fresh prompts.
  Rng call = rng.substream(rng.next_u64());
  Rng latent = call.substream("latent");
  Rng covariates = call.substream("covariates");
  Rng noise = call.substream("noise");

  const int d = spec.d();
  Prompt prompt;
  prompt.latent_index = latent.next_index(spec.m()) + 1;
  const Eigen::VectorXd w = spec.components.row(prompt.latent_index - 1).transpose();

  prompt.xs.reserve(k + 1);
  prompt.ys.reserve(k);
  for (int i = 0; i <= k; ++i) {
    Eigen::VectorXd x(d);
    for (int t = 0; t < d; ++t) x[t] = covariates.next_gaussian();
    x *= kappa;
    const double y = w.dot(x) + (spec.sigma > 0.0 ? spec.sigma * noise.next_gaussian() : 0.0);
    if (i < k) {
      prompt.ys.push_back(y);
    } else {
      prompt.query_y = y;
    }
    prompt.xs.push_back(std::move(x));
  }
  return prompt;
}

MixtureSpec shift_weight_scale(const MixtureSpec& spec, double alpha) {
  validate(spec);
  if (!(alpha > 0.0)) throw std::invalid_argument("shift_weight_scale: alpha must be > 0");
  return MixtureSpec{alpha * spec.components, spec.sigma};
}

MixtureSpec shift_weight_add(const MixtureSpec& spec, double eps) {
  validate(spec);
  if (!(eps >= 0.0)) throw std::invalid_argument("shift_weight_add: eps must be >= 0");
  MixtureSpec shifted = spec;
  shifted.components.array() += eps / std::sqrt(static_cast<double>(spec.d()));
  return shifted;
}

PromptSource::PromptSource(MixtureSpec spec, std::uint64_t seed, double kappa)
    : spec_(std::move(spec)), seed_(seed), kappa_(kappa), prompt_root_(Rng(seed).substream("prompts")) {
  validate(spec_);
  if (!(kappa_ > 0.0)) throw std::invalid_argument("PromptSource: kappa must be > 0");
}

Prompt PromptSource::at(int k, std::uint64_t index) const {
  Rng stream = prompt_root_.substream(static_cast<std::uint64_t>(k)).substream(index);
  return sample_prompt(spec_, k, stream, kappa_);
}

PromptSource shift_covariate_scale(const MixtureSpec& spec, double kappa, std::uint64_t seed) {
  if (!(kappa > 0.0)) throw std::invalid_argument("shift_covariate_scale: kappa must be > 0");
  return PromptSource(spec, seed, kappa);
}

}  // namespace mixreg
