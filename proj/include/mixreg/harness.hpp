#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mixreg/mixtures.hpp"
#include "mixreg/training.hpp"

namespace mixreg {

// One evaluated curve: a named metric over prompt lengths, with Monte-Carlo
// means, standard errors (sample sd / sqrt(n)) and sample counts.
struct MetricCurve {
  std::string metric;   // normalized_mse | sq_distance | oracle_error
  std::string setting;  // free-form label, e.g. predictor or grid point
  std::vector<int> k_values;
  std::vector<double> means;
  std::vector<double> stderrs;
  std::vector<long> counts;
};

void validate(const MetricCurve& curve);

// A predictor maps a prompt to a scalar guess for the query label.
using Predictor = std::function<double(const Prompt&)>;

// Everything a registry name may need: the mixture the predictors treat as
// ground truth, optionally a fitted mixture (for the :estimated variants)
// and a trained model.
struct PredictorContext {
  MixtureSpec spec;
  std::optional<MixtureSpec> estimated;
  std::optional<ModelParams> model;
};

// Names: posterior_mean, argmin, ols, zero, truth, circuit, transformer,
// posterior_mean:estimated, argmin:estimated. `truth` reads the prompt's
// latent index, so it is a diagnostic, not a fair predictor. Throws on
// unknown names or when the context lacks what the name needs.
Predictor make_predictor(const std::string& name, const PredictorContext& context);
std::vector<std::string> predictor_names();

// Mean and stderr of (prediction - query label)^2 / d for each prompt
// length in [k_min, k_max], n_prompts fresh prompts per length.
MetricCurve eval_mse_curve(const Predictor& predictor, const PromptSource& source, int k_min,
                           int k_max, int n_prompts);

// Mean and stderr of (f - g)^2 on identical prompts (not normalized by d).
MetricCurve eval_sq_distance(const Predictor& f, const Predictor& g, const PromptSource& source,
                             int k_min, int k_max, int n_prompts);

enum class ShiftKind { covariate_scale, weight_scale, weight_add };

ShiftKind parse_shift_kind(const std::string& name);
std::string shift_kind_name(ShiftKind kind);
// kappa / alpha / eps.
std::string shift_param_name(ShiftKind kind);
double shift_identity_value(ShiftKind kind);
// The grids the curves are reported over by default.
std::vector<double> default_shift_grid(ShiftKind kind);

struct ShiftPoint {
  double value = 0.0;
  MetricCurve curve;
};

// One MSE curve per grid value. The predictor is always built from the
// unshifted context; only the prompt distribution moves. The identity grid
// point is prepended when missing, and a grid value equal to the identity
// reuses bit-for-bit the draws of the unshifted run (shared seed).
std::vector<ShiftPoint> shift_sweep(ShiftKind kind, const std::vector<double>& grid,
                                    const std::string& predictor_name,
                                    const PredictorContext& context, int k_min, int k_max,
                                    int n_prompts, std::uint64_t seed);

}  // namespace mixreg
