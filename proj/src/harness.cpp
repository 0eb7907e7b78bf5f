#include "mixreg/harness.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "mixreg/construction.hpp"
#include "mixreg/predictors.hpp"

namespace mixreg {

void validate(const MetricCurve& curve) {
  const size_t n = curve.k_values.size();
  if (n == 0) throw std::invalid_argument("MetricCurve: empty k list");
  if (curve.means.size() != n || curve.stderrs.size() != n || curve.counts.size() != n) {
    throw std::invalid_argument("MetricCurve: column lengths differ");
  }
  for (double s : curve.stderrs) {
    if (!(s >= 0.0)) throw std::invalid_argument("MetricCurve: stderr must be >= 0");
  }
  for (long c : curve.counts) {
    if (c < 1) throw std::invalid_argument("MetricCurve: counts must be >= 1");
  }
}

Predictor make_predictor(const std::string& name, const PredictorContext& context) {
  validate(context.spec);
  const MixtureSpec spec = context.spec;
  if (name == "posterior_mean") {
    return [spec](const Prompt& p) { return posterior_mean_predict(p, spec).prediction; };
  }
  if (name == "argmin") {
    return [spec](const Prompt& p) { return argmin_predict(p, spec.components); };
  }
  if (name == "ols") {
    return [](const Prompt& p) { return ols_predict(p); };
  }
  if (name == "zero") {
    return [](const Prompt&) { return 0.0; };
  }
  if (name == "truth") {
    return [spec](const Prompt& p) {
      validate(p, spec);
      return spec.components.row(p.latent_index - 1).dot(p.query_x());
    };
  }
  if (name == "circuit") {
    return [spec](const Prompt& p) { return run_circuit(p, spec); };
  }
  if (name == "transformer") {
    if (!context.model) throw std::invalid_argument("predictor transformer: no model loaded");
    const ModelParams model = *context.model;
    return [model](const Prompt& p) { return model_query_prediction(model, p); };
  }
  if (name == "posterior_mean:estimated" || name == "argmin:estimated") {
    if (!context.estimated) {
      throw std::invalid_argument("predictor " + name + ": no estimated weights loaded");
    }
    const MixtureSpec est = *context.estimated;
    validate(est);
    if (name == "posterior_mean:estimated") {
      return [est](const Prompt& p) { return posterior_mean_predict(p, est).prediction; };
    }
    return [est](const Prompt& p) { return argmin_predict(p, est.components); };
  }
  throw std::invalid_argument("unknown predictor name: " + name);
}

std::vector<std::string> predictor_names() {
  return {"posterior_mean", "argmin",      "ols",
          "zero",           "truth",       "circuit",
          "transformer",    "posterior_mean:estimated", "argmin:estimated"};
}

namespace {

struct Moments {
  double mean = 0.0;
  double stderr_of_mean = 0.0;
};

Moments moments(const std::vector<double>& values) {
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return {mean, sd / std::sqrt(n)};
}

MetricCurve eval_curve(const std::string& metric, const PromptSource& source, int k_min, int k_max,
                       int n_prompts, const std::function<double(const Prompt&)>& per_prompt) {
  if (n_prompts < 2) throw std::invalid_argument("evaluation needs n_prompts >= 2");
  if (k_min < 0 || k_max < k_min) throw std::invalid_argument("evaluation: bad k range");
  MetricCurve curve;
  curve.metric = metric;
  for (int k = k_min; k <= k_max; ++k) {
    std::vector<double> values;
    values.reserve(static_cast<size_t>(n_prompts));
    for (int i = 0; i < n_prompts; ++i) {
      values.push_back(per_prompt(source.at(k, static_cast<std::uint64_t>(i))));
    }
    const Moments m = moments(values);
    curve.k_values.push_back(k);
    curve.means.push_back(m.mean);
    curve.stderrs.push_back(m.stderr_of_mean);
    curve.counts.push_back(n_prompts);
  }
  return curve;
}

}  // namespace

MetricCurve eval_mse_curve(const Predictor& predictor, const PromptSource& source, int k_min,
                           int k_max, int n_prompts) {
  const double d = static_cast<double>(source.spec().d());
  return eval_curve("normalized_mse", source, k_min, k_max, n_prompts,
                    [&predictor, d](const Prompt& p) {
                      const double err = predictor(p) - p.query_y;
                      return err * err / d;
                    });
}

MetricCurve eval_sq_distance(const Predictor& f, const Predictor& g, const PromptSource& source,
                             int k_min, int k_max, int n_prompts) {
  return eval_curve("sq_distance", source, k_min, k_max, n_prompts, [&f, &g](const Prompt& p) {
    const double diff = f(p) - g(p);
    return diff * diff;
  });
}

ShiftKind parse_shift_kind(const std::string& name) {
  if (name == "covariate_scale") return ShiftKind::covariate_scale;
  if (name == "weight_scale") return ShiftKind::weight_scale;
  if (name == "weight_add") return ShiftKind::weight_add;
  throw std::invalid_argument("unknown shift kind: " + name);
}

std::string shift_kind_name(ShiftKind kind) {
  switch (kind) {
    case ShiftKind::covariate_scale:
      return "covariate_scale";
    case ShiftKind::weight_scale:
      return "weight_scale";
    case ShiftKind::weight_add:
      return "weight_add";
  }
  throw std::logic_error("shift_kind_name: bad kind");
}

std::string shift_param_name(ShiftKind kind) {
  switch (kind) {
    case ShiftKind::covariate_scale:
      return "kappa";
    case ShiftKind::weight_scale:
      return "alpha";
    case ShiftKind::weight_add:
      return "eps";
  }
  throw std::logic_error("shift_param_name: bad kind");
}

double shift_identity_value(ShiftKind kind) {
  return kind == ShiftKind::weight_add ? 0.0 : 1.0;
}

std::vector<double> default_shift_grid(ShiftKind kind) {
  if (kind == ShiftKind::weight_add) return {0.0, 0.25, 0.5, 0.75, 1.0};
  return {0.33, 0.5, 1.0, 2.0, 3.0};
}

std::vector<ShiftPoint> shift_sweep(ShiftKind kind, const std::vector<double>& grid,
                                    const std::string& predictor_name,
                                    const PredictorContext& context, int k_min, int k_max,
                                    int n_prompts, std::uint64_t seed) {
  if (grid.empty()) throw std::invalid_argument("shift_sweep: empty grid");
  std::vector<double> values = grid;
  const double identity = shift_identity_value(kind);
  bool has_identity = false;
  for (double v : values) has_identity = has_identity || v == identity;
  if (!has_identity) values.insert(values.begin(), identity);

  const Predictor predictor = make_predictor(predictor_name, context);
  std::vector<ShiftPoint> points;
  for (double v : values) {
    PromptSource source = [&]() {
      switch (kind) {
        case ShiftKind::covariate_scale:
          return shift_covariate_scale(context.spec, v, seed);
        case ShiftKind::weight_scale:
          return PromptSource(shift_weight_scale(context.spec, v), seed);
        case ShiftKind::weight_add:
          return PromptSource(shift_weight_add(context.spec, v), seed);
      }
      throw std::logic_error("shift_sweep: bad kind");
    }();
    MetricCurve curve = eval_mse_curve(predictor, source, k_min, k_max, n_prompts);
    char label[64];
    std::snprintf(label, sizeof(label), "%s=%.17g", shift_param_name(kind).c_str(), v);
    curve.setting = label;
    points.push_back({v, std::move(curve)});
  }
  return points;
}

}  // namespace mixreg
