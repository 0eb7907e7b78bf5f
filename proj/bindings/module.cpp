#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mixreg/construction.hpp"
#include "mixreg/em.hpp"
#include "mixreg/harness.hpp"
#include "mixreg/io.hpp"
#include "mixreg/predictors.hpp"
#include "mixreg/training.hpp"

namespace py = pybind11;
using namespace mixreg;

PYBIND11_MODULE(_core, m) {
  m.doc() = "mixture-of-linear-regressions laboratory core";

  py::class_<MixtureSpec>(m, "MixtureSpec")
      .def(py::init<>())
      .def_readwrite("components", &MixtureSpec::components)
      .def_readwrite("sigma", &MixtureSpec::sigma)
      .def_property_readonly("m", &MixtureSpec::m)
      .def_property_readonly("d", &MixtureSpec::d);

  py::class_<Prompt>(m, "Prompt")
      .def(py::init<>())
      .def_readwrite("xs", &Prompt::xs)
      .def_readwrite("ys", &Prompt::ys)
      .def_readwrite("latent_index", &Prompt::latent_index)
      .def_readwrite("query_y", &Prompt::query_y)
      .def_property_readonly("k", &Prompt::k)
      .def_property_readonly("d", &Prompt::d);

  m.def(
      "sample_spec",
      [](int m_, int d, double sigma, std::uint64_t seed) {
        Rng rng = Rng(seed).substream("mixture");
        return sample_spec(m_, d, sigma, rng);
      },
      py::arg("m"), py::arg("d"), py::arg("sigma"), py::arg("seed"));
  m.def(
      "sample_prompt",
      [](const MixtureSpec& spec, int k, std::uint64_t seed, double kappa) {
        Rng rng(seed);
        return sample_prompt(spec, k, rng, kappa);
      },
      py::arg("spec"), py::arg("k"), py::arg("seed"), py::arg("kappa") = 1.0);

  py::class_<PosteriorSummary>(m, "PosteriorSummary")
      .def_readonly("probs", &PosteriorSummary::probs)
      .def_readonly("w_hat", &PosteriorSummary::w_hat)
      .def_readonly("prediction", &PosteriorSummary::prediction)
      .def_readonly("noiseless_limit", &PosteriorSummary::noiseless_limit);

  m.def("posterior_mean_predict", &posterior_mean_predict);
  m.def("residual_matrix", &residual_matrix);
  m.def("argmin_predict", &argmin_predict);
  m.def("ols_predict", &ols_predict);
  m.def("ols_weights", &ols_weights);

  m.def("run_circuit", &run_circuit);
  m.def("run_circuit_stages", &run_circuit_stages);

  py::class_<EMResult>(m, "EMResult")
      .def_readonly("weights", &EMResult::weights)
      .def_readonly("mix", &EMResult::mix)
      .def_readonly("iterations", &EMResult::iterations)
      .def_readonly("converged", &EMResult::converged)
      .def_readonly("log_likelihood", &EMResult::log_likelihood)
      .def_readonly("warnings", &EMResult::warnings);

  m.def(
      "em_fit",
      [](const std::vector<Prompt>& prompts, int m_, double sigma, std::uint64_t seed,
         int restarts, int t_max, double tol, double ridge) {
        EMConfig config;
        config.sigma = sigma;
        config.restarts = restarts;
        config.t_max = t_max;
        config.tol = tol;
        config.ridge = ridge;
        Rng rng(seed);
        return em_fit(prompts, m_, config, rng);
      },
      py::arg("prompts"), py::arg("m"), py::arg("sigma"), py::arg("seed"),
      py::arg("restarts") = 1, py::arg("t_max") = 20000, py::arg("tol") = 1e-3,
      py::arg("ridge") = 1e-8);
  m.def("oracle_pred_error", &oracle_pred_error, py::arg("estimated"), py::arg("spec"),
        py::arg("normalized") = false);

  m.def("gelu", &gelu);
  m.def("layernorm", &layernorm);
  m.def("softmax", &softmax);

  py::class_<MetricCurve>(m, "MetricCurve")
      .def_readonly("metric", &MetricCurve::metric)
      .def_readonly("setting", &MetricCurve::setting)
      .def_readonly("k_values", &MetricCurve::k_values)
      .def_readonly("means", &MetricCurve::means)
      .def_readonly("stderrs", &MetricCurve::stderrs)
      .def_readonly("counts", &MetricCurve::counts);

  m.def(
      "eval_mse_curve",
      [](const std::string& predictor, int m_, int d, double sigma, std::uint64_t seed, int k_min,
         int k_max, int n) {
        PredictorContext context;
        Rng rng = Rng(seed).substream("mixture");
        context.spec = sample_spec(m_, d, sigma, rng);
        const Predictor f = make_predictor(predictor, context);
        MetricCurve curve = eval_mse_curve(f, PromptSource(context.spec, seed), k_min, k_max, n);
        curve.setting = predictor;
        return curve;
      },
      py::arg("predictor"), py::arg("m"), py::arg("d"), py::arg("sigma"), py::arg("seed"),
      py::arg("k_min") = 1, py::arg("k_max") = 20, py::arg("n") = 256);

  m.def(
      "eval_sq_distance",
      [](const std::string& f_name, const std::string& g_name, int m_, int d, double sigma,
         std::uint64_t seed, int k_min, int k_max, int n) {
        PredictorContext context;
        Rng rng = Rng(seed).substream("mixture");
        context.spec = sample_spec(m_, d, sigma, rng);
        const Predictor f = make_predictor(f_name, context);
        const Predictor g = make_predictor(g_name, context);
        MetricCurve curve =
            eval_sq_distance(f, g, PromptSource(context.spec, seed), k_min, k_max, n);
        curve.setting = f_name + " vs " + g_name;
        return curve;
      },
      py::arg("f"), py::arg("g"), py::arg("m"), py::arg("d"), py::arg("sigma"), py::arg("seed"),
      py::arg("k_min") = 1, py::arg("k_max") = 20, py::arg("n") = 256);

  m.def("predictor_names", &predictor_names);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("p", &ModelConfig::p)
      .def_readwrite("n_heads", &ModelConfig::n_heads)
      .def_readwrite("d_att", &ModelConfig::d_att)
      .def_readwrite("d_ff", &ModelConfig::d_ff)
      .def_readwrite("n_layers", &ModelConfig::n_layers);

  py::class_<ModelParams>(m, "ModelParams")
      .def_readonly("config", &ModelParams::config)
      .def_readonly("embed", &ModelParams::embed)
      .def_readonly("read_w", &ModelParams::read_w)
      .def_readonly("read_b", &ModelParams::read_b);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("model", &TrainConfig::model)
      .def_readwrite("m", &TrainConfig::m)
      .def_readwrite("d", &TrainConfig::d)
      .def_readwrite("sigma", &TrainConfig::sigma)
      .def_readwrite("k_min", &TrainConfig::k_min)
      .def_readwrite("k_max", &TrainConfig::k_max)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("curriculum_phase_steps", &TrainConfig::curriculum_phase_steps)
      .def_readwrite("final_steps", &TrainConfig::final_steps)
      .def_readwrite("adam_lr", &TrainConfig::adam_lr)
      .def_readwrite("dropout", &TrainConfig::dropout)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<TraceRow>(m, "TraceRow")
      .def_readonly("step", &TraceRow::step)
      .def_readonly("raw_loss", &TraceRow::raw_loss)
      .def_readonly("normalized_loss", &TraceRow::normalized_loss);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("model", &TrainResult::model)
      .def_readonly("trace", &TrainResult::trace);

  m.def("train", &train);
  m.def("model_query_prediction", &model_query_prediction);
  m.def("batch_loss", &batch_loss);
  m.def("save_model", &save_model);
  m.def("load_model", &load_model);
}
