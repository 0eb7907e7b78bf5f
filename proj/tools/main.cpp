// Command-line surface: evaluation curves, predictor distances, shift
// sweeps, circuit verification, EM fitting and toy training. Every verb
// writes its outputs under --out together with a manifest.json recording the
// full configuration, and a fixed seed reproduces every output file
// byte for byte.

#include <CLI11.hpp>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "mixreg/construction.hpp"
#include "mixreg/em.hpp"
#include "mixreg/harness.hpp"
#include "mixreg/io.hpp"
#include "mixreg/mixtures.hpp"
#include "mixreg/predictors.hpp"
#include "mixreg/training.hpp"

namespace fs = std::filesystem;
using namespace mixreg;

namespace {

struct CommonOpts {
  std::string out = "run";
  std::uint64_t seed = 0;
  int m = 5;
  int d = 20;
  double sigma = 1.0;
  int k_min = 1;
  int k_max = 60;
  int n = 256;
  std::string weights_path;  // estimated mixture weights (JSONL)
  std::string model_path;    // trained model checkpoint
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_curve_range = true) {
  cmd->add_option("--out", o.out, "run directory (created if missing)");
  cmd->add_option("--seed", o.seed, "root seed");
  cmd->add_option("--m", o.m, "mixture components");
  cmd->add_option("--d", o.d, "covariate dimension");
  cmd->add_option("--sigma", o.sigma, "label noise level");
  if (with_curve_range) {
    cmd->add_option("--kmin", o.k_min, "smallest prompt length");
    cmd->add_option("--kmax", o.k_max, "largest prompt length");
    cmd->add_option("--n", o.n, "prompts per length");
  }
  cmd->add_option("--weights", o.weights_path, "estimated weights JSONL for :estimated names");
  cmd->add_option("--model", o.model_path, "model checkpoint for the transformer predictor");
}

MixtureSpec make_spec(const CommonOpts& o) {
  Rng rng = Rng(o.seed).substream("mixture");
  return sample_spec(o.m, o.d, o.sigma, rng);
}

PredictorContext make_context(const CommonOpts& o) {
  PredictorContext context;
  context.spec = make_spec(o);
  if (!o.weights_path.empty()) context.estimated = read_weights_jsonl(o.weights_path);
  if (!o.model_path.empty()) context.model = load_model(o.model_path);
  return context;
}

fs::path ensure_out(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

std::string u64_str(std::uint64_t v) { return std::to_string(v); }

void append_common_manifest(ManifestEntries& entries, const std::string& verb,
                            const CommonOpts& o) {
  entries.emplace_back("verb", json_quote(verb));
  entries.emplace_back("seed", u64_str(o.seed));
  entries.emplace_back("m", std::to_string(o.m));
  entries.emplace_back("d", std::to_string(o.d));
  entries.emplace_back("sigma", format_double(o.sigma));
  entries.emplace_back("k_min", std::to_string(o.k_min));
  entries.emplace_back("k_max", std::to_string(o.k_max));
  entries.emplace_back("n", std::to_string(o.n));
  if (!o.weights_path.empty()) entries.emplace_back("weights", json_quote(o.weights_path));
  if (!o.model_path.empty()) entries.emplace_back("model", json_quote(o.model_path));
}

void write_curve_outputs(const fs::path& dir, const std::vector<MetricCurve>& curves) {
  write_curves_csv((dir / "curves.csv").string(), curves);
  write_curves_jsonl((dir / "curves.jsonl").string(), curves);
  write_curves_svg((dir / "curves.svg").string(), curves);
}

int run_eval(const CommonOpts& o, const std::string& predictor_name) {
  const fs::path dir = ensure_out(o.out);
  const PredictorContext context = make_context(o);
  const Predictor predictor = make_predictor(predictor_name, context);
  const PromptSource source(context.spec, o.seed);
  MetricCurve curve = eval_mse_curve(predictor, source, o.k_min, o.k_max, o.n);
  curve.setting = predictor_name;
  write_curve_outputs(dir, {curve});

  ManifestEntries entries;
  append_common_manifest(entries, "eval", o);
  entries.emplace_back("predictor", json_quote(predictor_name));
  write_manifest((dir / "manifest.json").string(), entries);
  std::cout << "eval: wrote " << (dir / "curves.csv").string() << "\n";
  return 0;
}

int run_distance(const CommonOpts& o, const std::string& f_name, const std::string& g_name) {
  const fs::path dir = ensure_out(o.out);
  const PredictorContext context = make_context(o);
  const Predictor f = make_predictor(f_name, context);
  const Predictor g = make_predictor(g_name, context);
  const PromptSource source(context.spec, o.seed);
  MetricCurve curve = eval_sq_distance(f, g, source, o.k_min, o.k_max, o.n);
  curve.setting = f_name + " vs " + g_name;
  write_curve_outputs(dir, {curve});

  ManifestEntries entries;
  append_common_manifest(entries, "distance", o);
  entries.emplace_back("f", json_quote(f_name));
  entries.emplace_back("g", json_quote(g_name));
  write_manifest((dir / "manifest.json").string(), entries);
  std::cout << "distance: wrote " << (dir / "curves.csv").string() << "\n";
  return 0;
}

int run_shift(const CommonOpts& o, const std::string& kind_name, std::vector<double> grid,
              const std::string& predictor_name) {
  const fs::path dir = ensure_out(o.out);
  const ShiftKind kind = parse_shift_kind(kind_name);
  if (grid.empty()) grid = default_shift_grid(kind);
  const PredictorContext context = make_context(o);
  const std::vector<ShiftPoint> points =
      shift_sweep(kind, grid, predictor_name, context, o.k_min, o.k_max, o.n, o.seed);
  std::vector<MetricCurve> curves;
  for (const ShiftPoint& point : points) curves.push_back(point.curve);
  write_curve_outputs(dir, curves);

  ManifestEntries entries;
  append_common_manifest(entries, "shift", o);
  entries.emplace_back("kind", json_quote(kind_name));
  entries.emplace_back("predictor", json_quote(predictor_name));
  std::string grid_json = "[";
  for (size_t i = 0; i < grid.size(); ++i) {
    if (i) grid_json += ",";
    grid_json += format_double(grid[i]);
  }
  grid_json += "]";
  entries.emplace_back("grid", grid_json);
  write_manifest((dir / "manifest.json").string(), entries);
  std::cout << "shift: wrote " << (dir / "curves.csv").string() << "\n";
  return 0;
}

int run_verify_circuit(const CommonOpts& o, int instances, const std::string& trace_dir) {
  const fs::path dir = ensure_out(o.out);
  Rng root = Rng(o.seed).substream("verify");
  const std::vector<int> d_grid{2, 4, 8};
  const std::vector<int> m_grid{1, 2, 3, 5};
  const std::vector<double> sigma_grid{0.5, 1.0, 2.0};

  std::ofstream table((dir / "verify.csv").string());
  table << "instance,d,m,k,sigma,circuit,analytic,abs_err,ok\n";
  int failures = 0;
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    Rng inst = root.substream(static_cast<std::uint64_t>(i));
    const int d = d_grid[static_cast<size_t>(inst.next_index(static_cast<int>(d_grid.size())))];
    const int m = m_grid[static_cast<size_t>(inst.next_index(static_cast<int>(m_grid.size())))];
    const int k = 1 + inst.next_index(10);
    const double sigma =
        sigma_grid[static_cast<size_t>(inst.next_index(static_cast<int>(sigma_grid.size())))];
    Rng spec_rng = inst.substream("spec");
    const MixtureSpec spec = sample_spec(m, d, sigma, spec_rng);
    Rng prompt_rng = inst.substream("prompt");
    const Prompt prompt = sample_prompt(spec, k, prompt_rng);

    const double analytic = posterior_mean_predict(prompt, spec).prediction;
    const double circuit = run_circuit(prompt, spec);
    const double abs_err = std::abs(circuit - analytic);
    const double tol = 1e-10 * (1.0 + std::abs(analytic));
    const bool ok = abs_err <= tol;
    failures += ok ? 0 : 1;
    worst = std::max(worst, abs_err / (1.0 + std::abs(analytic)));
    table << i << ',' << d << ',' << m << ',' << k << ',' << format_double(sigma) << ','
          << format_double(circuit) << ',' << format_double(analytic) << ','
          << format_double(abs_err) << ',' << (ok ? 1 : 0) << '\n';

    if (!trace_dir.empty() && i < 3) {
      const fs::path tdir = ensure_out(trace_dir);
      const std::vector<Eigen::MatrixXd> stages = run_circuit_stages(prompt, spec);
      for (size_t stage = 0; stage < stages.size(); ++stage) {
        std::ofstream mat(
            (tdir / ("instance" + std::to_string(i) + "_stage" + std::to_string(stage) + ".csv"))
                .string());
        const Eigen::MatrixXd& h = stages[stage];
        for (int r = 0; r < h.rows(); ++r) {
          for (int c = 0; c < h.cols(); ++c) {
            mat << (c ? "," : "") << format_double(h(r, c));
          }
          mat << '\n';
        }
      }
    }
  }
  table.close();

  ManifestEntries entries;
  entries.emplace_back("verb", json_quote("verify-circuit"));
  entries.emplace_back("seed", u64_str(o.seed));
  entries.emplace_back("instances", std::to_string(instances));
  entries.emplace_back("failures", std::to_string(failures));
  entries.emplace_back("worst_relative_error", format_double(worst));
  if (!trace_dir.empty()) entries.emplace_back("trace_dir", json_quote(trace_dir));
  write_manifest((dir / "manifest.json").string(), entries);

  std::cout << "verify-circuit: " << (instances - failures) << "/" << instances
            << " instances within tolerance (worst relative error " << format_double(worst)
            << ")\n";
  return failures == 0 ? 0 : 1;
}

int run_em_fit(const CommonOpts& o, int k, int n_prompts, int restarts, int t_max, double tol,
               double ridge, const std::string& prompts_in, const std::string& prompts_out) {
  const fs::path dir = ensure_out(o.out);
  std::vector<Prompt> prompts;
  bool have_truth = false;
  MixtureSpec truth;
  if (!prompts_in.empty()) {
    prompts = read_prompts_jsonl(prompts_in);
  } else {
    truth = make_spec(o);
    have_truth = true;
    Rng data = Rng(o.seed).substream("prompts");
    for (int i = 0; i < n_prompts; ++i) {
      Rng prompt_rng = data.substream(static_cast<std::uint64_t>(i));
      prompts.push_back(sample_prompt(truth, k, prompt_rng));
    }
    if (!prompts_out.empty()) write_prompts_jsonl(prompts_out, prompts);
  }

  EMConfig config;
  config.sigma = o.sigma;
  config.restarts = restarts;
  config.t_max = t_max;
  config.tol = tol;
  config.ridge = ridge;
  Rng em_rng = Rng(o.seed).substream("em");
  const EMResult result = em_fit(prompts, o.m, config, em_rng);

  MixtureSpec estimated;
  estimated.components = result.weights;
  estimated.sigma = o.sigma;
  write_weights_jsonl((dir / "weights.jsonl").string(), estimated);

  ManifestEntries entries;
  append_common_manifest(entries, "em-fit", o);
  entries.emplace_back("k", std::to_string(k));
  entries.emplace_back("prompts", std::to_string(static_cast<int>(prompts.size())));
  entries.emplace_back("restarts", std::to_string(restarts));
  entries.emplace_back("t_max", std::to_string(t_max));
  entries.emplace_back("tol", format_double(tol));
  entries.emplace_back("ridge", format_double(ridge));
  entries.emplace_back("iterations", std::to_string(result.iterations));
  entries.emplace_back("converged", result.converged ? "true" : "false");
  entries.emplace_back("log_likelihood", format_double(result.log_likelihood));
  if (!prompts_in.empty()) entries.emplace_back("prompts_in", json_quote(prompts_in));
  if (have_truth) {
    const double err = oracle_pred_error(result.weights, truth);
    entries.emplace_back("oracle_pred_error", format_double(err));
    std::cout << "em-fit: oracle_pred_error " << format_double(err) << "\n";
  }
  write_manifest((dir / "manifest.json").string(), entries);
  std::cout << "em-fit: wrote " << (dir / "weights.jsonl").string() << "\n";
  return 0;
}

struct TrainOpts {
  TrainConfig config;
  bool lr_paper = false;
  int dataset_size = 0;        // train-fixed only
  std::string prompts_in;      // train-fixed: dataset source
  int eval_n = 256;            // final evaluation prompts per k
};

void add_train_options(CLI::App* cmd, CommonOpts& o, TrainOpts& t) {
  cmd->add_option("--out", o.out, "run directory");
  cmd->add_option("--seed", o.seed, "root seed");
  cmd->add_option("--m", o.m, "mixture components")->default_val(2);
  cmd->add_option("--d", o.d, "covariate dimension")->default_val(4);
  cmd->add_option("--sigma", o.sigma, "label noise level")->default_val(0.5);
  cmd->add_option("--p", t.config.model.p, "hidden dimension")->default_val(32);
  cmd->add_option("--heads", t.config.model.n_heads, "attention heads")->default_val(2);
  cmd->add_option("--datt", t.config.model.d_att, "attention hidden dim")->default_val(16);
  cmd->add_option("--dff", t.config.model.d_ff, "feedforward hidden dim")->default_val(128);
  cmd->add_option("--layers", t.config.model.n_layers, "layer count")->default_val(2);
  cmd->add_option("--kmin", t.config.k_min, "curriculum start length");
  cmd->add_option("--kmax", t.config.k_max, "curriculum final length");
  cmd->add_option("--batch", t.config.batch_size, "batch size");
  cmd->add_option("--phase-steps", t.config.curriculum_phase_steps, "steps per phase");
  cmd->add_option("--steps", t.config.final_steps, "total optimization steps");
  cmd->add_option("--lr", t.config.adam_lr, "Adam step size");
  cmd->add_flag("--lr-paper", t.lr_paper, "use the reported 0.1 step size");
  cmd->add_option("--dropout", t.config.dropout, "feedforward dropout rate");
  cmd->add_option("--eval-n", t.eval_n, "final evaluation prompts per k");
}

void write_trace_csv(const fs::path& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path.string());
  out << "step,raw_loss,normalized_loss\n";
  for (const TraceRow& row : trace) {
    out << row.step << ',' << format_double(row.raw_loss) << ','
        << format_double(row.normalized_loss) << '\n';
  }
}

int finish_train_run(const fs::path& dir, const CommonOpts& o, const TrainOpts& t,
                     const MixtureSpec& spec, const TrainResult& result,
                     const std::string& verb, ManifestEntries extra) {
  write_trace_csv(dir / "trace.csv", result.trace);
  save_model((dir / "model.bin").string(), result.model);

  PredictorContext context;
  context.spec = spec;
  context.model = result.model;
  const Predictor predictor = make_predictor("transformer", context);
  const PromptSource source(spec, Rng(o.seed).substream("eval").next_u64());
  MetricCurve curve =
      eval_mse_curve(predictor, source, t.config.k_min, t.config.k_max, t.eval_n);
  curve.setting = "transformer";
  write_curve_outputs(dir, {curve});

  ManifestEntries entries;
  entries.emplace_back("verb", json_quote(verb));
  entries.emplace_back("seed", u64_str(o.seed));
  entries.emplace_back("m", std::to_string(o.m));
  entries.emplace_back("d", std::to_string(o.d));
  entries.emplace_back("sigma", format_double(o.sigma));
  entries.emplace_back("p", std::to_string(t.config.model.p));
  entries.emplace_back("n_heads", std::to_string(t.config.model.n_heads));
  entries.emplace_back("d_att", std::to_string(t.config.model.d_att));
  entries.emplace_back("d_ff", std::to_string(t.config.model.d_ff));
  entries.emplace_back("n_layers", std::to_string(t.config.model.n_layers));
  entries.emplace_back("k_min", std::to_string(t.config.k_min));
  entries.emplace_back("k_max", std::to_string(t.config.k_max));
  entries.emplace_back("batch_size", std::to_string(t.config.batch_size));
  entries.emplace_back("curriculum_phase_steps",
                       std::to_string(t.config.curriculum_phase_steps));
  entries.emplace_back("final_steps", std::to_string(t.config.final_steps));
  entries.emplace_back("adam_lr", format_double(t.config.adam_lr));
  entries.emplace_back("dropout", format_double(t.config.dropout));
  entries.emplace_back("eval_n", std::to_string(t.eval_n));
  for (auto& e : extra) entries.push_back(std::move(e));
  if (!result.trace.empty()) {
    entries.emplace_back("final_raw_loss", format_double(result.trace.back().raw_loss));
    entries.emplace_back("final_normalized_loss",
                         format_double(result.trace.back().normalized_loss));
  }
  entries.emplace_back("final_eval_normalized_mse", format_double(curve.means.back()));
  write_manifest((dir / "manifest.json").string(), entries);
  std::cout << verb << ": final eval normalized MSE at k=" << curve.k_values.back() << " is "
            << format_double(curve.means.back()) << "\n";
  return 0;
}

int run_train(CommonOpts& o, TrainOpts& t) {
  const fs::path dir = ensure_out(o.out);
  if (t.lr_paper) t.config.adam_lr = 0.1;
  t.config.m = o.m;
  t.config.d = o.d;
  t.config.sigma = o.sigma;
  t.config.seed = o.seed;
  const MixtureSpec spec = make_spec(o);
  const TrainResult result = train(t.config, spec);
  return finish_train_run(dir, o, t, spec, result, "train", {});
}

int run_train_fixed(CommonOpts& o, TrainOpts& t) {
  const fs::path dir = ensure_out(o.out);
  if (t.lr_paper) t.config.adam_lr = 0.1;
  t.config.m = o.m;
  t.config.d = o.d;
  t.config.sigma = o.sigma;
  t.config.seed = o.seed;
  const MixtureSpec spec = make_spec(o);
  FixedDataset dataset;
  if (!t.prompts_in.empty()) {
    dataset.prompts = read_prompts_jsonl(t.prompts_in);
  } else {
    Rng data = Rng(o.seed).substream("dataset");
    for (int i = 0; i < t.dataset_size; ++i) {
      Rng prompt_rng = data.substream(static_cast<std::uint64_t>(i));
      dataset.prompts.push_back(sample_prompt(spec, t.config.k_max, prompt_rng));
    }
  }
  const TrainResult result = train_fixed(t.config, dataset);
  ManifestEntries extra;
  extra.emplace_back("dataset_size", std::to_string(static_cast<int>(dataset.prompts.size())));
  if (!t.prompts_in.empty()) extra.emplace_back("prompts_in", json_quote(t.prompts_in));
  return finish_train_run(dir, o, t, spec, result, "train-fixed", std::move(extra));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mixture-of-linear-regressions laboratory"};
  app.require_subcommand(1);

  CommonOpts eval_opts;
  std::string eval_predictor = "posterior_mean";
  CLI::App* eval_cmd = app.add_subcommand("eval", "normalized MSE curve of one predictor");
  add_common(eval_cmd, eval_opts);
  eval_cmd->add_option("--predictor", eval_predictor, "registry name");

  CommonOpts dist_opts;
  std::string f_name = "circuit";
  std::string g_name = "posterior_mean";
  CLI::App* dist_cmd = app.add_subcommand("distance", "squared distance between two predictors");
  add_common(dist_cmd, dist_opts);
  dist_cmd->add_option("--f", f_name, "first predictor");
  dist_cmd->add_option("--g", g_name, "second predictor");

  CommonOpts shift_opts;
  std::string shift_kind = "covariate_scale";
  std::vector<double> shift_grid;
  std::string shift_predictor = "posterior_mean";
  CLI::App* shift_cmd = app.add_subcommand("shift", "MSE curves under distribution shift");
  add_common(shift_cmd, shift_opts);
  shift_cmd->add_option("--kind", shift_kind, "covariate_scale | weight_scale | weight_add");
  shift_cmd->add_option("--grid", shift_grid, "comma-separated grid values")->delimiter(',');
  shift_cmd->add_option("--predictor", shift_predictor, "registry name");

  CommonOpts verify_opts;
  verify_opts.sigma = 1.0;
  int verify_instances = 1000;
  std::string verify_trace_dir;
  CLI::App* verify_cmd =
      app.add_subcommand("verify-circuit", "check the operator circuit against the analytic predictor");
  verify_cmd->add_option("--out", verify_opts.out, "run directory");
  verify_cmd->add_option("--seed", verify_opts.seed, "root seed");
  verify_cmd->add_option("--instances", verify_instances, "random instances");
  verify_cmd->add_option("--trace-dir", verify_trace_dir, "dump per-stage states here");

  CommonOpts em_opts;
  em_opts.m = 2;
  em_opts.d = 8;
  em_opts.sigma = 0.1;
  int em_k = 8;
  int em_n = 2000;
  int em_restarts = 5;
  int em_tmax = 20000;
  double em_tol = 0.001;
  double em_ridge = 1e-8;
  std::string em_prompts_in, em_prompts_out;
  CLI::App* em_cmd = app.add_subcommand("em-fit", "batch EM over a prompt collection");
  em_cmd->add_option("--out", em_opts.out, "run directory");
  em_cmd->add_option("--seed", em_opts.seed, "root seed");
  em_cmd->add_option("--m", em_opts.m, "components to fit");
  em_cmd->add_option("--d", em_opts.d, "covariate dimension (sampled data)");
  em_cmd->add_option("--sigma", em_opts.sigma, "noise level used by EM");
  em_cmd->add_option("--k", em_k, "prompt length (sampled data)");
  em_cmd->add_option("--n", em_n, "number of prompts (sampled data)");
  em_cmd->add_option("--restarts", em_restarts, "random restarts");
  em_cmd->add_option("--tmax", em_tmax, "iteration cap");
  em_cmd->add_option("--tol", em_tol, "stopping threshold");
  em_cmd->add_option("--ridge", em_ridge, "M-step ridge");
  em_cmd->add_option("--prompts-in", em_prompts_in, "fit these prompts instead of sampling");
  em_cmd->add_option("--prompts-out", em_prompts_out, "also write sampled prompts here");

  CommonOpts train_opts;
  train_opts.m = 2;
  train_opts.d = 4;
  train_opts.sigma = 0.5;
  TrainOpts train_t;
  train_t.config.model = ModelConfig{32, 2, 16, 128, 2};
  train_t.config.curriculum_phase_steps = 300;
  CLI::App* train_cmd = app.add_subcommand("train", "toy curriculum training on fresh prompts");
  add_train_options(train_cmd, train_opts, train_t);

  CommonOpts fixed_opts;
  fixed_opts.m = 2;
  fixed_opts.d = 4;
  fixed_opts.sigma = 0.5;
  TrainOpts fixed_t;
  fixed_t.config.model = ModelConfig{32, 2, 16, 128, 2};
  fixed_t.config.curriculum_phase_steps = 300;
  fixed_t.dataset_size = 1000;
  CLI::App* fixed_cmd =
      app.add_subcommand("train-fixed", "toy training on a fixed dataset with prefix subsampling");
  add_train_options(fixed_cmd, fixed_opts, fixed_t);
  fixed_cmd->add_option("--dataset-size", fixed_t.dataset_size, "prompts in the fixed set");
  fixed_cmd->add_option("--prompts-in", fixed_t.prompts_in, "load the fixed set from JSONL");

  CLI11_PARSE(app, argc, argv);

  try {
    if (eval_cmd->parsed()) return run_eval(eval_opts, eval_predictor);
    if (dist_cmd->parsed()) return run_distance(dist_opts, f_name, g_name);
    if (shift_cmd->parsed()) return run_shift(shift_opts, shift_kind, shift_grid, shift_predictor);
    if (verify_cmd->parsed())
      return run_verify_circuit(verify_opts, verify_instances, verify_trace_dir);
    if (em_cmd->parsed())
      return run_em_fit(em_opts, em_k, em_n, em_restarts, em_tmax, em_tol, em_ridge, em_prompts_in,
                        em_prompts_out);
    if (train_cmd->parsed()) return run_train(train_opts, train_t);
    if (fixed_cmd->parsed()) return run_train_fixed(fixed_opts, fixed_t);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 0;
}
