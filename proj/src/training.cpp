#include "mixreg/training.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace mixreg {

namespace {

// 0-based column indices carrying covariates: 0, 2, ..., 2k.
std::vector<int> covariate_columns(int k) {
  std::vector<int> cols;
  for (int j = 0; j <= k; ++j) cols.push_back(2 * j);
  return cols;
}

Eigen::RowVectorXd prediction_targets(const Prompt& prompt) {
  Eigen::RowVectorXd y(prompt.k() + 1);
  for (int j = 0; j < prompt.k(); ++j) y(j) = prompt.ys[static_cast<size_t>(j)];
  y(prompt.k()) = prompt.query_y;
  return y;
}

}  // namespace

ModelParams zero_model(const ModelConfig& config) {
  ModelParams params;
  params.config = config;
  for (int l = 0; l < config.n_layers; ++l) params.layers.push_back(zero_layer(config));
  params.embed = Eigen::MatrixXd::Zero(config.p, config.p);
  params.read_w = Eigen::MatrixXd::Zero(1, config.p);
  params.read_b = Eigen::MatrixXd::Zero(1, 1);
  return params;
}

ModelParams init_model(const ModelConfig& config, Rng rng) {
  ModelParams params = zero_model(config);
  for (Eigen::MatrixXd* tensor : param_views(params)) {
    for (int r = 0; r < tensor->rows(); ++r) {
      for (int c = 0; c < tensor->cols(); ++c) (*tensor)(r, c) = 0.02 * rng.next_gaussian();
    }
  }
  return params;
}

std::vector<Eigen::MatrixXd*> param_views(ModelParams& params) {
  std::vector<Eigen::MatrixXd*> views;
  views.push_back(&params.embed);
  for (LayerParams& layer : params.layers) {
    for (int h = 0; h < layer.n_heads(); ++h) {
      views.push_back(&layer.w_q[static_cast<size_t>(h)]);
      views.push_back(&layer.w_k[static_cast<size_t>(h)]);
      views.push_back(&layer.w_v[static_cast<size_t>(h)]);
      views.push_back(&layer.w_c[static_cast<size_t>(h)]);
    }
    views.push_back(&layer.w_in);
    views.push_back(&layer.w_out);
  }
  views.push_back(&params.read_w);
  views.push_back(&params.read_b);
  return views;
}

std::vector<const Eigen::MatrixXd*> param_views(const ModelParams& params) {
  std::vector<Eigen::MatrixXd*> mutable_views = param_views(const_cast<ModelParams&>(params));
  return {mutable_views.begin(), mutable_views.end()};
}

Eigen::MatrixXd token_matrix(const Prompt& prompt, int p) {
  validate(prompt);
  const int d = prompt.d();
  const int k = prompt.k();
  if (p < d + 1) throw std::invalid_argument("token_matrix: needs p >= d + 1");
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(p, 2 * k + 1);
  for (int j = 0; j <= k; ++j) {
    t.block(0, 2 * j, d, 1) = prompt.xs[static_cast<size_t>(j)];
    if (j < k) t(0, 2 * j + 1) = prompt.ys[static_cast<size_t>(j)];
  }
  return t;
}

Eigen::MatrixXd embed_prompt(const Prompt& prompt, const Eigen::MatrixXd& embed) {
  if (embed.rows() != embed.cols()) {
    throw std::invalid_argument("embed_prompt: projection must be square");
  }
  return embed * token_matrix(prompt, static_cast<int>(embed.rows()));
}

Eigen::VectorXd readout(const Eigen::MatrixXd& read_w, double read_b, const Eigen::MatrixXd& h,
                        const std::vector<int>& positions) {
  if (read_w.rows() != 1 || read_w.cols() != h.rows()) {
    throw std::invalid_argument("readout: weight shape mismatch");
  }
  Eigen::VectorXd out(static_cast<int>(positions.size()));
  for (size_t i = 0; i < positions.size(); ++i) {
    const int col = positions[i];
    if (col < 1 || col > h.cols()) throw std::invalid_argument("readout: position out of range");
    out(static_cast<int>(i)) = (read_w * h.col(col - 1))(0, 0) + read_b;
  }
  return out;
}

Eigen::VectorXd model_predictions(const ModelParams& params, const Prompt& prompt) {
  const Eigen::MatrixXd h0 = embed_prompt(prompt, params.embed);
  const Eigen::MatrixXd h = model_forward(h0, params.layers);
  std::vector<int> positions;
  for (int j = 0; j <= prompt.k(); ++j) positions.push_back(2 * j + 1);
  return readout(params.read_w, params.read_b(0, 0), h, positions);
}

double model_query_prediction(const ModelParams& params, const Prompt& prompt) {
  const Eigen::VectorXd preds = model_predictions(params, prompt);
  return preds(preds.size() - 1);
}

double batch_loss(const ModelParams& params, const std::vector<Prompt>& prompts) {
  if (prompts.empty()) throw std::invalid_argument("batch_loss: empty batch");
  double total = 0.0;
  for (const Prompt& prompt : prompts) {
    const Eigen::VectorXd preds = model_predictions(params, prompt);
    const Eigen::RowVectorXd targets = prediction_targets(prompt);
    total += (preds.transpose() - targets).squaredNorm() / static_cast<double>(preds.size());
  }
  return total / static_cast<double>(prompts.size());
}

BatchGraph build_batch_graph(const ModelParams& params, const std::vector<Prompt>& prompts,
                             const GraphOptions& options) {
  if (prompts.empty()) throw std::invalid_argument("build_batch_graph: empty batch");
  if (options.dropout < 0.0 || options.dropout >= 1.0) {
    throw std::invalid_argument("build_batch_graph: dropout must lie in [0, 1)");
  }
  if (options.dropout > 0.0 && options.dropout_rng == nullptr) {
    throw std::invalid_argument("build_batch_graph: dropout requires a generator");
  }

  BatchGraph graph;
  ad::Tape& tape = graph.tape;
  for (const Eigen::MatrixXd* tensor : param_views(params)) {
    graph.param_ids.push_back(tape.input(*tensor));
  }
  // Unpack the flattened ids back into per-layer slots.
  size_t next = 0;
  const int embed_id = graph.param_ids[next++];
  struct LayerIds {
    std::vector<int> q, k, v, c;
    int in = -1, out = -1;
  };
  std::vector<LayerIds> layer_ids;
  for (const LayerParams& layer : params.layers) {
    LayerIds ids;
    for (int h = 0; h < layer.n_heads(); ++h) {
      ids.q.push_back(graph.param_ids[next++]);
      ids.k.push_back(graph.param_ids[next++]);
      ids.v.push_back(graph.param_ids[next++]);
      ids.c.push_back(graph.param_ids[next++]);
    }
    ids.in = graph.param_ids[next++];
    ids.out = graph.param_ids[next++];
    layer_ids.push_back(std::move(ids));
  }
  const int read_w_id = graph.param_ids[next++];
  const int read_b_id = graph.param_ids[next++];

  int total_loss = -1;
  for (size_t b = 0; b < prompts.size(); ++b) {
    const Prompt& prompt = prompts[b];
    const int token_id = tape.input(token_matrix(prompt, params.config.p));
    graph.token_ids.push_back(token_id);
    int h = ad::matmul(tape, embed_id, token_id);
    const int q_cols = 2 * prompt.k() + 1;

    for (const LayerIds& ids : layer_ids) {
      int attn = -1;
      for (size_t head = 0; head < ids.q.size(); ++head) {
        const int qn = ad::matmul(tape, ids.q[head], h);
        const int kn = ad::matmul(tape, ids.k[head], h);
        const int vn = ad::matmul(tape, ids.v[head], h);
        const int logits = ad::matmul_tn(tape, kn, qn);
        const int weights = ad::strict_prefix_softmax(tape, logits);
        const int agg = ad::matmul(tape, vn, weights);
        const int head_out = ad::matmul(tape, ids.c[head], agg);
        attn = attn < 0 ? head_out : ad::add(tape, attn, head_out);
      }
      const int residual = attn < 0 ? h : ad::add(tape, attn, h);
      const int normed = ad::layernorm_cols(tape, residual);
      const int pre_act = ad::matmul(tape, ids.in, normed);
      int act = ad::gelu(tape, pre_act);
      if (options.dropout > 0.0) {
        const double keep_scale = 1.0 / (1.0 - options.dropout);
        Eigen::MatrixXd mask(params.config.d_ff, q_cols);
        for (int r = 0; r < mask.rows(); ++r) {
          for (int c = 0; c < mask.cols(); ++c) {
            mask(r, c) =
                options.dropout_rng->next_uniform() <= options.dropout ? 0.0 : keep_scale;
          }
        }
        act = ad::hadamard_const(tape, act, std::move(mask));
      }
      const int ff = ad::matmul(tape, ids.out, act);
      h = ad::add(tape, residual, ff);
    }

    const int affine = ad::matmul(tape, read_w_id, h);
    const int preds = ad::add_col_broadcast(tape, affine, read_b_id);
    std::vector<int> positions = covariate_columns(prompt.k());
    Eigen::RowVectorXd targets = prediction_targets(prompt);
    if (options.skip_trailing_positions > 0) {
      const int keep = static_cast<int>(positions.size()) - options.skip_trailing_positions;
      if (keep < 1) throw std::invalid_argument("build_batch_graph: skipped every position");
      positions.resize(static_cast<size_t>(keep));
      targets.conservativeResize(keep);
    }
    const int selected = ad::select_cols(tape, preds, positions);
    const double coeff =
        1.0 / (static_cast<double>(prompts.size()) * static_cast<double>(positions.size()));
    const int prompt_loss = ad::sum_sq_scaled(tape, selected, targets, coeff);
    total_loss = total_loss < 0 ? prompt_loss : ad::add(tape, total_loss, prompt_loss);
  }
  graph.loss = total_loss;
  return graph;
}

BatchGrad batch_grad(const ModelParams& params, const std::vector<Prompt>& prompts,
                     const GraphOptions& options) {
  BatchGraph graph = build_batch_graph(params, prompts, options);
  graph.tape.backward(graph.loss);

  BatchGrad result;
  result.loss = graph.tape.value(graph.loss)(0, 0);
  result.grads = zero_model(params.config);
  std::vector<Eigen::MatrixXd*> views = param_views(result.grads);
  for (size_t i = 0; i < views.size(); ++i) {
    *views[i] = graph.tape.grad(graph.param_ids[i]);
  }
  return result;
}

void validate(const TrainConfig& config) {
  if (config.model.p < 1 || config.model.n_heads < 1 || config.model.d_att < 1 ||
      config.model.d_ff < 1 || config.model.n_layers < 0) {
    throw std::invalid_argument("TrainConfig: model dimensions must be positive");
  }
  if (config.m < 1 || config.d < 1) throw std::invalid_argument("TrainConfig: m, d >= 1");
  if (config.model.p < config.d + 1) throw std::invalid_argument("TrainConfig: needs p >= d + 1");
  if (config.sigma < 0.0) throw std::invalid_argument("TrainConfig: sigma >= 0");
  if (config.k_min < 0 || config.k_max < config.k_min) {
    throw std::invalid_argument("TrainConfig: needs 0 <= k_min <= k_max");
  }
  if (config.batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size >= 1");
  if (config.curriculum_phase_steps < 1) {
    throw std::invalid_argument("TrainConfig: curriculum_phase_steps >= 1");
  }
  if (config.final_steps < 0) throw std::invalid_argument("TrainConfig: final_steps >= 0");
  if (config.dropout < 0.0 || config.dropout >= 1.0) {
    throw std::invalid_argument("TrainConfig: dropout in [0, 1)");
  }
  if (!(config.adam_lr > 0.0)) throw std::invalid_argument("TrainConfig: adam_lr > 0");
}

void adam_update(const std::vector<Eigen::MatrixXd*>& params,
                 const std::vector<const Eigen::MatrixXd*>& grads, AdamState& state, double lr,
                 double beta1, double beta2, double eps) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("adam_update: parameter/gradient count mismatch");
  }
  if (state.m.empty()) {
    for (const Eigen::MatrixXd* p : params) {
      state.m.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
      state.v.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    }
    state.t = 0;
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam_update: state does not match parameters");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    const Eigen::MatrixXd& g = *grads[i];
    Eigen::MatrixXd& m = state.m[i];
    Eigen::MatrixXd& v = state.v[i];
    if (g.rows() != m.rows() || g.cols() != m.cols()) {
      throw std::invalid_argument("adam_update: gradient shape mismatch");
    }
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    const Eigen::MatrixXd m_hat = m / bc1;
    const Eigen::MatrixXd v_hat = v / bc2;
    *params[i] -= lr * (m_hat.array() / (v_hat.array().sqrt() + eps)).matrix();
  }
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const TrainConfig& config) {
  adam_update(param_views(params), param_views(grads), state, config.adam_lr, config.adam_beta1,
              config.adam_beta2, config.adam_eps);
}

Prompt subsample_prefix(const Prompt& prompt, int k, Rng rng) {
  validate(prompt);
  if (k < 0) throw std::invalid_argument("subsample_prefix: k >= 0");
  const int keep = std::min(k, prompt.k());
  std::vector<int> order(static_cast<size_t>(prompt.k()));
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates: the first `keep` slots end up a uniform ordered
  // sample without replacement.
  for (int i = 0; i < keep; ++i) {
    const int j = i + rng.next_index(prompt.k() - i);
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }
  Prompt out;
  for (int i = 0; i < keep; ++i) {
    out.xs.push_back(prompt.xs[static_cast<size_t>(order[static_cast<size_t>(i)])]);
    out.ys.push_back(prompt.ys[static_cast<size_t>(order[static_cast<size_t>(i)])]);
  }
  out.xs.push_back(prompt.query_x());
  out.query_y = prompt.query_y;
  out.latent_index = prompt.latent_index;
  return out;
}

namespace {

int curriculum_k(const TrainConfig& config, int step) {
  const int phase = step / config.curriculum_phase_steps;
  return std::min(config.k_min + phase, config.k_max);
}

TrainResult train_loop(const TrainConfig& config,
                       const std::function<Prompt(int step, int b, int k, Rng&)>& draw) {
  validate(config);
  Rng root(config.seed);
  Rng init_rng = root.substream("init");
  TrainResult result;
  result.model = init_model(config.model, init_rng);
  AdamState state;
  const double d = static_cast<double>(config.d);
  for (int step = 0; step < config.final_steps; ++step) {
    const int k = curriculum_k(config, step);
    Rng data_rng = root.substream("data").substream(static_cast<std::uint64_t>(step));
    std::vector<Prompt> batch;
    for (int b = 0; b < config.batch_size; ++b) batch.push_back(draw(step, b, k, data_rng));
    Rng dropout_rng = root.substream("dropout").substream(static_cast<std::uint64_t>(step));
    GraphOptions options;
    options.dropout = config.dropout;
    options.dropout_rng = config.dropout > 0.0 ? &dropout_rng : nullptr;
    BatchGrad bg = batch_grad(result.model, batch, options);
    result.trace.push_back({step, bg.loss, bg.loss / d});
    adam_step(result.model, bg.grads, state, config);
  }
  return result;
}

}  // namespace

TrainResult train(const TrainConfig& config, const MixtureSpec& spec) {
  validate(spec);
  if (spec.m() != config.m || spec.d() != config.d) {
    throw std::invalid_argument("train: mixture does not match config dimensions");
  }
  return train_loop(config, [&spec](int /*step*/, int b, int k, Rng& data_rng) {
    Rng prompt_rng = data_rng.substream(static_cast<std::uint64_t>(b));
    return sample_prompt(spec, k, prompt_rng);
  });
}

TrainResult train_fixed(const TrainConfig& config, const FixedDataset& dataset) {
  if (dataset.prompts.empty()) throw std::invalid_argument("train_fixed: empty dataset");
  for (const Prompt& prompt : dataset.prompts) validate(prompt);
  const int n = static_cast<int>(dataset.prompts.size());
  return train_loop(config, [&dataset, n](int /*step*/, int b, int k, Rng& data_rng) {
    Rng pick_rng = data_rng.substream(static_cast<std::uint64_t>(b));
    const int idx = pick_rng.next_index(n);
    return subsample_prefix(dataset.prompts[static_cast<size_t>(idx)], k,
                            pick_rng.substream("subsample"));
  });
}

void save_model(const std::string& path, const ModelParams& params) {
  ModelExtras extras;
  extras.embed = params.embed;
  extras.read_w = params.read_w;
  extras.read_b = params.read_b;
  save_transformer(path, params.config, params.layers, &extras);
}

ModelParams load_model(const std::string& path) {
  LoadedTransformer loaded = load_transformer(path);
  if (!loaded.extras) {
    throw std::runtime_error("load_model: checkpoint lacks embedding/readout extras");
  }
  ModelParams params;
  params.config = loaded.config;
  params.layers = std::move(loaded.layers);
  params.embed = std::move(loaded.extras->embed);
  params.read_w = std::move(loaded.extras->read_w);
  params.read_b = std::move(loaded.extras->read_b);
  return params;
}

}  // namespace mixreg
