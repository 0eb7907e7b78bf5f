#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mixreg/autodiff.hpp"
#include "mixreg/mixtures.hpp"
#include "mixreg/rng.hpp"
#include "mixreg/transformer.hpp"

namespace mixreg {

// Trainable model: the stack of layers plus a learned input projection and
// a linear readout with bias (read_w is 1 x p, read_b is 1 x 1).
struct ModelParams {
  ModelConfig config;
  std::vector<LayerParams> layers;
  Eigen::MatrixXd embed;
  Eigen::MatrixXd read_w;
  Eigen::MatrixXd read_b;
};

ModelParams zero_model(const ModelConfig& config);
// All weights i.i.d. Gaussian with standard deviation 0.02.
ModelParams init_model(const ModelConfig& config, Rng rng);

// Mutable views over every parameter tensor in a fixed flattening order
// (embed; per layer: per head Q,K,V,C then W_in, W_out; read_w; read_b).
// The same order aligns gradients with optimizer state.
std::vector<Eigen::MatrixXd*> param_views(ModelParams& params);
std::vector<const Eigen::MatrixXd*> param_views(const ModelParams& params);

// Token placement for a prompt: covariates fill rows 1..d of odd columns,
// labels sit in row 1 of even columns, everything else is zero. Requires
// p >= d + 1.
Eigen::MatrixXd token_matrix(const Prompt& prompt, int p);
// token_matrix followed by the learned columnwise projection.
Eigen::MatrixXd embed_prompt(const Prompt& prompt, const Eigen::MatrixXd& embed);

// Linear readout at the given 1-based columns.
Eigen::VectorXd readout(const Eigen::MatrixXd& read_w, double read_b, const Eigen::MatrixXd& h,
                        const std::vector<int>& positions);

// Predictions at every covariate column (k+1 of them, the last being the
// query).
Eigen::VectorXd model_predictions(const ModelParams& params, const Prompt& prompt);
double model_query_prediction(const ModelParams& params, const Prompt& prompt);

// Mean over prompts and over their prefix positions of the squared
// prediction error. Divide by d for the normalized value.
double batch_loss(const ModelParams& params, const std::vector<Prompt>& prompts);

struct GraphOptions {
  double dropout = 0.0;            // rho; 0 adds no mask nodes at all
  Rng* dropout_rng = nullptr;      // required when dropout > 0
  int skip_trailing_positions = 0; // ignore this many final prediction slots
};

// Forward/loss graph for a batch, exposing the node ids needed to read
// gradients of parameters and of the raw token inputs.
struct BatchGraph {
  ad::Tape tape;
  std::vector<int> param_ids;  // aligned with param_views order
  std::vector<int> token_ids;  // one leaf per prompt
  int loss = -1;               // raw batch loss (not normalized by d)
};

BatchGraph build_batch_graph(const ModelParams& params, const std::vector<Prompt>& prompts,
                             const GraphOptions& options = {});

// Raw loss and its exact reverse-mode gradient.
struct BatchGrad {
  double loss = 0.0;
  ModelParams grads;
};
BatchGrad batch_grad(const ModelParams& params, const std::vector<Prompt>& prompts,
                     const GraphOptions& options = {});

struct TrainConfig {
  ModelConfig model;
  int m = 2;
  int d = 4;
  double sigma = 0.5;
  int k_min = 1;
  int k_max = 8;
  int batch_size = 64;
  int curriculum_phase_steps = 2000;
  int final_steps = 3000;
  double adam_lr = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double dropout = 0.0;  // rho in [0, 1)
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);

struct AdamState {
  std::vector<Eigen::MatrixXd> m, v;
  long t = 0;
};

// One Adam update with bias correction and constant learning rate, applied
// in the flattening order shared with the gradients.
void adam_update(const std::vector<Eigen::MatrixXd*>& params,
                 const std::vector<const Eigen::MatrixXd*>& grads, AdamState& state, double lr,
                 double beta1, double beta2, double eps);
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const TrainConfig& config);

struct TraceRow {
  int step = 0;
  double raw_loss = 0.0;
  double normalized_loss = 0.0;
};

struct TrainResult {
  ModelParams model;
  std::vector<TraceRow> trace;
};

struct FixedDataset {
  std::vector<Prompt> prompts;
};

// Length-k prompt obtained by randomly dropping examples from the prompt's
// prefix and shuffling the survivors; the query pair is kept as is.
Prompt subsample_prefix(const Prompt& prompt, int k, Rng rng);

// Fresh-prompt curriculum training: the example length grows by one per
// curriculum phase from k_min up to k_max.
TrainResult train(const TrainConfig& config, const MixtureSpec& spec);
// Same loop, but batches are drawn from the fixed dataset with prefix
// subsampling down to the current curriculum length.
TrainResult train_fixed(const TrainConfig& config, const FixedDataset& dataset);

// Flat binary checkpoint with the learned projection and readout appended.
void save_model(const std::string& path, const ModelParams& params);
ModelParams load_model(const std::string& path);

}  // namespace mixreg
