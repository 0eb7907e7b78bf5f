#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "mixreg/rng.hpp"

namespace mixreg {

struct ModelConfig {
  int p = 256;        // hidden dimension
  int n_heads = 8;    // attention heads
  int d_att = 32;     // attention hidden dimension
  int d_ff = 1024;    // feedforward hidden dimension
  int n_layers = 12;  // layer count
};

// One decoder layer's weights. Heads are indexed 0..n_heads-1.
struct LayerParams {
  std::vector<Eigen::MatrixXd> w_q;  // d_att x p
  std::vector<Eigen::MatrixXd> w_k;  // d_att x p
  std::vector<Eigen::MatrixXd> w_v;  // d_att x p
  std::vector<Eigen::MatrixXd> w_c;  // p x d_att
  Eigen::MatrixXd w_in;              // d_ff x p
  Eigen::MatrixXd w_out;             // p x d_ff

  int n_heads() const { return static_cast<int>(w_q.size()); }
};

LayerParams zero_layer(const ModelConfig& config);
LayerParams random_layer(const ModelConfig& config, Rng& rng, double stddev = 0.02);

// softmax(v)_t = exp(v_t) / sum_t' exp(v_t'), computed with a max shift.
// An empty input returns an empty vector.
Eigen::VectorXd softmax(const Eigen::VectorXd& v);

// (u/2) * (1 + erf(u / sqrt(2))), the exact Gaussian-error form.
double gelu(double u);

// sqrt(p) * (v - mean) / ||v - mean||. A deviation norm below 1e-12 maps to
// the zero vector.
Eigen::VectorXd layernorm(const Eigen::VectorXd& v);

// One decoder layer: per column i, multi-head attention over the strict
// prefix (columns 1..i-1, so column 1 receives a zero attention vector),
// residual add, then the layernorm -> W_in -> gelu -> W_out feedforward on
// top of another residual. Attention logits carry no scaling factor.
Eigen::MatrixXd layer_forward(const Eigen::MatrixXd& h, const LayerParams& params);

// Sequential composition of layer_forward; an empty layer list is the
// identity.
Eigen::MatrixXd model_forward(const Eigen::MatrixXd& h0, const std::vector<LayerParams>& layers);

// Optional trailing block of the checkpoint: input projection and linear
// readout learned by the trainer.
struct ModelExtras {
  Eigen::MatrixXd embed;   // p x p
  Eigen::MatrixXd read_w;  // 1 x p
  Eigen::MatrixXd read_b;  // 1 x 1
};

// Flat binary container: six little-endian int64 header words (p, n_heads,
// d_att, d_ff, n_layers, has_extras), then per layer and head the tensors
// W_Q, W_K, W_V, W_C followed by W_in and W_out, all row-major doubles;
// extras follow in declaration order when present.
void save_transformer(const std::string& path, const ModelConfig& config,
                      const std::vector<LayerParams>& layers,
                      const ModelExtras* extras = nullptr);

struct LoadedTransformer {
  ModelConfig config;
  std::vector<LayerParams> layers;
  std::optional<ModelExtras> extras;
};
LoadedTransformer load_transformer(const std::string& path);

}  // namespace mixreg
