#include "mixreg/transformer.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace mixreg {

LayerParams zero_layer(const ModelConfig& config) {
  LayerParams params;
  params.w_q.assign(config.n_heads, Eigen::MatrixXd::Zero(config.d_att, config.p));
  params.w_k.assign(config.n_heads, Eigen::MatrixXd::Zero(config.d_att, config.p));
  params.w_v.assign(config.n_heads, Eigen::MatrixXd::Zero(config.d_att, config.p));
  params.w_c.assign(config.n_heads, Eigen::MatrixXd::Zero(config.p, config.d_att));
  params.w_in = Eigen::MatrixXd::Zero(config.d_ff, config.p);
  params.w_out = Eigen::MatrixXd::Zero(config.p, config.d_ff);
  return params;
}

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, Rng& rng, double stddev) {
  Eigen::MatrixXd out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) out(r, c) = stddev * rng.next_gaussian();
  }
  return out;
}

}  // namespace

LayerParams random_layer(const ModelConfig& config, Rng& rng, double stddev) {
  LayerParams params;
  for (int h = 0; h < config.n_heads; ++h) {
    params.w_q.push_back(random_matrix(config.d_att, config.p, rng, stddev));
    params.w_k.push_back(random_matrix(config.d_att, config.p, rng, stddev));
    params.w_v.push_back(random_matrix(config.d_att, config.p, rng, stddev));
    params.w_c.push_back(random_matrix(config.p, config.d_att, rng, stddev));
  }
  params.w_in = random_matrix(config.d_ff, config.p, rng, stddev);
  params.w_out = random_matrix(config.p, config.d_ff, rng, stddev);
  return params;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& v) {
  if (v.size() == 0) return v;
  const double shift = v.maxCoeff();
  Eigen::VectorXd out = (v.array() - shift).exp();
  return out / out.sum();
}

double gelu(double u) { return 0.5 * u * (1.0 + std::erf(u / std::sqrt(2.0))); }

Eigen::VectorXd layernorm(const Eigen::VectorXd& v) {
  const int p = static_cast<int>(v.size());
  const Eigen::VectorXd centered = v.array() - v.mean();
  const double norm = centered.norm();
  if (norm <= 1e-12) return Eigen::VectorXd::Zero(p);
  return std::sqrt(static_cast<double>(p)) / norm * centered;
}

Eigen::MatrixXd layer_forward(const Eigen::MatrixXd& h, const LayerParams& params) {
  const int p = static_cast<int>(h.rows());
  const int q = static_cast<int>(h.cols());
  if (params.w_in.cols() != p || params.w_out.rows() != p) {
    throw std::invalid_argument("layer_forward: feedforward shape mismatch");
  }
  for (int head = 0; head < params.n_heads(); ++head) {
    if (params.w_q[head].cols() != p || params.w_k[head].cols() != p ||
        params.w_v[head].cols() != p || params.w_c[head].rows() != p) {
      throw std::invalid_argument("layer_forward: attention shape mismatch");
    }
  }

  Eigen::MatrixXd out(p, q);
  for (int i = 0; i < q; ++i) {
    Eigen::VectorXd attention = Eigen::VectorXd::Zero(p);
    if (i > 0) {
      const auto prefix = h.leftCols(i);
      for (int head = 0; head < params.n_heads(); ++head) {
        const Eigen::VectorXd logits =
            (params.w_k[head] * prefix).transpose() * (params.w_q[head] * h.col(i));
        attention.noalias() +=
            params.w_c[head] * (params.w_v[head] * (prefix * softmax(logits)));
      }
    }
    const Eigen::VectorXd residual = attention + h.col(i);
    Eigen::VectorXd activations = params.w_in * layernorm(residual);
    for (int t = 0; t < activations.size(); ++t) activations[t] = gelu(activations[t]);
    out.col(i) = residual + params.w_out * activations;
  }
  return out;
}

Eigen::MatrixXd model_forward(const Eigen::MatrixXd& h0, const std::vector<LayerParams>& layers) {
  Eigen::MatrixXd h = h0;
  for (const LayerParams& layer : layers) h = layer_forward(h, layer);
  return h;
}

namespace {

void write_i64(std::ostream& out, std::int64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::int64_t read_i64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw std::runtime_error("checkpoint: truncated header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return static_cast<std::int64_t>(v);
}

void write_tensor(std::ostream& out, const Eigen::MatrixXd& m) {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor rm = m;
  out.write(reinterpret_cast<const char*>(rm.data()),
            static_cast<std::streamsize>(sizeof(double)) * rm.size());
}

Eigen::MatrixXd read_tensor(std::istream& in, int rows, int cols) {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor rm(rows, cols);
  in.read(reinterpret_cast<char*>(rm.data()),
          static_cast<std::streamsize>(sizeof(double)) * rm.size());
  if (!in) throw std::runtime_error("checkpoint: truncated tensor data");
  return Eigen::MatrixXd(rm);
}

}  // namespace

void save_transformer(const std::string& path, const ModelConfig& config,
                      const std::vector<LayerParams>& layers, const ModelExtras* extras) {
  if (static_cast<int>(layers.size()) != config.n_layers) {
    throw std::invalid_argument("save_transformer: layer count does not match config");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_transformer: cannot open " + path);
  write_i64(out, config.p);
  write_i64(out, config.n_heads);
  write_i64(out, config.d_att);
  write_i64(out, config.d_ff);
  write_i64(out, config.n_layers);
  write_i64(out, extras ? 1 : 0);
  for (const LayerParams& layer : layers) {
    for (int h = 0; h < config.n_heads; ++h) {
      write_tensor(out, layer.w_q[static_cast<size_t>(h)]);
      write_tensor(out, layer.w_k[static_cast<size_t>(h)]);
      write_tensor(out, layer.w_v[static_cast<size_t>(h)]);
      write_tensor(out, layer.w_c[static_cast<size_t>(h)]);
    }
    write_tensor(out, layer.w_in);
    write_tensor(out, layer.w_out);
  }
  if (extras) {
    write_tensor(out, extras->embed);
    write_tensor(out, extras->read_w);
    write_tensor(out, extras->read_b);
  }
  if (!out) throw std::runtime_error("save_transformer: write failed for " + path);
}

LoadedTransformer load_transformer(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_transformer: cannot open " + path);
  LoadedTransformer loaded;
  loaded.config.p = static_cast<int>(read_i64(in));
  loaded.config.n_heads = static_cast<int>(read_i64(in));
  loaded.config.d_att = static_cast<int>(read_i64(in));
  loaded.config.d_ff = static_cast<int>(read_i64(in));
  loaded.config.n_layers = static_cast<int>(read_i64(in));
  const std::int64_t has_extras = read_i64(in);
  const ModelConfig& c = loaded.config;
  if (c.p < 1 || c.n_heads < 1 || c.d_att < 1 || c.d_ff < 1 || c.n_layers < 0 ||
      (has_extras != 0 && has_extras != 1)) {
    throw std::runtime_error("load_transformer: malformed header");
  }
  for (int l = 0; l < c.n_layers; ++l) {
    LayerParams layer;
    for (int h = 0; h < c.n_heads; ++h) {
      layer.w_q.push_back(read_tensor(in, c.d_att, c.p));
      layer.w_k.push_back(read_tensor(in, c.d_att, c.p));
      layer.w_v.push_back(read_tensor(in, c.d_att, c.p));
      layer.w_c.push_back(read_tensor(in, c.p, c.d_att));
    }
    layer.w_in = read_tensor(in, c.d_ff, c.p);
    layer.w_out = read_tensor(in, c.p, c.d_ff);
    loaded.layers.push_back(std::move(layer));
  }
  if (has_extras == 1) {
    ModelExtras extras;
    extras.embed = read_tensor(in, c.p, c.p);
    extras.read_w = read_tensor(in, 1, c.p);
    extras.read_b = read_tensor(in, 1, 1);
    loaded.extras = std::move(extras);
  }
  return loaded;
}

}  // namespace mixreg
