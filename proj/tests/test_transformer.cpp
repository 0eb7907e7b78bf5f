#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>

#include "mixreg/transformer.hpp"
#include "test_util.hpp"

using namespace mixreg;
using testutil::bitwise_equal;
using testutil::max_abs_diff;
using testutil::random_matrix;

namespace {

// Independent single-loop reference for one decoder layer, written directly
// from the defining equations: per column, logits over the strict prefix,
// softmax, attended value, residual, layernorm -> W_in -> gelu -> W_out,
// residual again. No logit scaling.
Eigen::MatrixXd naive_layer(const Eigen::MatrixXd& h, const LayerParams& params) {
  const int q = static_cast<int>(h.cols());
  const int p = static_cast<int>(h.rows());
  Eigen::MatrixXd out(p, q);
  for (int i = 0; i < q; ++i) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(p);
    for (int head = 0; head < params.n_heads(); ++head) {
      if (i > 0) {
        Eigen::VectorXd logits(i);
        for (int t = 0; t < i; ++t) {
          logits(t) = (params.w_k[head] * h.col(t)).dot(params.w_q[head] * h.col(i));
        }
        Eigen::VectorXd s = softmax(logits);
        Eigen::VectorXd attended = Eigen::VectorXd::Zero(p);
        for (int t = 0; t < i; ++t) attended += s(t) * h.col(t);
        a += params.w_c[head] * (params.w_v[head] * attended);
      }
    }
    Eigen::VectorXd resid = a + h.col(i);
    Eigen::VectorXd ff = params.w_out * (params.w_in * layernorm(resid)).unaryExpr([](double u) {
      return gelu(u);
    });
    out.col(i) = resid + ff;
  }
  return out;
}

}  // namespace

TEST_CASE("softmax basics") {
  Eigen::VectorXd two(2);
  two << 0.0, 0.0;
  Eigen::VectorXd s = softmax(two);
  CHECK(s(0) == 0.5);
  CHECK(s(1) == 0.5);

  Eigen::VectorXd v(3);
  v << 1.0, 2.0, 3.0;
  Eigen::VectorXd sv = softmax(v);
  CHECK(sv(0) == doctest::Approx(0.09003057317038046).epsilon(1e-10));
  CHECK(sv(1) == doctest::Approx(0.24472847105479767).epsilon(1e-10));
  CHECK(sv(2) == doctest::Approx(0.6652409557748219).epsilon(1e-10));
  CHECK(sv.sum() == doctest::Approx(1.0).epsilon(1e-12));

  // Shift invariance.
  Eigen::VectorXd shifted = softmax((v.array() + 123.5).matrix());
  CHECK(max_abs_diff(sv, shifted) < 1e-15);

  // Large magnitudes stay finite.
  Eigen::VectorXd big(2);
  big << 1e4, -1e4;
  CHECK(softmax(big).allFinite());

  CHECK(softmax(Eigen::VectorXd()).size() == 0);
}

TEST_CASE("gelu uses the exact error-function form") {
  CHECK(gelu(0.0) == 0.0);
  CHECK(std::abs(gelu(10.0) - 10.0) < 1e-12);
  CHECK(gelu(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-10));
  CHECK(gelu(-1.0) == doctest::Approx(-0.15865525393145707).epsilon(1e-10));
}

TEST_CASE("layernorm standardizes to mean zero and norm sqrt(p)") {
  Eigen::VectorXd fixed(4);
  fixed << 1.0, -1.0, 1.0, -1.0;
  Eigen::VectorXd out = layernorm(fixed);
  CHECK(max_abs_diff(out, fixed) < 1e-12);

  Eigen::VectorXd constant = Eigen::VectorXd::Constant(5, 3.7);
  CHECK(layernorm(constant).norm() == 0.0);

  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd v = testutil::random_vector(8, rng);
    Eigen::VectorXd n = layernorm(v);
    CHECK(std::abs(n.mean()) < 1e-12);
    CHECK(n.norm() == doctest::Approx(std::sqrt(8.0)).epsilon(1e-10));
    // Exact scale invariance on non-degenerate input.
    CHECK(max_abs_diff(layernorm(2.5 * v), n) < 1e-12);
  }
}

TEST_CASE("single-column and zero-parameter layers") {
  ModelConfig cfg{.p = 6, .n_heads = 2, .d_att = 3, .d_ff = 8, .n_layers = 1};
  Rng rng(2);
  LayerParams params = random_layer(cfg, rng);

  // One column has an empty prefix: attention contributes nothing.
  Eigen::MatrixXd h = random_matrix(6, 1, rng);
  Eigen::MatrixXd out = layer_forward(h, params);
  Eigen::VectorXd expect =
      h.col(0) + params.w_out * (params.w_in * layernorm(h.col(0))).unaryExpr([](double u) {
        return gelu(u);
      });
  CHECK(max_abs_diff(out, expect) < 1e-13);

  // All-zero parameters are the identity.
  Eigen::MatrixXd h2 = random_matrix(6, 4, rng);
  CHECK(bitwise_equal(layer_forward(h2, zero_layer(cfg)), h2));
}

TEST_CASE("layer forward matches the naive reference") {
  ModelConfig cfg{.p = 8, .n_heads = 2, .d_att = 4, .d_ff = 12, .n_layers = 1};
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    LayerParams params = random_layer(cfg, rng, 0.5);
    Eigen::MatrixXd h = random_matrix(8, 5, rng);
    CHECK(max_abs_diff(layer_forward(h, params), naive_layer(h, params)) < 1e-12);
  }
}

TEST_CASE("model forward composes layers in order") {
  ModelConfig cfg{.p = 5, .n_heads = 1, .d_att = 2, .d_ff = 7, .n_layers = 3};
  Rng rng(4);
  Eigen::MatrixXd h = random_matrix(5, 4, rng);

  CHECK(bitwise_equal(model_forward(h, {}), h));

  std::vector<LayerParams> zeros(3, zero_layer(cfg));
  CHECK(bitwise_equal(model_forward(h, zeros), h));

  std::vector<LayerParams> layers;
  for (int i = 0; i < 3; ++i) layers.push_back(random_layer(cfg, rng, 0.3));
  Eigen::MatrixXd manual = layer_forward(layer_forward(layer_forward(h, layers[0]), layers[1]),
                                          layers[2]);
  CHECK(bitwise_equal(model_forward(h, layers), manual));
}

TEST_CASE("causality: earlier columns never see later ones") {
  ModelConfig cfg{.p = 6, .n_heads = 2, .d_att = 3, .d_ff = 9, .n_layers = 2};
  Rng rng(5);
  std::vector<LayerParams> layers{random_layer(cfg, rng, 0.4), random_layer(cfg, rng, 0.4)};
  Eigen::MatrixXd h = random_matrix(6, 5, rng);
  Eigen::MatrixXd base = model_forward(h, layers);
  for (int j = 1; j < 5; ++j) {
    Eigen::MatrixXd perturbed = h;
    perturbed.col(j).array() += 1.25;
    Eigen::MatrixXd out = model_forward(perturbed, layers);
    CHECK(bitwise_equal(out.leftCols(j), base.leftCols(j)));
  }
}

TEST_CASE("checkpoint container round-trips bit for bit") {
  ModelConfig cfg{.p = 7, .n_heads = 2, .d_att = 3, .d_ff = 10, .n_layers = 2};
  Rng rng(6);
  std::vector<LayerParams> layers{random_layer(cfg, rng), random_layer(cfg, rng)};
  const std::string path = "test_checkpoint.bin";

  save_transformer(path, cfg, layers);
  LoadedTransformer plain = load_transformer(path);
  CHECK(plain.config.p == 7);
  CHECK(plain.config.n_heads == 2);
  CHECK(plain.config.d_att == 3);
  CHECK(plain.config.d_ff == 10);
  CHECK(plain.config.n_layers == 2);
  CHECK_FALSE(plain.extras.has_value());
  REQUIRE(plain.layers.size() == 2);
  for (int l = 0; l < 2; ++l) {
    for (int head = 0; head < 2; ++head) {
      CHECK(bitwise_equal(plain.layers[l].w_q[head], layers[l].w_q[head]));
      CHECK(bitwise_equal(plain.layers[l].w_k[head], layers[l].w_k[head]));
      CHECK(bitwise_equal(plain.layers[l].w_v[head], layers[l].w_v[head]));
      CHECK(bitwise_equal(plain.layers[l].w_c[head], layers[l].w_c[head]));
    }
    CHECK(bitwise_equal(plain.layers[l].w_in, layers[l].w_in));
    CHECK(bitwise_equal(plain.layers[l].w_out, layers[l].w_out));
  }

  ModelExtras extras;
  extras.embed = random_matrix(7, 7, rng);
  extras.read_w = random_matrix(1, 7, rng);
  extras.read_b = random_matrix(1, 1, rng);
  save_transformer(path, cfg, layers, &extras);
  LoadedTransformer full = load_transformer(path);
  REQUIRE(full.extras.has_value());
  CHECK(bitwise_equal(full.extras->embed, extras.embed));
  CHECK(bitwise_equal(full.extras->read_w, extras.read_w));
  CHECK(bitwise_equal(full.extras->read_b, extras.read_b));

  std::remove(path.c_str());
}
