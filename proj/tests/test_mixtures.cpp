#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "mixreg/mixtures.hpp"
#include "test_util.hpp"

using namespace mixreg;
using testutil::bitwise_equal;

TEST_CASE("component rows sit on the radius-sqrt(d) sphere") {
  Rng rng(1);
  for (int d : {1, 3, 20}) {
    Eigen::MatrixXd w = sample_components(5, d, rng);
    REQUIRE(w.rows() == 5);
    REQUIRE(w.cols() == d);
    for (int j = 0; j < w.rows(); ++j) {
      CHECK(w.row(j).norm() == doctest::Approx(std::sqrt(double(d))).epsilon(1e-12));
    }
  }
}

TEST_CASE("prompt shape invariants and determinism") {
  Rng rng(2);
  MixtureSpec spec = sample_spec(3, 6, 1.0, rng);
  Rng a(77), b(77);
  for (int k : {0, 1, 5}) {
    Prompt pa = sample_prompt(spec, k, a);
    Prompt pb = sample_prompt(spec, k, b);
    CHECK(pa.xs.size() == pa.ys.size() + 1);
    CHECK(pa.k() == k);
    CHECK(pa.latent_index >= 1);
    CHECK(pa.latent_index <= spec.m());
    validate(pa, spec);
    CHECK(pa.latent_index == pb.latent_index);
    CHECK(pa.query_y == pb.query_y);
    for (size_t i = 0; i < pa.xs.size(); ++i) CHECK(bitwise_equal(pa.xs[i], pb.xs[i]));
    for (size_t i = 0; i < pa.ys.size(); ++i) CHECK(pa.ys[i] == pb.ys[i]);
  }
}

TEST_CASE("labels carry noise of variance sigma^2") {
  Rng rng(3);
  MixtureSpec spec = sample_spec(4, 8, 1.0, rng);
  Rng draws(11);
  double sumsq = 0.0;
  long n = 0;
  // 10^5 labeled pairs.
  for (int i = 0; i < 10000; ++i) {
    Prompt p = sample_prompt(spec, 10, draws);
    const Eigen::VectorXd w = spec.components.row(p.latent_index - 1);
    for (int l = 0; l < p.k(); ++l) {
      double r = p.ys[l] - w.dot(p.xs[l]);
      sumsq += r * r;
      ++n;
    }
  }
  double var = sumsq / double(n);
  CHECK(var > 0.97);
  CHECK(var < 1.03);
}

TEST_CASE("sigma 0 makes the latent component residual exactly zero") {
  Rng rng(4);
  MixtureSpec spec = sample_spec(3, 5, 0.0, rng);
  Rng draws(5);
  Prompt p = sample_prompt(spec, 7, draws);
  const Eigen::VectorXd w = spec.components.row(p.latent_index - 1);
  for (int l = 0; l < p.k(); ++l) CHECK(p.ys[l] == w.dot(p.xs[l]));
  CHECK(p.query_y == w.dot(p.query_x()));
}

TEST_CASE("weight scale shift") {
  Rng rng(6);
  MixtureSpec spec = sample_spec(2, 4, 0.7, rng);

  MixtureSpec same = shift_weight_scale(spec, 1.0);
  CHECK(bitwise_equal(same.components, spec.components));
  CHECK(same.sigma == spec.sigma);

  MixtureSpec doubled = shift_weight_scale(spec, 2.0);
  for (int j = 0; j < doubled.m(); ++j) {
    CHECK(doubled.components.row(j).norm() ==
          doctest::Approx(2.0 * std::sqrt(4.0)).epsilon(1e-12));
  }
  CHECK(doubled.sigma == spec.sigma);

  CHECK_THROWS_AS(shift_weight_scale(spec, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(shift_weight_scale(spec, -1.0), std::invalid_argument);
}

TEST_CASE("weight add shift") {
  Rng rng(7);
  MixtureSpec spec = sample_spec(3, 9, 0.5, rng);

  MixtureSpec same = shift_weight_add(spec, 0.0);
  CHECK(bitwise_equal(same.components, spec.components));
  CHECK(same.sigma == spec.sigma);

  const double eps = 0.75;
  MixtureSpec shifted = shift_weight_add(spec, eps);
  for (int j = 0; j < spec.m(); ++j) {
    CHECK((shifted.components.row(j) - spec.components.row(j)).norm() ==
          doctest::Approx(eps).epsilon(1e-12));
  }
  CHECK_THROWS_AS(shift_weight_add(spec, -0.1), std::invalid_argument);
}

TEST_CASE("covariate scale shift pairs draws across kappa") {
  Rng rng(8);
  MixtureSpec spec = sample_spec(2, 3, 0.0, rng);
  const std::uint64_t seed = 99;
  PromptSource unit(spec, seed);
  PromptSource twice = shift_covariate_scale(spec, 2.0, seed);
  for (int idx = 0; idx < 5; ++idx) {
    Prompt a = unit.at(4, idx);
    Prompt b = twice.at(4, idx);
    for (size_t i = 0; i < a.xs.size(); ++i) {
      CHECK(bitwise_equal(2.0 * a.xs[i], b.xs[i]));
    }
    // sigma = 0, so labels scale exactly with the covariates.
    for (int l = 0; l < a.k(); ++l) CHECK(b.ys[l] == doctest::Approx(2.0 * a.ys[l]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(shift_covariate_scale(spec, 0.0, seed), std::invalid_argument);
}

TEST_CASE("kappa 1 source is bitwise identical to the plain source") {
  Rng rng(9);
  MixtureSpec spec = sample_spec(2, 4, 1.0, rng);
  PromptSource plain(spec, 5);
  PromptSource scaled = shift_covariate_scale(spec, 1.0, 5);
  for (int idx = 0; idx < 4; ++idx) {
    Prompt a = plain.at(3, idx);
    Prompt b = scaled.at(3, idx);
    CHECK(a.query_y == b.query_y);
    CHECK(a.latent_index == b.latent_index);
    for (size_t i = 0; i < a.xs.size(); ++i) CHECK(bitwise_equal(a.xs[i], b.xs[i]));
    for (int l = 0; l < a.k(); ++l) CHECK(a.ys[l] == b.ys[l]);
  }
}

TEST_CASE("scaled covariates have second moment kappa^2 d") {
  Rng rng(10);
  const int d = 4;
  const double kappa = 3.0;
  MixtureSpec spec = sample_spec(2, d, 1.0, rng);
  PromptSource source = shift_covariate_scale(spec, kappa, 17);
  double sum = 0.0;
  long n = 0;
  // 10^5 covariate draws via k=9 prompts (10 covariates each).
  for (int idx = 0; idx < 10000; ++idx) {
    Prompt p = source.at(9, idx);
    for (const auto& x : p.xs) {
      sum += x.squaredNorm();
      ++n;
    }
  }
  double ratio = sum / double(n) / (kappa * kappa * d);
  CHECK(ratio > 0.97);
  CHECK(ratio < 1.03);
}

TEST_CASE("prompt source is a pure function of (seed, k, index)") {
  Rng rng(11);
  MixtureSpec spec = sample_spec(3, 4, 0.5, rng);
  PromptSource s1(spec, 123);
  PromptSource s2(spec, 123);
  Prompt a = s1.at(6, 41);
  Prompt b = s2.at(6, 41);
  // Out-of-order access must not matter.
  s1.at(2, 0);
  Prompt c = s1.at(6, 41);
  for (size_t i = 0; i < a.xs.size(); ++i) {
    CHECK(bitwise_equal(a.xs[i], b.xs[i]));
    CHECK(bitwise_equal(a.xs[i], c.xs[i]));
  }
  CHECK(a.query_y == b.query_y);
  CHECK(a.query_y == c.query_y);
}

TEST_CASE("validation rejects malformed specs and prompts") {
  MixtureSpec empty;
  CHECK_THROWS_AS(validate(empty), std::invalid_argument);

  MixtureSpec bad;
  bad.components = Eigen::MatrixXd::Ones(2, 3);
  bad.sigma = -1.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);

  Prompt p;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);

  Rng rng(12);
  MixtureSpec spec = sample_spec(2, 3, 1.0, rng);
  Rng draws(1);
  Prompt ok = sample_prompt(spec, 2, draws);
  Prompt wrong_latent = ok;
  wrong_latent.latent_index = 5;
  CHECK_THROWS_AS(validate(wrong_latent, spec), std::invalid_argument);
}
