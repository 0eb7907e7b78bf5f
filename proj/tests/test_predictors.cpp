#include <doctest.h>

#include <cmath>

#include "mixreg/predictors.hpp"
#include "test_util.hpp"

using namespace mixreg;
using testutil::bitwise_equal;

namespace {

Prompt make_prompt(std::vector<Eigen::VectorXd> xs, std::vector<double> ys, int latent = 1,
                   double query_y = 0.0) {
  Prompt p;
  p.xs = std::move(xs);
  p.ys = std::move(ys);
  p.latent_index = latent;
  p.query_y = query_y;
  return p;
}

Eigen::VectorXd vec1(double a) {
  Eigen::VectorXd v(1);
  v << a;
  return v;
}

// The frozen 1-d two-component instance: w = {+1, -1}, sigma = 1, one
// labeled pair (x=1, y=1), query x = 2.
MixtureSpec frozen_spec() {
  MixtureSpec spec;
  spec.components = Eigen::MatrixXd(2, 1);
  spec.components << 1.0, -1.0;
  spec.sigma = 1.0;
  return spec;
}

Prompt frozen_prompt() { return make_prompt({vec1(1.0), vec1(2.0)}, {1.0}); }

}  // namespace

TEST_CASE("residual matrix basics") {
  // Exact fit row plus the label-free query row.
  Eigen::MatrixXd w1(1, 1);
  w1 << 1.0;
  Prompt p = make_prompt({vec1(2.0), vec1(3.0)}, {2.0});
  Eigen::MatrixXd r = residual_matrix(p, w1);
  REQUIRE(r.rows() == 2);
  REQUIRE(r.cols() == 1);
  CHECK(r(0, 0) == 0.0);
  CHECK(r(1, 0) == 3.0);

  // Identical components give identical columns.
  Eigen::MatrixXd w_same(3, 1);
  w_same << 0.5, 0.5, 0.5;
  Eigen::MatrixXd rs = residual_matrix(p, w_same);
  CHECK(bitwise_equal(rs.col(0), rs.col(1)));
  CHECK(bitwise_equal(rs.col(0), rs.col(2)));

  // The two-component instance: first row is (0, -2).
  Eigen::MatrixXd r2 = residual_matrix(frozen_prompt(), frozen_spec().components);
  CHECK(r2(0, 0) == 0.0);
  CHECK(r2(0, 1) == -2.0);

  Eigen::MatrixXd wrong(1, 3);
  CHECK_THROWS(residual_matrix(p, wrong));
}

TEST_CASE("posterior probabilities") {
  MixtureSpec spec = frozen_spec();

  // Empty evidence: uniform.
  Prompt empty = make_prompt({vec1(5.0)}, {});
  PosteriorProbs uniform = posterior_probs(empty, spec);
  CHECK(uniform.probs(0) == 0.5);
  CHECK(uniform.probs(1) == 0.5);
  CHECK_FALSE(uniform.noiseless_limit);

  // Single component: certainty.
  MixtureSpec one;
  one.components = Eigen::MatrixXd::Ones(1, 1);
  one.sigma = 1.0;
  PosteriorProbs sure = posterior_probs(make_prompt({vec1(1.0), vec1(0.0)}, {0.9}, 1), one);
  CHECK(sure.probs(0) == 1.0);

  // The frozen instance is softmax(0, -2).
  PosteriorProbs p = posterior_probs(frozen_prompt(), spec);
  CHECK(p.probs(0) == doctest::Approx(0.8807970779778823).epsilon(1e-12));
  CHECK(p.probs(1) == doctest::Approx(0.11920292202211755).epsilon(1e-12));
  CHECK(p.probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("posterior stays normalized for extreme evidence") {
  Rng rng(3);
  MixtureSpec spec = sample_spec(5, 20, 1.0, rng);
  Rng draws(4);
  // k = 60 drives the exponents to magnitude ~10^3; the log-domain max
  // shift must keep the output a probability vector.
  Prompt p = sample_prompt(spec, 60, draws);
  PosteriorProbs probs = posterior_probs(p, spec);
  CHECK(probs.probs.minCoeff() >= 0.0);
  CHECK(probs.probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(probs.probs.allFinite());
}

TEST_CASE("posterior mean prediction on the frozen instance") {
  PosteriorSummary s = posterior_mean_predict(frozen_prompt(), frozen_spec());
  // w_hat = p1 - p2 = tanh(1).
  CHECK(s.w_hat(0) == doctest::Approx(0.7615941559557649).epsilon(1e-12));
  CHECK(s.prediction == doctest::Approx(1.5231883119115297).epsilon(1e-12));
  // The coarse frozen values, as published.
  CHECK(s.w_hat(0) == doctest::Approx(0.761594).epsilon(1e-5));
  CHECK(s.prediction == doctest::Approx(1.523188).epsilon(1e-5));
}

TEST_CASE("posterior mean trivia") {
  // Single component: prediction is the component's linear response.
  Rng rng(5);
  MixtureSpec one = sample_spec(1, 6, 1.0, rng);
  Rng draws(6);
  Prompt p = sample_prompt(one, 3, draws);
  PosteriorSummary s = posterior_mean_predict(p, one);
  CHECK(s.prediction ==
        doctest::Approx(one.components.row(0).dot(p.query_x())).epsilon(1e-12));

  // Symmetric prior, no evidence: zero.
  MixtureSpec pm = frozen_spec();
  PosteriorSummary z = posterior_mean_predict(make_prompt({vec1(5.0)}, {}), pm);
  CHECK(z.w_hat(0) == 0.0);
  CHECK(z.prediction == 0.0);
}

TEST_CASE("w_hat ignores the query covariate") {
  Rng rng(7);
  MixtureSpec spec = sample_spec(4, 5, 1.0, rng);
  Rng draws(8);
  Prompt p = sample_prompt(spec, 6, draws);
  PosteriorSummary a = posterior_mean_predict(p, spec);
  Prompt q = p;
  q.xs.back() = Eigen::VectorXd::Constant(5, 10.0);
  PosteriorSummary b = posterior_mean_predict(q, spec);
  CHECK(bitwise_equal(a.w_hat, b.w_hat));
  CHECK(bitwise_equal(a.probs, b.probs));
}

TEST_CASE("sigma 0 routes to the uniform argmin limit") {
  MixtureSpec spec = frozen_spec();
  spec.sigma = 0.0;

  PosteriorProbs p = posterior_probs(frozen_prompt(), spec);
  CHECK(p.noiseless_limit);
  CHECK(p.probs(0) == 1.0);
  CHECK(p.probs(1) == 0.0);

  // Two exact minimizers share the mass.
  MixtureSpec twin;
  twin.components = Eigen::MatrixXd(2, 1);
  twin.components << 1.0, 1.0;
  twin.sigma = 0.0;
  PosteriorProbs t = posterior_probs(make_prompt({vec1(1.0), vec1(2.0)}, {1.0}), twin);
  CHECK(t.noiseless_limit);
  CHECK(t.probs(0) == 0.5);
  CHECK(t.probs(1) == 0.5);
}

TEST_CASE("argmin oracle") {
  MixtureSpec spec = frozen_spec();
  Prompt p = frozen_prompt();
  // Component 1 fits (x=1, y=1) exactly.
  CHECK(argmin_component(p, spec.components) == 0);
  CHECK(argmin_predict(p, spec.components) == 2.0);

  // Single component.
  Eigen::MatrixXd w1(1, 1);
  w1 << -2.0;
  CHECK(argmin_predict(p, w1) == -4.0);

  // Noiseless data from a known component is recovered exactly.
  Rng rng(9);
  MixtureSpec big = sample_spec(5, 4, 0.0, rng);
  Rng draws(10);
  for (int trial = 0; trial < 20; ++trial) {
    Prompt g = sample_prompt(big, 3, draws);
    CHECK(argmin_component(g, big.components) == g.latent_index - 1);
  }

  // Ties break to the lowest index.
  MixtureSpec twin;
  twin.components = Eigen::MatrixXd(2, 1);
  twin.components << 1.0, 1.0;
  CHECK(argmin_component(p, twin.components) == 0);
}

TEST_CASE("argmin is the small-sigma limit of the posterior mean") {
  Rng rng(11);
  MixtureSpec spec = sample_spec(3, 4, 0.0, rng);
  spec.sigma = 1e-3;
  Rng draws(12);
  for (int trial = 0; trial < 10; ++trial) {
    MixtureSpec gen = spec;
    gen.sigma = 0.0;  // noiseless data so one component fits exactly
    Prompt p = sample_prompt(gen, 4, draws);
    double soft = posterior_mean_predict(p, spec).prediction;
    double hard = argmin_predict(p, spec.components);
    CHECK(soft == doctest::Approx(hard).epsilon(1e-6));
  }
}

TEST_CASE("minimum-norm least squares") {
  // k = 0: the zero predictor.
  Prompt empty = make_prompt({vec1(3.0)}, {});
  CHECK(ols_predict(empty) == 0.0);

  // Underdetermined: the minimum-norm solution lies along x1.
  Eigen::VectorXd x1(2), xq(2);
  x1 << 1.0, 0.0;
  xq << 0.0, 1.0;
  Prompt under = make_prompt({x1, xq}, {3.0});
  Eigen::VectorXd w = ols_weights(under);
  CHECK(w(0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(w(1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ols_predict(under) == doctest::Approx(0.0).epsilon(1e-12));

  // Interpolation regime recovers the latent component.
  Rng rng(13);
  MixtureSpec spec = sample_spec(2, 4, 0.0, rng);
  Rng draws(14);
  Prompt p = sample_prompt(spec, 8, draws);
  double truth = spec.components.row(p.latent_index - 1).dot(p.query_x());
  CHECK(ols_predict(p) == doctest::Approx(truth).epsilon(1e-8));
}
