#include "mixreg/construction.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mixreg {

namespace {

void check_row_range(const Eigen::MatrixXd& h, int a, int b, const char* what) {
  if (a < 1 || b < a || b > h.rows()) {
    throw std::invalid_argument(std::string(what) + ": row range [" + std::to_string(a) + "," +
                                std::to_string(b) + "] outside 1.." + std::to_string(h.rows()));
  }
}

void check_col(const Eigen::MatrixXd& h, int c, const char* what) {
  if (c < 1 || c > h.cols()) {
    throw std::invalid_argument(std::string(what) + ": column " + std::to_string(c) +
                                " outside 1.." + std::to_string(h.cols()));
  }
}

void check_cols(const Eigen::MatrixXd& h, const std::vector<int>& cols, const char* what) {
  for (int c : cols) check_col(h, c, what);
}

}  // namespace

Eigen::MatrixXd apply_copydown(const Eigen::MatrixXd& h, int k, int kp, int l,
                               const std::vector<int>& cols) {
  const int len = l - k + 1;
  check_row_range(h, k, l, "copydown");
  check_row_range(h, kp, kp + len - 1, "copydown");
  check_cols(h, cols, "copydown");
  Eigen::MatrixXd out = h;
  for (int c : cols) out.block(kp - 1, c - 1, len, 1) = h.block(k - 1, c - 1, len, 1);
  return out;
}

Eigen::MatrixXd apply_copyover(const Eigen::MatrixXd& h, int k, int kp, int l,
                               const std::vector<int>& cols) {
  const int len = l - k + 1;
  check_row_range(h, k, l, "copyover");
  check_row_range(h, kp, kp + len - 1, "copyover");
  check_cols(h, cols, "copyover");
  Eigen::MatrixXd out = h;
  for (int c : cols) {
    if (c < 2) throw std::invalid_argument("copyover: column 1 has no predecessor");
    out.block(kp - 1, c - 1, len, 1) = h.block(k - 1, c - 2, len, 1);
  }
  return out;
}

Eigen::MatrixXd apply_mulop(const Eigen::MatrixXd& h, int k, int kp, int kpp, int l,
                            const std::vector<int>& cols) {
  const int len = l - k + 1;
  check_row_range(h, k, l, "mulop");
  check_row_range(h, kp, kp + len - 1, "mulop");
  check_row_range(h, kpp, kpp + len - 1, "mulop");
  check_cols(h, cols, "mulop");
  Eigen::MatrixXd out = h;
  for (int c : cols) {
    out.block(kpp - 1, c - 1, len, 1) =
        h.block(k - 1, c - 1, len, 1).cwiseProduct(h.block(kp - 1, c - 1, len, 1));
  }
  return out;
}

Eigen::MatrixXd apply_affineop(const Eigen::MatrixXd& h, int k, int kp, int kpp, int l, int lp,
                               int lpp, const Eigen::MatrixXd& w, const Eigen::MatrixXd& wp,
                               const Eigen::VectorXd& b, const std::vector<int>& cols) {
  check_row_range(h, k, l, "affineop");
  check_row_range(h, kp, lp, "affineop");
  check_row_range(h, kpp, lpp, "affineop");
  check_cols(h, cols, "affineop");
  const int n_out = lpp - kpp + 1;
  if (w.rows() != n_out || w.cols() != l - k + 1 || wp.rows() != n_out ||
      wp.cols() != lp - kp + 1 || b.size() != n_out) {
    throw std::invalid_argument("affineop: matrix shapes do not match index ranges");
  }
  Eigen::MatrixXd out = h;
  for (int c : cols) {
    out.block(kpp - 1, c - 1, n_out, 1) = w * h.block(k - 1, c - 1, l - k + 1, 1) +
                                          wp * h.block(kp - 1, c - 1, lp - kp + 1, 1) + b;
  }
  return out;
}

Eigen::MatrixXd apply_scaledagg(const Eigen::MatrixXd& h, double alpha, int k, int l, int kp,
                                int target_col, const std::vector<int>& cols) {
  const int len = l - k + 1;
  check_row_range(h, k, l, "scaledagg");
  check_row_range(h, kp, kp + len - 1, "scaledagg");
  check_col(h, target_col, "scaledagg");
  check_cols(h, cols, "scaledagg");
  for (int c : cols) {
    if (c >= target_col) {
      throw std::invalid_argument("scaledagg: source columns must precede the target column");
    }
  }
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(len);
  for (int c : cols) acc += h.block(k - 1, c - 1, len, 1);
  Eigen::MatrixXd out = h;
  out.block(kp - 1, target_col - 1, len, 1) = alpha * acc;
  return out;
}

Eigen::MatrixXd apply_softmaxop(const Eigen::MatrixXd& h, int k, int l, int kp) {
  const int len = l - k + 1;
  check_row_range(h, k, l, "softmaxop");
  check_row_range(h, kp, kp + len - 1, "softmaxop");
  const int q = static_cast<int>(h.cols());
  Eigen::VectorXd v = h.block(k - 1, q - 1, len, 1);
  const double shift = v.maxCoeff();
  Eigen::VectorXd e = (v.array() - shift).exp();
  Eigen::MatrixXd out = h;
  out.block(kp - 1, q - 1, len, 1) = e / e.sum();
  return out;
}

Eigen::MatrixXd apply_divop(const Eigen::MatrixXd& h, int j, int k, int kp, int l,
                            const std::vector<int>& cols) {
  const int len = l - k + 1;
  check_row_range(h, k, l, "divop");
  check_row_range(h, kp, kp + len - 1, "divop");
  check_row_range(h, j, j, "divop");
  check_cols(h, cols, "divop");
  Eigen::MatrixXd out = h;
  for (int c : cols) {
    const double denom = h(j - 1, c - 1);
    if (denom == 0.0) {
      throw std::domain_error("divop: zero divisor in column " + std::to_string(c));
    }
    out.block(kp - 1, c - 1, len, 1) = h.block(k - 1, c - 1, len, 1) / denom;
  }
  return out;
}

Eigen::MatrixXd apply_movop(const Eigen::MatrixXd& h, int k, int kp, int l,
                            const std::vector<int>& cols) {
  return apply_copydown(h, k, kp, l, cols);
}

Eigen::MatrixXd apply_sigmoidop(const Eigen::MatrixXd& h, int k, int kp) {
  check_row_range(h, k, k, "sigmoidop");
  check_row_range(h, kp, kp, "sigmoidop");
  const int q = static_cast<int>(h.cols());
  Eigen::MatrixXd out = h;
  const double u = h(k - 1, q - 1);
  // Evaluate through exp of a non-positive argument so large |u| cannot
  // overflow.
  out(kp - 1, q - 1) = u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
  return out;
}

Eigen::MatrixXd apply_step(const Eigen::MatrixXd& h, const CircuitStep& s) {
  switch (s.kind) {
    case OpKind::copydown:
      return apply_copydown(h, s.k, s.kp, s.l, s.cols);
    case OpKind::copyover:
      return apply_copyover(h, s.k, s.kp, s.l, s.cols);
    case OpKind::mulop:
      return apply_mulop(h, s.k, s.kp, s.kpp, s.l, s.cols);
    case OpKind::affineop:
      return apply_affineop(h, s.k, s.kp, s.kpp, s.l, s.lp, s.lpp, s.w, s.wp, s.b, s.cols);
    case OpKind::scaledagg:
      return apply_scaledagg(h, s.alpha, s.k, s.l, s.kp, s.target_col, s.cols);
    case OpKind::softmaxop:
      return apply_softmaxop(h, s.k, s.l, s.kp);
    case OpKind::divop:
      return apply_divop(h, s.j, s.k, s.kp, s.l, s.cols);
    case OpKind::movop:
      return apply_movop(h, s.k, s.kp, s.l, s.cols);
    case OpKind::sigmoidop:
      return apply_sigmoidop(h, s.k, s.kp);
  }
  throw std::logic_error("apply_step: unknown op kind");
}

Eigen::MatrixXd apply_raw(const Eigen::MatrixXd& h, const RawParams& p) {
  for (int r : p.read_rows) check_row_range(h, r, r, "raw read");
  for (int r : p.mix_rows) check_row_range(h, r, r, "raw mix");
  for (int r : p.write_rows) check_row_range(h, r, r, "raw write");
  const int rank = static_cast<int>(p.theta_read.rows());
  if (p.theta_read.cols() != static_cast<int>(p.read_rows.size()) ||
      p.theta_mix.rows() != rank ||
      p.theta_mix.cols() != static_cast<int>(p.mix_rows.size()) ||
      p.theta_write.rows() != static_cast<int>(p.write_rows.size()) ||
      p.theta_write.cols() != rank) {
    throw std::invalid_argument("raw: parameter shapes do not match row sets");
  }
  if (!p.prefix_map) throw std::invalid_argument("raw: missing prefix map");

  Eigen::MatrixXd out = h;
  for (int i = 1; i <= h.cols(); ++i) {
    const std::vector<int> prefix = p.prefix_map(i);
    for (int c : prefix) {
      if (c < 1 || c > i) {
        throw std::invalid_argument("raw: prefix map of column " + std::to_string(i) +
                                    " reaches column " + std::to_string(c));
      }
    }
    if (prefix.empty() && !p.write_on_empty) continue;

    Eigen::VectorXd read_sum = Eigen::VectorXd::Zero(p.read_rows.size());
    for (int c : prefix) {
      for (size_t t = 0; t < p.read_rows.size(); ++t) read_sum(t) += h(p.read_rows[t] - 1, c - 1);
    }
    const double denom = std::max<double>(1.0, static_cast<double>(prefix.size()));
    Eigen::VectorXd read = (p.theta_read / denom) * read_sum;

    Eigen::VectorXd mix_in(p.mix_rows.size());
    for (size_t t = 0; t < p.mix_rows.size(); ++t) mix_in(t) = h(p.mix_rows[t] - 1, i - 1);
    Eigen::VectorXd mixed = p.theta_mix * mix_in;

    Eigen::VectorXd combined =
        p.mode == RawParams::Mode::add ? (mixed + read).eval() : mixed.cwiseProduct(read).eval();
    Eigen::VectorXd written = p.theta_write * combined;
    for (size_t t = 0; t < p.write_rows.size(); ++t) out(p.write_rows[t] - 1, i - 1) = written(t);
  }
  return out;
}

RawParams lower_to_raw(const CircuitStep& s) {
  RawParams p;
  p.mode = RawParams::Mode::add;
  p.write_on_empty = false;

  auto range = [](int a, int b) {
    std::vector<int> r;
    for (int v = a; v <= b; ++v) r.push_back(v);
    return r;
  };

  switch (s.kind) {
    case OpKind::copydown:
    case OpKind::copyover: {
      const int len = s.l - s.k + 1;
      p.read_rows = range(s.k, s.l);
      p.write_rows = range(s.kp, s.kp + len - 1);
      p.theta_read = Eigen::MatrixXd::Identity(len, len);
      p.theta_mix = Eigen::MatrixXd::Zero(len, 0);
      p.theta_write = Eigen::MatrixXd::Identity(len, len);
      const std::vector<int> cols = s.cols;
      if (s.kind == OpKind::copydown) {
        p.prefix_map = [cols](int i) -> std::vector<int> {
          for (int c : cols) {
            if (c == i) return {i};
          }
          return {};
        };
      } else {
        p.prefix_map = [cols](int i) -> std::vector<int> {
          if (i < 2) return {};
          for (int c : cols) {
            if (c == i) return {i - 1};
          }
          return {};
        };
      }
      return p;
    }
    case OpKind::scaledagg: {
      const int len = s.l - s.k + 1;
      p.read_rows = range(s.k, s.l);
      p.write_rows = range(s.kp, s.kp + len - 1);
      // The read matrix carries the |I| compensation: |I|*I divided by the
      // prefix count |I| is exactly the identity, so the chain reproduces
      // alpha times the plain column sum bit for bit.
      p.theta_read = static_cast<double>(s.cols.size()) *
                     Eigen::MatrixXd::Identity(len, len);
      p.theta_mix = Eigen::MatrixXd::Zero(len, 0);
      p.theta_write = s.alpha * Eigen::MatrixXd::Identity(len, len);
      const std::vector<int> cols = s.cols;
      const int target = s.target_col;
      p.prefix_map = [cols, target](int i) -> std::vector<int> {
        return i == target ? cols : std::vector<int>{};
      };
      return p;
    }
    default:
      throw std::invalid_argument("lower_to_raw: op kind has no single-pass lowering");
  }
}

Eigen::MatrixXd encode_prompt(const Prompt& prompt, int m) {
  validate(prompt);
  if (m < 1) throw std::invalid_argument("encode_prompt: m must be positive");
  const int d = prompt.d();
  const int k = prompt.k();
  const int p = 2 * d + 4 * m + 2;
  const int q = 2 * k + 1;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(p, q);
  for (int i = 0; i <= k; ++i) {
    h.block(0, 2 * i, d, 1) = prompt.xs[static_cast<size_t>(i)];
    if (i < k) h(0, 2 * i + 1) = prompt.ys[static_cast<size_t>(i)];
  }
  return h;
}

std::vector<CircuitStep> build_posterior_circuit(const MixtureSpec& spec, int k) {
  validate(spec);
  if (spec.sigma <= 0.0) {
    throw std::invalid_argument("build_posterior_circuit: requires sigma > 0");
  }
  if (k < 1) throw std::invalid_argument("build_posterior_circuit: requires k >= 1");
  const int d = spec.d();
  const int m = spec.m();
  const int q = 2 * k + 1;

  std::vector<int> odd, even;
  for (int c = 1; c <= q; c += 2) odd.push_back(c);
  for (int c = 2; c < q; c += 2) even.push_back(c);

  std::vector<CircuitStep> steps;

  // 1. Stash each covariate below the input block, in its own column.
  {
    CircuitStep s;
    s.kind = OpKind::copydown;
    s.k = 1;
    s.l = d;
    s.kp = d + 1;
    s.cols = odd;
    steps.push_back(std::move(s));
  }
  // 2. Pull each stashed covariate into the following label column.
  {
    CircuitStep s;
    s.kind = OpKind::copyover;
    s.k = d + 1;
    s.l = 2 * d;
    s.kp = d + 1;
    s.cols = even;
    steps.push_back(std::move(s));
  }
  // 3. Re-stage the label scalar just below the covariate copy.
  {
    CircuitStep s;
    s.kind = OpKind::copydown;
    s.k = 1;
    s.l = 1;
    s.kp = 2 * d + 1;
    s.cols = even;
    steps.push_back(std::move(s));
  }
  // 4. Per-component residuals W x - y 1. The query column is covered too:
  //    it received its own covariate copy in step 1 (it is an odd column)
  //    and its label slot is still zero, so it gets plain W x.
  {
    CircuitStep s;
    s.kind = OpKind::affineop;
    s.k = d + 1;
    s.l = 2 * d;
    s.kp = 2 * d + 1;
    s.lp = 2 * d + 1;
    s.kpp = 2 * d + 2;
    s.lpp = 2 * d + m + 1;
    s.w = spec.components;
    s.wp = -Eigen::MatrixXd::Ones(m, 1);
    s.b = Eigen::VectorXd::Zero(m);
    s.cols = even;
    s.cols.push_back(q);
    steps.push_back(std::move(s));
  }
  // 5. Square the residuals.
  {
    CircuitStep s;
    s.kind = OpKind::mulop;
    s.k = 2 * d + 2;
    s.kp = 2 * d + 2;
    s.l = 2 * d + m + 1;
    s.kpp = 2 * d + m + 2;
    s.cols = even;
    steps.push_back(std::move(s));
  }
  // 6. Aggregate squared residuals into the query column with coefficient
  //    -1/(2 sigma^2).
  {
    CircuitStep s;
    s.kind = OpKind::scaledagg;
    s.alpha = -1.0 / (2.0 * spec.sigma * spec.sigma);
    s.k = 2 * d + m + 2;
    s.l = 2 * d + 2 * m + 1;
    s.kp = 2 * d + m + 2;
    s.target_col = q;
    s.cols = even;
    steps.push_back(std::move(s));
  }
  // 7. Posterior weights.
  {
    CircuitStep s;
    s.kind = OpKind::softmaxop;
    s.k = 2 * d + m + 2;
    s.l = 2 * d + 2 * m + 1;
    s.kp = 2 * d + 2 * m + 2;
    steps.push_back(std::move(s));
  }
  // 8. Weight the query column's per-component predictions.
  {
    CircuitStep s;
    s.kind = OpKind::mulop;
    s.k = 2 * d + 2;
    s.kp = 2 * d + 2 * m + 2;
    s.kpp = 2 * d + 3 * m + 2;
    s.l = 2 * d + m + 1;
    s.cols = {q};
    steps.push_back(std::move(s));
  }
  // 9. Sum into the output slot.
  {
    CircuitStep s;
    s.kind = OpKind::affineop;
    s.k = 2 * d + 3 * m + 2;
    s.l = 2 * d + 4 * m + 1;
    s.kp = 1;
    s.lp = 1;
    s.kpp = 2 * d + 4 * m + 2;
    s.lpp = 2 * d + 4 * m + 2;
    s.w = Eigen::MatrixXd::Ones(1, m);
    s.wp = Eigen::MatrixXd::Zero(1, 1);
    s.b = Eigen::VectorXd::Zero(1);
    s.cols = {q};
    steps.push_back(std::move(s));
  }
  return steps;
}

std::vector<Eigen::MatrixXd> run_circuit_stages(const Prompt& prompt, const MixtureSpec& spec) {
  if (prompt.d() != spec.d()) {
    throw std::invalid_argument("run_circuit: prompt and mixture dimension mismatch");
  }
  const std::vector<CircuitStep> steps = build_posterior_circuit(spec, prompt.k());
  std::vector<Eigen::MatrixXd> stages;
  stages.push_back(encode_prompt(prompt, spec.m()));
  for (const CircuitStep& s : steps) stages.push_back(apply_step(stages.back(), s));
  return stages;
}

double run_circuit(const Prompt& prompt, const MixtureSpec& spec) {
  const std::vector<Eigen::MatrixXd> stages = run_circuit_stages(prompt, spec);
  const Eigen::MatrixXd& last = stages.back();
  return last(last.rows() - 1, last.cols() - 1);
}

std::vector<CircuitStep> softmax_via_sigmoid_steps(int k, int l, int kp, int scratch_row,
                                                   int final_col) {
  if (l < k) throw std::invalid_argument("softmax_via_sigmoid: empty row range");
  if (final_col < 1) throw std::invalid_argument("softmax_via_sigmoid: bad final column");
  const int n = l - k + 1;
  const int r_neg = scratch_row;           // -s              (n rows)
  const int r_sig = r_neg + n;             // 1/(1+e^s)       (n rows)
  const int r_one = r_sig + n;             // constant 1      (1 row)
  const int r_exp = r_one + 1;             // 1+e^s, then e^s, then softmax (n rows)
  const int r_sum = r_exp + n;             // sum of e^s      (1 row)
  std::vector<CircuitStep> steps;

  auto affine = [&](int ak, int al, int akpp, int alpp, Eigen::MatrixXd w, Eigen::VectorXd b) {
    CircuitStep s;
    s.kind = OpKind::affineop;
    s.k = ak;
    s.l = al;
    s.kp = 1;
    s.lp = 1;
    s.kpp = akpp;
    s.lpp = alpp;
    s.w = std::move(w);
    s.wp = Eigen::MatrixXd::Zero(alpp - akpp + 1, 1);
    s.b = std::move(b);
    s.cols = {final_col};
    return s;
  };

  // Negate the logits.
  steps.push_back(affine(k, l, r_neg, r_neg + n - 1, -Eigen::MatrixXd::Identity(n, n),
                         Eigen::VectorXd::Zero(n)));
  // Sigmoids of the negated logits: 1/(1+e^s).
  for (int t = 0; t < n; ++t) {
    CircuitStep s;
    s.kind = OpKind::sigmoidop;
    s.k = r_neg + t;
    s.kp = r_sig + t;
    steps.push_back(std::move(s));
  }
  // A literal 1 to divide by.
  steps.push_back(affine(r_one, r_one, r_one, r_one, Eigen::MatrixXd::Zero(1, 1),
                         Eigen::VectorXd::Ones(1)));
  // Invert the sigmoids: 1+e^s.
  for (int t = 0; t < n; ++t) {
    CircuitStep s;
    s.kind = OpKind::divop;
    s.j = r_sig + t;
    s.k = r_one;
    s.l = r_one;
    s.kp = r_exp + t;
    s.cols = {final_col};
    steps.push_back(std::move(s));
  }
  // Subtract 1: e^s. Reads the pre-step values, so in-place is fine.
  {
    CircuitStep s = affine(r_exp, r_exp + n - 1, r_exp, r_exp + n - 1,
                           Eigen::MatrixXd::Identity(n, n), -Eigen::VectorXd::Ones(n));
    steps.push_back(std::move(s));
  }
  // Sum of exponentials.
  steps.push_back(
      affine(r_exp, r_exp + n - 1, r_sum, r_sum, Eigen::MatrixXd::Ones(1, n),
             Eigen::VectorXd::Zero(1)));
  // Normalize in place.
  {
    CircuitStep s;
    s.kind = OpKind::divop;
    s.j = r_sum;
    s.k = r_exp;
    s.l = r_exp + n - 1;
    s.kp = r_exp;
    s.cols = {final_col};
    steps.push_back(std::move(s));
  }
  // Deliver to the destination rows.
  {
    CircuitStep s;
    s.kind = OpKind::movop;
    s.k = r_exp;
    s.l = r_exp + n - 1;
    s.kp = kp;
    s.cols = {final_col};
    steps.push_back(std::move(s));
  }
  // Zero the whole scratch block so only the destination rows differ.
  {
    const int total = 3 * n + 2;
    steps.push_back(affine(r_neg, r_neg, r_neg, r_neg + total - 1,
                           Eigen::MatrixXd::Zero(total, 1), Eigen::VectorXd::Zero(total)));
  }
  return steps;
}

}  // namespace mixreg
