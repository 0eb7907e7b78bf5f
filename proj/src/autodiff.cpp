#include "mixreg/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace mixreg::ad {

namespace {
constexpr double kNormFloor = 1e-12;

double std_normal_cdf(double u) { return 0.5 * (1.0 + std::erf(u / std::numbers::sqrt2)); }
double std_normal_pdf(double u) {
  return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
}
}  // namespace

int Tape::input(Eigen::MatrixXd value) { return push(std::move(value), nullptr); }

int Tape::push(Eigen::MatrixXd value, std::function<void(Tape&)> back) {
  values_.push_back(std::move(value));
  backs_.push_back(std::move(back));
  return static_cast<int>(values_.size()) - 1;
}

Eigen::MatrixXd Tape::grad(int node) const {
  const auto& g = grads_[static_cast<size_t>(node)];
  if (g.size() == 0) {
    const auto& v = values_[static_cast<size_t>(node)];
    return Eigen::MatrixXd::Zero(v.rows(), v.cols());
  }
  return g;
}

void Tape::accum(int node, const Eigen::MatrixXd& g) {
  auto& slot = grads_[static_cast<size_t>(node)];
  if (slot.size() == 0) {
    slot = g;
  } else {
    slot += g;
  }
}

void Tape::backward(int root) {
  if (root < 0 || root >= size()) throw std::invalid_argument("backward: bad root node");
  if (values_[static_cast<size_t>(root)].size() != 1) {
    throw std::invalid_argument("backward: root must be a scalar node");
  }
  grads_.assign(values_.size(), Eigen::MatrixXd());
  grads_[static_cast<size_t>(root)] = Eigen::MatrixXd::Ones(1, 1);
  for (int i = root; i >= 0; --i) {
    if (!backs_[static_cast<size_t>(i)]) continue;
    if (grads_[static_cast<size_t>(i)].size() == 0) continue;
    backs_[static_cast<size_t>(i)](*this);
  }
}

int matmul(Tape& t, int a, int b) {
  Eigen::MatrixXd v = t.value(a) * t.value(b);
  return t.push(std::move(v), [a, b, out = t.size()](Tape& tp) {
    const Eigen::MatrixXd& g = tp.grads_[static_cast<size_t>(out)];
    tp.accum(a, g * tp.value(b).transpose());
    tp.accum(b, tp.value(a).transpose() * g);
  });
}

int matmul_tn(Tape& t, int a, int b) {
  Eigen::MatrixXd v = t.value(a).transpose() * t.value(b);
  return t.push(std::move(v), [a, b, out = t.size()](Tape& tp) {
    const Eigen::MatrixXd& g = tp.grads_[static_cast<size_t>(out)];
    tp.accum(a, tp.value(b) * g.transpose());
    tp.accum(b, tp.value(a) * g);
  });
}

int add(Tape& t, int a, int b) {
  Eigen::MatrixXd v = t.value(a) + t.value(b);
  return t.push(std::move(v), [a, b, out = t.size()](Tape& tp) {
    const Eigen::MatrixXd& g = tp.grads_[static_cast<size_t>(out)];
    tp.accum(a, g);
    tp.accum(b, g);
  });
}

int scale(Tape& t, int a, double s) {
  Eigen::MatrixXd v = s * t.value(a);
  return t.push(std::move(v), [a, s, out = t.size()](Tape& tp) {
    tp.accum(a, s * tp.grads_[static_cast<size_t>(out)]);
  });
}

int hadamard(Tape& t, int a, int b) {
  Eigen::MatrixXd v = t.value(a).cwiseProduct(t.value(b));
  return t.push(std::move(v), [a, b, out = t.size()](Tape& tp) {
    const Eigen::MatrixXd& g = tp.grads_[static_cast<size_t>(out)];
    tp.accum(a, g.cwiseProduct(tp.value(b)));
    tp.accum(b, g.cwiseProduct(tp.value(a)));
  });
}

int hadamard_const(Tape& t, int a, Eigen::MatrixXd mask) {
  Eigen::MatrixXd v = t.value(a).cwiseProduct(mask);
  return t.push(std::move(v), [a, m = std::move(mask), out = t.size()](Tape& tp) {
    tp.accum(a, tp.grads_[static_cast<size_t>(out)].cwiseProduct(m));
  });
}

int add_col_broadcast(Tape& t, int a, int bias) {
  if (t.value(bias).cols() != 1 || t.value(bias).rows() != t.value(a).rows()) {
    throw std::invalid_argument("add_col_broadcast: bias must be a matching column vector");
  }
  Eigen::MatrixXd v = t.value(a).colwise() + Eigen::VectorXd(t.value(bias));
  return t.push(std::move(v), [a, bias, out = t.size()](Tape& tp) {
    const Eigen::MatrixXd& g = tp.grads_[static_cast<size_t>(out)];
    tp.accum(a, g);
    tp.accum(bias, g.rowwise().sum());
  });
}

int strict_prefix_softmax(Tape& t, int a) {
  const Eigen::MatrixXd& s = t.value(a);
  if (s.rows() != s.cols()) {
    throw std::invalid_argument("strict_prefix_softmax: logit matrix must be square");
  }
  const int q = static_cast<int>(s.cols());
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(q, q);
  for (int i = 1; i < q; ++i) {
    Eigen::VectorXd logits = s.block(0, i, i, 1);
    Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
    v.block(0, i, i, 1) = e / e.sum();
  }
  return t.push(std::move(v), [a, q, out = t.size()](Tape& tp) {
    const Eigen::MatrixXd& g = tp.grads_[static_cast<size_t>(out)];
    const Eigen::MatrixXd& p = tp.value(out);
    Eigen::MatrixXd da = Eigen::MatrixXd::Zero(q, q);
    for (int i = 1; i < q; ++i) {
      Eigen::VectorXd pi = p.block(0, i, i, 1);
      Eigen::VectorXd gi = g.block(0, i, i, 1);
      const double dot = pi.dot(gi);
      da.block(0, i, i, 1) = pi.cwiseProduct((gi.array() - dot).matrix());
    }
    tp.accum(a, da);
  });
}

int layernorm_cols(Tape& t, int a) {
  const Eigen::MatrixXd& x = t.value(a);
  const int p = static_cast<int>(x.rows());
  const double sp = std::sqrt(static_cast<double>(p));
  Eigen::MatrixXd v(x.rows(), x.cols());
  for (int c = 0; c < x.cols(); ++c) {
    Eigen::VectorXd u = x.col(c).array() - x.col(c).mean();
    const double n = u.norm();
    v.col(c) = n <= kNormFloor ? Eigen::VectorXd::Zero(p) : Eigen::VectorXd(sp * u / n);
  }
  return t.push(std::move(v), [a, p, sp, out = t.size()](Tape& tp) {
    const Eigen::MatrixXd& g = tp.grads_[static_cast<size_t>(out)];
    const Eigen::MatrixXd& x = tp.value(a);
    Eigen::MatrixXd da = Eigen::MatrixXd::Zero(x.rows(), x.cols());
    for (int c = 0; c < x.cols(); ++c) {
      Eigen::VectorXd u = x.col(c).array() - x.col(c).mean();
      const double n = u.norm();
      if (n <= kNormFloor) continue;
      Eigen::VectorXd gc = g.col(c);
      Eigen::VectorXd du = sp * (gc / n - u * (u.dot(gc) / (n * n * n)));
      da.col(c) = du.array() - du.mean();
    }
    tp.accum(a, da);
  });
}

int gelu(Tape& t, int a) {
  Eigen::MatrixXd v =
      t.value(a).unaryExpr([](double u) { return u * std_normal_cdf(u); });
  return t.push(std::move(v), [a, out = t.size()](Tape& tp) {
    const Eigen::MatrixXd& g = tp.grads_[static_cast<size_t>(out)];
    Eigen::MatrixXd dphi = tp.value(a).unaryExpr(
        [](double u) { return std_normal_cdf(u) + u * std_normal_pdf(u); });
    tp.accum(a, g.cwiseProduct(dphi));
  });
}

int select_cols(Tape& t, int a, std::vector<int> cols) {
  const Eigen::MatrixXd& x = t.value(a);
  for (int c : cols) {
    if (c < 0 || c >= x.cols()) throw std::invalid_argument("select_cols: index out of range");
  }
  Eigen::MatrixXd v(x.rows(), static_cast<int>(cols.size()));
  for (size_t i = 0; i < cols.size(); ++i) v.col(static_cast<int>(i)) = x.col(cols[i]);
  return t.push(std::move(v), [a, cs = std::move(cols), out = t.size()](Tape& tp) {
    const Eigen::MatrixXd& g = tp.grads_[static_cast<size_t>(out)];
    Eigen::MatrixXd da = Eigen::MatrixXd::Zero(tp.value(a).rows(), tp.value(a).cols());
    for (size_t i = 0; i < cs.size(); ++i) da.col(cs[i]) += g.col(static_cast<int>(i));
    tp.accum(a, da);
  });
}

int sum_sq_scaled(Tape& t, int a, Eigen::MatrixXd target, double coeff) {
  if (target.rows() != t.value(a).rows() || target.cols() != t.value(a).cols()) {
    throw std::invalid_argument("sum_sq_scaled: target shape mismatch");
  }
  Eigen::MatrixXd diff = t.value(a) - target;
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = coeff * diff.squaredNorm();
  return t.push(std::move(v), [a, tg = std::move(target), coeff, out = t.size()](Tape& tp) {
    const double g = tp.grads_[static_cast<size_t>(out)](0, 0);
    tp.accum(a, (2.0 * coeff * g) * (tp.value(a) - tg));
  });
}

}  // namespace mixreg::ad
