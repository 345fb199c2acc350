#include "dse/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dse {

Var Tape::push(double val, std::initializer_list<Arg> args) {
  Node n;
  n.val = val;
  n.arg_begin = static_cast<std::uint32_t>(args_.size());
  n.arg_count = static_cast<std::uint32_t>(args.size());
  args_.insert(args_.end(), args);
  nodes_.push_back(n);
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::push_nary(double val) {
  // caller must have appended the args via push_arg before calling
  Node n;
  n.val = val;
  n.arg_count = 0;  // patched by caller pattern below
  nodes_.push_back(n);
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::leaf(double value) { return push(value, {}); }

Var Tape::add(Var a, Var b) {
  return push(val(a) + val(b), {{a.idx, 1.0}, {b.idx, 1.0}});
}

Var Tape::sub(Var a, Var b) {
  return push(val(a) - val(b), {{a.idx, 1.0}, {b.idx, -1.0}});
}

Var Tape::mul(Var a, Var b) {
  return push(val(a) * val(b), {{a.idx, val(b)}, {b.idx, val(a)}});
}

Var Tape::div(Var a, Var b) {
  const double vb = val(b);
  const double out = val(a) / vb;
  return push(out, {{a.idx, 1.0 / vb}, {b.idx, -out / vb}});
}

Var Tape::add_const(Var a, double c) { return push(val(a) + c, {{a.idx, 1.0}}); }

Var Tape::mul_const(Var a, double c) { return push(val(a) * c, {{a.idx, c}}); }

Var Tape::tanh(Var a) {
  const double t = std::tanh(val(a));
  return push(t, {{a.idx, 1.0 - t * t}});
}

Var Tape::relu(Var a) {
  const double v = val(a);
  return push(v > 0.0 ? v : 0.0, {{a.idx, v > 0.0 ? 1.0 : 0.0}});
}

Var Tape::exp(Var a) {
  const double e = std::exp(val(a));
  return push(e, {{a.idx, e}});
}

Var Tape::log(Var a) {
  const double v = val(a);
  return push(std::log(v), {{a.idx, 1.0 / v}});
}

Var Tape::square(Var a) {
  const double v = val(a);
  return push(v * v, {{a.idx, 2.0 * v}});
}

Var Tape::clamp(Var a, double lo, double hi) {
  const double v = val(a);
  const double c = std::min(std::max(v, lo), hi);
  return push(c, {{a.idx, (v > lo && v < hi) ? 1.0 : 0.0}});
}

Var Tape::affine(std::span<const Var> w, std::span<const Var> x, Var bias) {
  if (w.size() != x.size()) throw std::invalid_argument("affine: size mismatch");
  const std::uint32_t begin = static_cast<std::uint32_t>(args_.size());
  double acc = val(bias);
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double wv = val(w[k]);
    const double xv = val(x[k]);
    acc += wv * xv;
    push_arg(w[k], xv);
    push_arg(x[k], wv);
  }
  push_arg(bias, 1.0);
  Var out = push_nary(acc);
  nodes_[out.idx].arg_begin = begin;
  nodes_[out.idx].arg_count = static_cast<std::uint32_t>(args_.size()) - begin;
  return out;
}

Var Tape::affine_cw(std::span<const double> w, std::span<const Var> x, double bias) {
  if (w.size() != x.size()) throw std::invalid_argument("affine_cw: size mismatch");
  const std::uint32_t begin = static_cast<std::uint32_t>(args_.size());
  double acc = bias;
  for (std::size_t k = 0; k < w.size(); ++k) {
    acc += w[k] * val(x[k]);
    push_arg(x[k], w[k]);
  }
  Var out = push_nary(acc);
  nodes_[out.idx].arg_begin = begin;
  nodes_[out.idx].arg_count = static_cast<std::uint32_t>(args_.size()) - begin;
  return out;
}

Var Tape::sum(std::span<const Var> xs) {
  const std::uint32_t begin = static_cast<std::uint32_t>(args_.size());
  double acc = 0.0;
  for (Var v : xs) {
    acc += val(v);
    push_arg(v, 1.0);
  }
  Var out = push_nary(acc);
  nodes_[out.idx].arg_begin = begin;
  nodes_[out.idx].arg_count = static_cast<std::uint32_t>(args_.size()) - begin;
  return out;
}

Var Tape::weighted_sum(std::span<const Var> xs, std::span<const double> coeffs) {
  if (xs.size() != coeffs.size())
    throw std::invalid_argument("weighted_sum: size mismatch");
  const std::uint32_t begin = static_cast<std::uint32_t>(args_.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    acc += coeffs[k] * val(xs[k]);
    push_arg(xs[k], coeffs[k]);
  }
  Var out = push_nary(acc);
  nodes_[out.idx].arg_begin = begin;
  nodes_[out.idx].arg_count = static_cast<std::uint32_t>(args_.size()) - begin;
  return out;
}

Var Tape::logsumexp(std::span<const Var> xs) {
  if (xs.empty()) throw std::invalid_argument("logsumexp: empty input");
  double m = val(xs[0]);
  for (Var v : xs) m = std::max(m, val(v));
  double z = 0.0;
  for (Var v : xs) z += std::exp(val(v) - m);
  const double lse = m + std::log(z);
  // partial wrt x_k is softmax_k
  const std::uint32_t begin = static_cast<std::uint32_t>(args_.size());
  for (Var v : xs) push_arg(v, std::exp(val(v) - lse));
  Var out = push_nary(lse);
  nodes_[out.idx].arg_begin = begin;
  nodes_[out.idx].arg_count = static_cast<std::uint32_t>(args_.size()) - begin;
  return out;
}

void Tape::backward(Var loss) {
  if (!loss.valid() || loss.idx >= nodes_.size())
    throw std::invalid_argument("backward: loss is not a node on this tape");
  for (Node& n : nodes_) n.grad = 0.0;
  nodes_[loss.idx].grad = 1.0;
  for (std::uint32_t i = loss.idx + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    const double g = n.grad;
    if (g == 0.0 || n.arg_count == 0) continue;
    const Arg* a = args_.data() + n.arg_begin;
    for (std::uint32_t k = 0; k < n.arg_count; ++k)
      nodes_[a[k].parent].grad += g * a[k].partial;
  }
}

void Tape::clear() {
  nodes_.clear();
  args_.clear();
}

}  // namespace dse
