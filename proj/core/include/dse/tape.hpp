#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dse {

/// Handle to a scalar node on a Tape.
struct Var {
  std::uint32_t idx = UINT32_MAX;
  bool valid() const { return idx != UINT32_MAX; }
};

/// Reverse-mode autodiff tape over scalars.
///
/// Nodes are recorded in evaluation order, so the tape is topologically
/// sorted by construction and backward() is a single reverse sweep. Local
/// partial derivatives are computed at forward time and stored per input,
/// which keeps the sweep branch-free. Fused n-ary ops (affine, sum,
/// logsumexp) keep node counts low for MLP workloads.
///
/// A Tape is single-owner and single-threaded; clear() retains capacity so
/// a tape can be reused across many small graphs without reallocating.
class Tape {
 public:
  Var leaf(double value);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var add_const(Var a, double c);
  Var mul_const(Var a, double c);
  Var neg(Var a) { return mul_const(a, -1.0); }

  Var tanh(Var a);
  Var relu(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var square(Var a);
  /// min(max(a, lo), hi); gradient is 1 inside the range, 0 outside.
  Var clamp(Var a, double lo, double hi);

  /// dot(w, x) + bias in one node.
  Var affine(std::span<const Var> w, std::span<const Var> x, Var bias);
  /// dot(w, x) + bias with constant weights/bias; gradients flow only into x.
  Var affine_cw(std::span<const double> w, std::span<const Var> x, double bias);
  Var sum(std::span<const Var> xs);
  /// sum_k coeffs[k] * xs[k]; coefficients are constants.
  Var weighted_sum(std::span<const Var> xs, std::span<const double> coeffs);
  /// log(sum_k exp(xs[k])), computed with max-subtraction.
  Var logsumexp(std::span<const Var> xs);

  double val(Var v) const { return nodes_[v.idx].val; }
  double grad(Var v) const { return nodes_[v.idx].grad; }

  /// Accumulates d(loss)/d(node) into every node's grad slot.
  void backward(Var loss);

  void clear();
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    double val = 0.0;
    double grad = 0.0;
    std::uint32_t arg_begin = 0;
    std::uint32_t arg_count = 0;
  };
  struct Arg {
    std::uint32_t parent;
    double partial;
  };

  Var push(double val, std::initializer_list<Arg> args);
  Var push_nary(double val);
  void push_arg(Var parent, double partial) {
    args_.push_back({parent.idx, partial});
  }

  std::vector<Node> nodes_;
  std::vector<Arg> args_;
};

}  // namespace dse
