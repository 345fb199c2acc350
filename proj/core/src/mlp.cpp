#include "dse/mlp.hpp"

#include <cmath>

#include "dse/errors.hpp"

namespace dse {

namespace {

std::vector<int> layer_dims(const MlpSpec& spec) {
  std::vector<int> dims;
  dims.push_back(spec.input_dim);
  for (const auto& h : spec.hidden) dims.push_back(h.width);
  dims.push_back(spec.output_dim);
  return dims;
}

double activate(double x, Activation act) {
  return act == Activation::kTanh ? std::tanh(x) : (x > 0.0 ? x : 0.0);
}

}  // namespace

void MlpSpec::validate() const {
  if (input_dim < 1) throw ConfigError("MlpSpec: input_dim must be >= 1");
  if (output_dim < 1) throw ConfigError("MlpSpec: output_dim must be >= 1");
  for (const auto& h : hidden)
    if (h.width < 1) throw ConfigError("MlpSpec: hidden width must be >= 1");
}

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  auto dims = layer_dims(*this);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l)
    n += static_cast<std::size_t>(dims[l + 1]) * dims[l] + dims[l + 1];
  return n;
}

std::vector<std::pair<int, int>> MlpSpec::shapes() const {
  std::vector<std::pair<int, int>> s;
  auto dims = layer_dims(*this);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    s.emplace_back(dims[l + 1], dims[l]);  // weights
    s.emplace_back(dims[l + 1], 1);        // bias
  }
  return s;
}

void init_mlp_params(const MlpSpec& spec, ParamVector& pv, std::mt19937_64& rng) {
  spec.validate();
  pv.resize(spec.param_count());
  pv.shapes = spec.shapes();
  auto dims = layer_dims(spec);
  std::size_t at = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    const std::size_t count = static_cast<std::size_t>(dims[l + 1]) * dims[l] + dims[l + 1];
    for (std::size_t k = 0; k < count; ++k) pv.values[at++] = dist(rng);
  }
}

std::vector<double> mlp_forward(const MlpSpec& spec, const ParamVector& params,
                                std::span<const double> input) {
  MlpScratch scratch;
  auto out = scratch.forward(spec, params, input);
  return {out.begin(), out.end()};
}

std::span<const double> MlpScratch::forward(const MlpSpec& spec,
                                            const ParamVector& params,
                                            std::span<const double> input) {
  if (static_cast<int>(input.size()) != spec.input_dim)
    throw ConfigError("mlp_forward: input length does not match spec.input_dim");
  if (params.size() != spec.param_count())
    throw ConfigError("mlp_forward: params length does not match spec");

  auto dims = layer_dims(spec);
  a_.assign(input.begin(), input.end());
  const double* p = params.values.data();
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l], out = dims[l + 1];
    b_.resize(out);
    const double* w = p;
    const double* bias = p + static_cast<std::size_t>(out) * in;
    const bool last = (l + 2 == dims.size());
    for (int r = 0; r < out; ++r) {
      double acc = bias[r];
      const double* wr = w + static_cast<std::size_t>(r) * in;
      for (int c = 0; c < in; ++c) acc += wr[c] * a_[c];
      b_[r] = last ? acc : activate(acc, spec.hidden[l].act);
    }
    a_.swap(b_);
    p = bias + out;
  }
  return a_;
}

std::vector<Var> mlp_forward_taped(const MlpSpec& spec, Tape& tape,
                                   const BoundParams& params,
                                   std::span<const Var> input) {
  if (static_cast<int>(input.size()) != spec.input_dim)
    throw ConfigError("mlp_forward_taped: input length does not match spec.input_dim");
  if (params.pv == nullptr || params.pv->size() != spec.param_count())
    throw ConfigError("mlp_forward_taped: params length does not match spec");

  auto dims = layer_dims(spec);
  std::vector<Var> act(input.begin(), input.end());
  std::vector<Var> next;
  std::vector<Var> wrow;
  std::size_t at = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l], out = dims[l + 1];
    const std::size_t wbase = at;
    const std::size_t bbase = at + static_cast<std::size_t>(out) * in;
    next.clear();
    const bool last = (l + 2 == dims.size());
    for (int r = 0; r < out; ++r) {
      wrow.clear();
      for (int c = 0; c < in; ++c)
        wrow.push_back(params.var(wbase + static_cast<std::size_t>(r) * in + c));
      Var z = tape.affine(wrow, act, params.var(bbase + r));
      if (!last)
        z = spec.hidden[l].act == Activation::kTanh ? tape.tanh(z) : tape.relu(z);
      next.push_back(z);
    }
    act.swap(next);
    at = bbase + out;
  }
  return act;
}

std::vector<Var> mlp_forward_const_params(const MlpSpec& spec, Tape& tape,
                                          const ParamVector& params,
                                          std::span<const Var> input) {
  if (static_cast<int>(input.size()) != spec.input_dim)
    throw ConfigError("mlp_forward_const_params: input length does not match spec");
  if (params.size() != spec.param_count())
    throw ConfigError("mlp_forward_const_params: params length does not match spec");

  auto dims = layer_dims(spec);
  std::vector<Var> act(input.begin(), input.end());
  std::vector<Var> next;
  const double* p = params.values.data();
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l], out = dims[l + 1];
    const double* w = p;
    const double* bias = p + static_cast<std::size_t>(out) * in;
    next.clear();
    const bool last = (l + 2 == dims.size());
    for (int r = 0; r < out; ++r) {
      std::span<const double> wrow(w + static_cast<std::size_t>(r) * in,
                                   static_cast<std::size_t>(in));
      Var z = tape.affine_cw(wrow, act, bias[r]);
      if (!last)
        z = spec.hidden[l].act == Activation::kTanh ? tape.tanh(z) : tape.relu(z);
      next.push_back(z);
    }
    act.swap(next);
    p = bias + out;
  }
  return act;
}

}  // namespace dse
