#include "dse/policy.hpp"

#include "dse/errors.hpp"

namespace dse {

InputMode parse_input_mode(const std::string& name) {
  if (name == "state-only") return InputMode::kStateOnly;
  if (name == "concat") return InputMode::kConcat;
  if (name == "concat-outer") return InputMode::kConcatOuter;
  throw ConfigError("unknown policy input mode: " + name);
}

std::string input_mode_name(InputMode mode) {
  switch (mode) {
    case InputMode::kStateOnly: return "state-only";
    case InputMode::kConcat: return "concat";
    case InputMode::kConcatOuter: return "concat-outer";
  }
  throw ConfigError("bad input mode value");
}

int policy_input_dim(InputMode mode, int s_dim, int z_dim, int g_dim) {
  switch (mode) {
    case InputMode::kStateOnly:
      return s_dim;
    case InputMode::kConcat:
      return s_dim + z_dim + g_dim;
    case InputMode::kConcatOuter:
      return s_dim + z_dim + g_dim + s_dim * (z_dim + g_dim);
  }
  throw ConfigError("bad input mode value");
}

Policy make_policy(InputMode mode, bool discrete, int s_dim, int z_dim, int g_dim,
                   int act_dim, const std::vector<int>& hidden, Activation act,
                   std::mt19937_64& rng) {
  Policy p;
  p.input_mode = mode;
  p.discrete = discrete;
  p.s_dim = s_dim;
  p.z_dim = z_dim;
  p.g_dim = g_dim;
  p.act_dim = act_dim;
  if (mode == InputMode::kStateOnly && (z_dim != 0 || g_dim != 0)) {
    throw ConfigError("state-only policies take no latent dims");
  }
  p.mlp.input_dim = p.input_dim();
  for (int w : hidden) p.mlp.hidden.push_back({w, act});
  p.mlp.output_dim = p.output_dim();
  init_mlp_params(p.mlp, p.params, rng);
  return p;
}

void build_policy_input(const Policy& p, std::span<const double> s,
                        std::span<const double> z, std::span<const double> g,
                        std::vector<double>& out) {
  out.clear();
  out.reserve(p.mlp.input_dim);
  out.insert(out.end(), s.begin(), s.end());
  if (p.input_mode == InputMode::kStateOnly) return;
  out.insert(out.end(), z.begin(), z.end());
  out.insert(out.end(), g.begin(), g.end());
  if (p.input_mode == InputMode::kConcatOuter) {
    for (double sv : s) {
      for (double zv : z) out.push_back(sv * zv);
      for (double gv : g) out.push_back(sv * gv);
    }
  }
}

std::vector<Var> build_policy_input_taped(const Policy& p, Tape& tape,
                                          std::span<const double> s,
                                          std::span<const Var> z,
                                          std::span<const Var> g) {
  std::vector<Var> out;
  out.reserve(p.mlp.input_dim);
  for (double sv : s) out.push_back(tape.leaf(sv));
  if (p.input_mode == InputMode::kStateOnly) return out;
  out.insert(out.end(), z.begin(), z.end());
  out.insert(out.end(), g.begin(), g.end());
  if (p.input_mode == InputMode::kConcatOuter) {
    for (double sv : s) {
      for (Var zv : z) out.push_back(tape.mul_const(zv, sv));
      for (Var gv : g) out.push_back(tape.mul_const(gv, sv));
    }
  }
  return out;
}

}  // namespace dse
