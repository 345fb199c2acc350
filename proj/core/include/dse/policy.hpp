#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "dse/mlp.hpp"
#include "dse/params.hpp"
#include "dse/tape.hpp"

namespace dse {

/// How the task latents enter the policy network.
///  - kStateOnly:   input = s (latent-free baselines, high-level policies)
///  - kConcat:      input = [s, z, g]
///  - kConcatOuter: input = [s, z, g, flatten(s outer [z;g])]
enum class InputMode { kStateOnly, kConcat, kConcatOuter };

InputMode parse_input_mode(const std::string& name);
std::string input_mode_name(InputMode mode);

int policy_input_dim(InputMode mode, int s_dim, int z_dim, int g_dim);

/// Shared policy network pi_theta(a | s, z, g). Discrete policies emit one
/// logit per action; continuous policies emit [means, log_stds] for a
/// tanh-squashed diagonal Gaussian over act_dim torques.
struct Policy {
  InputMode input_mode = InputMode::kConcat;
  bool discrete = false;
  int s_dim = 0;
  int z_dim = 0;
  int g_dim = 0;
  int act_dim = 0;  // number of actions (discrete) or action dimensions
  MlpSpec mlp;
  ParamVector params;

  int input_dim() const {
    return policy_input_dim(input_mode, s_dim, z_dim, g_dim);
  }
  int output_dim() const { return discrete ? act_dim : 2 * act_dim; }
};

Policy make_policy(InputMode mode, bool discrete, int s_dim, int z_dim, int g_dim,
                   int act_dim, const std::vector<int>& hidden, Activation act,
                   std::mt19937_64& rng);

/// Assembles the network input from plain values.
void build_policy_input(const Policy& p, std::span<const double> s,
                        std::span<const double> z, std::span<const double> g,
                        std::vector<double>& out);

/// Assembles the network input with the latents on the tape; state entries
/// become constant nodes. Outer-product entries are taped through the latents.
std::vector<Var> build_policy_input_taped(const Policy& p, Tape& tape,
                                          std::span<const double> s,
                                          std::span<const Var> z,
                                          std::span<const Var> g);

}  // namespace dse
