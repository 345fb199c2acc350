#pragma once

#include <random>
#include <span>
#include <vector>

#include "dse/params.hpp"
#include "dse/tape.hpp"

namespace dse {

enum class Activation { kTanh, kRelu };

struct HiddenLayer {
  int width;
  Activation act;
};

/// Fully connected network with a linear output layer. Heads (softmax
/// sampling, squashed Gaussian) are applied by the functions in heads.hpp;
/// a squashed-Gaussian policy uses output_dim = 2 * action_dim (means
/// followed by log stds).
struct MlpSpec {
  int input_dim = 0;
  std::vector<HiddenLayer> hidden;
  int output_dim = 0;

  std::size_t param_count() const;
  std::vector<std::pair<int, int>> shapes() const;
  /// Throws ConfigError on non-positive dims.
  void validate() const;
};

/// Uniform fan-in init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer.
void init_mlp_params(const MlpSpec& spec, ParamVector& pv, std::mt19937_64& rng);

/// Plain forward pass, no tape. Throws ConfigError on dimension mismatch.
std::vector<double> mlp_forward(const MlpSpec& spec, const ParamVector& params,
                                std::span<const double> input);

/// Taped forward pass against bound parameters; inputs are tape nodes so
/// gradients can flow into upstream latents.
std::vector<Var> mlp_forward_taped(const MlpSpec& spec, Tape& tape,
                                   const BoundParams& params,
                                   std::span<const Var> input);

/// Taped forward pass with the parameters held constant: gradients flow only
/// into the inputs. Used where a frozen network sits inside a larger loss
/// (e.g. a critic evaluated at a reparameterized action).
std::vector<Var> mlp_forward_const_params(const MlpSpec& spec, Tape& tape,
                                          const ParamVector& params,
                                          std::span<const Var> input);

/// Workspace-reusing variant of mlp_forward for hot loops.
class MlpScratch {
 public:
  std::span<const double> forward(const MlpSpec& spec, const ParamVector& params,
                                  std::span<const double> input);

 private:
  std::vector<double> a_, b_;
};

}  // namespace dse
