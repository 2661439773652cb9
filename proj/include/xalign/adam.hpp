#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xalign/mlp.hpp"

namespace xalign {

// A named view over one parameter tensor; Adam tracks moments per block and
// reports numeric failures by block name.
struct ParamView {
  std::string name;
  double* data = nullptr;
  size_t size = 0;
};

struct GradView {
  std::string name;
  const double* data = nullptr;
  size_t size = 0;
};

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  uint64_t step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  static AdamState for_blocks(std::span<const ParamView> blocks, double lr);
};

// One bias-corrected Adam step over all blocks. Shapes must match the state;
// a non-finite gradient raises a numeric error naming the offending block.
void adam_step(AdamState& state, std::span<const ParamView> params,
               std::span<const GradView> grads);

// Flattened block views over a whole MLP ("<prefix>.layer<i>.weight" / ".bias").
std::vector<ParamView> mlp_param_views(MlpParams& params, const std::string& prefix);
std::vector<GradView> mlp_grad_views(const MlpGrads& grads, const std::string& prefix);

}  // namespace xalign
