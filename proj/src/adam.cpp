#include "xalign/adam.hpp"

#include <cmath>

#include "xalign/errors.hpp"
#include "xalign/kernels.hpp"

namespace xalign {

AdamState AdamState::for_blocks(std::span<const ParamView> blocks, double lr_in) {
  if (!(lr_in > 0.0)) throw parameter_error("adam: lr must be positive");
  AdamState s;
  s.lr = lr_in;
  for (const auto& b : blocks) {
    s.first_moment.emplace_back(b.size, 0.0);
    s.second_moment.emplace_back(b.size, 0.0);
  }
  return s;
}

void adam_step(AdamState& state, std::span<const ParamView> params,
               std::span<const GradView> grads) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw shape_error("adam_step: block count mismatch");
  if (!(state.lr > 0.0)) throw parameter_error("adam_step: lr must be positive");

  for (size_t b = 0; b < params.size(); ++b) {
    if (params[b].size != grads[b].size || params[b].size != state.first_moment[b].size())
      throw shape_error("adam_step: size mismatch in block " + params[b].name);
    for (size_t i = 0; i < grads[b].size; ++i)
      if (!std::isfinite(grads[b].data[i]))
        throw numeric_error("adam_step: non-finite gradient in block " + grads[b].name);
  }

  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (size_t b = 0; b < params.size(); ++b) {
    kernels::adam_update(params[b].data, state.first_moment[b].data(),
                         state.second_moment[b].data(), grads[b].data, params[b].size,
                         state.lr, state.beta1, state.beta2, state.eps, bc1, bc2);
  }
}

std::vector<ParamView> mlp_param_views(MlpParams& params, const std::string& prefix) {
  std::vector<ParamView> views;
  for (size_t l = 0; l < params.weights.size(); ++l) {
    views.push_back({prefix + ".layer" + std::to_string(l) + ".weight",
                     params.weights[l].data.data(), params.weights[l].size()});
    views.push_back({prefix + ".layer" + std::to_string(l) + ".bias",
                     params.biases[l].data(), params.biases[l].size()});
  }
  return views;
}

std::vector<GradView> mlp_grad_views(const MlpGrads& grads, const std::string& prefix) {
  std::vector<GradView> views;
  for (size_t l = 0; l < grads.weights.size(); ++l) {
    views.push_back({prefix + ".layer" + std::to_string(l) + ".weight",
                     grads.weights[l].data.data(), grads.weights[l].size()});
    views.push_back({prefix + ".layer" + std::to_string(l) + ".bias",
                     grads.biases[l].data(), grads.biases[l].size()});
  }
  return views;
}

}  // namespace xalign
