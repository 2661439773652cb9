#include "xalign/mlp.hpp"

#include <cmath>

#include "xalign/errors.hpp"
#include "xalign/kernels.hpp"

namespace xalign {

std::vector<size_t> MlpSpec::layer_dims() const {
  std::vector<size_t> dims;
  dims.reserve(hidden_dims.size() + 2);
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(output_dim);
  return dims;
}

void MlpSpec::validate() const {
  if (input_dim == 0 || output_dim == 0)
    throw parameter_error("MlpSpec: input_dim and output_dim must be positive");
  for (size_t h : hidden_dims)
    if (h == 0) throw parameter_error("MlpSpec: hidden dims must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw parameter_error("MlpSpec: dropout_rate must be in [0, 1)");
}

MlpParams MlpParams::init(const MlpSpec& spec, SeededRng& rng) {
  spec.validate();
  MlpParams p;
  const auto dims = spec.layer_dims();
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    const size_t fan_in = dims[l];
    const size_t fan_out = dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseMatrix w(fan_out, fan_in);
    for (double& x : w.data) x = rng.uniform(-bound, bound);
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(fan_out, 0.0);
  }
  return p;
}

MlpParams MlpParams::zeros(const MlpSpec& spec) {
  spec.validate();
  MlpParams p;
  const auto dims = spec.layer_dims();
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    p.weights.emplace_back(dims[l + 1], dims[l]);
    p.biases.emplace_back(dims[l + 1], 0.0);
  }
  return p;
}

void MlpParams::check_shapes(const MlpSpec& spec) const {
  const auto dims = spec.layer_dims();
  if (weights.size() != spec.layer_count() || biases.size() != spec.layer_count())
    throw shape_error("MlpParams: layer count mismatch");
  for (size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows != dims[l + 1] || weights[l].cols != dims[l])
      throw shape_error("MlpParams: weight shape mismatch at layer " + std::to_string(l));
    if (biases[l].size() != dims[l + 1])
      throw shape_error("MlpParams: bias shape mismatch at layer " + std::to_string(l));
  }
}

size_t MlpParams::count() const noexcept {
  size_t n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

MlpGrads MlpGrads::zeros(const MlpSpec& spec) {
  MlpGrads g;
  const auto dims = spec.layer_dims();
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    g.weights.emplace_back(dims[l + 1], dims[l]);
    g.biases.emplace_back(dims[l + 1], 0.0);
  }
  return g;
}

void MlpGrads::accumulate(const MlpGrads& other) {
  for (size_t l = 0; l < weights.size(); ++l) {
    kernels::axpy(1.0, other.weights[l].data.data(), weights[l].data.data(),
                  weights[l].size());
    kernels::axpy(1.0, other.biases[l].data(), biases[l].data(), biases[l].size());
  }
}

void MlpGrads::scale_by(double a) {
  for (size_t l = 0; l < weights.size(); ++l) {
    kernels::scale(a, weights[l].data.data(), weights[l].size());
    kernels::scale(a, biases[l].data(), biases[l].size());
  }
}

std::vector<double> mlp_forward(const MlpSpec& spec, const MlpParams& params,
                                std::span<const double> input, RunMode mode, SeededRng* rng,
                                MlpCache* cache) {
  params.check_shapes(spec);
  if (input.size() != spec.input_dim)
    throw shape_error("mlp_forward: input length " + std::to_string(input.size()) +
                      " does not match input_dim " + std::to_string(spec.input_dim));
  const bool use_dropout = mode == RunMode::Train && spec.dropout_rate > 0.0;
  if (use_dropout && rng == nullptr)
    throw parameter_error("mlp_forward: train mode with dropout requires an rng");

  const size_t layers = spec.layer_count();
  const double keep = 1.0 - spec.dropout_rate;
  if (cache) {
    cache->input.assign(input.begin(), input.end());
    cache->pre.assign(layers, {});
    cache->act.assign(layers, {});
    cache->dropout_mask.assign(use_dropout ? layers - 1 : 0, {});
    cache->keep = keep;
  }

  std::vector<double> current(input.begin(), input.end());
  std::vector<double> pre;
  for (size_t l = 0; l < layers; ++l) {
    const DenseMatrix& w = params.weights[l];
    pre.assign(w.rows, 0.0);
    kernels::gemv(w.data.data(), w.rows, w.cols, current.data(), pre.data());
    kernels::axpy(1.0, params.biases[l].data(), pre.data(), pre.size());
    if (cache) cache->pre[l] = pre;

    if (l + 1 < layers) {
      std::vector<double> out(pre.size());
      kernels::relu(pre.data(), out.data(), pre.size());
      if (use_dropout) {
        std::vector<uint8_t> mask(out.size());
        const double inv_keep = 1.0 / keep;
        for (size_t i = 0; i < out.size(); ++i) {
          mask[i] = rng->uniform() < keep ? 1 : 0;
          out[i] = mask[i] ? out[i] * inv_keep : 0.0;
        }
        if (cache) cache->dropout_mask[l] = std::move(mask);
      }
      current = std::move(out);
    } else {
      current = pre;  // linear output layer
    }
    if (cache) cache->act[l] = current;
  }
  return current;
}

std::vector<double> mlp_backward(const MlpSpec& spec, const MlpParams& params,
                                 const MlpCache& cache, std::span<const double> upstream,
                                 MlpGrads& grads) {
  const size_t layers = spec.layer_count();
  if (cache.pre.size() != layers || cache.act.size() != layers)
    throw shape_error("mlp_backward: cache does not match spec");
  if (upstream.size() != spec.output_dim)
    throw shape_error("mlp_backward: upstream gradient length " +
                      std::to_string(upstream.size()) + " does not match output_dim " +
                      std::to_string(spec.output_dim));
  if (grads.weights.size() != layers)
    throw shape_error("mlp_backward: gradient accumulator does not match spec");

  std::vector<double> delta(upstream.begin(), upstream.end());
  for (size_t l = layers; l-- > 0;) {
    const DenseMatrix& w = params.weights[l];
    const std::vector<double>& layer_input = l == 0 ? cache.input : cache.act[l - 1];

    kernels::ger_acc(grads.weights[l].data.data(), w.rows, w.cols, delta.data(),
                     layer_input.data());
    kernels::axpy(1.0, delta.data(), grads.biases[l].data(), delta.size());

    if (l == 0) break;
    std::vector<double> prev(w.cols, 0.0);
    kernels::gemv_t(w.data.data(), w.rows, w.cols, delta.data(), prev.data());

    // undo dropout then relu of the layer below
    if (!cache.dropout_mask.empty()) {
      const auto& mask = cache.dropout_mask[l - 1];
      const double inv_keep = 1.0 / cache.keep;
      for (size_t i = 0; i < prev.size(); ++i)
        prev[i] = mask[i] ? prev[i] * inv_keep : 0.0;
    }
    std::vector<double> masked(prev.size());
    kernels::relu_mask_backward(cache.pre[l - 1].data(), prev.data(), masked.data(),
                                prev.size());
    delta = std::move(masked);
  }

  std::vector<double> input_grad(spec.input_dim, 0.0);
  kernels::gemv_t(params.weights[0].data.data(), params.weights[0].rows,
                  params.weights[0].cols, delta.data(), input_grad.data());
  return input_grad;
}

}  // namespace xalign
