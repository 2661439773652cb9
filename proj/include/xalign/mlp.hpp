#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xalign/matrix.hpp"
#include "xalign/rng.hpp"

namespace xalign {

enum class Activation { Relu };

// Fully-connected network layout: input -> hidden... -> output. Hidden layers
// get the activation plus inverted dropout in train mode; the output layer is
// linear and never dropped.
struct MlpSpec {
  size_t input_dim = 0;
  std::vector<size_t> hidden_dims;
  size_t output_dim = 0;
  double dropout_rate = 0.0;  // 0 disables; otherwise fraction of units dropped
  Activation activation = Activation::Relu;

  size_t layer_count() const noexcept { return hidden_dims.size() + 1; }

  // [input_dim, hidden..., output_dim]
  std::vector<size_t> layer_dims() const;

  // Parameter errors on nonsensical dimensions or dropout outside [0, 1).
  void validate() const;
};

struct MlpParams {
  std::vector<DenseMatrix> weights;          // layer l: out_dim x in_dim
  std::vector<std::vector<double>> biases;   // layer l: out_dim

  // Glorot-uniform weights in +/- sqrt(6/(fan_in+fan_out)), zero biases.
  static MlpParams init(const MlpSpec& spec, SeededRng& rng);
  static MlpParams zeros(const MlpSpec& spec);

  void check_shapes(const MlpSpec& spec) const;  // shape error on mismatch
  size_t count() const noexcept;
};

struct MlpGrads {
  std::vector<DenseMatrix> weights;
  std::vector<std::vector<double>> biases;

  static MlpGrads zeros(const MlpSpec& spec);
  void accumulate(const MlpGrads& other);
  void scale_by(double a);
};

enum class RunMode { Train, Eval };

// Everything backward needs: the input, per-layer pre-activations, post-
// activation outputs, and the dropout masks actually drawn.
struct MlpCache {
  std::vector<double> input;
  std::vector<std::vector<double>> pre;              // affine outputs per layer
  std::vector<std::vector<double>> act;              // layer outputs (post relu+dropout)
  std::vector<std::vector<uint8_t>> dropout_mask;    // per hidden layer; empty if p == 0
  double keep = 1.0;
};

// Train mode applies relu then inverted dropout (mask, scale by 1/(1-p)) on
// hidden layers; eval mode skips dropout entirely. rng is required only when
// mode == Train and dropout_rate > 0. cache may be null for pure inference.
std::vector<double> mlp_forward(const MlpSpec& spec, const MlpParams& params,
                                std::span<const double> input, RunMode mode,
                                SeededRng* rng = nullptr, MlpCache* cache = nullptr);

// Backprop through the cached forward pass. Accumulates into `grads`
// (callers zero or reuse across a batch) and returns d(loss)/d(input).
std::vector<double> mlp_backward(const MlpSpec& spec, const MlpParams& params,
                                 const MlpCache& cache, std::span<const double> upstream,
                                 MlpGrads& grads);

}  // namespace xalign
