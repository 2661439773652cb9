#pragma once

#include <cstdint>
#include <vector>

#include "xalign/matrix.hpp"
#include "xalign/mlp.hpp"

namespace xalign {

// Fully-connected reconstruction autoencoder: encoder input->hidden->bottleneck,
// mirrored decoder, trained with Adam on mean absolute reconstruction error.
struct AutoencoderConfig {
  size_t input_dim = 400;
  std::vector<size_t> encoder_hidden = {256};
  size_t bottleneck = 64;
  double lr = 1e-3;
  size_t epochs = 60;
  size_t batch_size = 32;
  uint64_t seed = 1;
};

struct Autoencoder {
  MlpSpec encoder_spec;
  MlpSpec decoder_spec;
  MlpParams encoder;
  MlpParams decoder;
};

struct AutoencoderTrainResult {
  Autoencoder model;
  std::vector<double> loss_curve;  // mean training MAE per epoch
};

// Throws a training error (with the epoch index) on divergence, and if the
// final epoch fails to improve on the first.
AutoencoderTrainResult train_autoencoder(const DenseMatrix& spectra,
                                         const AutoencoderConfig& config);

// Deterministic eval-mode encoding; one row per input spectrum.
DenseMatrix encode_spectra(const Autoencoder& model, const DenseMatrix& spectra);

double reconstruction_mae(const Autoencoder& model, const DenseMatrix& spectra);

}  // namespace xalign
