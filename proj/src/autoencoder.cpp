#include "xalign/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xalign/adam.hpp"
#include "xalign/errors.hpp"
#include "xalign/kernels.hpp"
#include "xalign/parallel.hpp"
#include "xalign/rng.hpp"

namespace xalign {

namespace {

MlpSpec make_encoder_spec(const AutoencoderConfig& c) {
  return {c.input_dim, c.encoder_hidden, c.bottleneck};
}

MlpSpec make_decoder_spec(const AutoencoderConfig& c) {
  std::vector<size_t> hidden(c.encoder_hidden.rbegin(), c.encoder_hidden.rend());
  return {c.bottleneck, hidden, c.input_dim};
}

}  // namespace

AutoencoderTrainResult train_autoencoder(const DenseMatrix& spectra,
                                         const AutoencoderConfig& config) {
  if (spectra.rows < 2)
    throw insufficient_data_error("train_autoencoder: need at least 2 spectra");
  if (config.bottleneck >= config.input_dim)
    throw parameter_error("train_autoencoder: bottleneck must be smaller than the input");
  if (spectra.cols != config.input_dim)
    throw shape_error("train_autoencoder: spectra have dim " + std::to_string(spectra.cols) +
                      ", config expects " + std::to_string(config.input_dim));
  if (config.epochs == 0) throw parameter_error("train_autoencoder: epochs must be >= 1");
  if (config.batch_size == 0) throw parameter_error("train_autoencoder: batch_size must be >= 1");

  AutoencoderTrainResult result;
  result.model.encoder_spec = make_encoder_spec(config);
  result.model.decoder_spec = make_decoder_spec(config);

  SeededRng master(config.seed);
  SeededRng init_rng = master.derive(1);
  SeededRng order_rng = master.derive(2);
  result.model.encoder = MlpParams::init(result.model.encoder_spec, init_rng);
  result.model.decoder = MlpParams::init(result.model.decoder_spec, init_rng);

  auto enc_views = mlp_param_views(result.model.encoder, "encoder");
  auto dec_views = mlp_param_views(result.model.decoder, "decoder");
  std::vector<ParamView> views;
  views.insert(views.end(), enc_views.begin(), enc_views.end());
  views.insert(views.end(), dec_views.begin(), dec_views.end());
  AdamState adam = AdamState::for_blocks(views, config.lr);

  const auto& enc_spec = result.model.encoder_spec;
  const auto& dec_spec = result.model.decoder_spec;
  std::vector<size_t> order(spectra.rows);
  std::iota(order.begin(), order.end(), 0);

  for (size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    order_rng.shuffle(order);
    double epoch_abs_sum = 0.0;

    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t stop = std::min(order.size(), start + config.batch_size);
      const size_t batch = stop - start;
      MlpGrads enc_grads = MlpGrads::zeros(enc_spec);
      MlpGrads dec_grads = MlpGrads::zeros(dec_spec);

      for (size_t b = start; b < stop; ++b) {
        const double* x = spectra.row(order[b]);
        MlpCache enc_cache, dec_cache;
        const auto code = mlp_forward(enc_spec, result.model.encoder,
                                      {x, spectra.cols}, RunMode::Train, nullptr, &enc_cache);
        const auto recon = mlp_forward(dec_spec, result.model.decoder, code, RunMode::Train,
                                       nullptr, &dec_cache);

        // MAE loss: d|r - x|/dr = sign(r - x), averaged over dims and batch
        std::vector<double> upstream(recon.size());
        const double inv = 1.0 / (static_cast<double>(recon.size()) * batch);
        for (size_t i = 0; i < recon.size(); ++i) {
          const double diff = recon[i] - x[i];
          epoch_abs_sum += std::fabs(diff);
          upstream[i] = diff > 0 ? inv : diff < 0 ? -inv : 0.0;
        }
        const auto code_grad =
            mlp_backward(dec_spec, result.model.decoder, dec_cache, upstream, dec_grads);
        mlp_backward(enc_spec, result.model.encoder, enc_cache, code_grad, enc_grads);
      }

      auto enc_gv = mlp_grad_views(enc_grads, "encoder");
      auto dec_gv = mlp_grad_views(dec_grads, "decoder");
      std::vector<GradView> gv;
      gv.insert(gv.end(), enc_gv.begin(), enc_gv.end());
      gv.insert(gv.end(), dec_gv.begin(), dec_gv.end());
      adam_step(adam, views, gv);
    }

    const double epoch_mae =
        epoch_abs_sum / (static_cast<double>(spectra.rows) * spectra.cols);
    if (!std::isfinite(epoch_mae))
      throw training_error("train_autoencoder: diverged at epoch " + std::to_string(epoch));
    result.loss_curve.push_back(epoch_mae);
  }

  if (result.loss_curve.back() >= result.loss_curve.front() && result.loss_curve.size() > 1)
    throw training_error("train_autoencoder: no improvement after " +
                         std::to_string(config.epochs) + " epochs (MAE " +
                         std::to_string(result.loss_curve.front()) + " -> " +
                         std::to_string(result.loss_curve.back()) + ")");
  return result;
}

DenseMatrix encode_spectra(const Autoencoder& model, const DenseMatrix& spectra) {
  if (spectra.cols != model.encoder_spec.input_dim)
    throw shape_error("encode_spectra: spectra dim " + std::to_string(spectra.cols) +
                      " does not match encoder input " +
                      std::to_string(model.encoder_spec.input_dim));
  DenseMatrix out(spectra.rows, model.encoder_spec.output_dim);
  parallel_for(0, spectra.rows, [&](size_t r) {
    const auto code = mlp_forward(model.encoder_spec, model.encoder, spectra.row_span(r),
                                  RunMode::Eval);
    std::copy(code.begin(), code.end(), out.row(r));
  });
  return out;
}

double reconstruction_mae(const Autoencoder& model, const DenseMatrix& spectra) {
  double acc = 0.0;
  for (size_t r = 0; r < spectra.rows; ++r) {
    const auto code =
        mlp_forward(model.encoder_spec, model.encoder, spectra.row_span(r), RunMode::Eval);
    const auto recon = mlp_forward(model.decoder_spec, model.decoder, code, RunMode::Eval);
    acc += kernels::abs_diff_sum(recon.data(), spectra.row(r), spectra.cols);
  }
  return acc / (static_cast<double>(spectra.rows) * spectra.cols);
}

}  // namespace xalign
