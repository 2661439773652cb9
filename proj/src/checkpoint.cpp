#include "xalign/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "xalign/embedding_io.hpp"
#include "xalign/errors.hpp"

namespace xalign {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json spec_to_json(const MlpSpec& spec) {
  return ordered_json{{"input_dim", spec.input_dim},
                      {"hidden_dims", spec.hidden_dims},
                      {"output_dim", spec.output_dim},
                      {"dropout", spec.dropout_rate},
                      {"activation", "relu"}};
}

MlpSpec spec_from_json(const ordered_json& j) {
  MlpSpec spec;
  spec.input_dim = j.at("input_dim").get<size_t>();
  spec.hidden_dims = j.at("hidden_dims").get<std::vector<size_t>>();
  spec.output_dim = j.at("output_dim").get<size_t>();
  spec.dropout_rate = j.at("dropout").get<double>();
  if (j.at("activation").get<std::string>() != "relu")
    throw format_error("checkpoint: unknown activation");
  return spec;
}

void write_params(std::ostream& out, const MlpParams& params) {
  for (size_t l = 0; l < params.weights.size(); ++l) {
    write_xaln_block_f64(out, params.weights[l]);
    DenseMatrix bias(1, params.biases[l].size());
    bias.data = params.biases[l];
    write_xaln_block_f64(out, bias);
  }
}

MlpParams read_params(std::istream& in, const MlpSpec& spec) {
  MlpParams params;
  const auto dims = spec.layer_dims();
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    params.weights.push_back(read_xaln_block_f64(in));
    const DenseMatrix bias = read_xaln_block_f64(in);
    params.biases.emplace_back(bias.data);
  }
  params.check_shapes(spec);
  return params;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const AlignmentModel& model) {
  ordered_json header;
  header["format"] = "xalign-checkpoint";
  header["format_version"] = kCheckpointFormatVersion;
  header["tool_version"] = kToolVersion;
  header["shared_dim"] = model.shared_dim();
  header["temperature"] = model.temperature;
  header["spectral_head"] = spec_to_json(model.spectral_spec);
  header["text_head"] = spec_to_json(model.text_spec);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  const std::string json = header.dump();
  const uint32_t len = static_cast<uint32_t>(json.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(json.data(), static_cast<std::streamsize>(json.size()));
  write_params(out, model.spectral_head);
  write_params(out, model.text_head);
  if (!out) throw io_error("write failure in " + path.string());
}

AlignmentModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in) throw format_error(path.string() + ": truncated checkpoint header");
  std::string json(len, '\0');
  in.read(json.data(), static_cast<std::streamsize>(len));
  if (!in) throw format_error(path.string() + ": truncated checkpoint header");

  ordered_json header;
  try {
    header = ordered_json::parse(json);
  } catch (const std::exception& e) {
    throw format_error(path.string() + ": invalid checkpoint JSON: " + e.what());
  }
  if (header.value("format", "") != "xalign-checkpoint")
    throw format_error(path.string() + ": not an alignment checkpoint");
  if (header.at("format_version").get<uint32_t>() != kCheckpointFormatVersion)
    throw format_error(path.string() + ": unsupported checkpoint version");

  AlignmentModel model;
  model.spectral_spec = spec_from_json(header.at("spectral_head"));
  model.text_spec = spec_from_json(header.at("text_head"));
  model.temperature = header.at("temperature").get<double>();
  model.spectral_head = read_params(in, model.spectral_spec);
  model.text_head = read_params(in, model.text_spec);
  if (model.spectral_spec.output_dim != header.at("shared_dim").get<size_t>() ||
      model.text_spec.output_dim != model.spectral_spec.output_dim)
    throw format_error(path.string() + ": inconsistent shared dimension");
  if (!(model.temperature > 0))
    throw format_error(path.string() + ": non-positive temperature");
  return model;
}

}  // namespace xalign
