// xalign: contrastive alignment of spectral and text embeddings, with
// retrieval / regression / outlier evaluation on the shared latent space.
//
// Exit codes: 0 success, 1 internal or training error, 2 input format error,
// 3 configuration/compatibility error.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "xalign/align.hpp"
#include "xalign/anomaly.hpp"
#include "xalign/autoencoder.hpp"
#include "xalign/checkpoint.hpp"
#include "xalign/csv.hpp"
#include "xalign/dataset.hpp"
#include "xalign/embedding_io.hpp"
#include "xalign/errors.hpp"
#include "xalign/regress.hpp"
#include "xalign/reports.hpp"
#include "xalign/retrieval.hpp"
#include "xalign/runio.hpp"
#include "xalign/spectra.hpp"

namespace fs = std::filesystem;
using namespace xalign;
using nlohmann::ordered_json;

namespace {

struct GlobalOptions {
  RunConfig config;
  fs::path out_dir;
  uint64_t seed = 1;
  bool quiet = false;
};

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrKind::Format:
    case ErrKind::Shape:
    case ErrKind::Numeric:
    case ErrKind::Io:
    case ErrKind::Validation:
      return 2;
    case ErrKind::Parameter:
    case ErrKind::Config:
    case ErrKind::InsufficientData:
      return 3;
    case ErrKind::Training:
    case ErrKind::Internal:
      return 1;
  }
  return 1;
}

void info(const GlobalOptions& g, const std::string& line) {
  if (!g.quiet) std::cout << line << "\n";
}

fs::path require_path(const RunConfig& cfg, const std::string& key,
                      const std::string& flag_hint) {
  const auto v = cfg.get(key);
  if (!v || v->empty())
    throw config_error("missing required input: set " + flag_hint + " (config key " + key +
                       ")");
  return fs::path(*v);
}

Split parse_split_selector(const std::string& name) {
  if (name == "all") throw config_error("split 'all' is not valid here");
  return parse_split(name);
}

// ---------------------------------------------------------------------------
// shared data loading

struct LoadedStore {
  DatasetStore store;
  std::vector<fs::path> inputs;
  bool splits_derived = false;
};

LoadedStore load_store(const GlobalOptions& g, bool require_physicals) {
  const RunConfig& cfg = g.config;
  LoadedStore out;

  const fs::path spectral_path =
      require_path(cfg, "data.spectral_embeddings", "--spectral-embeddings");
  const fs::path text_path = require_path(cfg, "data.text_embeddings", "--text-embeddings");
  const size_t spectral_dim = cfg.get_size("ingest.spectral_dim", 64);
  const size_t text_dim = cfg.get_size("ingest.text_dim", 4608);

  const EmbeddingTable spectral = load_embeddings(spectral_path, spectral_dim);
  const EmbeddingTable text = load_embeddings(text_path, text_dim);
  out.inputs.push_back(spectral_path);
  out.inputs.push_back(text_path);

  std::unordered_map<std::string, size_t> text_index;
  for (size_t i = 0; i < text.ids.size(); ++i) text_index.emplace(text.ids[i], i);
  std::vector<EmbeddingPair> pairs;
  pairs.reserve(spectral.ids.size());
  for (size_t i = 0; i < spectral.ids.size(); ++i) {
    const auto it = text_index.find(spectral.ids[i]);
    if (it == text_index.end())
      throw validation_error("id '" + spectral.ids[i] + "' has no text embedding");
    EmbeddingPair p;
    p.source_id = spectral.ids[i];
    p.spectral.assign(spectral.values.row(i), spectral.values.row(i) + spectral.values.cols);
    p.text.assign(text.values.row(it->second),
                  text.values.row(it->second) + text.values.cols);
    pairs.push_back(std::move(p));
  }
  if (text.ids.size() != spectral.ids.size())
    throw validation_error("embedding files cover different id sets (" +
                           std::to_string(spectral.ids.size()) + " vs " +
                           std::to_string(text.ids.size()) + ")");

  std::vector<PhysicalRecord> physicals;
  if (const auto p = cfg.get("data.physicals"); p && !p->empty()) {
    physicals = read_physicals_csv(*p);
    out.inputs.push_back(*p);
  } else if (require_physicals) {
    throw config_error("missing required input: set --physicals (config key data.physicals)");
  }

  SplitAssignment splits;
  if (const auto p = cfg.get("data.splits"); p && !p->empty()) {
    splits = read_splits_csv(*p);
    out.inputs.push_back(*p);
  } else {
    std::vector<std::string> ids;
    for (const auto& pr : pairs) ids.push_back(pr.source_id);
    splits = make_splits(ids, g.seed);
    out.splits_derived = true;
  }

  out.store = join_dataset(pairs, physicals, splits);
  return out;
}

AlignmentConfig alignment_config_from(const RunConfig& cfg, size_t spectral_dim,
                                      size_t text_dim, uint64_t seed) {
  AlignmentConfig c;
  c.shared_dim = cfg.get_size("align.shared_dim", 64);
  c.lr = cfg.get_double("align.lr", 1e-3);
  c.dropout = cfg.get_double("align.dropout", 0.1);
  c.batch_size = cfg.get_size("align.batch_size", 64);
  c.max_epochs = cfg.get_size("align.max_epochs", 120);
  c.patience = cfg.get_size("align.patience", 10);
  c.init_temperature = cfg.get_double("align.init_temperature", 0.3);
  c.temperature_grid =
      cfg.get_double_list("align.temperature_grid", {0.01, 0.05, 0.1, 0.2, 0.5, 1.0});
  c.direction = parse_loss_direction(cfg.get_string("align.direction", "text_to_data"));
  c.seed = seed;
  c.rebuild_heads(spectral_dim, text_dim, cfg.get_size_list("align.spectral_hidden", {256}),
                  cfg.get_size_list("align.text_hidden", {256}));
  return c;
}

void check_model_compat(const AlignmentModel& model, const DatasetStore& store) {
  if (model.spectral_spec.input_dim != store.spectral.cols)
    throw config_error("checkpoint/data mismatch: spectral head expects dim " +
                       std::to_string(model.spectral_spec.input_dim) + ", data has dim " +
                       std::to_string(store.spectral.cols));
  if (model.text_spec.input_dim != store.text.cols)
    throw config_error("checkpoint/data mismatch: text head expects dim " +
                       std::to_string(model.text_spec.input_dim) + ", data has dim " +
                       std::to_string(store.text.cols));
}

struct SplitData {
  std::vector<size_t> rows;
  std::vector<std::string> ids;
  DenseMatrix spectral;
  DenseMatrix text;
};

SplitData gather_split(const DatasetStore& store, const std::string& selector) {
  SplitData d;
  if (selector == "all") {
    d.rows.resize(store.size());
    for (size_t i = 0; i < store.size(); ++i) d.rows[i] = i;
  } else {
    d.rows = store.split_rows(parse_split_selector(selector));
  }
  if (d.rows.empty())
    throw insufficient_data_error("split '" + selector + "' selects no rows");
  d.spectral = DenseMatrix(d.rows.size(), store.spectral.cols);
  d.text = DenseMatrix(d.rows.size(), store.text.cols);
  for (size_t i = 0; i < d.rows.size(); ++i) {
    d.ids.push_back(store.ids[d.rows[i]]);
    std::copy(store.spectral.row(d.rows[i]), store.spectral.row(d.rows[i]) + store.spectral.cols,
              d.spectral.row(i));
    std::copy(store.text.row(d.rows[i]), store.text.row(d.rows[i]) + store.text.cols,
              d.text.row(i));
  }
  return d;
}

std::vector<fs::path> sidecar_aware(const fs::path& xaln) {
  fs::path ids = xaln;
  ids += ".ids.csv";
  return {xaln, ids};
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_synth(GlobalOptions& g) {
  const RunConfig& cfg = g.config;
  const size_t n = cfg.get_size("synth.n", 512);
  const size_t latent_dim = cfg.get_size("synth.latent_dim", 8);
  const double noise = cfg.get_double("synth.noise", 0.0);
  const size_t spectral_dim = cfg.get_size("synth.spectral_dim", 64);
  const size_t text_dim = cfg.get_size("synth.text_dim", 4608);

  const auto synth = synth_dataset(n, latent_dim, noise, g.seed, spectral_dim, text_dim);
  const DatasetStore& store = synth.store;

  fs::create_directories(g.out_dir);
  const fs::path spectral_path = g.out_dir / "spectral_embeddings.xaln";
  const fs::path text_path = g.out_dir / "text_embeddings.xaln";
  const fs::path physicals_path = g.out_dir / "physicals.csv";
  const fs::path splits_path = g.out_dir / "splits.csv";

  write_embeddings_xaln(spectral_path, {store.ids, store.spectral});
  write_embeddings_xaln(text_path, {store.ids, store.text});

  std::vector<PhysicalRecord> records(store.size());
  for (size_t i = 0; i < store.size(); ++i) {
    records[i].source_id = store.ids[i];
    for (size_t v = 0; v < kPhysicalVariableCount; ++v)
      records[i].values[v] = store.physical_value(i, v);
  }
  write_physicals_csv(physicals_path, records);

  SplitAssignment splits;
  for (size_t i = 0; i < store.size(); ++i) splits.label[store.ids[i]] = store.split[i];
  write_splits_csv(splits_path, store.ids, splits);

  std::vector<fs::path> outputs = sidecar_aware(spectral_path);
  const auto text_outputs = sidecar_aware(text_path);
  outputs.insert(outputs.end(), text_outputs.begin(), text_outputs.end());
  outputs.push_back(physicals_path);
  outputs.push_back(splits_path);
  update_manifest(g.out_dir, "synth", g.seed, cfg.hash(), {}, outputs);

  const auto counts = splits.counts();
  info(g, "synth: " + std::to_string(n) + " sources, splits " + std::to_string(counts[0]) +
              "/" + std::to_string(counts[1]) + "/" + std::to_string(counts[2]) + "/" +
              std::to_string(counts[3]) + " -> " + g.out_dir.string());
  return 0;
}

int cmd_preprocess(GlobalOptions& g) {
  const RunConfig& cfg = g.config;
  const BinSpacing spacing = cfg.get_string("specprep.binning", "linear") == "log"
                                 ? BinSpacing::Logarithmic
                                 : BinSpacing::Linear;

  std::vector<std::string> ids;
  std::vector<Spectrum> raw;
  size_t discarded_events = 0;
  size_t empty_spectra = 0;
  std::vector<fs::path> inputs;

  if (const auto p = cfg.get("data.spectra"); p && !p->empty()) {
    const auto table = read_spectra_csv(*p);
    inputs.push_back(*p);
    ids = table.ids;
    for (size_t r = 0; r < table.bins.rows; ++r) {
      Spectrum s;
      s.bins.assign(table.bins.row(r), table.bins.row(r) + table.bins.cols);
      raw.push_back(std::move(s));
    }
  } else if (const auto e = cfg.get("data.events"); e && !e->empty()) {
    const fs::path exposures = require_path(cfg, "data.exposures", "--exposures");
    const auto events = read_events_csv(*e, exposures);
    inputs.push_back(*e);
    inputs.push_back(exposures);
    ids = events.ids;
    for (const auto& ev : events.events) {
      auto binned = bin_events(ev, spacing);
      discarded_events += binned.discarded_events;
      if (binned.empty_input) ++empty_spectra;
      raw.push_back(std::move(binned.spectrum));
    }
  } else {
    throw config_error("preprocess needs --spectra or --events/--exposures");
  }
  if (ids.empty()) throw format_error("preprocess: input contains no spectra");

  size_t degenerate = 0;
  std::vector<std::string> degenerate_ids;
  SpectrumTable normalized;
  normalized.ids = ids;
  normalized.bins = DenseMatrix(ids.size(), kSpectrumBins);
  for (size_t r = 0; r < raw.size(); ++r) {
    const auto norm = minmax_normalize(raw[r]);
    if (norm.degenerate) {
      ++degenerate;
      degenerate_ids.push_back(ids[r]);
    }
    std::copy(norm.bins.begin(), norm.bins.end(), normalized.bins.row(r));
  }

  fs::create_directories(g.out_dir);
  const fs::path out_csv = g.out_dir / "normalized_spectra.csv";
  write_spectra_csv(out_csv, normalized);

  ordered_json report;
  report["rows"] = ids.size();
  report["degenerate_count"] = degenerate;
  report["degenerate_ids"] = degenerate_ids;
  report["discarded_events"] = discarded_events;
  report["empty_spectra"] = empty_spectra;
  report["binning"] = spacing == BinSpacing::Logarithmic ? "log" : "linear";
  const fs::path report_path = g.out_dir / "preprocess_report.json";
  write_json(report_path, report);

  update_manifest(g.out_dir, "preprocess", g.seed, cfg.hash(), inputs,
                  {out_csv, report_path});
  info(g, "preprocess: " + std::to_string(ids.size()) + " spectra, " +
              std::to_string(degenerate) + " degenerate -> " + out_csv.string());
  return 0;
}

// Loads embeddings for train/grid-search; runs the autoencoder first when raw
// spectra are supplied instead of spectral embeddings.
LoadedStore load_train_store(GlobalOptions& g, std::vector<fs::path>& extra_outputs) {
  RunConfig& cfg = g.config;
  if (const auto spectra = cfg.get("data.spectra"); spectra && !spectra->empty()) {
    const auto table = read_spectra_csv(*spectra);
    AutoencoderConfig ae;
    ae.input_dim = kSpectrumBins;
    ae.encoder_hidden = cfg.get_size_list("ae.hidden", {256});
    ae.bottleneck = cfg.get_size("ae.bottleneck", 64);
    ae.lr = cfg.get_double("ae.lr", 1e-3);
    ae.epochs = cfg.get_size("ae.epochs", 60);
    ae.batch_size = cfg.get_size("ae.batch_size", 32);
    ae.seed = SeededRng(g.seed).derive(101).seed();
    const auto trained = train_autoencoder(table.bins, ae);
    const DenseMatrix codes = encode_spectra(trained.model, table.bins);

    fs::create_directories(g.out_dir);
    const fs::path derived = g.out_dir / "derived_spectral_embeddings.xaln";
    write_embeddings_xaln(derived, {table.ids, codes});
    ordered_json curve;
    curve["mae_per_epoch"] = trained.loss_curve;
    const fs::path curve_path = g.out_dir / "autoencoder_loss.json";
    write_json(curve_path, curve);
    const auto files = sidecar_aware(derived);
    extra_outputs.insert(extra_outputs.end(), files.begin(), files.end());
    extra_outputs.push_back(curve_path);

    cfg.set("data.spectral_embeddings", derived.string());
    cfg.set("ingest.spectral_dim", std::to_string(ae.bottleneck));
    info(g, "autoencoder: final training MAE " + format_double(trained.loss_curve.back()));
  }
  return load_store(g, false);
}

int cmd_train(GlobalOptions& g) {
  std::vector<fs::path> outputs;
  LoadedStore loaded = load_train_store(g, outputs);
  const DatasetStore& store = loaded.store;

  const AlignmentConfig config =
      alignment_config_from(g.config, store.spectral.cols, store.text.cols, g.seed);
  auto [model, log] = train_alignment(config, store);

  fs::create_directories(g.out_dir);
  if (loaded.splits_derived) {
    SplitAssignment splits;
    for (size_t i = 0; i < store.size(); ++i) splits.label[store.ids[i]] = store.split[i];
    const fs::path splits_path = g.out_dir / "splits.csv";
    write_splits_csv(splits_path, store.ids, splits);
    outputs.push_back(splits_path);
  }
  const fs::path ckpt = g.out_dir / "model.ckpt";
  save_checkpoint(ckpt, model);
  const fs::path log_path = g.out_dir / "train_log.json";
  write_json(log_path, train_log_json(log));
  outputs.push_back(ckpt);
  outputs.push_back(log_path);
  update_manifest(g.out_dir, "train", g.seed, g.config.hash(), loaded.inputs, outputs);

  const double final_recall = log.val_top1.empty() ? 0.0 : log.val_top1[log.best_epoch == 0
                                  ? log.val_top1.size() - 1
                                  : log.best_epoch - 1];
  info(g, "train: " + std::to_string(log.train_loss.size()) + " epochs, best epoch " +
              std::to_string(log.best_epoch) + ", validation top-1 " +
              format_double(final_recall) + " -> " + ckpt.string());
  return 0;
}

std::vector<std::vector<size_t>> parse_hidden_axis(const std::string& value) {
  // entries separated by '|', dims within an entry by 'x': "256|128x64"
  std::vector<std::vector<size_t>> out;
  std::stringstream entries(value);
  std::string entry;
  while (std::getline(entries, entry, '|')) {
    std::vector<size_t> dims;
    std::stringstream parts(entry);
    std::string part;
    while (std::getline(parts, part, 'x')) {
      const long long v = parse_int_field(part, "grid.hidden_dims", 0);
      if (v <= 0) throw config_error("grid.hidden_dims: dims must be positive");
      dims.push_back(static_cast<size_t>(v));
    }
    if (dims.empty()) throw config_error("grid.hidden_dims: empty entry");
    out.push_back(std::move(dims));
  }
  if (out.empty()) throw config_error("grid.hidden_dims: empty axis");
  return out;
}

int cmd_grid_search(GlobalOptions& g) {
  std::vector<fs::path> outputs;
  LoadedStore loaded = load_train_store(g, outputs);
  const DatasetStore& store = loaded.store;
  const RunConfig& cfg = g.config;

  GridSpace space;
  space.lr = cfg.get_double_list("grid.lr", {1e-3});
  space.shared_dim = cfg.get_size_list("grid.shared_dim", {64});
  space.dropout = cfg.get_double_list("grid.dropout", {0.1});
  space.hidden_dims = parse_hidden_axis(cfg.get_string("grid.hidden_dims", "256"));

  AlignmentConfig base =
      alignment_config_from(cfg, store.spectral.cols, store.text.cols, g.seed);
  const auto result = grid_search(space, store, base, g.seed);

  fs::create_directories(g.out_dir);
  const size_t save_top = cfg.get_size("grid.save_top", 5);
  ordered_json board;
  board["seed"] = g.seed;
  board["config_count"] = result.ranked.size() + result.failures.size();
  ordered_json entries = ordered_json::array();
  for (size_t rank = 0; rank < result.ranked.size(); ++rank) {
    const auto& e = result.ranked[rank];
    ordered_json row;
    row["rank"] = rank + 1;
    row["config_index"] = e.config_index;
    row["lr"] = e.config.lr;
    row["shared_dim"] = e.config.shared_dim;
    row["dropout"] = e.config.dropout;
    row["hidden_dims"] = e.config.spectral_head.hidden_dims;
    row["seed"] = e.config.seed;
    row["recall_at_1pct"] = e.recall_1pct;
    row["best_epoch"] = e.log.best_epoch;
    row["epochs"] = e.log.train_loss.size();
    if (rank < save_top) {
      char name[32];
      std::snprintf(name, sizeof(name), "grid_%03zu.ckpt", rank);
      const fs::path ckpt = g.out_dir / name;
      save_checkpoint(ckpt, result.models[rank]);
      outputs.push_back(ckpt);
      row["checkpoint"] = ckpt.string();
    }
    entries.push_back(std::move(row));
  }
  board["leaderboard"] = std::move(entries);
  ordered_json failures = ordered_json::array();
  for (const auto& f : result.failures)
    failures.push_back({{"config_index", f.config_index}, {"error", f.error}});
  board["failures"] = std::move(failures);

  const fs::path board_path = g.out_dir / "leaderboard.json";
  write_json(board_path, board);
  outputs.push_back(board_path);
  update_manifest(g.out_dir, "grid-search", g.seed, cfg.hash(), loaded.inputs, outputs);

  info(g, "grid-search: " + std::to_string(result.ranked.size()) + " configs ranked, " +
              std::to_string(result.failures.size()) + " failed -> " + board_path.string());
  return 0;
}

int cmd_tune_temp(GlobalOptions& g) {
  const RunConfig& cfg = g.config;
  const fs::path ckpt_path = require_path(cfg, "data.checkpoint", "--checkpoint");
  AlignmentModel model = load_checkpoint(ckpt_path);
  LoadedStore loaded = load_store(g, false);
  loaded.inputs.push_back(ckpt_path);
  check_model_compat(model, loaded.store);

  AlignmentConfig config = alignment_config_from(cfg, loaded.store.spectral.cols,
                                                 loaded.store.text.cols, g.seed);
  const bool retrain = cfg.get_bool("tune.retrain_per_tau", false);
  const auto result = tune_temperature(model, loaded.store, config, retrain);

  fs::create_directories(g.out_dir);
  const fs::path out_ckpt = g.out_dir / "model_tuned.ckpt";
  save_checkpoint(out_ckpt, model);
  ordered_json report;
  report["selected_temperature"] = result.temperature;
  report["retrain_per_tau"] = retrain;
  ordered_json recalls = ordered_json::array();
  for (const auto& [tau, recall] : result.recalls)
    recalls.push_back({{"temperature", tau}, {"calibration_top1", recall}});
  report["grid"] = std::move(recalls);
  const fs::path report_path = g.out_dir / "temperature_report.json";
  write_json(report_path, report);

  update_manifest(g.out_dir, "tune-temp", g.seed, cfg.hash(), loaded.inputs,
                  {out_ckpt, report_path});
  info(g, "tune-temp: selected tau " + format_double(result.temperature) + " -> " +
              out_ckpt.string());
  return 0;
}

std::vector<fs::path> checkpoint_list(const RunConfig& cfg) {
  std::vector<fs::path> paths;
  if (const auto v = cfg.get("data.checkpoints"); v && !v->empty()) {
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) paths.emplace_back(item);
  }
  if (paths.empty())
    throw config_error("missing required input: set --checkpoint (config key data.checkpoints)");
  return paths;
}

int cmd_eval_retrieval(GlobalOptions& g) {
  const RunConfig& cfg = g.config;
  const auto ckpt_paths = checkpoint_list(cfg);
  std::vector<AlignmentModel> models;
  for (const auto& p : ckpt_paths) models.push_back(load_checkpoint(p));

  LoadedStore loaded = load_store(g, false);
  for (const auto& p : ckpt_paths) loaded.inputs.push_back(p);
  for (const auto& m : models) check_model_compat(m, loaded.store);

  const std::string selector = cfg.get_string("eval.split", "test");
  const SplitData split = gather_split(loaded.store, selector);

  std::vector<const AlignmentModel*> model_ptrs;
  for (const auto& m : models) model_ptrs.push_back(&m);
  // rows of the ensemble matrix anchor texts; retrieval queries spectra
  const DenseMatrix sims_text_rows = ensemble_similarity(model_ptrs, split.text, split.spectral);
  const DenseMatrix sims = transpose(sims_text_rows);

  std::vector<double> k_grid = cfg.get_double_list("eval.k_grid", {});
  if (k_grid.empty())
    for (int k = 1; k <= 100; ++k) k_grid.push_back(k);

  const auto report = evaluate_retrieval(sims, {}, k_grid);

  fs::create_directories(g.out_dir);
  ordered_json j = retrieval_report_json(report);
  j["split"] = selector;
  j["ensemble_size"] = models.size();
  const fs::path report_path = g.out_dir / "retrieval_report.json";
  write_json(report_path, j);
  const fs::path curve_path = g.out_dir / "recall_curve.csv";
  write_recall_curve_csv(curve_path, report);
  update_manifest(g.out_dir, "eval-retrieval", g.seed, cfg.hash(), loaded.inputs,
                  {report_path, curve_path});

  info(g, "eval-retrieval: " + std::to_string(report.ranks.size()) + " queries, Recall@1% " +
              format_double(recall_at_percent(report.ranks, 1.0, report.candidate_count)) +
              ", median rank " + format_double(report.median) + " -> " +
              report_path.string());
  return 0;
}

int cmd_eval_regression(GlobalOptions& g) {
  const RunConfig& cfg = g.config;
  const fs::path ckpt_path = require_path(cfg, "data.checkpoint", "--checkpoint");
  const AlignmentModel model = load_checkpoint(ckpt_path);
  LoadedStore loaded = load_store(g, true);
  loaded.inputs.push_back(ckpt_path);
  check_model_compat(model, loaded.store);

  const RepresentationSet reps = build_representations(loaded.store, model);
  RegressionOptions options;
  options.k = cfg.get_size("regress.k", 3);
  options.moe_metric =
      cfg.get_string("regress.moe_metric", "pearson") == "mae" ? MoeMetric::Mae
                                                               : MoeMetric::Pearson;
  options.standardize = cfg.get_bool("regress.standardize", false);
  options.bootstrap_n = cfg.get_size("regress.bootstrap", 1000);
  options.seed = g.seed;
  const auto report = regression_report(reps, loaded.store, options);

  // latent-variable correlation table over the evaluation split
  const std::string corr_selector = cfg.get_string("regress.corr_split", "test");
  const ReprKind corr_repr = parse_repr(cfg.get_string("regress.corr_repr", "post_spectra"));
  const SplitData split = gather_split(loaded.store, corr_selector);
  DenseMatrix latents(split.rows.size(), reps.get(corr_repr).cols);
  for (size_t i = 0; i < split.rows.size(); ++i)
    std::copy(reps.get(corr_repr).row(split.rows[i]),
              reps.get(corr_repr).row(split.rows[i]) + latents.cols, latents.row(i));
  DatasetStore corr_store;  // minimal row-aligned view for the table
  corr_store.ids = split.ids;
  corr_store.physical = DenseMatrix(split.rows.size(), kPhysicalVariableCount);
  for (size_t i = 0; i < split.rows.size(); ++i)
    std::copy(loaded.store.physical.row(split.rows[i]),
              loaded.store.physical.row(split.rows[i]) + kPhysicalVariableCount,
              corr_store.physical.row(i));
  corr_store.split.assign(split.rows.size(), Split::Test);
  const auto table =
      correlation_table(latents, corr_store, cfg.get_size("regress.corr_top", 10));

  fs::create_directories(g.out_dir);
  const fs::path report_json = g.out_dir / "regression_report.json";
  write_json(report_json, regression_report_json(report));
  const fs::path report_csv = g.out_dir / "regression_report.csv";
  write_regression_csv(report_csv, report);
  ordered_json corr = correlation_table_json(table);
  corr["representation"] = repr_name(corr_repr);
  corr["split"] = corr_selector;
  const fs::path corr_json = g.out_dir / "correlation_table.json";
  write_json(corr_json, corr);
  const fs::path corr_csv = g.out_dir / "correlation_table.csv";
  write_correlation_csv(corr_csv, table);
  update_manifest(g.out_dir, "eval-regression", g.seed, cfg.hash(), loaded.inputs,
                  {report_json, report_csv, corr_json, corr_csv});

  size_t usable = 0;
  for (const auto& v : report.variables)
    if (!v.skipped) ++usable;
  info(g, "eval-regression: " + std::to_string(usable) + " of " +
              std::to_string(report.variables.size()) + " variables evaluated -> " +
              report_json.string());
  return 0;
}

int cmd_detect_outliers(GlobalOptions& g) {
  const RunConfig& cfg = g.config;
  const fs::path ckpt_path = require_path(cfg, "data.checkpoint", "--checkpoint");
  const AlignmentModel model = load_checkpoint(ckpt_path);
  LoadedStore loaded = load_store(g, false);
  loaded.inputs.push_back(ckpt_path);
  check_model_compat(model, loaded.store);

  const std::string selector = cfg.get_string("anomaly.split", "test");
  const SplitData split = gather_split(loaded.store, selector);
  const ReprKind repr = parse_repr(cfg.get_string("anomaly.repr", "post_both"));

  DenseMatrix points;
  switch (repr) {
    case ReprKind::PreSpectra: points = split.spectral; break;
    case ReprKind::PreText: points = split.text; break;
    case ReprKind::PostSpectra: points = model.project_spectral_rows(split.spectral); break;
    case ReprKind::PostText: points = model.project_text_rows(split.text); break;
    case ReprKind::PostBoth:
      points = hconcat(model.project_spectral_rows(split.spectral),
                       model.project_text_rows(split.text));
      break;
  }

  std::vector<std::string> labels;
  if (const auto p = cfg.get("data.classes"); p && !p->empty()) {
    std::unordered_map<std::string, std::string> by_id;
    CsvReader reader(*p);
    std::vector<std::string> fields;
    if (!reader.next(fields) || fields.size() != 2 || fields[0] != "source_id" ||
        fields[1] != "class")
      throw format_error(*p + ": expected header 'source_id,class'");
    while (reader.next(fields)) {
      if (fields.size() != 2)
        throw format_error(*p + ":" + std::to_string(reader.line()) + ": expected 2 fields");
      by_id[fields[0]] = fields[1];
    }
    labels.resize(split.ids.size());
    for (size_t i = 0; i < split.ids.size(); ++i) {
      const auto it = by_id.find(split.ids[i]);
      if (it != by_id.end()) labels[i] = it->second;
    }
    loaded.inputs.push_back(*p);
  }

  IsoForestParams params;
  params.tree_count = cfg.get_size("anomaly.trees", 100);
  params.subsample = cfg.get_size("anomaly.subsample", 256);
  params.seed = g.seed;
  const double quantile = cfg.get_double("anomaly.quantile", 0.01);

  const auto forest = fit_forest(points, params);
  const auto report =
      make_anomaly_report(forest, points, split.ids, quantile, labels, repr_name(repr));

  fs::create_directories(g.out_dir);
  const fs::path report_path = g.out_dir / "anomaly_report.json";
  write_json(report_path, anomaly_report_json(report));
  const fs::path scores_path = g.out_dir / "anomaly_scores.csv";
  write_anomaly_csv(scores_path, report);
  update_manifest(g.out_dir, "detect-outliers", g.seed, cfg.hash(), loaded.inputs,
                  {report_path, scores_path});

  info(g, "detect-outliers: " + std::to_string(report.flagged.size()) + " of " +
              std::to_string(report.ids.size()) + " flagged -> " + report_path.string());
  return 0;
}

int cmd_export_latents(GlobalOptions& g) {
  const RunConfig& cfg = g.config;
  const fs::path ckpt_path = require_path(cfg, "data.checkpoint", "--checkpoint");
  const AlignmentModel model = load_checkpoint(ckpt_path);
  LoadedStore loaded = load_store(g, false);
  loaded.inputs.push_back(ckpt_path);
  check_model_compat(model, loaded.store);

  const std::string selector = cfg.get_string("eval.split", "all");
  const SplitData split = gather_split(loaded.store, selector);

  RepresentationSet reps;
  reps.pre_spectra = split.spectral;
  reps.pre_text = split.text;
  reps.post_spectra = model.project_spectral_rows(split.spectral);
  reps.post_text = model.project_text_rows(split.text);
  reps.post_both = hconcat(reps.post_spectra, reps.post_text);

  fs::create_directories(g.out_dir);
  std::vector<fs::path> outputs;
  for (ReprKind kind : kMoePrecedence) {
    const fs::path path = g.out_dir / ("latents_" + std::string(repr_name(kind)) + ".xaln");
    write_embeddings_xaln(path, {split.ids, reps.get(kind)});
    const auto files = sidecar_aware(path);
    outputs.insert(outputs.end(), files.begin(), files.end());
  }
  update_manifest(g.out_dir, "export-latents", g.seed, cfg.hash(), loaded.inputs, outputs);

  info(g, "export-latents: " + std::to_string(split.ids.size()) + " rows x 5 representations -> " +
              g.out_dir.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contrastive spectra/text embedding alignment toolkit", "xalign"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  uint64_t seed = 1;
  bool quiet = false;
  bool seed_given = false;
  bool out_given = false;
  app.add_option("--config", config_path, "key=value config file");
  app.add_option("--seed", seed, "master seed")->each([&](const std::string&) {
    seed_given = true;
  });
  app.add_option("--out", out_dir, "output directory")->each([&](const std::string&) {
    out_given = true;
  });
  app.add_flag("--quiet", quiet, "suppress progress output");

  RunConfig overrides;
  auto opt = [&](CLI::App* sub, const std::string& flag, const std::string& key,
                 const std::string& desc) {
    sub->add_option_function<std::string>(
        flag, [&overrides, key](const std::string& v) { overrides.set(key, v); }, desc);
  };
  auto flag = [&](CLI::App* sub, const std::string& name, const std::string& key,
                  const std::string& desc) {
    sub->add_flag_callback(
        name, [&overrides, key]() { overrides.set(key, "true"); }, desc);
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic paired dataset");
  opt(synth, "--n", "synth.n", "number of sources (default 512)");
  opt(synth, "--latent-dim", "synth.latent_dim", "shared latent dimension (default 8)");
  opt(synth, "--noise", "synth.noise", "noise sigma (default 0)");
  opt(synth, "--spectral-dim", "synth.spectral_dim", "spectral embedding dim (default 64)");
  opt(synth, "--text-dim", "synth.text_dim", "text embedding dim (default 4608)");

  auto* prep = app.add_subcommand("preprocess", "bin/normalize raw spectra or event lists");
  opt(prep, "--spectra", "data.spectra", "raw spectra CSV (source_id,b0..b399)");
  opt(prep, "--events", "data.events", "event list CSV (source_id,energy_kev)");
  opt(prep, "--exposures", "data.exposures", "exposure manifest CSV (source_id,exposure_s)");
  opt(prep, "--binning", "specprep.binning", "bin spacing: linear|log");

  const auto add_data_opts = [&](CLI::App* sub, bool physicals) {
    opt(sub, "--spectral-embeddings", "data.spectral_embeddings",
        "spectral embeddings (.xaln or .csv)");
    opt(sub, "--text-embeddings", "data.text_embeddings", "text embeddings (.xaln or .csv)");
    opt(sub, "--splits", "data.splits", "splits CSV (source_id,split)");
    opt(sub, "--spectral-dim", "ingest.spectral_dim", "expected spectral dim (default 64)");
    opt(sub, "--text-dim", "ingest.text_dim", "expected text dim (default 4608)");
    if (physicals)
      opt(sub, "--physicals", "data.physicals", "physical variables CSV");
  };

  const auto add_align_opts = [&](CLI::App* sub) {
    for (const char* key : {"shared_dim", "lr", "dropout", "batch_size", "max_epochs",
                            "patience", "init_temperature", "direction"})
      opt(sub, std::string("--") + key, std::string("align.") + key, "alignment option");
    opt(sub, "--spectral-hidden", "align.spectral_hidden", "spectral head hidden dims");
    opt(sub, "--text-hidden", "align.text_hidden", "text head hidden dims");
  };

  auto* train = app.add_subcommand("train", "train the contrastive alignment model");
  add_data_opts(train, true);
  opt(train, "--spectra", "data.spectra", "normalized spectra CSV; trains the autoencoder");
  add_align_opts(train);

  auto* grid = app.add_subcommand("grid-search", "hyperparameter grid search");
  add_data_opts(grid, true);
  opt(grid, "--spectra", "data.spectra", "normalized spectra CSV; trains the autoencoder");
  add_align_opts(grid);
  opt(grid, "--grid-lr", "grid.lr", "lr axis, comma separated");
  opt(grid, "--grid-shared-dim", "grid.shared_dim", "shared_dim axis");
  opt(grid, "--grid-dropout", "grid.dropout", "dropout axis");
  opt(grid, "--grid-hidden", "grid.hidden_dims", "hidden axis, e.g. 256|128x64");
  opt(grid, "--save-top", "grid.save_top", "checkpoints to save (default 5)");

  auto* tune = app.add_subcommand("tune-temp", "tune the temperature on the calibration set");
  add_data_opts(tune, false);
  opt(tune, "--checkpoint", "data.checkpoint", "input checkpoint");
  flag(tune, "--retrain-per-tau", "tune.retrain_per_tau", "retrain per grid point");
  opt(tune, "--temperature-grid", "align.temperature_grid", "comma-separated grid");
  add_align_opts(tune);

  auto* evr = app.add_subcommand("eval-retrieval", "cross-modal retrieval evaluation");
  add_data_opts(evr, false);
  evr->add_option_function<std::vector<std::string>>(
      "--checkpoint",
      [&overrides](const std::vector<std::string>& v) {
        std::string joined;
        for (const auto& p : v) {
          if (!joined.empty()) joined += ',';
          joined += p;
        }
        overrides.set("data.checkpoints", joined);
      },
      "checkpoint (repeat for an ensemble)");
  opt(evr, "--split", "eval.split", "split to evaluate (default test)");
  opt(evr, "--k-grid", "eval.k_grid", "recall curve percentages");

  auto* evg = app.add_subcommand("eval-regression", "physical-parameter regression report");
  add_data_opts(evg, true);
  opt(evg, "--checkpoint", "data.checkpoint", "input checkpoint");
  opt(evg, "--knn-k", "regress.k", "k for k-NN (default 3)");
  opt(evg, "--moe-metric", "regress.moe_metric", "selection metric: pearson|mae");
  flag(evg, "--standardize", "regress.standardize", "z-score features with train stats");
  opt(evg, "--bootstrap", "regress.bootstrap", "bootstrap resamples (default 1000)");
  opt(evg, "--corr-top", "regress.corr_top", "correlation table size (default 10)");
  opt(evg, "--corr-repr", "regress.corr_repr", "correlation representation");
  opt(evg, "--corr-split", "regress.corr_split", "correlation split (default test)");

  auto* out = app.add_subcommand("detect-outliers", "isolation-forest outlier detection");
  add_data_opts(out, false);
  opt(out, "--checkpoint", "data.checkpoint", "input checkpoint");
  opt(out, "--split", "anomaly.split", "split to score (default test)");
  opt(out, "--repr", "anomaly.repr", "representation (default post_both)");
  opt(out, "--classes", "data.classes", "class labels CSV (source_id,class)");
  opt(out, "--trees", "anomaly.trees", "tree count (default 100)");
  opt(out, "--subsample", "anomaly.subsample", "subsample size (default 256)");
  opt(out, "--quantile", "anomaly.quantile", "flagging quantile (default 0.01)");

  auto* exp = app.add_subcommand("export-latents", "export all five representations");
  add_data_opts(exp, false);
  opt(exp, "--checkpoint", "data.checkpoint", "input checkpoint");
  opt(exp, "--split", "eval.split", "split to export (default all)");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 3;
  }

  try {
    GlobalOptions g;
    if (!config_path.empty()) g.config = RunConfig::load(config_path);
    for (const auto& [key, value] : overrides.entries())  // flags override the file
      g.config.set(key, value);
    if (seed_given)
      g.config.set("run.seed", std::to_string(seed));
    if (out_given) g.config.set("run.out", out_dir);
    g.seed = g.config.get_u64("run.seed", seed);
    g.out_dir = g.config.get_string("run.out", out_dir);
    g.quiet = quiet;

    if (synth->parsed()) return cmd_synth(g);
    if (prep->parsed()) return cmd_preprocess(g);
    if (train->parsed()) return cmd_train(g);
    if (grid->parsed()) return cmd_grid_search(g);
    if (tune->parsed()) return cmd_tune_temp(g);
    if (evr->parsed()) return cmd_eval_retrieval(g);
    if (evg->parsed()) return cmd_eval_regression(g);
    if (out->parsed()) return cmd_detect_outliers(g);
    if (exp->parsed()) return cmd_export_latents(g);
    std::cerr << "error: no subcommand\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
