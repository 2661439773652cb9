#include "xalign/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "xalign/csv.hpp"
#include "xalign/errors.hpp"
#include "xalign/rng.hpp"

namespace xalign {

namespace {
constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
}

int physical_variable_index(const std::string& name) {
  for (size_t i = 0; i < kPhysicalVariables.size(); ++i)
    if (name == kPhysicalVariables[i]) return static_cast<int>(i);
  return -1;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Calibration: return "calibration";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  for (Split s : kAllSplits)
    if (name == split_name(s)) return s;
  throw format_error("unknown split label '" + name + "'");
}

std::array<size_t, 4> SplitAssignment::counts() const {
  std::array<size_t, 4> c{};
  for (const auto& [id, s] : label) ++c[static_cast<size_t>(s)];
  return c;
}

SplitAssignment make_splits(const std::vector<std::string>& ids, uint64_t seed,
                            std::array<double, 4> fractions) {
  if (ids.size() < 4)
    throw insufficient_data_error("make_splits: need at least 4 ids, got " +
                                  std::to_string(ids.size()));
  const double total = fractions[0] + fractions[1] + fractions[2] + fractions[3];
  if (std::fabs(total - 1.0) > 1e-9)
    throw parameter_error("make_splits: fractions must sum to 1");
  {
    std::unordered_set<std::string> seen;
    for (const auto& id : ids)
      if (!seen.insert(id).second)
        throw validation_error("make_splits: duplicate id '" + id + "'");
  }

  const size_t n = ids.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  SeededRng rng(seed);
  rng.shuffle(order);

  std::array<size_t, 4> counts{};
  for (size_t s = 0; s < 4; ++s)
    counts[s] = static_cast<size_t>(std::floor(fractions[s] * static_cast<double>(n)));
  const size_t assigned = counts[0] + counts[1] + counts[2] + counts[3];
  counts[0] += n - assigned;  // remainder to train

  SplitAssignment out;
  out.label.reserve(n);
  size_t pos = 0;
  for (size_t s = 0; s < 4; ++s)
    for (size_t k = 0; k < counts[s]; ++k)
      out.label.emplace(ids[order[pos++]], static_cast<Split>(s));
  return out;
}

std::optional<double> DatasetStore::physical_value(size_t row, size_t var) const {
  const double v = physical.at(row, var);
  if (std::isnan(v)) return std::nullopt;
  return v;
}

std::vector<size_t> DatasetStore::split_rows(Split s) const {
  std::vector<size_t> rows;
  for (size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) rows.push_back(i);
  return rows;
}

DatasetStore join_dataset(const std::vector<EmbeddingPair>& pairs,
                          const std::vector<PhysicalRecord>& physicals,
                          const SplitAssignment& splits) {
  if (pairs.empty()) throw validation_error("join_dataset: no embedding pairs (empty store)");

  const size_t ds = pairs.front().spectral.size();
  const size_t dt = pairs.front().text.size();
  DatasetStore store;
  store.ids.reserve(pairs.size());
  store.spectral = DenseMatrix(pairs.size(), ds);
  store.text = DenseMatrix(pairs.size(), dt);
  store.physical = DenseMatrix(pairs.size(), kPhysicalVariableCount, kMissing);
  store.split.resize(pairs.size());

  for (size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (p.spectral.size() != ds)
      throw shape_error("join_dataset: spectral dim mismatch for id '" + p.source_id + "'");
    if (p.text.size() != dt)
      throw shape_error("join_dataset: text dim mismatch for id '" + p.source_id + "'");
    if (!store.index.emplace(p.source_id, i).second)
      throw validation_error("join_dataset: duplicate id '" + p.source_id + "'");
    store.ids.push_back(p.source_id);
    std::memcpy(store.spectral.row(i), p.spectral.data(), ds * sizeof(double));
    std::memcpy(store.text.row(i), p.text.data(), dt * sizeof(double));

    const auto it = splits.label.find(p.source_id);
    if (it == splits.label.end())
      throw validation_error("join_dataset: id '" + p.source_id + "' has no split label");
    store.split[i] = it->second;
  }

  std::unordered_set<std::string> with_physicals;
  for (const auto& rec : physicals) {
    const auto it = store.index.find(rec.source_id);
    if (it == store.index.end())
      throw validation_error("join_dataset: physical record for unknown id '" +
                             rec.source_id + "'");
    if (!with_physicals.insert(rec.source_id).second)
      throw validation_error("join_dataset: duplicate physical record for id '" +
                             rec.source_id + "'");
    double* row = store.physical.row(it->second);
    for (size_t v = 0; v < kPhysicalVariableCount; ++v)
      if (rec.values[v]) row[v] = *rec.values[v];
  }
  for (const auto& id : store.ids)
    if (!with_physicals.count(id)) store.missing_physicals.push_back(id);
  return store;
}

SynthDataset synth_dataset(size_t n, size_t latent_dim, double noise_sigma, uint64_t seed,
                           size_t spectral_dim, size_t text_dim) {
  if (n < 8) throw parameter_error("synth_dataset: n must be >= 8");
  if (latent_dim == 0 || latent_dim > 64)
    throw parameter_error("synth_dataset: latent_dim must be in [1, 64]");
  if (latent_dim > spectral_dim)
    throw parameter_error("synth_dataset: latent_dim must not exceed spectral_dim");
  if (noise_sigma < 0) throw parameter_error("synth_dataset: noise_sigma must be >= 0");

  SeededRng master(seed);
  SeededRng latent_rng = master.derive(1);
  SeededRng map_rng = master.derive(2);
  SeededRng noise_rng = master.derive(3);
  SeededRng phys_rng = master.derive(4);

  DenseMatrix z(n, latent_dim);
  for (double& v : z.data) v = latent_rng.normal();

  const double map_scale = 1.0 / std::sqrt(static_cast<double>(latent_dim));
  DenseMatrix map_spectral(spectral_dim, latent_dim);
  for (double& v : map_spectral.data) v = map_rng.normal() * map_scale;
  DenseMatrix map_text(text_dim, latent_dim);
  for (double& v : map_text.data) v = map_rng.normal() * map_scale;

  std::vector<EmbeddingPair> pairs(n);
  for (size_t i = 0; i < n; ++i) {
    auto& p = pairs[i];
    char buf[24];
    std::snprintf(buf, sizeof(buf), "S%06zu", i);
    p.source_id = buf;
    p.spectral.resize(spectral_dim);
    p.text.resize(text_dim);
    const double* zi = z.row(i);
    for (size_t r = 0; r < spectral_dim; ++r) {
      double acc = 0.0;
      const double* a = map_spectral.row(r);
      for (size_t c = 0; c < latent_dim; ++c) acc += a[c] * zi[c];
      p.spectral[r] = acc + (noise_sigma > 0 ? noise_sigma * noise_rng.normal() : 0.0);
    }
    for (size_t r = 0; r < text_dim; ++r) {
      double acc = 0.0;
      const double* b = map_text.row(r);
      for (size_t c = 0; c < latent_dim; ++c) acc += b[c] * zi[c];
      p.text[r] = acc + (noise_sigma > 0 ? noise_sigma * noise_rng.normal() : 0.0);
    }
  }

  // Each variable j reads latent coordinate j mod L plus a weaker nonlinear
  // term from the next coordinate; fixed affine ranges per variable.
  std::vector<PhysicalRecord> records(n);
  for (size_t i = 0; i < n; ++i) {
    records[i].source_id = pairs[i].source_id;
    const double* zi = z.row(i);
    for (size_t j = 0; j < kPhysicalVariableCount; ++j) {
      const size_t k = j % latent_dim;
      const size_t m = (j + 1) % latent_dim;
      const double raw = zi[k] + 0.3 * std::tanh(zi[m]) +
                         (noise_sigma > 0 ? noise_sigma * phys_rng.normal() : 0.0);
      const double scale = 1.0 + 0.15 * static_cast<double>(j);
      const double offset = 0.5 * static_cast<double>(j);
      records[i].values[j] = scale * raw + offset;
    }
  }

  std::vector<std::string> ids;
  ids.reserve(n);
  for (const auto& p : pairs) ids.push_back(p.source_id);
  const SplitAssignment splits = make_splits(ids, master.derive(5).seed());

  SynthDataset out;
  out.store = join_dataset(pairs, records, splits);
  out.latent = std::move(z);
  return out;
}

std::vector<PhysicalRecord> read_physicals_csv(const std::filesystem::path& path) {
  CsvReader reader(path);
  std::vector<std::string> fields;
  if (!reader.next(fields) || fields.empty() || fields[0] != "source_id")
    throw format_error(path.string() + ": expected header starting with 'source_id'");
  if (fields.size() != kPhysicalVariableCount + 1)
    throw format_error(path.string() + ": expected " +
                       std::to_string(kPhysicalVariableCount + 1) + " header columns, got " +
                       std::to_string(fields.size()));
  for (size_t v = 0; v < kPhysicalVariableCount; ++v)
    if (fields[v + 1] != kPhysicalVariables[v])
      throw format_error(path.string() + ": header column " + std::to_string(v + 1) +
                         " is '" + fields[v + 1] + "', expected '" + kPhysicalVariables[v] +
                         "'");

  std::vector<PhysicalRecord> records;
  while (reader.next(fields)) {
    if (fields.size() != kPhysicalVariableCount + 1)
      throw shape_error(path.string() + ":" + std::to_string(reader.line()) +
                        ": expected " + std::to_string(kPhysicalVariableCount + 1) +
                        " fields");
    PhysicalRecord rec;
    rec.source_id = fields[0];
    for (size_t v = 0; v < kPhysicalVariableCount; ++v) {
      const std::string& cell = fields[v + 1];
      if (cell.empty()) continue;  // missing
      const double value = parse_double_field(cell, path.string(), reader.line());
      if (!std::isfinite(value))
        throw numeric_error(path.string() + ":" + std::to_string(reader.line()) +
                            ": non-finite value");
      rec.values[v] = value;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_physicals_csv(const std::filesystem::path& path,
                         const std::vector<PhysicalRecord>& records) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out << "source_id";
  for (const char* name : kPhysicalVariables) out << ',' << name;
  out << '\n';
  for (const auto& rec : records) {
    out << rec.source_id;
    for (const auto& v : rec.values) {
      out << ',';
      if (v) out << format_double(*v);
    }
    out << '\n';
  }
  if (!out) throw io_error("write failure in " + path.string());
}

SplitAssignment read_splits_csv(const std::filesystem::path& path) {
  CsvReader reader(path);
  std::vector<std::string> fields;
  if (!reader.next(fields) || fields.size() != 2 || fields[0] != "source_id" ||
      fields[1] != "split")
    throw format_error(path.string() + ": expected header 'source_id,split'");
  SplitAssignment out;
  while (reader.next(fields)) {
    if (fields.size() != 2)
      throw format_error(path.string() + ":" + std::to_string(reader.line()) +
                         ": expected 2 fields");
    if (!out.label.emplace(fields[0], parse_split(fields[1])).second)
      throw validation_error(path.string() + ":" + std::to_string(reader.line()) +
                             ": duplicate id '" + fields[0] + "'");
  }
  return out;
}

void write_splits_csv(const std::filesystem::path& path, const std::vector<std::string>& ids,
                      const SplitAssignment& splits) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out << "source_id,split\n";
  for (const auto& id : ids) {
    const auto it = splits.label.find(id);
    if (it == splits.label.end())
      throw validation_error("write_splits_csv: id '" + id + "' has no split label");
    out << id << ',' << split_name(it->second) << '\n';
  }
  if (!out) throw io_error("write failure in " + path.string());
}

}  // namespace xalign
