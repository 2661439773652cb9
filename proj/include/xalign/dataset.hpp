#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "xalign/matrix.hpp"

namespace xalign {

// The ground-truth physical variable schema, in CSV column order.
inline constexpr std::array<const char*, 20> kPhysicalVariables = {
    "hard_hs",     "hard_ms",     "hard_hm",   "var_prob_b", "var_index_b",
    "powlaw_gamma", "powlaw_nh",  "powlaw_stat", "bb_kt",    "bb_nh",
    "bb_stat",     "brems_kt",    "brems_nh",  "brems_stat", "apec_kt",
    "apec_abund",  "apec_z",      "apec_nh",   "apec_stat",  "flux_significance_b"};
inline constexpr size_t kPhysicalVariableCount = kPhysicalVariables.size();

int physical_variable_index(const std::string& name);  // -1 if unknown

struct EmbeddingPair {
  std::string source_id;
  std::vector<double> spectral;  // default 64-d
  std::vector<double> text;      // default 4,608-d
};

struct PhysicalRecord {
  std::string source_id;
  std::array<std::optional<double>, kPhysicalVariableCount> values;
};

enum class Split : uint8_t { Train = 0, Calibration = 1, Validation = 2, Test = 3 };
inline constexpr std::array<Split, 4> kAllSplits = {Split::Train, Split::Calibration,
                                                    Split::Validation, Split::Test};

const char* split_name(Split s);
Split parse_split(const std::string& name);  // format error on unknown label

struct SplitAssignment {
  std::unordered_map<std::string, Split> label;

  std::array<size_t, 4> counts() const;
};

// Seeded shuffle then contiguous slices. Counts are floor(fraction*N) per
// split with the remainder assigned to train; deterministic for a fixed seed.
SplitAssignment make_splits(const std::vector<std::string>& ids, uint64_t seed,
                            std::array<double, 4> fractions = {0.69, 0.01, 0.15, 0.15});

// Immutable after construction; reads are unconditionally thread-safe.
struct DatasetStore {
  std::vector<std::string> ids;
  DenseMatrix spectral;        // N x spectral_dim
  DenseMatrix text;            // N x text_dim
  DenseMatrix physical;        // N x 20, NaN where missing
  std::vector<Split> split;    // per row
  std::vector<std::string> missing_physicals;  // ids with no physical record
  std::unordered_map<std::string, size_t> index;

  size_t size() const noexcept { return ids.size(); }
  std::optional<double> physical_value(size_t row, size_t var) const;
  std::vector<size_t> split_rows(Split s) const;
};

// Validates the pair/physical/split contracts and assembles the columnar
// store. Pair order is preserved.
DatasetStore join_dataset(const std::vector<EmbeddingPair>& pairs,
                          const std::vector<PhysicalRecord>& physicals,
                          const SplitAssignment& splits);

// Desk-scale verification harness: a shared latent z per source drives both
// modalities through fixed full-rank linear maps plus optional Gaussian
// noise; physical variables are fixed linear+nonlinear functions of z.
struct SynthDataset {
  DatasetStore store;
  DenseMatrix latent;  // N x latent_dim, exposed for oracle tests
};

SynthDataset synth_dataset(size_t n, size_t latent_dim, double noise_sigma, uint64_t seed,
                           size_t spectral_dim = 64, size_t text_dim = 4608);

// Physical variables CSV: header `source_id,<20 names>`; empty cell = missing.
std::vector<PhysicalRecord> read_physicals_csv(const std::filesystem::path& path);
void write_physicals_csv(const std::filesystem::path& path,
                         const std::vector<PhysicalRecord>& records);

// Splits CSV: header `source_id,split`, labels train|calibration|validation|test.
SplitAssignment read_splits_csv(const std::filesystem::path& path);
void write_splits_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& ids, const SplitAssignment& splits);

}  // namespace xalign
