#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "xalign/matrix.hpp"

namespace xalign {

struct EmbeddingTable {
  std::vector<std::string> ids;
  DenseMatrix values;  // one row per id
};

// XALN container: magic "XALN", u32 LE version, u32 row count, u32 dimension,
// then rows*dim little-endian floats row-major. Version 1 carries 32-bit
// floats and is the embedding interchange format (ids live in a sidecar
// "<file>.ids.csv" with header row,source_id). Version 2 carries 64-bit
// floats and is used for checkpoint parameter blocks (no sidecar).
inline constexpr uint32_t kXalnVersionF32 = 1;
inline constexpr uint32_t kXalnVersionF64 = 2;

void write_embeddings_xaln(const std::filesystem::path& path, const EmbeddingTable& table);

// expected_dim 0 accepts any dimension. Errors: bad magic/version -> format;
// dimension mismatch -> shape; non-finite entry -> numeric (naming the row).
EmbeddingTable read_embeddings_xaln(const std::filesystem::path& path, size_t expected_dim);

// CSV interchange: header "source_id,v0,...,v{D-1}".
void write_embeddings_csv(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable read_embeddings_csv(const std::filesystem::path& path, size_t expected_dim);

// Dispatch on file contents: XALN magic -> binary, otherwise CSV.
EmbeddingTable load_embeddings(const std::filesystem::path& path, size_t expected_dim);

// Exact f64 blocks for checkpoints; stream-level so several blocks can be
// concatenated behind one header.
void write_xaln_block_f64(std::ostream& out, const DenseMatrix& m);
DenseMatrix read_xaln_block_f64(std::istream& in);

}  // namespace xalign
