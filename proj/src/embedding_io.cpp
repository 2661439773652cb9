#include "xalign/embedding_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include "xalign/csv.hpp"
#include "xalign/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "XALN IO assumes a little-endian host");

namespace xalign {

namespace {

constexpr char kMagic[4] = {'X', 'A', 'L', 'N'};

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::istream& in, const std::string& what) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw format_error(what + ": truncated header");
  return v;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  p += ".ids.csv";
  return p;
}

void check_unique_ids(const std::vector<std::string>& ids, const std::string& file) {
  std::unordered_set<std::string> seen;
  seen.reserve(ids.size());
  for (const auto& id : ids)
    if (!seen.insert(id).second)
      throw validation_error(file + ": duplicate source_id '" + id + "'");
}

void check_finite_rows(const DenseMatrix& m, const std::vector<std::string>& ids,
                       const std::string& file) {
  for (size_t r = 0; r < m.rows; ++r)
    for (size_t c = 0; c < m.cols; ++c)
      if (!std::isfinite(m.at(r, c)))
        throw numeric_error(file + ": non-finite value in row " + std::to_string(r) +
                            " (id '" + ids[r] + "')");
}

}  // namespace

void write_embeddings_xaln(const std::filesystem::path& path, const EmbeddingTable& table) {
  if (table.ids.size() != table.values.rows)
    throw shape_error("write_embeddings_xaln: id count does not match row count");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out.write(kMagic, 4);
  write_u32(out, kXalnVersionF32);
  write_u32(out, static_cast<uint32_t>(table.values.rows));
  write_u32(out, static_cast<uint32_t>(table.values.cols));
  std::vector<float> row(table.values.cols);
  for (size_t r = 0; r < table.values.rows; ++r) {
    const double* src = table.values.row(r);
    for (size_t c = 0; c < row.size(); ++c) row[c] = static_cast<float>(src[c]);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw io_error("write failure in " + path.string());

  std::ofstream ids(sidecar_path(path));
  if (!ids) throw io_error("cannot open " + sidecar_path(path).string() + " for writing");
  ids << "row,source_id\n";
  for (size_t r = 0; r < table.ids.size(); ++r) ids << r << ',' << table.ids[r] << '\n';
  if (!ids) throw io_error("write failure in " + sidecar_path(path).string());
}

EmbeddingTable read_embeddings_xaln(const std::filesystem::path& path, size_t expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw format_error(path.string() + ": bad magic (not an XALN file)");
  const uint32_t version = read_u32(in, path.string());
  if (version != kXalnVersionF32)
    throw format_error(path.string() + ": unsupported version " + std::to_string(version));
  const uint32_t rows = read_u32(in, path.string());
  const uint32_t dim = read_u32(in, path.string());
  if (expected_dim != 0 && dim != expected_dim)
    throw shape_error(path.string() + ": dimension " + std::to_string(dim) +
                      " does not match expected " + std::to_string(expected_dim));

  EmbeddingTable table;
  table.values = DenseMatrix(rows, dim);
  std::vector<float> row(dim);
  for (uint32_t r = 0; r < rows; ++r) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in)
      throw format_error(path.string() + ": truncated payload at row " + std::to_string(r));
    double* dst = table.values.row(r);
    for (uint32_t c = 0; c < dim; ++c) dst[c] = static_cast<double>(row[c]);
  }

  // ids sidecar
  const auto ids_path = sidecar_path(path);
  CsvReader reader(ids_path);
  std::vector<std::string> fields;
  if (!reader.next(fields) || fields.size() != 2 || fields[0] != "row" ||
      fields[1] != "source_id")
    throw format_error(ids_path.string() + ": expected header 'row,source_id'");
  table.ids.resize(rows);
  size_t count = 0;
  while (reader.next(fields)) {
    if (fields.size() != 2)
      throw format_error(ids_path.string() + ":" + std::to_string(reader.line()) +
                         ": expected 2 fields");
    const long long r = parse_int_field(fields[0], ids_path.string(), reader.line());
    if (r < 0 || static_cast<uint32_t>(r) >= rows)
      throw format_error(ids_path.string() + ":" + std::to_string(reader.line()) +
                         ": row index out of range");
    table.ids[static_cast<size_t>(r)] = fields[1];
    ++count;
  }
  if (count != rows)
    throw format_error(ids_path.string() + ": " + std::to_string(count) + " ids for " +
                       std::to_string(rows) + " rows");
  check_unique_ids(table.ids, path.string());
  check_finite_rows(table.values, table.ids, path.string());
  return table;
}

void write_embeddings_csv(const std::filesystem::path& path, const EmbeddingTable& table) {
  if (table.ids.size() != table.values.rows)
    throw shape_error("write_embeddings_csv: id count does not match row count");
  std::ofstream out(path);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out << "source_id";
  for (size_t c = 0; c < table.values.cols; ++c) out << ",v" << c;
  out << '\n';
  for (size_t r = 0; r < table.values.rows; ++r) {
    out << table.ids[r];
    const double* row = table.values.row(r);
    for (size_t c = 0; c < table.values.cols; ++c) out << ',' << format_double(row[c]);
    out << '\n';
  }
  if (!out) throw io_error("write failure in " + path.string());
}

EmbeddingTable read_embeddings_csv(const std::filesystem::path& path, size_t expected_dim) {
  CsvReader reader(path);
  std::vector<std::string> fields;
  if (!reader.next(fields) || fields.size() < 2 || fields[0] != "source_id")
    throw format_error(path.string() + ": expected header 'source_id,v0,...'");
  const size_t dim = fields.size() - 1;
  if (expected_dim != 0 && dim != expected_dim)
    throw shape_error(path.string() + ": header has " + std::to_string(dim) +
                      " value columns, expected " + std::to_string(expected_dim));

  std::vector<std::string> ids;
  std::vector<double> data;
  while (reader.next(fields)) {
    if (fields.size() != dim + 1)
      throw shape_error(path.string() + ":" + std::to_string(reader.line()) + ": row has " +
                        std::to_string(fields.size() - 1) + " values, expected " +
                        std::to_string(dim));
    ids.push_back(fields[0]);
    for (size_t c = 1; c < fields.size(); ++c) {
      const double v = parse_double_field(fields[c], path.string(), reader.line());
      if (!std::isfinite(v))
        throw numeric_error(path.string() + ":" + std::to_string(reader.line()) +
                            ": non-finite value");
      data.push_back(v);
    }
  }
  EmbeddingTable table;
  table.ids = std::move(ids);
  table.values.rows = table.ids.size();
  table.values.cols = dim;
  table.values.data = std::move(data);
  check_unique_ids(table.ids, path.string());
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, size_t expected_dim) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw io_error("cannot open " + path.string());
  char magic[4] = {};
  probe.read(magic, 4);
  probe.close();
  if (probe.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0)
    return read_embeddings_xaln(path, expected_dim);
  return read_embeddings_csv(path, expected_dim);
}

void write_xaln_block_f64(std::ostream& out, const DenseMatrix& m) {
  out.write(kMagic, 4);
  write_u32(out, kXalnVersionF64);
  write_u32(out, static_cast<uint32_t>(m.rows));
  write_u32(out, static_cast<uint32_t>(m.cols));
  out.write(reinterpret_cast<const char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  if (!out) throw io_error("write failure in parameter block");
}

DenseMatrix read_xaln_block_f64(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw format_error("parameter block: bad magic");
  const uint32_t version = read_u32(in, "parameter block");
  if (version != kXalnVersionF64)
    throw format_error("parameter block: unsupported version " + std::to_string(version));
  const uint32_t rows = read_u32(in, "parameter block");
  const uint32_t cols = read_u32(in, "parameter block");
  DenseMatrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data.data()),
          static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  if (!in) throw format_error("parameter block: truncated payload");
  return m;
}

}  // namespace xalign
