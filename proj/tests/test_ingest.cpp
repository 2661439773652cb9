#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <vector>

#include "xalign/dataset.hpp"
#include "xalign/embedding_io.hpp"
#include "xalign/errors.hpp"
#include "xalign/rng.hpp"

using namespace xalign;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static fs::path dir = [] {
    auto d = fs::temp_directory_path() / "xalign_ingest_test";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Random finite f32 payloads, expressed as doubles, so the v1 round trip is
// exactly representable.
DenseMatrix random_f32_matrix(SeededRng& rng, size_t rows, size_t cols) {
  DenseMatrix m(rows, cols);
  for (auto& v : m.data) {
    float f;
    do {
      const uint32_t bits = static_cast<uint32_t>(rng.next_u64());
      std::memcpy(&f, &bits, sizeof(f));
    } while (!std::isfinite(f));
    v = static_cast<double>(f);
  }
  return m;
}

double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Dense least squares via normal equations + Gaussian elimination; oracle
// quality is fine at test dimensions.
DenseMatrix least_squares(const DenseMatrix& a, const DenseMatrix& b) {
  const size_t d = a.cols;
  DenseMatrix ata(d, d);
  for (size_t i = 0; i < d; ++i)
    for (size_t j = 0; j < d; ++j) {
      double acc = 0;
      for (size_t r = 0; r < a.rows; ++r) acc += a.at(r, i) * a.at(r, j);
      ata.at(i, j) = acc;
    }
  DenseMatrix atb(d, b.cols);
  for (size_t i = 0; i < d; ++i)
    for (size_t j = 0; j < b.cols; ++j) {
      double acc = 0;
      for (size_t r = 0; r < a.rows; ++r) acc += a.at(r, i) * b.at(r, j);
      atb.at(i, j) = acc;
    }
  // solve ata * w = atb with partial pivoting
  DenseMatrix w = atb;
  for (size_t col = 0; col < d; ++col) {
    size_t pivot = col;
    for (size_t r = col + 1; r < d; ++r)
      if (std::fabs(ata.at(r, col)) > std::fabs(ata.at(pivot, col))) pivot = r;
    for (size_t c = 0; c < d; ++c) std::swap(ata.at(col, c), ata.at(pivot, c));
    for (size_t c = 0; c < w.cols; ++c) std::swap(w.at(col, c), w.at(pivot, c));
    const double diag = ata.at(col, col);
    for (size_t r = 0; r < d; ++r) {
      if (r == col) continue;
      const double f = ata.at(r, col) / diag;
      for (size_t c = col; c < d; ++c) ata.at(r, c) -= f * ata.at(col, c);
      for (size_t c = 0; c < w.cols; ++c) w.at(r, c) -= f * w.at(col, c);
    }
  }
  for (size_t r = 0; r < d; ++r)
    for (size_t c = 0; c < w.cols; ++c) w.at(r, c) /= ata.at(r, r);
  return w;
}

}  // namespace

TEST_CASE("xaln binary: 3-row file reads back in order") {
  EmbeddingTable t;
  t.ids = {"a", "b", "c"};
  t.values = DenseMatrix(3, 4);
  for (size_t i = 0; i < t.values.data.size(); ++i)
    t.values.data[i] = static_cast<double>(i) * 0.5f;
  const auto path = temp_dir() / "small.xaln";
  write_embeddings_xaln(path, t);
  const auto back = load_embeddings(path, 4);
  CHECK(back.ids == t.ids);
  CHECK(back.values.data == t.values.data);
}

TEST_CASE("xaln binary: bad magic raises a format error") {
  const auto path = temp_dir() / "bad.xaln";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE1234567890";
  }
  CHECK_THROWS_AS(read_embeddings_xaln(path, 0), Error);
  try {
    read_embeddings_xaln(path, 0);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrKind::Format);
  }
}

TEST_CASE("csv embeddings: wrong arity names the line") {
  const auto path = temp_dir() / "short_row.csv";
  {
    std::ofstream out(path);
    out << "source_id,v0,v1,v2,v3,v4,v5,v6,v7\n";
    out << "a,1,2,3,4,5,6,7,8\n";
    out << "b,1,2,3,4,5,6,7\n";  // 7 of 8
  }
  try {
    read_embeddings_csv(path, 8);
    FAIL("expected shape error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrKind::Shape);
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
}

TEST_CASE("csv embeddings: NaN input is a numeric error naming the line") {
  const auto path = temp_dir() / "nan_row.csv";
  {
    std::ofstream out(path);
    out << "source_id,v0,v1\n";
    out << "a,1,nan\n";
  }
  try {
    read_embeddings_csv(path, 2);
    FAIL("expected numeric error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrKind::Numeric);
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
}

TEST_CASE("xaln round trip: 1000 random vectors are bitwise equal") {
  SeededRng rng(1234);
  EmbeddingTable t;
  t.values = random_f32_matrix(rng, 1000, 16);
  t.ids.reserve(1000);
  for (size_t i = 0; i < 1000; ++i) t.ids.push_back("id" + std::to_string(i));
  const auto path = temp_dir() / "roundtrip.xaln";
  write_embeddings_xaln(path, t);
  const auto back = read_embeddings_xaln(path, 16);
  REQUIRE(back.values.data.size() == t.values.data.size());
  CHECK(std::memcmp(back.values.data.data(), t.values.data.data(),
                    t.values.data.size() * sizeof(double)) == 0);
  CHECK(back.ids == t.ids);
}

TEST_CASE("csv embeddings round trip preserves doubles exactly") {
  SeededRng rng(99);
  EmbeddingTable t;
  t.values = DenseMatrix(50, 6);
  for (auto& v : t.values.data) v = rng.normal() * 1e3;
  for (size_t i = 0; i < 50; ++i) t.ids.push_back("row" + std::to_string(i));
  const auto path = temp_dir() / "roundtrip.csv";
  write_embeddings_csv(path, t);
  const auto back = load_embeddings(path, 6);
  CHECK(back.values.data == t.values.data);  // %.17g is round-trip exact
}

TEST_CASE("make_splits: N=100 gives exact fractions") {
  std::vector<std::string> ids;
  for (int i = 0; i < 100; ++i) ids.push_back("s" + std::to_string(i));
  const auto splits = make_splits(ids, 7);
  CHECK(splits.counts() == std::array<size_t, 4>{69, 1, 15, 15});
}

TEST_CASE("make_splits: N=11447 follows floor-plus-remainder-to-train") {
  std::vector<std::string> ids;
  ids.reserve(11447);
  for (int i = 0; i < 11447; ++i) ids.push_back("s" + std::to_string(i));
  const auto splits = make_splits(ids, 42);
  const auto c = splits.counts();
  // floor: 7898 + 114 + 1717 + 1717 = 11446, remainder 1 -> train
  CHECK(c == std::array<size_t, 4>{7899, 114, 1717, 1717});
  CHECK(c[0] + c[1] + c[2] + c[3] == 11447);
  const std::array<double, 4> fr{0.69, 0.01, 0.15, 0.15};
  for (size_t s = 0; s < 4; ++s)
    CHECK(std::fabs(static_cast<double>(c[s]) - fr[s] * 11447.0) <= 1.0);
}

TEST_CASE("make_splits: deterministic and a partition for any N and seed") {
  SeededRng rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    const size_t n = 4 + rng.below(400);
    const uint64_t seed = rng.next_u64();
    std::vector<std::string> ids;
    for (size_t i = 0; i < n; ++i) ids.push_back("x" + std::to_string(i));
    const auto a = make_splits(ids, seed);
    const auto b = make_splits(ids, seed);
    REQUIRE(a.label.size() == n);  // every id exactly once
    for (const auto& id : ids) {
      REQUIRE(a.label.count(id) == 1);
      CHECK(a.label.at(id) == b.label.at(id));
    }
    const auto c = a.counts();
    CHECK(c[0] + c[1] + c[2] + c[3] == n);
  }
}

TEST_CASE("make_splits: too few ids raises") {
  CHECK_THROWS_AS(make_splits({"a", "b", "c"}, 1), Error);
}

TEST_CASE("join_dataset: reports ids without physicals") {
  std::vector<EmbeddingPair> pairs = {{"a", {1, 2}, {3, 4, 5}}, {"b", {5, 6}, {7, 8, 9}}};
  std::vector<PhysicalRecord> phys(1);
  phys[0].source_id = "a";
  phys[0].values[0] = 1.5;
  SplitAssignment splits;
  splits.label = {{"a", Split::Train}, {"b", Split::Test}};
  const auto store = join_dataset(pairs, phys, splits);
  CHECK(store.missing_physicals == std::vector<std::string>{"b"});
  CHECK(store.physical_value(0, 0) == 1.5);
  CHECK_FALSE(store.physical_value(1, 0));
  CHECK_FALSE(store.physical_value(0, 1));
}

TEST_CASE("join_dataset: physical id not among pairs raises") {
  std::vector<EmbeddingPair> pairs = {{"a", {1}, {2}}, {"b", {3}, {4}}};
  std::vector<PhysicalRecord> phys(1);
  phys[0].source_id = "zz";
  SplitAssignment splits;
  splits.label = {{"a", Split::Train}, {"b", Split::Test}};
  CHECK_THROWS_AS(join_dataset(pairs, phys, splits), Error);
}

TEST_CASE("join_dataset: empty input raises") {
  CHECK_THROWS_AS(join_dataset({}, {}, SplitAssignment{}), Error);
}

TEST_CASE("join_dataset: missing split label raises") {
  std::vector<EmbeddingPair> pairs = {{"a", {1}, {2}}, {"b", {3}, {4}}};
  SplitAssignment splits;
  splits.label = {{"a", Split::Train}};
  CHECK_THROWS_AS(join_dataset(pairs, {}, splits), Error);
}

TEST_CASE("synth: identical seeds give identical stores") {
  const auto a = synth_dataset(16, 4, 0.25, 99, 8, 12);
  const auto b = synth_dataset(16, 4, 0.25, 99, 8, 12);
  CHECK(a.store.ids == b.store.ids);
  CHECK(a.store.spectral.data == b.store.spectral.data);
  CHECK(a.store.text.data == b.store.text.data);
  CHECK(a.store.physical.data == b.store.physical.data);
  CHECK(a.store.split == b.store.split);
}

TEST_CASE("synth noise 0: both modalities are exact linear images of z") {
  const auto synth = synth_dataset(64, 4, 0.0, 21, 16, 24);
  const auto& s = synth.store.spectral;
  const auto& t = synth.store.text;
  // text must be exactly linearly predictable from spectral
  const DenseMatrix w = least_squares(s, t);
  double resid = 0, total = 0;
  for (size_t r = 0; r < s.rows; ++r)
    for (size_t c = 0; c < t.cols; ++c) {
      double pred = 0;
      for (size_t k = 0; k < s.cols; ++k) pred += s.at(r, k) * w.at(k, c);
      resid += (pred - t.at(r, c)) * (pred - t.at(r, c));
      total += t.at(r, c) * t.at(r, c);
    }
  CHECK(resid / total < 1e-18);
}

TEST_CASE("synth noise 0: oracle map gives a perfect cross-modal match") {
  const auto synth = synth_dataset(48, 4, 0.0, 33, 12, 20);
  const auto& s = synth.store.spectral;
  const auto& t = synth.store.text;
  const DenseMatrix w = least_squares(s, t);
  for (size_t i = 0; i < s.rows; ++i) {
    std::vector<double> pred(t.cols, 0.0);
    for (size_t k = 0; k < s.cols; ++k)
      for (size_t c = 0; c < t.cols; ++c) pred[c] += s.at(i, k) * w.at(k, c);
    size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < t.rows; ++j) {
      double d = 0;
      for (size_t c = 0; c < t.cols; ++c)
        d += (pred[c] - t.at(j, c)) * (pred[c] - t.at(j, c));
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    CHECK(best == i);
  }
}

TEST_CASE("synth: variables track their defining latent coordinate") {
  const size_t latent_dim = 6;
  const auto synth = synth_dataset(4000, latent_dim, 0.1, 7, 16, 8);
  for (size_t j : {size_t{0}, size_t{3}, size_t{11}, size_t{19}}) {
    const size_t k = j % latent_dim;
    std::vector<double> var, zk;
    for (size_t i = 0; i < synth.store.size(); ++i) {
      var.push_back(*synth.store.physical_value(i, j));
      zk.push_back(synth.latent.at(i, k));
    }
    CHECK(pearson_oracle(var, zk) > 0.95);
  }
}

TEST_CASE("physicals csv round trip with missing cells") {
  std::vector<PhysicalRecord> recs(2);
  recs[0].source_id = "a";
  recs[0].values[0] = 0.25;
  recs[0].values[19] = -3.5;
  recs[1].source_id = "b";
  recs[1].values[5] = 1e-7;
  const auto path = temp_dir() / "phys.csv";
  write_physicals_csv(path, recs);
  const auto back = read_physicals_csv(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].values[0] == 0.25);
  CHECK(back[0].values[19] == -3.5);
  CHECK_FALSE(back[0].values[1]);
  CHECK(back[1].values[5] == 1e-7);
}

TEST_CASE("splits csv round trip") {
  std::vector<std::string> ids = {"a", "b", "c", "d", "e"};
  const auto splits = make_splits(ids, 3);
  const auto path = temp_dir() / "splits.csv";
  write_splits_csv(path, ids, splits);
  const auto back = read_splits_csv(path);
  for (const auto& id : ids) CHECK(back.label.at(id) == splits.label.at(id));
}

TEST_CASE("physical variable schema") {
  CHECK(kPhysicalVariableCount == 20);
  CHECK(physical_variable_index("hard_hs") == 0);
  CHECK(physical_variable_index("flux_significance_b") == 19);
  CHECK(physical_variable_index("nope") == -1);
}
