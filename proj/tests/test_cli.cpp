// End-to-end CLI tests: drive the installed binary through subprocesses and
// check exit codes, output files, and byte-level determinism.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kBin = XALIGN_BIN;

fs::path scratch_root() {
  static fs::path root = [] {
    auto p = fs::temp_directory_path() / "xalign_cli_test";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

int run(const std::string& args) {
  const std::string cmd = kBin + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.is_open());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// shared fixture: one synthetic dataset + one trained checkpoint
struct Fixture {
  fs::path data;
  fs::path run;
  std::string data_flags;
};

const Fixture& fixture() {
  static Fixture fx = [] {
    Fixture f;
    f.data = scratch_root() / "data";
    f.run = scratch_root() / "run";
    REQUIRE(run("synth --n 256 --latent-dim 4 --noise 0.1 --spectral-dim 12 --text-dim 20 "
                "--seed 5 --out " +
                f.data.string()) == 0);
    f.data_flags = "--spectral-embeddings " + (f.data / "spectral_embeddings.xaln").string() +
                   " --text-embeddings " + (f.data / "text_embeddings.xaln").string() +
                   " --splits " + (f.data / "splits.csv").string() +
                   " --spectral-dim 12 --text-dim 20";
    REQUIRE(run("train " + f.data_flags + " --physicals " +
                (f.data / "physicals.csv").string() +
                " --shared_dim 16 --spectral-hidden 24 --text-hidden 24 --batch_size 16 "
                "--max_epochs 6 --seed 5 --out " +
                f.run.string()) == 0);
    return f;
  }();
  return fx;
}

}  // namespace

TEST_CASE("synth writes the documented dataset files") {
  const auto& fx = fixture();
  for (const char* name : {"spectral_embeddings.xaln", "spectral_embeddings.xaln.ids.csv",
                           "text_embeddings.xaln", "text_embeddings.xaln.ids.csv",
                           "physicals.csv", "splits.csv", "manifest.json"})
    CHECK(fs::exists(fx.data / name));

  // N=100 hits the exact 69/1/15/15 fractions
  const fs::path d2 = scratch_root() / "data100";
  REQUIRE(run("synth --n 100 --latent-dim 3 --spectral-dim 8 --text-dim 10 --seed 2 --out " +
              d2.string()) == 0);
  std::ifstream splits(d2 / "splits.csv");
  std::string line;
  std::getline(splits, line);  // header
  size_t train = 0, cal = 0, val = 0, test = 0;
  while (std::getline(splits, line)) {
    if (line.find(",train") != std::string::npos) ++train;
    if (line.find(",calibration") != std::string::npos) ++cal;
    if (line.find(",validation") != std::string::npos) ++val;
    if (line.find(",test") != std::string::npos) ++test;
  }
  CHECK(train == 69);
  CHECK(cal == 1);
  CHECK(val == 15);
  CHECK(test == 15);
}

TEST_CASE("train emits checkpoint, log, and manifest provenance") {
  const auto& fx = fixture();
  CHECK(fs::exists(fx.run / "model.ckpt"));
  CHECK(fs::exists(fx.run / "train_log.json"));
  const auto manifest = json::parse(slurp(fx.run / "manifest.json"));
  REQUIRE(manifest.contains("runs"));
  const auto& runs = manifest["runs"];
  REQUIRE(!runs.empty());
  CHECK(runs[0]["command"] == "train");
  CHECK(runs[0]["seed"] == 5);
  CHECK(!runs[0]["inputs"].empty());
  CHECK(!runs[0]["outputs"].empty());
  for (const auto& entry : runs[0]["outputs"])
    CHECK(entry["fnv1a64"].get<std::string>().size() == 16);
}

TEST_CASE("evaluation commands run end to end") {
  const auto& fx = fixture();
  const fs::path ev = scratch_root() / "eval";
  REQUIRE(run("eval-retrieval " + fx.data_flags + " --checkpoint " +
              (fx.run / "model.ckpt").string() + " --out " + ev.string()) == 0);
  CHECK(fs::exists(ev / "retrieval_report.json"));
  CHECK(fs::exists(ev / "recall_curve.csv"));
  const auto report = json::parse(slurp(ev / "retrieval_report.json"));
  CHECK(report["candidate_count"].get<size_t>() > 0);
  CHECK(report["recall_at"].contains("100"));
  CHECK(report["recall_at"]["100"] == 1.0);

  REQUIRE(run("eval-regression " + fx.data_flags + " --physicals " +
              (fx.data / "physicals.csv").string() + " --checkpoint " +
              (fx.run / "model.ckpt").string() + " --bootstrap 50 --out " +
              (scratch_root() / "evreg").string()) == 0);
  const auto reg =
      json::parse(slurp(scratch_root() / "evreg" / "regression_report.json"));
  CHECK(reg["variables"].size() == 20);
  CHECK(fs::exists(scratch_root() / "evreg" / "regression_report.csv"));
  CHECK(fs::exists(scratch_root() / "evreg" / "correlation_table.json"));
  CHECK(fs::exists(scratch_root() / "evreg" / "correlation_table.csv"));

  REQUIRE(run("detect-outliers " + fx.data_flags + " --checkpoint " +
              (fx.run / "model.ckpt").string() + " --split all --quantile 0.02 --out " +
              (scratch_root() / "anom").string()) == 0);
  const auto anom = json::parse(slurp(scratch_root() / "anom" / "anomaly_report.json"));
  CHECK(anom["scores"].size() == 256);
  CHECK(anom["flagged"].size() == 6);  // ceil(0.02 * 256)

  REQUIRE(run("tune-temp " + fx.data_flags + " --checkpoint " +
              (fx.run / "model.ckpt").string() + " --out " +
              (scratch_root() / "tt").string()) == 0);
  CHECK(fs::exists(scratch_root() / "tt" / "model_tuned.ckpt"));
}

TEST_CASE("export-latents round-trips and the fused dims add up") {
  const auto& fx = fixture();
  const fs::path ex = scratch_root() / "latents";
  REQUIRE(run("export-latents " + fx.data_flags + " --checkpoint " +
              (fx.run / "model.ckpt").string() + " --out " + ex.string()) == 0);
  for (const char* name :
       {"latents_pre_spectra.xaln", "latents_pre_text.xaln", "latents_post_spectra.xaln",
        "latents_post_text.xaln", "latents_post_both.xaln"})
    CHECK(fs::exists(ex / name));

  // reload one export through the CLI-compatible reader: re-export must be
  // byte-identical (bitwise round trip)
  const fs::path ex2 = scratch_root() / "latents2";
  REQUIRE(run("export-latents " + fx.data_flags + " --checkpoint " +
              (fx.run / "model.ckpt").string() + " --out " + ex2.string()) == 0);
  CHECK(slurp(ex / "latents_post_both.xaln") == slurp(ex2 / "latents_post_both.xaln"));
}

TEST_CASE("identical seeds produce byte-identical artifacts") {
  const auto& fx = fixture();
  const fs::path run_b = scratch_root() / "run_b";
  REQUIRE(run("train " + fx.data_flags + " --physicals " +
              (fx.data / "physicals.csv").string() +
              " --shared_dim 16 --spectral-hidden 24 --text-hidden 24 --batch_size 16 "
              "--max_epochs 6 --seed 5 --out " +
              run_b.string()) == 0);
  CHECK(slurp(fx.run / "model.ckpt") == slurp(run_b / "model.ckpt"));
  CHECK(slurp(fx.run / "train_log.json") == slurp(run_b / "train_log.json"));

  const fs::path ev_a = scratch_root() / "det_a";
  const fs::path ev_b = scratch_root() / "det_b";
  for (const auto& dir : {ev_a, ev_b})
    REQUIRE(run("eval-retrieval " + fx.data_flags + " --checkpoint " +
                (fx.run / "model.ckpt").string() + " --seed 5 --out " + dir.string()) == 0);
  CHECK(slurp(ev_a / "retrieval_report.json") == slurp(ev_b / "retrieval_report.json"));
  CHECK(slurp(ev_a / "recall_curve.csv") == slurp(ev_b / "recall_curve.csv"));
}

TEST_CASE("ensemble eval accepts repeated checkpoints") {
  const auto& fx = fixture();
  const fs::path ev = scratch_root() / "ens";
  REQUIRE(run("eval-retrieval " + fx.data_flags + " --checkpoint " +
              (fx.run / "model.ckpt").string() + " --checkpoint " +
              (fx.run / "model.ckpt").string() + " --out " + ev.string()) == 0);
  const auto report = json::parse(slurp(ev / "retrieval_report.json"));
  CHECK(report["ensemble_size"] == 2);
}

TEST_CASE("preprocess handles degenerate spectra and rejects empty input") {
  const fs::path dir = scratch_root() / "prep";
  fs::create_directories(dir);
  // two spectra: one constant (degenerate), one ramp
  {
    std::ofstream raw(dir / "raw.csv");
    raw << "source_id";
    for (int b = 0; b < 400; ++b) raw << ",b" << b;
    raw << "\nflat";
    for (int b = 0; b < 400; ++b) raw << ",3.5";
    raw << "\nramp";
    for (int b = 0; b < 400; ++b) raw << ',' << b * 0.01;
    raw << "\n";
  }
  REQUIRE(run("preprocess --spectra " + (dir / "raw.csv").string() + " --out " +
              (dir / "out").string()) == 0);
  const auto report = json::parse(slurp(dir / "out" / "preprocess_report.json"));
  CHECK(report["rows"] == 2);
  CHECK(report["degenerate_count"] == 1);
  CHECK(report["degenerate_ids"][0] == "flat");

  {
    std::ofstream empty(dir / "empty.csv");
  }
  CHECK(run("preprocess --spectra " + (dir / "empty.csv").string() + " --out " +
            (dir / "out2").string()) == 2);
}

TEST_CASE("exit codes: format errors are 2, config errors are 3") {
  const auto& fx = fixture();
  const fs::path dir = scratch_root() / "errors";
  fs::create_directories(dir);

  // malformed embeddings: row with the wrong arity -> exit 2
  {
    std::ofstream bad(dir / "bad.csv");
    bad << "source_id,v0,v1\n";
    bad << "a,1.0\n";
  }
  CHECK(run("eval-retrieval --spectral-embeddings " + (dir / "bad.csv").string() +
            " --text-embeddings " + (fx.data / "text_embeddings.xaln").string() +
            " --splits " + (fx.data / "splits.csv").string() +
            " --spectral-dim 2 --text-dim 20 --checkpoint " +
            (fx.run / "model.ckpt").string() + " --out " + (dir / "o1").string()) == 2);

  // checkpoint/data dimension mismatch -> exit 3
  const fs::path other = scratch_root() / "data16";
  REQUIRE(run("synth --n 64 --latent-dim 4 --spectral-dim 16 --text-dim 20 --seed 3 --out " +
              other.string()) == 0);
  CHECK(run("eval-retrieval --spectral-embeddings " +
            (other / "spectral_embeddings.xaln").string() + " --text-embeddings " +
            (other / "text_embeddings.xaln").string() + " --splits " +
            (other / "splits.csv").string() + " --spectral-dim 16 --text-dim 20 " +
            "--checkpoint " + (fx.run / "model.ckpt").string() + " --out " +
            (dir / "o2").string()) == 3);

  // missing required input -> exit 3
  CHECK(run("eval-retrieval --out " + (dir / "o3").string()) == 3);

  // unknown split label in the splits file -> exit 2
  {
    std::ofstream bad(dir / "bad_splits.csv");
    bad << "source_id,split\nS000000,holdout\n";
  }
  CHECK(run("eval-retrieval " + std::string("--spectral-embeddings ") +
            (fx.data / "spectral_embeddings.xaln").string() + " --text-embeddings " +
            (fx.data / "text_embeddings.xaln").string() + " --splits " +
            (dir / "bad_splits.csv").string() + " --spectral-dim 12 --text-dim 20 " +
            "--checkpoint " + (fx.run / "model.ckpt").string() + " --out " +
            (dir / "o4").string()) == 2);
}

TEST_CASE("config file values apply and flags override them") {
  const auto& fx = fixture();
  const fs::path dir = scratch_root() / "cfg";
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "# comment line\n";
    cfg << "synth.n = 64\n";
    cfg << "synth.latent_dim = 3\n";
    cfg << "synth.spectral_dim = 8\n";
    cfg << "synth.text_dim = 10\n";
    cfg << "run.seed = 11\n";
  }
  REQUIRE(run("--config " + (dir / "run.cfg").string() + " synth --out " +
              (dir / "from_cfg").string()) == 0);
  std::ifstream ids(dir / "from_cfg" / "spectral_embeddings.xaln.ids.csv");
  std::string line;
  size_t rows = 0;
  std::getline(ids, line);
  while (std::getline(ids, line)) ++rows;
  CHECK(rows == 64);

  // flag overrides the file value
  REQUIRE(run("--config " + (dir / "run.cfg").string() + " synth --n 32 --out " +
              (dir / "flag_wins").string()) == 0);
  std::ifstream ids2(dir / "flag_wins" / "spectral_embeddings.xaln.ids.csv");
  rows = 0;
  std::getline(ids2, line);
  while (std::getline(ids2, line)) ++rows;
  CHECK(rows == 32);
  (void)fx;
}

TEST_CASE("grid-search writes a ranked leaderboard and checkpoints") {
  const auto& fx = fixture();
  const fs::path dir = scratch_root() / "grid";
  REQUIRE(run("grid-search " + fx.data_flags +
              " --grid-lr 0.001,0.0005 --grid-shared-dim 16 --grid-hidden 24 "
              "--batch_size 16 --max_epochs 3 --seed 6 --out " +
              dir.string()) == 0);
  const auto board = json::parse(slurp(dir / "leaderboard.json"));
  REQUIRE(board["leaderboard"].size() == 2);
  CHECK(board["failures"].empty());
  CHECK(board["leaderboard"][0]["rank"] == 1);
  CHECK(fs::exists(dir / "grid_000.ckpt"));
  CHECK(fs::exists(dir / "grid_001.ckpt"));
  const double r0 = board["leaderboard"][0]["recall_at_1pct"].get<double>();
  const double r1 = board["leaderboard"][1]["recall_at_1pct"].get<double>();
  CHECK(r0 >= r1);
}
