// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <sstream>

#include "ccnn/cli.hpp"
#include "ccnn/synth.hpp"
#include "ccnn/text.hpp"
#include "ccnn/transfer.hpp"
#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"

using namespace ccnn;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run ccnn_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ccnn_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

fs::path synth_config_path() { return fs::temp_directory_path() / "ccnn_cli_test_synth_cfg.json"; }

// Small synthetic sites shared by the tests.
const fs::path& synth_dir() {
  static const fs::path dir = [] {
    const fs::path d = scratch("synth");
    const fs::path cfg = synth_config_path();
    std::ofstream(cfg) << "{\"n_source\": 400, \"n_target\": 400}";
    const auto r = ccnn_run({"synth", "--config", cfg.string(), "--seed", "3", "--out", d.string()});
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

std::vector<std::string> train_args(const fs::path& out, const std::string& table = "onehot.emb.jsonl") {
  const fs::path d = synth_dir();
  return {"train", "--data", (d / "source.csv").string(), "--vocab", (d / "vocabulary.json").string(), "--table",
          (d / table).string(), "--epochs", "3", "--filters", "16", "--seed", "11", "--out", out.string()};
}

}  // namespace

TEST_CASE("onehot writes a 145-dimensional table for the influenza vocabulary") {
  const fs::path out = scratch("onehot");
  const auto r = ccnn_run({"onehot", "--vocab", (synth_dir() / "vocabulary.json").string(), "--out", out.string()});
  REQUIRE(r.code == cli::kExitOk);
  const auto table = load_embedding_table(slurp(out / "onehot.emb.jsonl"));
  CHECK(table.dimension() == 145);
  CHECK(fs::exists(out / "manifest.json"));
}

TEST_CASE("onehot for a one-concept vocabulary writes two rows") {
  const fs::path out = scratch("onehot_small");
  fs::create_directories(out);
  std::ofstream(out / "v.json") << ConceptVocabulary({{"cough", {"P", "A"}, std::nullopt}}).to_json();
  REQUIRE(ccnn_run({"onehot", "--vocab", (out / "v.json").string(), "--out", out.string()}).code == 0);
  const auto text = slurp(out / "onehot.emb.jsonl");
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}

TEST_CASE("missing vocabulary file is a data error") {
  const auto r = ccnn_run({"onehot", "--vocab", "/nonexistent/vocab.json", "--out", scratch("x").string()});
  CHECK(r.code == cli::kExitData);
  CHECK(r.err.find("cannot read") != std::string::npos);
}

TEST_CASE("usage errors") {
  CHECK(ccnn_run({}).code == cli::kExitUsage);
  CHECK(ccnn_run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(ccnn_run({"train", "--data", "x"}).code == cli::kExitUsage);
  auto args = train_args(scratch("freeze_all"));
  args.insert(args.end(), {"--freeze", "conv,fc"});
  const auto r = ccnn_run(args);
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("--freeze") != std::string::npos);
  auto bad_strategy = ccnn_run({"transfer", "--source-ckpt", "x", "--strategy", "sideways", "--out",
                                scratch("bad_strategy").string()});
  CHECK(bad_strategy.code == cli::kExitUsage);
  CHECK(ccnn_run({"--help"}).code == cli::kExitOk);
}

TEST_CASE("train is byte-deterministic and its checkpoint feeds transfer") {
  const fs::path a = scratch("train_a"), b = scratch("train_b");
  REQUIRE(ccnn_run(train_args(a)).code == 0);
  REQUIRE(ccnn_run(train_args(b)).code == 0);
  for (const char* f : {"checkpoint.json", "history.json", "manifest.json"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const auto ck = load_checkpoint(slurp(a / "checkpoint.json"));
  CHECK(ck.provenance.created_by == "ccnn train");
  CHECK(ck.provenance.seed == 11);
  CHECK(ck.model.num_filters() == 16);

  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  CHECK(manifest["subcommand"] == "train");
  CHECK(manifest["seed"] == 11);
  CHECK(manifest["config"]["epochs"] == 3);
  CHECK(manifest["config"]["learning_rate"] == 0.001);
  CHECK(manifest["inputs"]["data"][0]["sha256"] == sha256_hex(slurp(synth_dir() / "source.csv")));
  CHECK(manifest["outputs"] == nlohmann::json::array({"checkpoint.json", "history.json"}));

  const fs::path d = synth_dir();
  for (const char* strategy : {"direct", "linear", "full"}) {
    CAPTURE(strategy);
    const fs::path out = scratch(std::string("transfer_") + strategy);
    const auto r = ccnn_run({"transfer", "--source-ckpt", (a / "checkpoint.json").string(), "--strategy", strategy,
                             "--data", (d / "target.csv").string(), "--vocab", (d / "vocabulary.json").string(),
                             "--table", (d / "onehot.emb.jsonl").string(), "--epochs", "2", "--seed", "5", "--out",
                             out.string()});
    REQUIRE(r.code == 0);
    const auto t = load_checkpoint(slurp(out / "checkpoint.json"));
    if (std::string(strategy) == "direct") CHECK(t.model.same_parameters(ck.model));
    if (std::string(strategy) == "linear") {
      CHECK(t.model.conv_filters() == ck.model.conv_filters());
    }
    CHECK(fs::exists(out / "report.json"));
  }
}

TEST_CASE("config file is overridden by flags") {
  const fs::path out = scratch("precedence");
  fs::create_directories(out);
  std::ofstream(out / "cfg.json") << R"({"epochs": 2, "batch_size": 64, "learning_rate": 0.01})";
  auto args = train_args(out / "run");
  args.insert(args.end(), {"--config", (out / "cfg.json").string(), "--lr", "0.005"});
  REQUIRE(ccnn_run(args).code == 0);
  const auto m = nlohmann::json::parse(slurp(out / "run" / "manifest.json"));
  CHECK(m["config"]["epochs"] == 3);  // flag
  CHECK(m["config"]["batch_size"] == 64);  // file
  CHECK(m["config"]["learning_rate"] == 0.005);  // flag
  CHECK(m["config"]["optimizer"] == "adam");  // default

  std::ofstream(out / "bad.json") << R"({"epoch": 2})";
  auto bad = train_args(out / "bad");
  bad.insert(bad.end(), {"--config", (out / "bad.json").string()});
  CHECK(ccnn_run(bad).code == cli::kExitUsage);
}

TEST_CASE("transfer fails on dimension mismatch before training") {
  const fs::path src = scratch("mismatch_src");
  REQUIRE(ccnn_run(train_args(src, "semantic.emb.jsonl")).code == 0);
  const fs::path d = synth_dir();
  const auto r = ccnn_run({"transfer", "--source-ckpt", (src / "checkpoint.json").string(), "--strategy", "full",
                           "--data", (d / "target.csv").string(), "--vocab", (d / "vocabulary.json").string(),
                           "--table", (d / "onehot.emb.jsonl").string(), "--out", scratch("mismatch").string()});
  CHECK(r.code == cli::kExitData);
  CHECK(r.err.find("dimension mismatch") != std::string::npos);
}

TEST_CASE("eval writes a report table and picks tables by source tag") {
  const fs::path oh = scratch("eval_onehot"), se = scratch("eval_semantic");
  REQUIRE(ccnn_run(train_args(oh)).code == 0);
  REQUIRE(ccnn_run(train_args(se, "semantic.emb.jsonl")).code == 0);
  const fs::path d = synth_dir();
  const fs::path out = scratch("eval");
  std::vector<std::string> args{"eval",
                                "--ckpt", (oh / "checkpoint.json").string(),
                                "--ckpt", (se / "checkpoint.json").string(),
                                "--table", (d / "semantic.emb.jsonl").string(),
                                "--table", (d / "onehot.emb.jsonl").string(),
                                "--data", (d / "source.csv").string(),
                                "--vocab", (d / "vocabulary.json").string(),
                                "--out", out.string()};
  REQUIRE(ccnn_run(args).code == 0);
  const auto tsv = slurp(out / "results.tsv");
  CHECK(tsv.rfind("embedding\tlocal\tdirect\ttune_linear\ttune_full\n", 0) == 0);
  CHECK(tsv.find("\none-hot\t0.") != std::string::npos);
  CHECK(tsv.find("\nsynthetic-semantic\t0.") != std::string::npos);
  const std::string first = slurp(out / "report.json");
  REQUIRE(ccnn_run(args).code == 0);
  CHECK(slurp(out / "report.json") == first);

  const auto missing = ccnn_run({"eval", "--ckpt", (oh / "checkpoint.json").string(), "--table",
                                 (d / "semantic.emb.jsonl").string(), "--data", (d / "source.csv").string(),
                                 "--vocab", (d / "vocabulary.json").string(), "--out", scratch("eval2").string()});
  CHECK(missing.code == cli::kExitData);
}

TEST_CASE("synth outputs are parseable and deterministic") {
  const fs::path d = synth_dir();
  const auto vocab = ConceptVocabulary::parse(slurp(d / "vocabulary.json"));
  CHECK(vocab == influenza_vocabulary());
  CHECK(parse_encounters(slurp(d / "source.csv"), vocab).size() == 400);
  CHECK(parse_encounters(slurp(d / "target.csv"), vocab).size() == 400);
  const auto sem = load_embedding_table(slurp(d / "semantic.emb.jsonl"));
  CHECK(sem.source_tag() == "synthetic-semantic");
  const fs::path again = scratch("synth_again");
  REQUIRE(ccnn_run({"synth", "--config", synth_config_path().string(), "--seed", "3", "--out", again.string()})
              .code == 0);
  for (const auto& entry : fs::directory_iterator(d)) {
    CAPTURE(entry.path().filename().string());
    CHECK(slurp(entry.path()) == slurp(again / entry.path().filename()));
  }
}

TEST_CASE("non-finite embedding values surface as a numeric exit code") {
  const fs::path d = synth_dir();
  const auto r = ccnn_run({"train", "--data", (d / "source.csv").string(), "--vocab",
                           (d / "vocabulary.json").string(), "--table",
                           std::string(CCNN_FIXTURE_DIR) + "/nan_value.emb.jsonl", "--out",
                           scratch("nan").string()});
  CHECK(r.code == cli::kExitNumeric);
}
