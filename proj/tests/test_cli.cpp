#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include <json.hpp>

#include "rasor/cli.hpp"
#include "rasor/data.hpp"
#include "rasor/eval.hpp"
#include "support.hpp"

using namespace rasor;
using namespace testsupport;
namespace fs = std::filesystem;

namespace {

int run(std::initializer_list<std::string> args) {
  std::vector<std::string> argv{"rasor"};
  argv.insert(argv.end(), args.begin(), args.end());
  return cli_main(argv);
}

// tiny-but-real settings reused across the commands under test
std::vector<std::string> tiny_sets() {
  return {"--set", "emb_dim=16",   "--set", "d=8",
          "--set", "ffnn_width=8", "--set", "q_layers=1",
          "--set", "p_layers=1",   "--set", "num_buckets=16",
          "--set", "dropout=0.0",  "--set", "max_steps=12",
          "--set", "eval_interval=6"};
}

int run_train_fixture(const std::string& out,
                      std::vector<std::string> extra = {}) {
  std::vector<std::string> argv{"rasor",
                                "train",
                                "--data",
                                fixture_path("synthetic_train.json"),
                                "--embeddings",
                                fixture_path("glove_tiny.txt"),
                                "--out",
                                out};
  for (const auto& s : tiny_sets()) argv.push_back(s);
  for (const auto& s : extra) argv.push_back(s);
  return cli_main(argv);
}

}  // namespace

TEST_CASE("train: fixture run exits 0 and writes checkpoints, log, config") {
  TempDir dir("cli-train");
  REQUIRE(run_train_fixture(dir.file("run")) == kExitOk);
  CHECK(fs::exists(dir.file("run") + "/checkpoint_6.ckpt"));
  CHECK(fs::exists(dir.file("run") + "/checkpoint_12.ckpt"));
  CHECK(fs::exists(dir.file("run") + "/final.ckpt"));
  std::string log = read_file(dir.file("run") + "/train.log");
  CHECK(log.find("objective=span_softmax") != std::string::npos);
  CHECK(log.find("step=0 loss=") != std::string::npos);
  CHECK(log.find("lr=0.001") != std::string::npos);
  CHECK(log.find("dropped_unalignable=0") != std::string::npos);
  // the dumped config is itself a loadable config file
  std::string cfg = read_file(dir.file("run") + "/config.txt");
  CHECK(cfg.find("d=8\n") != std::string::npos);
  CHECK(cfg.find("max_steps=12\n") != std::string::npos);
}

TEST_CASE("train: --set objective switches the logged objective") {
  TempDir dir("cli-obj");
  REQUIRE(run_train_fixture(dir.file("run"),
                            {"--set", "objective=membership"}) == kExitOk);
  std::string log = read_file(dir.file("run") + "/train.log");
  CHECK(log.find("objective=membership") != std::string::npos);
  CHECK(log.find("objective=span_softmax") == std::string::npos);
}

TEST_CASE("train: error exit codes distinguish config from io") {
  TempDir dir("cli-err");
  // nonexistent config file is a usage/config error naming the path
  CHECK(run({"train", "--config", dir.file("nope.cfg"), "--data", "x",
             "--embeddings", "y", "--out", dir.file("o")}) == kExitUsage);
  // unreadable data is an io error
  CHECK(run({"train", "--data", dir.file("nope.json"), "--embeddings",
             fixture_path("glove_tiny.txt"), "--out", dir.file("o"), "--set",
             "emb_dim=16"}) == kExitIo);
  // bad override value
  CHECK(run_train_fixture(dir.file("o2"), {"--set", "objective=bogus"}) ==
        kExitUsage);
  // missing required flag
  CHECK(run({"train", "--data", fixture_path("synthetic_train.json"),
             "--embeddings", fixture_path("glove_tiny.txt")}) == kExitUsage);
}

TEST_CASE("cli: unknown verbs and missing verbs are usage errors") {
  CHECK(run({"frobnicate"}) == kExitUsage);
  CHECK(cli_main({"rasor"}) == kExitUsage);
}

TEST_CASE("predict/evaluate/analyze round trip on a trained checkpoint") {
  TempDir dir("cli-e2e");
  REQUIRE(run_train_fixture(dir.file("run")) == kExitOk);
  std::string ckpt = dir.file("run") + "/final.ckpt";

  SUBCASE("predict covers every qid exactly once, idempotently") {
    REQUIRE(run({"predict", "--checkpoint", ckpt, "--data",
                 fixture_path("synthetic_train.json"), "--embeddings",
                 fixture_path("glove_tiny.txt"), "--out",
                 dir.file("preds.json")}) == kExitOk);
    auto preds = load_predictions(dir.file("preds.json"));
    auto raw = parse_dataset(fixture_path("synthetic_train.json"));
    REQUIRE(preds.size() == raw.size());
    for (const auto& ex : raw) {
      REQUIRE(preds.count(ex.id) == 1);
      // recovered answers are passage substrings
      CHECK(ex.passage.find(preds[ex.id]) != std::string::npos);
    }
    std::string first = read_file(dir.file("preds.json"));
    REQUIRE(run({"predict", "--checkpoint", ckpt, "--data",
                 fixture_path("synthetic_train.json"), "--embeddings",
                 fixture_path("glove_tiny.txt"), "--out",
                 dir.file("preds.json")}) == kExitOk);
    CHECK(read_file(dir.file("preds.json")) == first);  // byte-identical
  }

  SUBCASE("evaluate on gold answers reports EM 100") {
    auto data = prepare_dataset(
        parse_dataset(fixture_path("synthetic_train.json")), true);
    std::map<std::string, std::string> perfect;
    for (const auto& ex : data.examples) perfect[ex.id] = ex.gold_texts[0];
    save_predictions(perfect, dir.file("gold_preds.json"));
    REQUIRE(run({"evaluate", "--predictions", dir.file("gold_preds.json"),
                 "--data", fixture_path("synthetic_train.json"), "--out",
                 dir.file("report.json")}) == kExitOk);
    auto j = nlohmann::json::parse(read_file(dir.file("report.json")));
    CHECK(j["exact_match"] == 100.0);
    CHECK(j["f1"] == 100.0);
    CHECK(j["total"] == 32);
  }

  SUBCASE("evaluate flags malformed prediction files") {
    write_file(dir.file("bad.json"), "not json");
    CHECK(run({"evaluate", "--predictions", dir.file("bad.json"), "--data",
               fixture_path("synthetic_train.json"), "--out",
               dir.file("r.json")}) == kExitUsage);
  }

  SUBCASE("analyze emits the length csv and one attention dump per qid") {
    REQUIRE(run({"analyze", "--checkpoint", ckpt, "--data",
                 fixture_path("synthetic_train.json"), "--embeddings",
                 fixture_path("glove_tiny.txt"), "--out",
                 dir.file("analysis")}) == kExitOk);
    CHECK(fs::exists(dir.file("analysis") + "/length_buckets.csv"));
    std::string csv = read_file(dir.file("analysis") + "/length_buckets.csv");
    CHECK(csv.rfind("length,count,em,f1\n", 0) == 0);
    auto raw = parse_dataset(fixture_path("synthetic_train.json"));
    long dumps = 0;
    for (const auto& ex : raw) {
      std::string path =
          dir.file("analysis") + "/attention_" + ex.id + ".json";
      REQUIRE(fs::exists(path));
      auto j = nlohmann::json::parse(read_file(path));
      CHECK(j["qid"] == ex.id);
      CHECK(j["top_spans"].size() == 3);
      ++dumps;
    }
    CHECK(dumps == 32);
  }

  SUBCASE("checkpoints from a different architecture are rejected") {
    CHECK(run({"predict", "--checkpoint", ckpt, "--data",
               fixture_path("synthetic_train.json"), "--embeddings",
               fixture_path("glove_tiny.txt"), "--out", dir.file("p.json"),
               "--set", "d=9"}) == kExitUsage);
  }
}

TEST_CASE("gradcheck: default toy configuration passes at 64-bit") {
  CHECK(run({"gradcheck"}) == kExitOk);
}
