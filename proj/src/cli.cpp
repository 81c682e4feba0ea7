#include "rasor/cli.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "rasor/eval.hpp"
#include "rasor/gradcheck.hpp"

namespace rasor {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::string data;
  std::string embeddings;
  std::string checkpoint;
  std::string out;
  std::string predictions;
  std::vector<std::string> sets;
  bool deterministic = true;
  int workers = 0;  // 0: not passed
};

void apply_sets(TrainConfig& cfg, const std::vector<std::string>& sets) {
  for (const auto& kv : sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
}

// A missing config file is a configuration mistake, not an I/O failure.
TrainConfig config_from(const Options& o, TrainConfig base = {}) {
  TrainConfig cfg = base;
  if (!o.config.empty()) {
    try {
      cfg = load_config(o.config);
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
  }
  apply_sets(cfg, o.sets);
  if (o.deterministic) cfg.workers = 1;   // flag defaults to on
  if (o.workers > 0) cfg.workers = o.workers;  // explicit count wins
  return cfg;
}

void require_flag(const std::string& value, const char* flag) {
  if (value.empty())
    throw ConfigError(std::string("missing required flag ") + flag);
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << body;
  if (!out) throw IoError("short write to " + path);
}

EmbeddingStore load_embeddings(const Options& o, const TrainConfig& cfg) {
  require_flag(o.embeddings, "--embeddings");
  return EmbeddingStore::load_pretrained(o.embeddings, cfg.emb_dim,
                                         cfg.num_buckets, cfg.hash_seed);
}

PreparedDataset load_data(const Options& o, bool keep_unaligned) {
  require_flag(o.data, "--data");
  return prepare_dataset(parse_dataset(o.data), keep_unaligned);
}

std::string recover_text(const TokenizedExample& ex, SpanCandidate span) {
  int b = ex.passage_spans[span.start].begin;
  int e = ex.passage_spans[span.end].end;
  return ex.passage.substr(b, e - b);
}

std::map<std::string, std::string> predict_all(const QaModel<float>& qa,
                                               const PreparedDataset& data) {
  std::map<std::string, std::string> preds;
  for (const auto& ex : data.examples)
    preds[ex.id] = recover_text(ex, qa.predict(ex));
  return preds;
}

// Bundles the store with the model so the pointer the model keeps stays
// valid for the bundle's lifetime.
struct LoadedModel {
  Checkpoint ckpt;
  std::unique_ptr<EmbeddingStore> emb;
  std::unique_ptr<QaModel<float>> qa;
};

LoadedModel model_from_checkpoint(const Options& o) {
  require_flag(o.checkpoint, "--checkpoint");
  require_flag(o.embeddings, "--embeddings");
  LoadedModel lm;
  lm.ckpt = load_checkpoint(o.checkpoint);
  TrainConfig cfg = lm.ckpt.config;
  apply_sets(cfg, o.sets);
  lm.emb = std::make_unique<EmbeddingStore>(EmbeddingStore::load_pretrained(
      o.embeddings, cfg.emb_dim, cfg.num_buckets, cfg.hash_seed));
  lm.qa = std::make_unique<QaModel<float>>(cfg, lm.emb.get());
  apply_param_blobs(lm.ckpt, lm.qa->store);
  return lm;
}

// ---------------------------------------------------------------------------

int run_train(const Options& o) {
  TrainConfig cfg = config_from(o);
  cfg.validate();
  require_flag(o.out, "--out");
  fs::create_directories(o.out);
  EmbeddingStore emb = load_embeddings(o, cfg);
  PreparedDataset data = load_data(o, /*keep_unaligned=*/false);

  std::ostringstream log;
  log << "train objective=" << objective_name(cfg.objective)
      << " examples=" << data.examples.size()
      << " dropped_unalignable=" << data.dropped_unalignable
      << " max_steps=" << cfg.max_steps << " workers=" << cfg.workers
      << " seed=" << cfg.seed << "\n";

  auto ckpt_path = [&](long step) {
    return (fs::path(o.out) / ("checkpoint_" + std::to_string(step) +
                               ".ckpt")).string();
  };
  auto result = train_loop(
      cfg, data, emb, nullptr,
      [&](const Checkpoint& c) { save_checkpoint(c, ckpt_path(c.step)); },
      [&](const std::string& line) {
        log << line << "\n";
        std::cout << line << "\n";
      });
  save_checkpoint(result.checkpoint, (fs::path(o.out) / "final.ckpt").string());

  log << "done steps=" << result.checkpoint.step
      << " processed=" << result.processed_examples
      << " skipped_nonfinite=" << result.checkpoint.skipped_nonfinite
      << " skipped_long_gold=" << result.checkpoint.skipped_long_gold
      << " dropped_unalignable=" << result.checkpoint.dropped_unalignable
      << "\n";
  write_text((fs::path(o.out) / "train.log").string(), log.str());

  std::string cfg_text;
  for (const auto& [k, v] : cfg.to_key_values()) cfg_text += k + "=" + v + "\n";
  write_text((fs::path(o.out) / "config.txt").string(), cfg_text);
  return kExitOk;
}

int run_predict(const Options& o) {
  require_flag(o.out, "--out");
  LoadedModel lm = model_from_checkpoint(o);
  PreparedDataset data = load_data(o, /*keep_unaligned=*/true);
  save_predictions(predict_all(*lm.qa, data), o.out);
  return kExitOk;
}

int run_evaluate(const Options& o) {
  require_flag(o.predictions, "--predictions");
  require_flag(o.out, "--out");
  auto preds = load_predictions(o.predictions);
  PreparedDataset data = load_data(o, /*keep_unaligned=*/true);
  EvalReport report = evaluate_dataset(preds, data.examples);
  write_text(o.out, report_to_json(report));
  std::cout << "em=" << report.em << " f1=" << report.f1
            << " total=" << report.total
            << " missing=" << report.missing_predictions << "\n";
  return kExitOk;
}

std::string sanitize_qid(const std::string& qid) {
  std::string out;
  for (char c : qid)
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
                          c == '_'
                      ? c
                      : '_');
  return out;
}

int run_analyze(const Options& o) {
  require_flag(o.out, "--out");
  LoadedModel lm = model_from_checkpoint(o);
  PreparedDataset data = load_data(o, /*keep_unaligned=*/true);
  fs::create_directories(o.out);

  auto preds = predict_all(*lm.qa, data);
  EvalReport report = evaluate_dataset(preds, data.examples);
  write_text((fs::path(o.out) / "length_buckets.csv").string(),
             buckets_to_csv(length_bucket_report(report.records)));
  for (const auto& ex : data.examples) {
    auto rec = attention_dump(*lm.qa, ex);
    write_text((fs::path(o.out) /
                ("attention_" + sanitize_qid(ex.id) + ".json")).string(),
               attention_to_json(rec));
  }
  std::cout << "analyzed=" << data.examples.size() << " em=" << report.em
            << " f1=" << report.f1 << "\n";
  return kExitOk;
}

// Composed-model finite differences for every objective, on a toy
// architecture small enough to finish in seconds at 64-bit.
int run_gradcheck(const Options& o) {
  TrainConfig toy;
  toy.emb_dim = 4;
  toy.d = 3;
  toy.ffnn_width = 3;
  toy.ffnn_depth = 1;
  toy.q_layers = 1;
  toy.p_layers = 1;
  toy.max_span_len = 30;
  toy.dropout = 0.0;
  toy.num_buckets = 4;
  toy.seed = 11;
  TrainConfig cfg = config_from(o, toy);

  Rng emb_rng(5);
  std::vector<std::pair<std::string, std::vector<float>>> rows;
  for (const char* w : {"aa", "bb", "cc", "dd", "xx", "yy", "zz"}) {
    std::vector<float> row(cfg.emb_dim);
    for (auto& x : row) x = static_cast<float>(emb_rng.uniform(-0.5, 0.5));
    rows.emplace_back(w, row);
  }
  EmbeddingStore emb = EmbeddingStore::from_rows(rows, cfg.emb_dim,
                                                 cfg.num_buckets, 0x5eed);

  TokenizedExample ex;
  ex.id = "toy";
  ex.passage_tokens = {"aa", "bb", "cc", "dd"};
  ex.question_tokens = {"xx", "yy", "zz"};
  ex.gold = SpanCandidate{1, 2};

  const double tol = 1e-3;
  bool all_pass = true;
  for (auto obj : {Objective::span_softmax, Objective::span_logistic,
                   Objective::membership, Objective::bio_crf,
                   Objective::endpoints}) {
    TrainConfig c = cfg;
    c.objective = obj;
    QaModel<double> qa(c, &emb);
    // zero-initialized biases sit exactly on the relu kink where central
    // differences are invalid; nudge every parameter slightly off it
    Rng nudge(mix_seed(c.seed, 0x6e));
    for (std::size_t e = 0; e < qa.store.count(); ++e)
      for (auto& x : qa.store.entry(e).tensor.v)
        x += nudge.uniform(-0.2, 0.2);

    auto loss_value = [&]() {
      Graph<double> g;
      auto loss = qa.example_loss(g, ex, /*training=*/false);
      return g.value(*loss).v[0];
    };
    qa.store.zero_grads();
    {
      Graph<double> g;
      auto loss = qa.example_loss(g, ex, /*training=*/false);
      g.backward(*loss);
    }
    auto report = check_gradients(qa.store, loss_value);
    bool pass = report.pass(tol);
    all_pass = all_pass && pass;
    std::cout << "gradcheck objective=" << objective_name(obj)
              << " max_rel_err=" << report.max_rel_err
              << " worst_param=" << report.worst_param
              << " status=" << (pass ? "pass" : "FAIL") << "\n";
  }
  return all_pass ? kExitOk : kExitCheckFailed;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  CLI::App app{"RaSoR: recurrent span representations for extractive QA"};
  app.require_subcommand(1);

  Options o;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "key=value config file");
    cmd->add_option("--data", o.data, "SQuAD-format JSON dataset");
    cmd->add_option("--embeddings", o.embeddings,
                    "pretrained embeddings (GloVe text format)");
    cmd->add_option("--checkpoint", o.checkpoint, "checkpoint to load");
    cmd->add_option("--out", o.out, "output file or directory");
    cmd->add_option("--predictions", o.predictions,
                    "predictions JSON (evaluate)");
    cmd->add_option("--set", o.sets, "config override key=value (repeatable)");
    cmd->add_flag("--deterministic,!--no-deterministic", o.deterministic,
                  "single-worker reproducible mode (default on)");
    cmd->add_option("--workers", o.workers,
                    "worker count for asynchronous training");
  };
  CLI::App* train = app.add_subcommand("train", "optimize a model");
  CLI::App* predict = app.add_subcommand("predict", "write answer spans");
  CLI::App* evaluate = app.add_subcommand("evaluate", "score predictions");
  CLI::App* analyze =
      app.add_subcommand("analyze", "length buckets and attention dumps");
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference backprop check");
  for (CLI::App* cmd : {train, predict, evaluate, analyze, gradcheck})
    add_common(cmd);

  // CLI11 wants mutable char-style args, reversed
  std::vector<std::string> rest(args.begin() + 1, args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (train->parsed()) return run_train(o);
    if (predict->parsed()) return run_predict(o);
    if (evaluate->parsed()) return run_evaluate(o);
    if (analyze->parsed()) return run_analyze(o);
    if (gradcheck->parsed()) return run_gradcheck(o);
    std::cerr << "error: no command given\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

int cli_main(int argc, const char* const* argv) {
  return cli_main(std::vector<std::string>(argv, argv + argc));
}

}  // namespace rasor
