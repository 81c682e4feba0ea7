#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include "rasor/eval.hpp"
#include "support.hpp"

using namespace rasor;
using namespace testsupport;

namespace {

// a printable ASCII soup for fuzzing the normalizer and the metrics
std::string random_ascii(Rng& rng, int max_len) {
  static const std::string alphabet =
      "abc XYZ 012 .,!?'\"-()[]{}:;/the an a  ";
  int n = static_cast<int>(rng.below(max_len + 1));
  std::string s;
  for (int i = 0; i < n; ++i)
    s.push_back(alphabet[rng.below(alphabet.size())]);
  return s;
}

TokenizedExample eval_example(const std::string& id,
                              std::vector<std::string> refs) {
  TokenizedExample ex;
  ex.id = id;
  ex.gold_texts = std::move(refs);
  return ex;
}

}  // namespace

TEST_CASE("normalize: spec examples") {
  CHECK(normalize_answer("The Cat!") == "cat");
  CHECK(normalize_answer("a  an the") == "");
  CHECK(normalize_answer("turbine") == "turbine");
}

TEST_CASE("normalize: punctuation is removed, not space-replaced") {
  CHECK(normalize_answer("e-mail") == "email");
  CHECK(normalize_answer("U.S.A.") == "usa");
  CHECK(normalize_answer("50,000") == "50000");
  CHECK(normalize_answer("(the turbine)") == "turbine");
}

TEST_CASE("normalize: articles survive inside words") {
  CHECK(normalize_answer("another theory") == "another theory");
  CHECK(normalize_answer("Anne ran a  THE  An race") == "anne ran race");
}

TEST_CASE("normalize: idempotent on fuzzed strings") {
  Rng rng(2024);
  for (int i = 0; i < 500; ++i) {
    std::string s = random_ascii(rng, 40);
    std::string once = normalize_answer(s);
    CHECK(normalize_answer(once) == once);
  }
}

TEST_CASE("exact match: spec examples") {
  CHECK(exact_match("The Turbine", {"the turbine"}) == 1);
  CHECK(exact_match("turbines", {"turbine"}) == 0);
  CHECK(exact_match("right", {"wrong", "also wrong", "Right!"}) == 1);
  CHECK_THROWS_AS(exact_match("x", {}), ContractError);
}

TEST_CASE("f1: spec examples") {
  CHECK(f1_score("brown fox", {"the brown dog"}) == doctest::Approx(0.5));
  CHECK(f1_score("exact words here", {"exact words here"}) == 1.0);
  CHECK(f1_score("", {"x"}) == 0.0);
  CHECK(f1_score("x", {""}) == 0.0);
  CHECK(f1_score("", {""}) == 1.0);  // both empty after normalization
  CHECK_THROWS_AS(f1_score("x", {}), ContractError);
}

TEST_CASE("f1: bag-of-tokens overlap is a multiset") {
  // pred {x,x,y} vs ref {x,y,y}: overlap 2, P = R = 2/3
  CHECK(f1_score("x x y", {"x y y"}) == doctest::Approx(2.0 / 3.0));
  // repeated pred token only matches as often as the ref holds it
  CHECK(f1_score("x x x x", {"x z"}) ==
        doctest::Approx(2.0 * 0.25 * 0.5 / 0.75));
}

TEST_CASE("metrics: identity and em-implies-f1 properties") {
  Rng rng(77);
  int checked = 0;
  for (int i = 0; i < 1000; ++i) {
    std::string pred = random_ascii(rng, 24);
    std::string ref = random_ascii(rng, 24);
    if (normalize_answer(ref).empty() || normalize_answer(pred).empty())
      continue;
    CHECK(exact_match(pred, {pred}) == 1);
    CHECK(f1_score(pred, {pred}) == 1.0);
    if (exact_match(pred, {ref}) == 1) {
      CHECK(f1_score(pred, {ref}) == 1.0);
      ++checked;
    }
    // adding a reference never hurts either metric
    double f_one = f1_score(pred, {ref});
    double f_two = f1_score(pred, {ref, pred});
    CHECK(f_two >= f_one);
    CHECK(f_two == 1.0);
  }
  CHECK(checked > 0);  // the fuzz actually exercised the implication
}

TEST_CASE("evaluate: perfect and empty predictors") {
  std::vector<TokenizedExample> data = {
      eval_example("q1", {"alpha beta"}),
      eval_example("q2", {"gamma", "delta"}),
  };
  std::map<std::string, std::string> perfect = {{"q1", "alpha beta"},
                                                {"q2", "gamma"}};
  auto r = evaluate_dataset(perfect, data);
  CHECK(r.em == 100.0);
  CHECK(r.f1 == 100.0);
  CHECK(r.total == 2);
  CHECK(r.missing_predictions == 0);

  std::map<std::string, std::string> empty = {{"q1", ""}, {"q2", ""}};
  auto z = evaluate_dataset(empty, data);
  CHECK(z.em == 0.0);
  CHECK(z.f1 == 0.0);
}

TEST_CASE("evaluate: hand-built four-question report") {
  // EM hits on q1, q2; F1s are 1, 1, 0.5, 0 -> EM 50.0, F1 62.5
  std::vector<TokenizedExample> data = {
      eval_example("q1", {"north wall"}),
      eval_example("q2", {"Fixed!", "other"}),
      eval_example("q3", {"the brown dog"}),
      eval_example("q4", {"zebra"}),
  };
  std::map<std::string, std::string> preds = {
      {"q1", "North Wall"},
      {"q2", "fixed"},
      {"q3", "brown fox"},
      {"q4", "aardvark"},
  };
  auto r = evaluate_dataset(preds, data);
  CHECK(r.em == doctest::Approx(50.0));
  CHECK(r.f1 == doctest::Approx(62.5));
  REQUIRE(r.records.size() == 4);
  CHECK(r.records[0].em == 1);
  CHECK(r.records[2].f1 == doctest::Approx(0.5));
  CHECK(r.records[2].pred_token_len == 2);
}

TEST_CASE("evaluate: missing predictions score zero and are counted") {
  std::vector<TokenizedExample> data = {
      eval_example("q1", {"answer"}),
      eval_example("q2", {"answer"}),
  };
  auto r = evaluate_dataset({{"q1", "answer"}}, data);
  CHECK(r.total == 2);
  CHECK(r.missing_predictions == 1);
  CHECK(r.em == doctest::Approx(50.0));
  CHECK(r.records[1].missing);
  CHECK(r.records[1].em == 0);
}

TEST_CASE("buckets: spec counting examples") {
  std::vector<QuestionRecord> recs(4);
  recs[0].pred_token_len = 1;
  recs[1].pred_token_len = 1;
  recs[2].pred_token_len = 2;
  recs[3].pred_token_len = 5;
  recs[0].em = 1;
  recs[0].f1 = 1;
  auto rows = length_bucket_report(recs);
  REQUIRE(rows.size() == 8);  // 1..7 and 7+
  CHECK(rows[0].label == "1");
  CHECK(rows[0].count == 2);
  CHECK(rows[1].count == 1);
  CHECK(rows[4].label == "5");
  CHECK(rows[4].count == 1);
  CHECK(rows[7].label == "7+");
  CHECK(rows[7].count == 0);
  long total = 0;
  for (const auto& row : rows) total += row.count;
  CHECK(total == 4);
  CHECK(rows[0].em == doctest::Approx(50.0));  // one EM hit of two length-1
}

TEST_CASE("buckets: degenerate all-length-1 and overflow cases") {
  std::vector<QuestionRecord> ones(5);
  for (auto& r : ones) r.pred_token_len = 1;
  auto rows = length_bucket_report(ones);
  CHECK(rows[0].count == 5);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].count == 0);

  std::vector<QuestionRecord> mix(3);
  mix[0].pred_token_len = 9;
  mix[1].pred_token_len = 200;
  mix[2].pred_token_len = 0;  // empty prediction
  auto rows2 = length_bucket_report(mix);
  CHECK(rows2.front().label == "0");
  CHECK(rows2.front().count == 1);
  CHECK(rows2.back().label == "7+");
  CHECK(rows2.back().count == 2);
  long total = 0;
  for (const auto& row : rows2) total += row.count;
  CHECK(total == 3);
}

TEST_CASE("buckets: counts always partition fuzzed records") {
  Rng rng(31);
  std::vector<QuestionRecord> recs(137);
  for (auto& r : recs)
    r.pred_token_len = static_cast<int>(rng.below(12));
  for (int L : {1, 3, 7}) {
    long total = 0;
    for (const auto& row : length_bucket_report(recs, L)) total += row.count;
    CHECK(total == 137);
  }
}

TEST_CASE("report json: parseable with stable leading keys") {
  EvalReport r;
  r.em = 50;
  r.f1 = 62.5;
  r.total = 4;
  QuestionRecord q;
  q.qid = "q1";
  q.prediction = "x";
  q.em = 1;
  q.f1 = 1;
  r.records.push_back(q);
  std::string s = report_to_json(r);
  auto j = nlohmann::json::parse(s);
  CHECK(j["exact_match"] == 50.0);
  CHECK(j["f1"] == 62.5);
  CHECK(j["records"][0]["qid"] == "q1");
  CHECK(s.find("exact_match") < s.find("\"f1\""));
  CHECK(s.find("\"f1\"") < s.find("total"));
}

TEST_CASE("bucket csv: header plus one row per bucket") {
  std::vector<QuestionRecord> recs(2);
  recs[0].pred_token_len = 1;
  recs[1].pred_token_len = 2;
  auto csv = buckets_to_csv(length_bucket_report(recs, 2));
  CHECK(csv ==
        "length,count,em,f1\n"
        "1,1,0,0\n"
        "2,1,0,0\n"
        "2+,0,0,0\n");
}

TEST_CASE("prediction files: round trip and malformed input") {
  TempDir dir("pred");
  std::map<std::string, std::string> preds = {{"b", "two words"},
                                              {"a", "one"}};
  save_predictions(preds, dir.file("p.json"));
  CHECK(load_predictions(dir.file("p.json")) == preds);
  // std::map ordering makes the file content deterministic
  std::string body = read_file(dir.file("p.json"));
  CHECK(body.find("\"a\"") < body.find("\"b\""));

  write_file(dir.file("bad.json"), "[1, 2, 3]");
  CHECK_THROWS_AS(load_predictions(dir.file("bad.json")), FormatError);
  write_file(dir.file("worse.json"), "{\"q\": 17}");
  CHECK_THROWS_AS(load_predictions(dir.file("worse.json")), FormatError);
  CHECK_THROWS_AS(load_predictions(dir.file("absent.json")), IoError);
}

TEST_CASE("attention dump: shapes, simplexes, and ordered top spans") {
  TrainConfig cfg;
  cfg.emb_dim = 16;
  cfg.d = 6;
  cfg.ffnn_width = 6;
  cfg.q_layers = 1;
  cfg.p_layers = 1;
  cfg.num_buckets = 16;
  cfg.seed = 3;
  auto store =
      EmbeddingStore::load_pretrained(fixture_path("glove_tiny.txt"), 16, 16);
  QaModel<float> qa(cfg, &store);

  auto data = prepare_dataset(
      parse_dataset(fixture_path("synthetic_train.json")), false);
  const auto& ex = data.examples[0];
  auto rec = attention_dump(qa, ex, 3);

  std::size_t m = ex.passage_tokens.size();
  std::size_t n = ex.question_tokens.size();
  CHECK(rec.qid == ex.id);
  REQUIRE(rec.aligned.size() == m);
  REQUIRE(rec.independent.size() == n);
  double isum = 0;
  for (double a : rec.independent) isum += a;
  CHECK(isum == doctest::Approx(1.0).epsilon(1e-6));
  for (const auto& row : rec.aligned) {
    REQUIRE(row.size() == n);
    double s = 0;
    for (double a : row) s += a;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
  REQUIRE(rec.top.size() == 3);
  CHECK(rec.top[0].prob >= rec.top[1].prob);
  CHECK(rec.top[1].prob >= rec.top[2].prob);
  for (const auto& t : rec.top) {
    int b = ex.passage_spans[t.span.start].begin;
    int e = ex.passage_spans[t.span.end].end;
    CHECK(t.text == ex.passage.substr(b, e - b));
  }
  auto j = nlohmann::json::parse(attention_to_json(rec));
  CHECK(j["qid"] == ex.id);
  CHECK(j["top_spans"].size() == 3);
}
