#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "rasor/data.hpp"
#include "rasor/trainer.hpp"

namespace rasor {

// ---------------------------------------------------------------------------
// Official-metric reimplementation (ASCII parity with the reference scorer)

// lowercase -> remove punctuation -> remove articles (a/an/the) -> collapse
// whitespace, in that order
std::string normalize_answer(const std::string& text);

// 1 iff the normalized prediction equals any normalized reference
int exact_match(const std::string& prediction,
                const std::vector<std::string>& references);

// max over references of bag-of-unigrams F1 on normalized tokens
double f1_score(const std::string& prediction,
                const std::vector<std::string>& references);

struct QuestionRecord {
  std::string qid;
  std::string prediction;
  int em = 0;
  double f1 = 0;
  int pred_token_len = 0;  // whitespace-token length of the raw prediction
  bool missing = false;    // no prediction supplied; scored 0
};

struct EvalReport {
  double em = 0;  // percentages
  double f1 = 0;
  long total = 0;
  long missing_predictions = 0;
  std::vector<QuestionRecord> records;
};

// Scores every example; examples without gold_texts are skipped (they carry
// nothing to compare against). Missing predictions score 0 and are counted.
EvalReport evaluate_dataset(const std::map<std::string, std::string>& preds,
                            const std::vector<TokenizedExample>& examples);

struct LengthBucket {
  std::string label;  // "1", "2", ..., "L", "L+" (and "0" if present)
  long count = 0;
  double em = 0;  // percentages within the bucket
  double f1 = 0;
};

// Per-prediction-length breakdown: one bucket per length 1..max_len plus a
// "max_len+" overflow bucket; zero-length predictions get a leading "0"
// bucket when present. Counts sum to records.size().
std::vector<LengthBucket> length_bucket_report(
    const std::vector<QuestionRecord>& records, int max_len = 7);

std::string report_to_json(const EvalReport& report);
std::string buckets_to_csv(const std::vector<LengthBucket>& buckets);

// Prediction files: JSON object {question_id: answer_string}
std::map<std::string, std::string> load_predictions(const std::string& path);
void save_predictions(const std::map<std::string, std::string>& preds,
                      const std::string& path);

// ---------------------------------------------------------------------------
// Attention dumps (analysis)

struct AttentionRecord {
  std::string qid;
  std::vector<std::string> passage_tokens;
  std::vector<std::string> question_tokens;
  std::vector<double> independent;           // a_j over question words, n
  std::vector<std::vector<double>> aligned;  // a_ij, m x n
  struct TopSpan {
    SpanCandidate span;
    double prob = 0;
    std::string text;  // original passage substring
  };
  std::vector<TopSpan> top;  // descending probability, k entries
};

std::string attention_to_json(const AttentionRecord& rec);

// Runs the model once and captures both attention distributions plus the
// top-k candidate spans of the global softmax.
template <typename T>
AttentionRecord attention_dump(const QaModel<T>& qa,
                               const TokenizedExample& ex, int k = 3) {
  using Id = typename Graph<T>::Id;
  Graph<T> g;
  auto p_rows = qa.model.embed(g, ex.passage_tokens);
  auto q_rows = qa.model.embed(g, ex.question_tokens);
  auto p = g.concat(0, p_rows);
  auto q = g.concat(0, q_rows);

  auto aligned = qa.model.qenc.aligned_attention(g, p, q);  // m x n
  auto q_align = g.matmul(aligned, q);
  auto q_top = qa.model.qenc.q_lstm.run_top(g, q_rows, {});
  auto qp = g.concat(0, q_top);
  auto indep_att = qa.model.qenc.independent_attention(g, qp);  // 1 x n
  auto q_indep = g.matmul(indep_att, qp);

  std::vector<Id> pstar;
  pstar.reserve(p_rows.size());
  for (std::size_t i = 0; i < p_rows.size(); ++i)
    pstar.push_back(g.concat(
        1, {p_rows[i], g.slice_row(q_align, static_cast<int>(i)), q_indep}));
  auto enc = qa.model.p_lstm.run_top(g, pstar, {});
  auto spans = enumerate_spans(static_cast<int>(p_rows.size()),
                               qa.dims.max_span_len);
  auto dist = qa.model.score_and_normalize(g, enc, spans);

  AttentionRecord rec;
  rec.qid = ex.id;
  rec.passage_tokens = ex.passage_tokens;
  rec.question_tokens = ex.question_tokens;
  const auto& a = g.value(indep_att);
  rec.independent.assign(a.v.begin(), a.v.end());
  const auto& A = g.value(aligned);
  rec.aligned.resize(A.rows());
  for (int i = 0; i < A.rows(); ++i)
    rec.aligned[i].assign(A.v.begin() + i * A.cols(),
                          A.v.begin() + (i + 1) * A.cols());

  std::vector<std::size_t> order(dist.spans.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (dist.probs[x] != dist.probs[y]) return dist.probs[x] > dist.probs[y];
    return dist.spans[x] < dist.spans[y];
  });
  for (std::size_t r = 0; r < order.size() && r < static_cast<std::size_t>(k);
       ++r) {
    auto s = dist.spans[order[r]];
    int b = ex.passage_spans[s.start].begin;
    int e = ex.passage_spans[s.end].end;
    rec.top.push_back({s, static_cast<double>(dist.probs[order[r]]),
                       ex.passage.substr(b, e - b)});
  }
  return rec;
}

}  // namespace rasor
