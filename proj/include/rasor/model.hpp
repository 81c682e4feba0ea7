#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "rasor/embeddings.hpp"
#include "rasor/qenc.hpp"
#include "rasor/spans.hpp"

namespace rasor {

struct ModelDims {
  int emb_dim = 300;
  int align_width = 300;
  int align_depth = 1;
  int d_q = 50;
  int q_layers = 2;
  int indep_width = 50;
  int indep_depth = 1;
  int d_p = 50;
  int p_layers = 2;
  int span_width = 50;
  int span_depth = 1;
  int max_span_len = 30;
  double dropout = 0.1;
  bool dropout_recurrent = false;
  bool train_oov = false;
};

// Candidate list with scores kept both as values (for decoding) and as a
// graph node (for composing the loss). Normalization is global across the
// example's full candidate set.
template <typename T>
struct SpanDistribution {
  std::vector<SpanCandidate> spans;
  std::vector<T> probs;
  typename Graph<T>::Id scores = -1;  // |A| x 1 column in the graph
};

// h_a = [p*'_start, p*'_end] for every candidate, stacked. Singleton spans
// concatenate the same endpoint twice.
template <typename T>
typename Graph<T>::Id span_embeddings(
    Graph<T>& g, const std::vector<typename Graph<T>::Id>& encoded,
    const std::vector<SpanCandidate>& spans) {
  if (spans.empty()) throw ContractError("span_embeddings: no candidates");
  std::vector<typename Graph<T>::Id> rows;
  rows.reserve(spans.size());
  int m = static_cast<int>(encoded.size());
  for (const auto& s : spans) {
    if (s.start < 0 || s.end < s.start || s.end >= m)
      throw ContractError("span_embeddings: span (" +
                          std::to_string(s.start) + "," +
                          std::to_string(s.end) + ") out of range for m=" +
                          std::to_string(m));
    rows.push_back(g.concat(1, {encoded[s.start], encoded[s.end]}));
  }
  return g.concat(0, rows);
}

template <typename T>
SpanCandidate decode_argmax(const SpanDistribution<T>& dist) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < dist.probs.size(); ++i)
    if (dist.probs[i] > dist.probs[best]) best = i;  // spans are lex-sorted
  return dist.spans[best];
}

// index of gold in the lex-sorted candidate list, if present
inline std::optional<std::size_t> find_span(
    const std::vector<SpanCandidate>& spans, SpanCandidate gold) {
  auto it = std::lower_bound(spans.begin(), spans.end(), gold);
  if (it == spans.end() || *it != gold) return std::nullopt;
  return static_cast<std::size_t>(it - spans.begin());
}

// The full RaSoR stack: question-focused embeddings -> passage BiLSTM ->
// endpoint span embeddings -> shared FFNN -> w_a scores -> global softmax.
template <typename T>
struct RasorModel {
  using Id = typename Graph<T>::Id;

  ModelDims dims;
  const EmbeddingStore* emb;
  QuestionEncoder<T> qenc;
  BiLstmStack<T> p_lstm;
  Ffnn<T> span_ffnn;
  Tensor<T>* w_a;
  Tensor<T>* oov_param = nullptr;  // set when dims.train_oov
  mutable long skipped_long_gold = 0;

  RasorModel(ParamStore<T>& store, const ModelDims& d,
             const EmbeddingStore* embeddings, Rng& rng)
      : dims(d),
        emb(embeddings),
        qenc(store, "qenc", d.emb_dim, d.align_width, d.align_depth, d.d_q,
             d.q_layers, d.indep_width, d.indep_depth, rng),
        p_lstm(store, "passage", 2 * d.emb_dim + 2 * d.d_q, d.d_p, d.p_layers,
               rng),
        span_ffnn(store, "span", 2 * (2 * d.d_p), d.span_width, d.span_depth,
                  true, rng),
        w_a(&store.add("w_a", Shape{d.span_width, 1})) {
    init_uniform(*w_a, rng, kInitLow, kInitHigh);
    if (dims.train_oov && emb) {
      oov_param = &store.add("oov", Shape{emb->num_buckets, emb->dim});
      for (std::size_t i = 0; i < emb->oov.size(); ++i)
        oov_param->v[i] = static_cast<T>(emb->oov[i]);
    }
  }

  // one 1 x emb_dim row per token; pretrained rows are constants (frozen),
  // OOV rows flow through the bucket parameter when train_oov is on
  std::vector<Id> embed(Graph<T>& g,
                        const std::vector<std::string>& tokens) const {
    if (!emb) throw ContractError("model: no embedding store attached");
    std::vector<Id> rows;
    rows.reserve(tokens.size());
    for (const auto& tok : tokens) {
      auto ref = emb->lookup(tok);
      if (ref.is_oov && oov_param) {
        rows.push_back(g.gather_rows(*oov_param, {ref.row}));
      } else {
        const float* src = emb->row_data(ref);
        Tensor<T> row(Shape{1, emb->dim});
        for (int j = 0; j < emb->dim; ++j) row.v[j] = static_cast<T>(src[j]);
        rows.push_back(g.constant(std::move(row)));
      }
    }
    return rows;
  }

  DropoutSpec make_drop(bool training, Rng* rng) const {
    DropoutSpec drop;
    drop.rate = dims.dropout;
    drop.training = training;
    drop.on_input = true;
    drop.on_recurrent = dims.dropout_recurrent;
    drop.rng = rng;
    return drop;
  }

  // top-layer passage BiLSTM outputs p*'_i, one 2*d_p vector per token
  std::vector<Id> encode_passage(Graph<T>& g, const std::vector<Id>& p_rows,
                                 const std::vector<Id>& q_rows,
                                 DropoutSpec drop = {}) const {
    auto p_star = qenc.build(g, p_rows, q_rows, drop);
    return p_lstm.run_top(g, p_star, drop);
  }

  SpanDistribution<T> score_and_normalize(
      Graph<T>& g, const std::vector<Id>& encoded,
      const std::vector<SpanCandidate>& spans) const {
    if (spans.empty())
      throw ContractError("score_and_normalize: no candidates");
    SpanDistribution<T> dist;
    dist.spans = spans;
    auto h = span_embeddings(g, encoded, spans);
    dist.scores = g.matmul(span_ffnn.forward(g, h), g.leaf(*w_a));
    auto p = g.softmax_rows(g.transpose(dist.scores));
    dist.probs = g.value(p).v;
    return dist;
  }

  // full forward pass for one example
  SpanDistribution<T> forward(Graph<T>& g,
                              const std::vector<std::string>& p_tokens,
                              const std::vector<std::string>& q_tokens,
                              bool training = false,
                              Rng* rng = nullptr) const {
    auto drop = make_drop(training, rng);
    auto encoded =
        encode_passage(g, embed(g, p_tokens), embed(g, q_tokens), drop);
    auto spans = enumerate_spans(static_cast<int>(p_tokens.size()),
                                 dims.max_span_len);
    return score_and_normalize(g, encoded, spans);
  }

  // -log P(gold) = log_sum_exp(s) - s_gold; nullopt (and a counter bump)
  // when gold is not a candidate, e.g. longer than max_span_len
  std::optional<Id> nll_loss(Graph<T>& g, const SpanDistribution<T>& dist,
                             SpanCandidate gold) const {
    auto idx = find_span(dist.spans, gold);
    if (!idx) {
      ++skipped_long_gold;
      return std::nullopt;
    }
    return g.sub(g.log_sum_exp(dist.scores),
                 g.pick(dist.scores, static_cast<int>(*idx), 0));
  }
};

}  // namespace rasor
