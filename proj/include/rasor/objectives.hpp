#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "rasor/decoders.hpp"
#include "rasor/layers.hpp"
#include "rasor/spans.hpp"

namespace rasor {

// Word-level score head shared by the membership and endpoint objectives:
// s_i = w . FFNN(p*'_i).
template <typename T>
struct WordScoreHead {
  using Id = typename Graph<T>::Id;
  Ffnn<T> ffnn;
  Tensor<T>* w;

  WordScoreHead(ParamStore<T>& store, const std::string& prefix, int input,
                int width, int depth, Rng& rng)
      : ffnn(store, prefix + ".ffnn", input, width, depth, true, rng),
        w(&store.add(prefix + ".w", Shape{width, 1})) {
    init_uniform(*w, rng, kInitLow, kInitHigh);
  }

  Id forward(Graph<T>& g, Id encoded) const {  // m x input -> m x 1
    return g.matmul(ffnn.forward(g, encoded), g.leaf(*w));
  }
};

// BIO head: per-token emission scores over {B, I, O} plus a trainable
// transition matrix.
template <typename T>
struct BioHead {
  using Id = typename Graph<T>::Id;
  Ffnn<T> ffnn;
  Tensor<T>* w;      // width x 3
  Tensor<T>* trans;  // 3 x 3, (prev label) x (next label)

  BioHead(ParamStore<T>& store, const std::string& prefix, int input,
          int width, int depth, Rng& rng)
      : ffnn(store, prefix + ".ffnn", input, width, depth, true, rng),
        w(&store.add(prefix + ".w", Shape{width, 3})),
        trans(&store.add(prefix + ".trans", Shape{3, 3})) {
    init_uniform(*w, rng, kInitLow, kInitHigh);
    init_uniform(*trans, rng, kInitLow, kInitHigh);
  }

  Id emissions(Graph<T>& g, Id encoded) const {  // m x input -> m x 3
    return g.matmul(ffnn.forward(g, encoded), g.leaf(*w));
  }
  Id transitions(Graph<T>& g) const { return g.leaf(*trans); }
};

namespace detail {

template <typename T>
void check_word_gold(const Graph<T>& g, typename Graph<T>::Id scores,
                     SpanCandidate gold, const char* who) {
  const auto& S = g.value(scores);
  if (S.rank() != 2 || S.cols() != 1)
    throw DimError(std::string(who) + ": scores must be an m x 1 column");
  if (gold.start < 0 || gold.start > gold.end || gold.end >= S.rows())
    throw ContractError(std::string(who) + ": gold span out of range");
}

// log-add-exp over the scalar ids that are present
template <typename T>
std::optional<typename Graph<T>::Id> lse_opt(
    Graph<T>& g,
    const std::vector<std::optional<typename Graph<T>::Id>>& xs) {
  std::vector<typename Graph<T>::Id> present;
  for (const auto& x : xs)
    if (x) present.push_back(*x);
  if (present.empty()) return std::nullopt;
  if (present.size() == 1) return present[0];
  return g.log_sum_exp(g.concat(0, present));
}

}  // namespace detail

// Sum of independent logistic losses over tokens; label 1 inside gold.
// ln(1 + e^s) - y*s composed as softplus(s) - mask.s.
template <typename T>
typename Graph<T>::Id membership_loss(Graph<T>& g,
                                      typename Graph<T>::Id scores,
                                      SpanCandidate gold) {
  detail::check_word_gold(g, scores, gold, "membership_loss");
  int m = g.value(scores).rows();
  Tensor<T> mask(Shape{m, 1});
  for (int i = gold.start; i <= gold.end; ++i) mask.v[i] = T(1);
  return g.sub(g.sum_all(g.softplus(scores)),
               g.sum_all(g.mul(g.constant(std::move(mask)), scores)));
}

// log Z of the BIO CRF by the forward algorithm, composed from graph ops.
// Constrained mode sums only sequences with exactly one contiguous B I*
// segment (a four-state automaton: pre-segment, just-emitted-B,
// inside-I, post-segment); unconstrained sums all 3^m sequences.
template <typename T>
typename Graph<T>::Id bio_crf_logz(Graph<T>& g,
                                   typename Graph<T>::Id emissions,
                                   typename Graph<T>::Id transitions,
                                   bool constrained = true) {
  using Id = typename Graph<T>::Id;
  const auto& E = g.value(emissions);
  if (E.rank() != 2 || E.cols() != 3)
    throw DimError("bio_crf: emissions must be m x 3");
  if (g.value(transitions).shape != Shape{3, 3})
    throw DimError("bio_crf: transitions must be 3 x 3");
  int m = E.rows();
  auto emi = [&](int t, int l) { return g.pick(emissions, t, l); };
  auto tr = [&](int a, int b) { return g.pick(transitions, a, b); };
  const int B = 0, I = 1, O = 2;

  if (!constrained) {
    std::array<Id, 3> cur = {emi(0, B), emi(0, I), emi(0, O)};
    for (int t = 1; t < m; ++t) {
      std::array<Id, 3> nxt;
      for (int l = 0; l < 3; ++l) {
        auto all = g.concat(0, {g.add(cur[B], tr(B, l)),
                                g.add(cur[I], tr(I, l)),
                                g.add(cur[O], tr(O, l))});
        nxt[l] = g.add(g.log_sum_exp(all), emi(t, l));
      }
      cur = nxt;
    }
    return g.log_sum_exp(g.concat(0, {cur[B], cur[I], cur[O]}));
  }

  enum { kPreO = 0, kInB = 1, kInI = 2, kPostO = 3 };
  std::vector<std::optional<Id>> cur(4);
  cur[kPreO] = emi(0, O);
  cur[kInB] = emi(0, B);
  auto step = [&](const std::optional<Id>& from, int ll, int l)
      -> std::optional<Id> {
    if (!from) return std::nullopt;
    return g.add(*from, tr(ll, l));
  };
  for (int t = 1; t < m; ++t) {
    std::vector<std::optional<Id>> nxt(4);
    auto add_emi = [&](std::optional<Id> x, int l) -> std::optional<Id> {
      if (!x) return std::nullopt;
      return g.add(*x, emi(t, l));
    };
    nxt[kPreO] = add_emi(step(cur[kPreO], O, O), O);
    nxt[kInB] = add_emi(step(cur[kPreO], O, B), B);
    nxt[kInI] = add_emi(
        detail::lse_opt(g, {step(cur[kInB], B, I), step(cur[kInI], I, I)}), I);
    nxt[kPostO] = add_emi(
        detail::lse_opt(g, {step(cur[kInB], B, O), step(cur[kInI], I, O),
                            step(cur[kPostO], O, O)}),
        O);
    cur = nxt;
  }
  auto z = detail::lse_opt(g, {cur[kInB], cur[kInI], cur[kPostO]});
  return *z;  // kInB is always reachable for m >= 1
}

// Path score of the gold BIO sequence O..O B I..I O..O.
template <typename T>
typename Graph<T>::Id bio_gold_score(Graph<T>& g,
                                     typename Graph<T>::Id emissions,
                                     typename Graph<T>::Id transitions,
                                     SpanCandidate gold) {
  const auto& E = g.value(emissions);
  int m = E.rows();
  if (gold.start < 0 || gold.start > gold.end || gold.end >= m)
    throw ContractError("bio_crf: gold span out of range");
  const int B = 0, I = 1, O = 2;
  auto label = [&](int t) {
    if (t == gold.start) return B;
    if (t > gold.start && t <= gold.end) return I;
    return O;
  };
  auto acc = g.pick(emissions, 0, label(0));
  for (int t = 1; t < m; ++t) {
    acc = g.add(acc, g.pick(transitions, label(t - 1), label(t)));
    acc = g.add(acc, g.pick(emissions, t, label(t)));
  }
  return acc;
}

// -(score(gold) - log Z); nonnegative since gold is in the support.
template <typename T>
typename Graph<T>::Id bio_crf_loss(Graph<T>& g,
                                   typename Graph<T>::Id emissions,
                                   typename Graph<T>::Id transitions,
                                   SpanCandidate gold,
                                   bool constrained = true) {
  return g.sub(bio_crf_logz(g, emissions, transitions, constrained),
               bio_gold_score(g, emissions, transitions, gold));
}

// Independent start/end softmax distributions over passage positions.
template <typename T>
struct EndpointDistributions {
  std::vector<T> p_start, p_end;  // values; each sums to 1 within 1e-6
  typename Graph<T>::Id start_scores = -1, end_scores = -1;  // m x 1 nodes
};

template <typename T>
EndpointDistributions<T> make_endpoint_distributions(
    Graph<T>& g, typename Graph<T>::Id start_scores,
    typename Graph<T>::Id end_scores) {
  const auto& S = g.value(start_scores);
  const auto& E = g.value(end_scores);
  if (S.rank() != 2 || S.cols() != 1 || E.shape != S.shape)
    throw DimError("endpoints: scores must be matching m x 1 columns");
  EndpointDistributions<T> d;
  d.start_scores = start_scores;
  d.end_scores = end_scores;
  d.p_start = g.value(g.softmax_rows(g.transpose(start_scores))).v;
  d.p_end = g.value(g.softmax_rows(g.transpose(end_scores))).v;
  return d;
}

// -log P_start(gold.start) - log P_end(gold.end)
template <typename T>
typename Graph<T>::Id endpoints_loss(Graph<T>& g,
                                     const EndpointDistributions<T>& dists,
                                     SpanCandidate gold) {
  detail::check_word_gold(g, dists.start_scores, gold, "endpoints_loss");
  auto ls = g.sub(g.log_sum_exp(dists.start_scores),
                  g.pick(dists.start_scores, gold.start, 0));
  auto le = g.sub(g.log_sum_exp(dists.end_scores),
                  g.pick(dists.end_scores, gold.end, 0));
  return g.add(ls, le);
}

// Independent binary logistic loss over all candidates; label 1 only for
// the gold index. Decoding stays argmax of the raw scores.
template <typename T>
typename Graph<T>::Id span_logistic_loss(Graph<T>& g,
                                         typename Graph<T>::Id span_scores,
                                         std::size_t gold_index) {
  const auto& S = g.value(span_scores);
  if (S.rank() != 2 || S.cols() != 1)
    throw DimError("span_logistic_loss: scores must be |A| x 1");
  if (gold_index >= static_cast<std::size_t>(S.rows()))
    throw ContractError("span_logistic_loss: gold index out of range");
  return g.sub(g.sum_all(g.softplus(span_scores)),
               g.pick(span_scores, static_cast<int>(gold_index), 0));
}

}  // namespace rasor
