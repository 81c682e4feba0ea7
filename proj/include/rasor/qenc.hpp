#pragma once

#include <string>
#include <vector>

#include "rasor/layers.hpp"

namespace rasor {

// Question-focused passage embeddings: per passage position i the
// concatenation [p_i, q_align_i, q_indep], where q_align attends over the
// question per passage word and q_indep is a passage-independent question
// summary shared by all positions.
template <typename T>
struct QuestionEncoder {
  using Id = typename Graph<T>::Id;

  Ffnn<T> align_p;   // nonlinear map of passage embeddings (score left factor)
  Ffnn<T> align_q;   // nonlinear map of question embeddings (right factor)
  BiLstmStack<T> q_lstm;
  Ffnn<T> indep_ffnn;
  Tensor<T>* w_q;
  int emb_dim;

  QuestionEncoder(ParamStore<T>& store, const std::string& prefix, int emb,
                  int align_width, int align_depth, int d_q, int q_layers,
                  int indep_width, int indep_depth, Rng& rng)
      : align_p(store, prefix + ".align_p", emb, align_width, align_depth,
                true, rng),
        align_q(store, prefix + ".align_q", emb, align_width, align_depth,
                true, rng),
        q_lstm(store, prefix + ".q_lstm", emb, d_q, q_layers, rng),
        indep_ffnn(store, prefix + ".indep", 2 * d_q, indep_width, indep_depth,
                   true, rng),
        w_q(&store.add(prefix + ".w_q", Shape{indep_width, 1})),
        emb_dim(emb) {
    init_uniform(*w_q, rng, kInitLow, kInitHigh);
  }

  int output_size() const { return 2 * emb_dim + q_lstm.output_size(); }

  // attention rows a_ij = softmax_j(FFNN(p_i) . FFNN(q_j)); m x n
  Id aligned_attention(Graph<T>& g, Id p, Id q) const {
    if (g.value(q).rows() < 1)
      throw ContractError("question encoder: empty question");
    auto s = g.matmul(align_p.forward(g, p),
                      g.transpose(align_q.forward(g, q)));
    return g.softmax_rows(s);
  }

  // p: m x emb, q: n x emb. Scores s_ij = FFNN(p_i) . FFNN(q_j); attention
  // softmax is over j; the weighted sum applies to the raw rows q_j.
  Id passage_aligned(Graph<T>& g, Id p, Id q) const {
    return g.matmul(aligned_attention(g, p, q), q);
  }

  // a_j = softmax_j(w_q . FFNN(q'_j)) over BiLSTM outputs q' (n x 2d_q); 1 x n
  Id independent_attention(Graph<T>& g, Id qp) const {
    auto s = g.matmul(indep_ffnn.forward(g, qp), g.leaf(*w_q));  // n x 1
    return g.softmax_rows(g.transpose(s));
  }

  // q' = BiLSTM(q); s_j = w_q . FFNN(q'_j); q_indep = sum_j softmax(s)_j q'_j
  Id passage_independent(Graph<T>& g, const std::vector<Id>& q_rows,
                         DropoutSpec drop = {}) const {
    if (q_rows.empty())
      throw ContractError("question encoder: empty question");
    auto top = q_lstm.run_top(g, q_rows, drop);
    auto qp = g.concat(0, top);  // n x 2d_q
    return g.matmul(independent_attention(g, qp), qp);  // 1 x 2d_q
  }

  // one 1 x (emb + emb + 2d_q) row per passage position
  std::vector<Id> build(Graph<T>& g, const std::vector<Id>& p_rows,
                        const std::vector<Id>& q_rows,
                        DropoutSpec drop = {}) const {
    if (p_rows.empty())
      throw ContractError("question encoder: empty passage");
    auto p = g.concat(0, p_rows);
    auto q = g.concat(0, q_rows);
    auto q_align = passage_aligned(g, p, q);
    auto q_indep = passage_independent(g, q_rows, drop);
    std::vector<Id> out;
    out.reserve(p_rows.size());
    for (std::size_t i = 0; i < p_rows.size(); ++i)
      out.push_back(g.concat(
          1, {p_rows[i], g.slice_row(q_align, static_cast<int>(i)), q_indep}));
    return out;
  }
};

}  // namespace rasor
