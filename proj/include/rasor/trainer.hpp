#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rasor/checkpoint.hpp"
#include "rasor/config.hpp"
#include "rasor/data.hpp"
#include "rasor/decoders.hpp"
#include "rasor/model.hpp"
#include "rasor/objectives.hpp"

namespace rasor {

// derived-stream tags so init, shuffling and dropout never share a sequence
inline constexpr std::uint64_t kInitStream = 0x11;
inline constexpr std::uint64_t kShuffleStream = 0x5f;
inline constexpr std::uint64_t kDropoutStream = 0xd0;

// ---------------------------------------------------------------------------
// ADAM

struct AdamParams {
  double base_lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double decay_multiplier = 0.95;
  int decay_interval = 10000;

  static AdamParams from(const TrainConfig& c) {
    return {c.base_lr, c.beta1, c.beta2, c.epsilon, c.decay_multiplier,
            c.decay_interval};
  }
};

// base_lr x multiplier^floor(step / interval)
inline double effective_lr(const AdamParams& ap, long step) {
  return ap.base_lr *
         std::pow(ap.decay_multiplier,
                  static_cast<double>(step / ap.decay_interval));
}

// First/second-moment accumulators, one pair of arrays per parameter entry.
template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m, v;
  long t = 0;                  // completed (applied) updates
  long skipped_nonfinite = 0;  // batches rejected for non-finite grads

  void init(const ParamStore<T>& store) {
    m.clear();
    v.clear();
    for (std::size_t i = 0; i < store.count(); ++i) {
      m.emplace_back(store.entry(i).tensor.size(), T(0));
      v.emplace_back(store.entry(i).tensor.size(), T(0));
    }
    t = 0;
    skipped_nonfinite = 0;
  }
};

// One bias-corrected update from the gradients accumulated in the store.
// Returns false (and bumps the skip counter) if any gradient is non-finite;
// nothing is modified in that case. `lr` is the already-decayed rate.
template <typename T>
bool adam_step(ParamStore<T>& store, AdamState<T>& state,
               const AdamParams& ap, double lr, double grad_clip = 0) {
  for (std::size_t e = 0; e < store.count(); ++e) {
    auto& t = store.entry(e).tensor;
    t.ensure_grad();
    for (const T& g : t.g)
      if (!std::isfinite(static_cast<double>(g))) {
        ++state.skipped_nonfinite;
        return false;
      }
  }
  double clip_scale = 1.0;
  if (grad_clip > 0) {
    double sq = 0;
    for (std::size_t e = 0; e < store.count(); ++e)
      for (const T& g : store.entry(e).tensor.g)
        sq += static_cast<double>(g) * static_cast<double>(g);
    double norm = std::sqrt(sq);
    if (norm > grad_clip) clip_scale = grad_clip / norm;
  }
  ++state.t;
  double bc1 = 1.0 - std::pow(ap.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(ap.beta2, static_cast<double>(state.t));
  for (std::size_t e = 0; e < store.count(); ++e) {
    auto& tensor = store.entry(e).tensor;
    auto& m = state.m[e];
    auto& v = state.v[e];
    for (std::size_t i = 0; i < tensor.v.size(); ++i) {
      double g = static_cast<double>(tensor.g[i]) * clip_scale;
      double mi = ap.beta1 * static_cast<double>(m[i]) + (1 - ap.beta1) * g;
      double vi =
          ap.beta2 * static_cast<double>(v[i]) + (1 - ap.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      double update = lr * (mi / bc1) / (std::sqrt(vi / bc2) + ap.epsilon);
      tensor.v[i] = static_cast<T>(static_cast<double>(tensor.v[i]) - update);
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Model + objective head bundle

// The RaSoR encoder with whichever scoring head the configured objective
// needs, plus that objective's exact decoder.
template <typename T>
struct QaModel {
  using Id = typename Graph<T>::Id;

  TrainConfig cfg;
  ModelDims dims;
  const EmbeddingStore* emb;
  ParamStore<T> store;
  Rng init_rng;  // declared before the model: consumed during construction
  RasorModel<T> model;
  std::optional<WordScoreHead<T>> word_head;              // membership
  std::optional<BioHead<T>> bio_head;                     // bio_crf
  std::optional<WordScoreHead<T>> start_head, end_head;   // endpoints

  QaModel(const TrainConfig& c, const EmbeddingStore* embeddings)
      : cfg(c),
        dims(c.to_dims()),
        emb(embeddings),
        init_rng(mix_seed(c.seed, kInitStream)),
        model(store, dims, emb, init_rng) {
    int enc_width = 2 * dims.d_p;
    switch (cfg.objective) {
      case Objective::membership:
        word_head.emplace(store, "mem", enc_width, cfg.ffnn_width,
                          cfg.ffnn_depth, init_rng);
        break;
      case Objective::bio_crf:
        bio_head.emplace(store, "bio", enc_width, cfg.ffnn_width,
                         cfg.ffnn_depth, init_rng);
        break;
      case Objective::endpoints:
        start_head.emplace(store, "start", enc_width, cfg.ffnn_width,
                           cfg.ffnn_depth, init_rng);
        end_head.emplace(store, "end", enc_width, cfg.ffnn_width,
                         cfg.ffnn_depth, init_rng);
        break;
      default:
        break;  // span scores come from the model itself
    }
  }

  long skipped_long_gold() const { return model.skipped_long_gold; }

  std::vector<Id> encode(Graph<T>& g, const TokenizedExample& ex,
                         bool training, Rng* rng) const {
    auto drop = model.make_drop(training, rng);
    return model.encode_passage(g, model.embed(g, ex.passage_tokens),
                                model.embed(g, ex.question_tokens), drop);
  }

  // Loss node for one example under the configured objective. nullopt when
  // the gold span cannot be represented (longer than max_span_len), which
  // also bumps the skip counter.
  std::optional<Id> example_loss(Graph<T>& g, const TokenizedExample& ex,
                                 bool training = true,
                                 Rng* rng = nullptr) const {
    if (!ex.gold) throw ContractError("example_loss: example has no gold");
    auto enc = encode(g, ex, training, rng);
    SpanCandidate gold = *ex.gold;
    switch (cfg.objective) {
      case Objective::span_softmax: {
        auto spans = enumerate_spans(static_cast<int>(enc.size()),
                                     dims.max_span_len);
        auto dist = model.score_and_normalize(g, enc, spans);
        return model.nll_loss(g, dist, gold);
      }
      case Objective::span_logistic: {
        auto spans = enumerate_spans(static_cast<int>(enc.size()),
                                     dims.max_span_len);
        auto idx = find_span(spans, gold);
        if (!idx) {
          ++model.skipped_long_gold;
          return std::nullopt;
        }
        auto dist = model.score_and_normalize(g, enc, spans);
        return span_logistic_loss(g, dist.scores, *idx);
      }
      case Objective::membership:
        return membership_loss(g, word_head->forward(g, g.concat(0, enc)),
                               gold);
      case Objective::bio_crf: {
        auto stacked = g.concat(0, enc);
        return bio_crf_loss(g, bio_head->emissions(g, stacked),
                            bio_head->transitions(g), gold,
                            cfg.crf_constrained);
      }
      case Objective::endpoints: {
        auto stacked = g.concat(0, enc);
        auto d = make_endpoint_distributions(
            g, start_head->forward(g, stacked), end_head->forward(g, stacked));
        return endpoints_loss(g, d, gold);
      }
    }
    throw ConfigError("example_loss: unhandled objective");
  }

  // Exact decode for one example under the configured objective.
  SpanCandidate predict(const TokenizedExample& ex) const {
    Graph<T> g;
    auto enc = encode(g, ex, /*training=*/false, nullptr);
    auto to_doubles = [&](Id id) {
      const auto& t = g.value(id);
      return std::vector<double>(t.v.begin(), t.v.end());
    };
    switch (cfg.objective) {
      case Objective::span_softmax:
      case Objective::span_logistic: {
        auto spans = enumerate_spans(static_cast<int>(enc.size()),
                                     dims.max_span_len);
        return decode_argmax(model.score_and_normalize(g, enc, spans));
      }
      case Objective::membership:
        return membership_decode(
            to_doubles(word_head->forward(g, g.concat(0, enc))));
      case Objective::bio_crf: {
        auto stacked = g.concat(0, enc);
        return bio_viterbi_decode(to_doubles(bio_head->emissions(g, stacked)),
                                  to_doubles(bio_head->transitions(g)));
      }
      case Objective::endpoints: {
        auto stacked = g.concat(0, enc);
        auto d = make_endpoint_distributions(
            g, start_head->forward(g, stacked), end_head->forward(g, stacked));
        return endpoints_decode(
            std::vector<double>(d.p_start.begin(), d.p_start.end()),
            std::vector<double>(d.p_end.begin(), d.p_end.end()));
      }
    }
    throw ConfigError("predict: unhandled objective");
  }
};

// ---------------------------------------------------------------------------
// Training loop

struct StepRecord {
  long step = 0;
  double loss = 0;  // batch-mean loss
  double lr = 0;
};

struct TrainResult {
  Checkpoint checkpoint;          // state after the final step
  std::vector<StepRecord> steps;  // per-step records (deterministic mode)
  long processed_examples = 0;
};

using CheckpointSink = std::function<void(const Checkpoint&)>;
using LogSink = std::function<void(const std::string&)>;

// Snapshot of params + optimizer moments + counters, loadable by
// resume_from_checkpoint below.
Checkpoint make_checkpoint(const QaModel<float>& qa,
                           const AdamState<float>& opt, long step,
                           long dropped_unalignable);

// Restores parameters, moments, and step counters. Throws FormatError
// naming the first missing or shape-mismatched tensor.
void resume_from_checkpoint(const Checkpoint& ckpt, QaModel<float>& qa,
                            AdamState<float>& opt, long& step);

// Runs cfg.max_steps optimization steps (from the checkpoint's counter when
// resuming). Deterministic single-worker loop when cfg.workers == 1,
// asynchronous lock-free workers otherwise. `on_checkpoint` fires every
// cfg.eval_interval steps and once at the end.
TrainResult train_loop(const TrainConfig& cfg, const PreparedDataset& data,
                       const EmbeddingStore& emb,
                       const Checkpoint* resume = nullptr,
                       const CheckpointSink& on_checkpoint = {},
                       const LogSink& log = {});

}  // namespace rasor
