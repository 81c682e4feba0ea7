#pragma once

#include <string>
#include <vector>

#include "rasor/params.hpp"
#include "rasor/rng.hpp"
#include "rasor/tensor.hpp"

namespace rasor {

inline constexpr double kInitLow = -0.1;
inline constexpr double kInitHigh = 0.1;

/// Fully connected feed-forward network. `depth` affine layers of width
/// `width`; hidden layers use relu, the output layer's relu is configurable
/// (on by default, since every use here feeds a linear scoring vector).
template <typename T>
struct Ffnn {
  std::vector<Tensor<T>*> weights;
  std::vector<Tensor<T>*> biases;
  bool output_relu = true;

  Ffnn() = default;

  Ffnn(ParamStore<T>& store, const std::string& prefix, int input, int width,
       int depth, bool out_relu, Rng& rng)
      : output_relu(out_relu) {
    if (depth < 1) throw ConfigError("ffnn depth must be >= 1");
    int in = input;
    for (int l = 0; l < depth; ++l) {
      auto& w = store.add(prefix + ".w" + std::to_string(l), Shape{in, width});
      auto& b = store.add(prefix + ".b" + std::to_string(l), Shape{1, width});
      init_uniform(w, rng, kInitLow, kInitHigh);
      weights.push_back(&w);
      biases.push_back(&b);
      in = width;
    }
  }

  int input_size() const { return weights.front()->rows(); }
  int output_size() const { return weights.back()->cols(); }

  /// Applies the network to every row of x.
  typename Graph<T>::Id forward(Graph<T>& g, typename Graph<T>::Id x) const {
    if (g.value(x).cols() != input_size())
      throw DimError("ffnn input width mismatch: " +
                     shape_str(g.value(x).shape) + " vs " +
                     shape_str(weights.front()->shape));
    auto h = x;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      auto affine = g.add(g.matmul(h, g.leaf(*weights[l])),
                          g.repeat_rows(g.leaf(*biases[l]), g.value(h).rows()));
      bool last = l + 1 == weights.size();
      h = (!last || output_relu) ? g.relu(affine) : affine;
    }
    return h;
  }
};

/// LSTM cell with coupled input/forget gates: the forget gate is defined as
/// 1 - i and has no parameters of its own.
template <typename T>
struct LstmCell {
  Tensor<T>*w_xi, *w_hi, *b_i;
  Tensor<T>*w_xo, *w_ho, *b_o;
  Tensor<T>*w_xg, *w_hg, *b_g;
  int hidden = 0;

  LstmCell() = default;

  LstmCell(ParamStore<T>& store, const std::string& prefix, int input, int d,
           Rng& rng)
      : hidden(d) {
    auto mk = [&](const std::string& n, int r, int c) {
      auto& t = store.add(prefix + "." + n, Shape{r, c});
      init_uniform(t, rng, kInitLow, kInitHigh);
      return &t;
    };
    auto mkb = [&](const std::string& n) {
      return &store.add(prefix + "." + n, Shape{1, d});
    };
    w_xi = mk("w_xi", input, d);
    w_hi = mk("w_hi", d, d);
    b_i = mkb("b_i");
    w_xo = mk("w_xo", input, d);
    w_ho = mk("w_ho", d, d);
    b_o = mkb("b_o");
    w_xg = mk("w_xg", input, d);
    w_hg = mk("w_hg", d, d);
    b_g = mkb("b_g");
  }

  struct State {
    typename Graph<T>::Id h;
    typename Graph<T>::Id c;
  };

  /// One timestep. `recurrent_mask`, when valid, multiplies h_prev before the
  /// recurrent projections (shared-mask variational dropout).
  State step(Graph<T>& g, typename Graph<T>::Id x, State prev,
             typename Graph<T>::Id recurrent_mask = -1) const {
    auto hp = recurrent_mask >= 0 ? g.mul(prev.h, recurrent_mask) : prev.h;
    auto gate = [&](Tensor<T>* wx, Tensor<T>* wh, Tensor<T>* b) {
      return g.add(g.add(g.matmul(x, g.leaf(*wx)), g.matmul(hp, g.leaf(*wh))),
                   g.leaf(*b));
    };
    auto i = g.sigmoid(gate(w_xi, w_hi, b_i));
    auto o = g.sigmoid(gate(w_xo, w_ho, b_o));
    auto cand = g.tanh(gate(w_xg, w_hg, b_g));
    auto ones = g.constant(Tensor<T>(Shape{1, hidden}, T(1)));
    auto c = g.add(g.mul(g.sub(ones, i), prev.c), g.mul(i, cand));
    auto h = g.mul(o, g.tanh(c));
    return {h, c};
  }

  State zero_state(Graph<T>& g) const {
    auto z = g.constant(Tensor<T>(Shape{1, hidden}));
    return {z, z};
  }
};

/// Dropout plan for one sequence pass: masks are sampled once per sequence
/// and reused at every timestep (never resampled per step).
struct DropoutSpec {
  double rate = 0;
  bool training = false;
  bool on_input = true;
  bool on_recurrent = true;
  Rng* rng = nullptr;

  bool active() const { return training && rate > 0; }
};

/// Samples one inverted-dropout keep mask of the given width.
template <typename T>
typename Graph<T>::Id sample_mask(Graph<T>& g, int width, double rate,
                                  Rng& rng) {
  if (rate < 0 || rate >= 1)
    throw ConfigError("dropout rate must lie in [0, 1), got " +
                      std::to_string(rate));
  Tensor<T> m(Shape{1, width});
  T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (int j = 0; j < width; ++j)
    m.v[j] = rng.uniform() < rate ? T(0) : keep_scale;
  return g.constant(std::move(m));
}

/// Applies a single shared mask across all timesteps of a sequence (identity
/// in eval mode or at rate 0).
template <typename T>
std::vector<typename Graph<T>::Id> shared_dropout(
    Graph<T>& g, const std::vector<typename Graph<T>::Id>& xs, double rate,
    bool training, Rng& rng) {
  if (rate < 0 || rate >= 1)
    throw ConfigError("dropout rate must lie in [0, 1), got " +
                      std::to_string(rate));
  if (!training || rate == 0) return xs;
  if (xs.empty()) return xs;
  auto mask = sample_mask<T>(g, g.value(xs[0]).cols(), rate, rng);
  std::vector<typename Graph<T>::Id> out;
  out.reserve(xs.size());
  for (auto x : xs) out.push_back(g.mul(x, mask));
  return out;
}

/// Stack of bidirectional coupled-gate LSTM layers. Layer l > 0 consumes the
/// per-timestep [forward; backward] concatenation of layer l - 1.
template <typename T>
struct BiLstmStack {
  std::vector<LstmCell<T>> fwd;
  std::vector<LstmCell<T>> bwd;
  mutable long pass_count = 0;  // instrumentation: one increment per run()

  BiLstmStack() = default;

  BiLstmStack(ParamStore<T>& store, const std::string& prefix, int input,
              int d, int layers, Rng& rng) {
    if (layers < 1) throw ConfigError("bilstm needs at least one layer");
    int in = input;
    for (int l = 0; l < layers; ++l) {
      fwd.emplace_back(store, prefix + ".l" + std::to_string(l) + ".fwd", in,
                       d, rng);
      bwd.emplace_back(store, prefix + ".l" + std::to_string(l) + ".bwd", in,
                       d, rng);
      in = 2 * d;
    }
  }

  int layer_count() const { return static_cast<int>(fwd.size()); }
  int output_size() const { return 2 * fwd.back().hidden; }

  /// Runs the full stack; returns one sequence of 1 x 2d outputs per layer
  /// (back() is the top layer).
  std::vector<std::vector<typename Graph<T>::Id>> run(
      Graph<T>& g, const std::vector<typename Graph<T>::Id>& xs,
      const DropoutSpec& drop = {}) const {
    if (xs.empty()) throw ContractError("bilstm over an empty sequence");
    ++pass_count;
    std::vector<std::vector<typename Graph<T>::Id>> per_layer;
    std::vector<typename Graph<T>::Id> cur = xs;
    for (int l = 0; l < layer_count(); ++l) {
      if (drop.active() && drop.on_input)
        cur = shared_dropout(g, cur, drop.rate, true, *drop.rng);
      auto dir = [&](const LstmCell<T>& cell, bool reverse) {
        typename Graph<T>::Id rmask = -1;
        if (drop.active() && drop.on_recurrent)
          rmask = sample_mask<T>(g, cell.hidden, drop.rate, *drop.rng);
        std::vector<typename Graph<T>::Id> hs(cur.size());
        auto st = cell.zero_state(g);
        for (std::size_t k = 0; k < cur.size(); ++k) {
          std::size_t t = reverse ? cur.size() - 1 - k : k;
          st = cell.step(g, cur[t], st, rmask);
          hs[t] = st.h;
        }
        return hs;
      };
      auto hf = dir(fwd[l], false);
      auto hb = dir(bwd[l], true);
      std::vector<typename Graph<T>::Id> out(cur.size());
      for (std::size_t t = 0; t < cur.size(); ++t)
        out[t] = g.concat(1, {hf[t], hb[t]});
      per_layer.push_back(out);
      cur = out;
    }
    return per_layer;
  }

  /// Top-layer outputs only.
  std::vector<typename Graph<T>::Id> run_top(
      Graph<T>& g, const std::vector<typename Graph<T>::Id>& xs,
      const DropoutSpec& drop = {}) const {
    return run(g, xs, drop).back();
  }
};

}  // namespace rasor
