#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rasor/decoders.hpp"
#include "rasor/model.hpp"

namespace rasor {

// Flat training configuration. Model sizes follow the grid's shape: one
// hidden size d shared by the question and passage BiLSTMs, one FFNN
// width/depth shared by the alignment, question-summary, and span heads.
struct TrainConfig {
  // model
  int emb_dim = 300;
  int d = 50;
  int ffnn_width = 50;
  int ffnn_depth = 1;
  int q_layers = 2;
  int p_layers = 2;
  int max_span_len = 30;
  double dropout = 0.1;
  bool train_oov = false;
  int num_buckets = 5000;
  std::uint64_t hash_seed = 0x5eed;

  // objective
  Objective objective = Objective::span_softmax;
  bool crf_constrained = true;

  // optimization
  int batch_size = 4;
  double base_lr = 0.001;
  double decay_multiplier = 0.95;
  int decay_interval = 10000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_clip = 0.0;  // 0 disables clipping

  // schedule
  std::uint64_t seed = 1;
  int max_steps = 1000;
  int eval_interval = 200;
  int workers = 1;  // 1 = deterministic; > 1 = asynchronous
  bool allow_off_grid = false;

  ModelDims to_dims() const;

  // fields outside the documented search grid (decay multiplier in
  // {0.9, 0.95, 1.0}, stacked LSTM layers in 1..3)
  std::vector<std::string> off_grid_fields() const;

  // throws ConfigError on invalid values, or on off-grid values unless
  // allow_off_grid is set
  void validate() const;

  // stable-order snapshot used by checkpoints and logs
  std::vector<std::pair<std::string, std::string>> to_key_values() const;
};

// Applies one `key=value` assignment; unknown keys and unparsable values
// throw ConfigError naming the key.
void apply_config_entry(TrainConfig& cfg, const std::string& key,
                        const std::string& value);

// Flat key=value text, one per line, '#' comments and blank lines ignored.
TrainConfig parse_config_text(const std::string& text,
                              const std::string& origin);
TrainConfig load_config(const std::string& path);

}  // namespace rasor
