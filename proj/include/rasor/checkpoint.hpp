#pragma once

#include <string>
#include <vector>

#include "rasor/config.hpp"
#include "rasor/params.hpp"

namespace rasor {

struct TensorBlob {
  std::string name;
  Shape shape;
  std::vector<float> data;  // stored little-endian float32 on disk
};

// Self-describing training snapshot: text header (version, counters, config
// as key=value) followed by named binary tensors. Loading parses the whole
// file into this value before anything is applied, so a truncated file never
// leaves partial state behind.
struct Checkpoint {
  static constexpr int kVersion = 1;

  TrainConfig config;
  long step = 0;
  long skipped_nonfinite = 0;     // batches skipped for non-finite grads
  long dropped_unalignable = 0;   // data-pipeline drop counter
  long skipped_long_gold = 0;     // golds outside the candidate set
  std::vector<TensorBlob> tensors;  // param/<name>, adam_m/<name>, ...

  const TensorBlob* find(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Copies `param/<name>` blobs into the store, validating every shape.
// Throws FormatError naming the first missing or mismatched tensor.
template <typename T>
void apply_param_blobs(const Checkpoint& ckpt, ParamStore<T>& store) {
  for (std::size_t i = 0; i < store.count(); ++i) {
    auto& e = store.entry(i);
    const TensorBlob* blob = ckpt.find("param/" + e.name);
    if (!blob)
      throw FormatError("checkpoint: missing tensor param/" + e.name);
    if (blob->shape != e.tensor.shape)
      throw FormatError("checkpoint: tensor param/" + e.name + " has shape " +
                        shape_str(blob->shape) + ", model expects " +
                        shape_str(e.tensor.shape));
    for (std::size_t k = 0; k < blob->data.size(); ++k)
      e.tensor.v[k] = static_cast<T>(blob->data[k]);
  }
}

template <typename T>
TensorBlob to_blob(const std::string& name, const Tensor<T>& t) {
  TensorBlob b{name, t.shape, {}};
  b.data.reserve(t.v.size());
  for (const T& x : t.v) b.data.push_back(static_cast<float>(x));
  return b;
}

}  // namespace rasor
