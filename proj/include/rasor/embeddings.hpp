#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rasor {

uint64_t fnv1a64(std::string_view s);

// Pretrained word vectors plus hashed out-of-vocabulary buckets. Plain float
// storage, immutable after load; the model decides whether bucket rows become
// trainable parameters.
struct EmbeddingStore {
  int dim = 0;
  int num_buckets = 0;
  uint64_t hash_seed = 0;
  std::unordered_map<std::string, int32_t> vocab;
  std::vector<float> pretrained;  // vocab_size x dim, row-major
  std::vector<float> oov;         // num_buckets x dim, row-major
  long warnings = 0;              // malformed or duplicate lines skipped

  int32_t vocab_size() const { return static_cast<int32_t>(vocab.size()); }

  struct Ref {
    bool is_oov = false;
    int32_t row = 0;  // into pretrained or oov depending on is_oov
  };

  // exact match, then lowercase match, then hash bucket; total function
  Ref lookup(const std::string& word) const;
  int32_t bucket_of(const std::string& word) const;
  const float* row_data(Ref r) const;
  std::vector<float> vec(const std::string& word) const;

  static EmbeddingStore load_pretrained(const std::string& path, int dim,
                                        int num_buckets = 5000,
                                        uint64_t seed = 0x5eed);
  // test/desk helper: build a store from in-memory rows
  static EmbeddingStore from_rows(
      const std::vector<std::pair<std::string, std::vector<float>>>& rows,
      int dim, int num_buckets = 16, uint64_t seed = 0x5eed);
};

}  // namespace rasor
