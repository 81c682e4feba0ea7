#include "rasor/embeddings.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rasor/errors.hpp"
#include "rasor/rng.hpp"

namespace rasor {

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

std::string ascii_lower(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void init_oov_rows(EmbeddingStore& store) {
  store.oov.resize(static_cast<std::size_t>(store.num_buckets) * store.dim);
  Rng rng(mix_seed(store.hash_seed, /*purpose=*/0xB0C4E75ULL));
  double scale = 1.0 / std::sqrt(static_cast<double>(store.dim));
  for (float& v : store.oov)
    v = static_cast<float>(rng.uniform(-0.5, 0.5) * scale);
}

}  // namespace

EmbeddingStore::Ref EmbeddingStore::lookup(const std::string& word) const {
  auto it = vocab.find(word);
  if (it == vocab.end()) it = vocab.find(ascii_lower(word));
  if (it != vocab.end()) return {false, it->second};
  return {true, bucket_of(word)};
}

int32_t EmbeddingStore::bucket_of(const std::string& word) const {
  return static_cast<int32_t>((fnv1a64(word) ^ hash_seed) %
                              static_cast<uint64_t>(num_buckets));
}

const float* EmbeddingStore::row_data(Ref r) const {
  const std::vector<float>& m = r.is_oov ? oov : pretrained;
  return m.data() + static_cast<std::size_t>(r.row) * dim;
}

std::vector<float> EmbeddingStore::vec(const std::string& word) const {
  const float* p = row_data(lookup(word));
  return std::vector<float>(p, p + dim);
}

EmbeddingStore EmbeddingStore::load_pretrained(const std::string& path,
                                               int dim, int num_buckets,
                                               uint64_t seed) {
  if (dim <= 0 || num_buckets <= 0)
    throw ConfigError("embeddings: dim and num_buckets must be positive");
  std::ifstream in(path);
  if (!in) throw IoError("embeddings: cannot open " + path);

  EmbeddingStore store;
  store.dim = dim;
  store.num_buckets = num_buckets;
  store.hash_seed = seed;

  std::string line;
  std::vector<float> row(dim);
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string word;
    if (!(ss >> word)) {  // blank line
      ++store.warnings;
      continue;
    }
    bool ok = true;
    for (int j = 0; j < dim; ++j) {
      double v;
      if (!(ss >> v)) {
        ok = false;
        break;
      }
      row[j] = static_cast<float>(v);
    }
    std::string extra;
    if (ok && (ss >> extra)) ok = false;  // trailing fields
    if (!ok || store.vocab.count(word)) {
      ++store.warnings;
      continue;
    }
    store.vocab.emplace(word, store.vocab_size());
    store.pretrained.insert(store.pretrained.end(), row.begin(), row.end());
  }
  if (store.vocab.empty())
    throw FormatError("embeddings: no valid rows in " + path);
  init_oov_rows(store);
  return store;
}

EmbeddingStore EmbeddingStore::from_rows(
    const std::vector<std::pair<std::string, std::vector<float>>>& rows,
    int dim, int num_buckets, uint64_t seed) {
  EmbeddingStore store;
  store.dim = dim;
  store.num_buckets = num_buckets;
  store.hash_seed = seed;
  for (const auto& [word, vec] : rows) {
    if (static_cast<int>(vec.size()) != dim)
      throw DimError("embeddings: row width " + std::to_string(vec.size()) +
                     " != dim " + std::to_string(dim));
    if (store.vocab.count(word)) {
      ++store.warnings;
      continue;
    }
    store.vocab.emplace(word, store.vocab_size());
    store.pretrained.insert(store.pretrained.end(), vec.begin(), vec.end());
  }
  if (store.vocab.empty()) throw FormatError("embeddings: no rows given");
  init_oov_rows(store);
  return store;
}

}  // namespace rasor
