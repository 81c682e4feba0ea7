#pragma once

// Shared test helpers: independent oracles and small utilities. Everything
// here is deliberately written against definitions (loops, enumeration),
// never against the library's own computation paths.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rasor/rng.hpp"

namespace testsupport {

// Plain O(n^3) matrix product oracle.
inline std::vector<double> matmul_oracle(const std::vector<double>& a,
                                         const std::vector<double>& b, int m,
                                         int k, int n) {
  std::vector<double> c(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      for (int p = 0; p < k; ++p)
        c[i * n + j] += a[i * k + p] * b[p * n + j];
  return c;
}

// Direct exp / sum-exp softmax oracle (no max subtraction; only safe for
// moderate inputs, which is exactly when it serves as an independent check).
inline std::vector<double> softmax_oracle(const std::vector<double>& x) {
  double s = 0;
  for (double v : x) s += std::exp(v);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::exp(x[i]) / s;
  return out;
}

// Brute-force span enumeration: all (i, j) with i <= j and j - i + 1 <= L.
inline std::vector<std::pair<int, int>> spans_oracle(int m, int L) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j)
      if (j - i + 1 <= L) out.emplace_back(i, j);
  std::sort(out.begin(), out.end());
  return out;
}

// Exhaustive max-contiguous-sum with shorter-then-leftmost tie break.
inline std::pair<int, int> kadane_oracle(const std::vector<double>& s) {
  int bs = 0, be = 0;
  double best = -std::numeric_limits<double>::infinity();
  int blen = 0;
  for (int i = 0; i < static_cast<int>(s.size()); ++i) {
    double sum = 0;
    for (int j = i; j < static_cast<int>(s.size()); ++j) {
      sum += s[j];
      int len = j - i + 1;
      if (sum > best || (sum == best && (len < blen ||
                                         (len == blen && i < bs)))) {
        best = sum;
        bs = i;
        be = j;
        blen = len;
      }
    }
  }
  return {bs, be};
}

// Exhaustive endpoint decode: argmax over i <= j of ps[i] * pe[j], ties by
// lexicographic (i, j).
inline std::pair<int, int> endpoints_oracle(const std::vector<double>& ps,
                                            const std::vector<double>& pe) {
  int bi = 0, bj = 0;
  double best = -1;
  for (int i = 0; i < static_cast<int>(ps.size()); ++i)
    for (int j = i; j < static_cast<int>(pe.size()); ++j) {
      double p = ps[i] * pe[j];
      if (p > best) {
        best = p;
        bi = i;
        bj = j;
      }
    }
  return {bi, bj};
}

// All valid single-contiguous-segment BIO sequences for length m, as strings
// over {B, I, O}. Used to enumerate the constrained CRF's support.
inline std::vector<std::string> valid_bio_sequences(int m) {
  std::vector<std::string> out;
  for (int s = 0; s < m; ++s)
    for (int e = s; e < m; ++e) {
      std::string seq(m, 'O');
      seq[s] = 'B';
      for (int k = s + 1; k <= e; ++k) seq[k] = 'I';
      out.push_back(seq);
    }
  return out;
}

// All 3^m label sequences.
inline std::vector<std::string> all_bio_sequences(int m) {
  std::vector<std::string> out;
  std::string cur(m, 'B');
  const char labels[3] = {'B', 'I', 'O'};
  std::vector<int> idx(m, 0);
  while (true) {
    for (int i = 0; i < m; ++i) cur[i] = labels[idx[i]];
    out.push_back(cur);
    int p = m - 1;
    while (p >= 0 && idx[p] == 2) idx[p--] = 0;
    if (p < 0) break;
    ++idx[p];
  }
  return out;
}

// Score of a BIO label string under emissions (m x 3, order B, I, O) and a
// 3 x 3 transition matrix.
inline double bio_sequence_score(const std::string& seq,
                                 const std::vector<double>& emissions,
                                 const std::vector<double>& transitions) {
  auto li = [](char c) { return c == 'B' ? 0 : (c == 'I' ? 1 : 2); };
  double s = 0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    s += emissions[t * 3 + li(seq[t])];
    if (t > 0) s += transitions[li(seq[t - 1]) * 3 + li(seq[t])];
  }
  return s;
}

inline double log_sum_exp_oracle(const std::vector<double>& xs) {
  double mx = *std::max_element(xs.begin(), xs.end());
  double s = 0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

// Scratch directory for tests that touch the filesystem.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    dir_ = std::filesystem::temp_directory_path() /
           ("rasor_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() { std::filesystem::remove_all(dir_); }
  std::filesystem::path path() const { return dir_; }
  std::string file(const std::string& name) const {
    return (dir_ / name).string();
  }

 private:
  std::filesystem::path dir_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

inline std::string fixture_path(const std::string& name) {
#ifdef RASOR_FIXTURE_DIR
  return std::string(RASOR_FIXTURE_DIR) + "/" + name;
#else
  return "fixtures/" + name;
#endif
}

}  // namespace testsupport
