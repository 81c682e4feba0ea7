#pragma once

#include <compare>
#include <cstdint>
#include <vector>

namespace rasor {

// Closed token interval [start, end], 0-based.
struct SpanCandidate {
  int32_t start = 0;
  int32_t end = 0;
  friend auto operator<=>(const SpanCandidate&, const SpanCandidate&) = default;
  int32_t length() const { return end - start + 1; }
};

// All spans of length <= max_len in a passage of m tokens, sorted
// lexicographically by (start, end).
std::vector<SpanCandidate> enumerate_spans(int m, int max_len);

// = sum_i min(max_len, m - i), without materializing the list
int64_t count_spans(int m, int max_len);

}  // namespace rasor
