#include "rasor/spans.hpp"

#include <algorithm>

#include "rasor/errors.hpp"

namespace rasor {

std::vector<SpanCandidate> enumerate_spans(int m, int max_len) {
  if (m < 1) throw ContractError("enumerate_spans: empty passage");
  if (max_len < 1) throw ContractError("enumerate_spans: max_len < 1");
  std::vector<SpanCandidate> spans;
  spans.reserve(static_cast<std::size_t>(count_spans(m, max_len)));
  for (int i = 0; i < m; ++i) {
    int last = std::min(m - 1, i + max_len - 1);
    for (int j = i; j <= last; ++j) spans.push_back({i, j});
  }
  return spans;
}

int64_t count_spans(int m, int max_len) {
  if (m < 1) throw ContractError("count_spans: empty passage");
  if (max_len < 1) throw ContractError("count_spans: max_len < 1");
  int64_t n = 0;
  for (int i = 0; i < m; ++i) n += std::min(max_len, m - i);
  return n;
}

}  // namespace rasor
