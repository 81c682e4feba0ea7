#pragma once

#include <string>
#include <vector>

#include "rasor/spans.hpp"

namespace rasor {

enum class Objective {
  span_softmax,
  span_logistic,
  endpoints,
  bio_crf,
  membership,
};

Objective parse_objective(const std::string& name);
std::string objective_name(Objective o);

// Maximum contiguous sum of word scores (Kadane scan). Ties prefer the
// shorter span, then the leftmost.
SpanCandidate membership_decode(const std::vector<double>& scores);

// Highest-scoring valid BIO sequence (exactly one contiguous B I* segment),
// returned as its segment. Emissions are m x 3 row-major in label order
// B, I, O; transitions are 3 x 3 (prev x next). Ties pick the smallest
// (start, end) segment, matching the other decoders' tie rule.
SpanCandidate bio_viterbi_decode(const std::vector<double>& emissions,
                                 const std::vector<double>& transitions);

// argmax over {(i, j) : i <= j} of p_start[i] * p_end[j] via one linear
// scan; ties lexicographic.
SpanCandidate endpoints_decode(const std::vector<double>& p_start,
                               const std::vector<double>& p_end);

}  // namespace rasor
