#include "rasor/decoders.hpp"

#include <limits>
#include <optional>

#include "rasor/errors.hpp"

namespace rasor {

Objective parse_objective(const std::string& name) {
  if (name == "span_softmax") return Objective::span_softmax;
  if (name == "span_logistic") return Objective::span_logistic;
  if (name == "endpoints") return Objective::endpoints;
  if (name == "bio_crf") return Objective::bio_crf;
  if (name == "membership") return Objective::membership;
  throw ConfigError("unknown objective '" + name +
                    "' (expected span_softmax, span_logistic, endpoints, "
                    "bio_crf or membership)");
}

std::string objective_name(Objective o) {
  switch (o) {
    case Objective::span_softmax: return "span_softmax";
    case Objective::span_logistic: return "span_logistic";
    case Objective::endpoints: return "endpoints";
    case Objective::bio_crf: return "bio_crf";
    case Objective::membership: return "membership";
  }
  throw ConfigError("unknown objective value");
}

SpanCandidate membership_decode(const std::vector<double>& scores) {
  if (scores.empty()) throw ContractError("membership_decode: empty scores");
  int m = static_cast<int>(scores.size());
  double best = -std::numeric_limits<double>::infinity();
  int best_s = 0, best_e = 0;
  double cur = 0;
  int cur_s = 0;
  for (int i = 0; i < m; ++i) {
    // restart on cur <= 0: extending a nonpositive prefix never increases
    // the sum, and on exact zero the shorter suffix wins the tie
    if (i == 0 || cur <= 0) {
      cur = scores[i];
      cur_s = i;
    } else {
      cur += scores[i];
    }
    int len = i - cur_s + 1, blen = best_e - best_s + 1;
    if (cur > best || (cur == best && len < blen)) {
      best = cur;
      best_s = cur_s;
      best_e = i;
    }
  }
  return {best_s, best_e};
}

namespace {

// automaton states for the single-segment constraint, each remembering the
// label it just emitted so transition scores stay well-defined
enum State { kPreO = 0, kInB = 1, kInI = 2, kPostO = 3 };

struct Path {
  double score = 0;
  SpanCandidate seg{-1, -1};  // segment so far; (-1,-1) before any B
};

// Higher score wins; equal scores prefer the lexicographically smaller
// decoded (start, end). Within one automaton state tied paths share every
// future extension, so comparing segments-so-far decides the final spans.
// (Equivalently: smallest label string under B < O < I.)
bool better(const std::optional<Path>& cand, const std::optional<Path>& inc) {
  if (!cand) return false;
  if (!inc) return true;
  if (cand->score != inc->score) return cand->score > inc->score;
  return cand->seg < inc->seg;
}

}  // namespace

SpanCandidate bio_viterbi_decode(const std::vector<double>& emissions,
                                 const std::vector<double>& transitions) {
  if (emissions.empty() || emissions.size() % 3 != 0)
    throw ContractError("viterbi: emissions must be m x 3 and nonempty");
  if (transitions.size() != 9)
    throw ContractError("viterbi: transitions must be 3 x 3");
  int m = static_cast<int>(emissions.size() / 3);
  auto emi = [&](int t, int l) { return emissions[t * 3 + l]; };
  auto tr = [&](int a, int b) { return transitions[a * 3 + b]; };
  const int B = 0, I = 1, O = 2;

  std::vector<std::optional<Path>> cur(4), next(4);
  cur[kPreO] = Path{emi(0, O), {-1, -1}};
  cur[kInB] = Path{emi(0, B), {0, 0}};
  for (int t = 1; t < m; ++t) {
    for (auto& p : next) p.reset();
    auto relax = [&](State from, State to, int ll, int l) {
      if (!cur[from]) return;
      Path cand{cur[from]->score + tr(ll, l) + emi(t, l), cur[from]->seg};
      if (l == B) cand.seg = {t, t};
      if (l == I) cand.seg.end = t;
      if (better(cand, next[to])) next[to] = cand;
    };
    relax(kPreO, kPreO, O, O);
    relax(kPreO, kInB, O, B);
    relax(kInB, kInI, B, I);
    relax(kInI, kInI, I, I);
    relax(kInB, kPostO, B, O);
    relax(kInI, kPostO, I, O);
    relax(kPostO, kPostO, O, O);
    cur.swap(next);
  }

  std::optional<Path> best;
  for (State s : {kInB, kInI, kPostO})
    if (better(cur[s], best)) best = cur[s];
  return best->seg;  // m >= 1 keeps at least kInB reachable
}

SpanCandidate endpoints_decode(const std::vector<double>& p_start,
                               const std::vector<double>& p_end) {
  if (p_start.empty() || p_start.size() != p_end.size())
    throw ContractError("endpoints_decode: distributions must match and be "
                        "nonempty");
  int m = static_cast<int>(p_start.size());
  int best_start = 0;
  double best = -std::numeric_limits<double>::infinity();
  SpanCandidate out{0, 0};
  for (int j = 0; j < m; ++j) {
    // strictly-greater keeps the smallest maximizing start index, which
    // makes first-found ties lexicographically minimal
    if (p_start[j] > p_start[best_start]) best_start = j;
    double v = p_start[best_start] * p_end[j];
    if (v > best) {
      best = v;
      out = {best_start, j};
    }
  }
  return out;
}

}  // namespace rasor
