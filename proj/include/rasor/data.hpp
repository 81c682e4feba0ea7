#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rasor/spans.hpp"

namespace rasor {

struct RawAnswer {
  std::string text;
  int answer_start = 0;  // character offset into the passage
};

struct RawExample {
  std::string id;
  std::string question;
  std::string passage;
  std::vector<RawAnswer> answers;  // >= 1; dev entries keep all references
};

// Half-open character range [begin, end) into the original string.
struct TokenSpan {
  int begin = 0;
  int end = 0;
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

struct Tokenized {
  std::vector<std::string> tokens;
  std::vector<TokenSpan> spans;
};

struct TokenizedExample {
  std::string id;
  std::vector<std::string> question_tokens;
  std::vector<std::string> passage_tokens;
  std::vector<TokenSpan> passage_spans;
  std::string passage;                 // original text, for answer recovery
  std::optional<SpanCandidate> gold;   // first aligned reference (training)
  std::vector<std::string> gold_texts; // all reference texts (evaluation)
};

struct PreparedDataset {
  std::vector<TokenizedExample> examples;
  long dropped_unalignable = 0;  // training drops; eval keeps the example
};

// SQuAD v1.1 container: data -> paragraphs -> {context, qas}. Malformed
// JSON or missing fields raise FormatError naming the path/field.
std::vector<RawExample> parse_dataset(const std::string& path);
std::vector<RawExample> parse_dataset_json(const std::string& text,
                                           const std::string& origin);

// Whitespace split, then leading/trailing punctuation characters peel off
// as single-character tokens. Every non-whitespace character lands in
// exactly one token; spans index the original string.
Tokenized tokenize_with_offsets(const std::string& text);

// Minimal contiguous token range whose character extent overlaps
// [answer_start, answer_start + |answer_text|); nullopt when no token
// overlaps (unalignable).
std::optional<SpanCandidate> align_answer_span(
    const std::vector<TokenSpan>& spans, const std::string& answer_text,
    int answer_start);

// Tokenizes everything and aligns the first gold answer of each example.
// keep_unaligned retains examples whose answers fail to align (evaluation
// keeps scoring them against raw text); training drops them.
PreparedDataset prepare_dataset(const std::vector<RawExample>& raw,
                                bool keep_unaligned);

}  // namespace rasor
