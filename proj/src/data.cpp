#include "rasor/data.hpp"

#include <cctype>
#include <fstream>

#include <json.hpp>

#include "rasor/errors.hpp"

namespace rasor {

namespace {

using nlohmann::json;

const json& need(const json& obj, const char* field,
                 const std::string& origin) {
  auto it = obj.find(field);
  if (it == obj.end())
    throw FormatError(origin + ": missing field '" + field + "'");
  return *it;
}

bool is_punct(unsigned char c) { return std::ispunct(c) != 0; }
bool is_space(unsigned char c) { return std::isspace(c) != 0; }

}  // namespace

std::vector<RawExample> parse_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("dataset: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_dataset_json(text, path);
}

std::vector<RawExample> parse_dataset_json(const std::string& text,
                                           const std::string& origin) {
  json root = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (root.is_discarded())
    throw FormatError(origin + ": malformed JSON");
  std::vector<RawExample> out;
  for (const auto& article : need(root, "data", origin)) {
    for (const auto& para : need(article, "paragraphs", origin)) {
      const auto& context = need(para, "context", origin);
      if (!context.is_string())
        throw FormatError(origin + ": 'context' must be a string");
      std::string passage = context.get<std::string>();
      for (const auto& qa : need(para, "qas", origin)) {
        RawExample ex;
        ex.passage = passage;
        ex.id = need(qa, "id", origin).get<std::string>();
        ex.question = need(qa, "question", origin).get<std::string>();
        const auto& answers = need(qa, "answers", origin);
        for (const auto& ans : answers) {
          RawAnswer a;
          a.text = need(ans, "text", origin).get<std::string>();
          a.answer_start = need(ans, "answer_start", origin).get<int>();
          if (a.answer_start < 0 ||
              a.answer_start > static_cast<int>(passage.size()))
            throw FormatError(origin + ": answer_start " +
                              std::to_string(a.answer_start) +
                              " outside passage for qa '" + ex.id + "'");
          ex.answers.push_back(std::move(a));
        }
        if (ex.answers.empty())
          throw FormatError(origin + ": qa '" + ex.id + "' has no answers");
        out.push_back(std::move(ex));
      }
    }
  }
  return out;
}

Tokenized tokenize_with_offsets(const std::string& text) {
  Tokenized out;
  int n = static_cast<int>(text.size());
  int i = 0;
  auto emit = [&](int b, int e) {
    out.tokens.push_back(text.substr(b, e - b));
    out.spans.push_back({b, e});
  };
  while (i < n) {
    if (is_space(text[i])) {
      ++i;
      continue;
    }
    int chunk_end = i;
    while (chunk_end < n && !is_space(text[chunk_end])) ++chunk_end;
    int b = i, e = chunk_end;
    while (b < e && is_punct(text[b])) emit(b, b + 1), ++b;
    int core_end = e;
    while (core_end > b && is_punct(text[core_end - 1])) --core_end;
    if (b < core_end) emit(b, core_end);
    for (int p = core_end; p < e; ++p) emit(p, p + 1);
    i = chunk_end;
  }
  return out;
}

std::optional<SpanCandidate> align_answer_span(
    const std::vector<TokenSpan>& spans, const std::string& answer_text,
    int answer_start) {
  int a_begin = answer_start;
  int a_end = answer_start + static_cast<int>(answer_text.size());
  if (a_end <= a_begin) return std::nullopt;
  int first = -1, last = -1;
  for (int t = 0; t < static_cast<int>(spans.size()); ++t) {
    if (spans[t].begin < a_end && spans[t].end > a_begin) {
      if (first < 0) first = t;
      last = t;
    }
  }
  if (first < 0) return std::nullopt;
  return SpanCandidate{first, last};
}

PreparedDataset prepare_dataset(const std::vector<RawExample>& raw,
                                bool keep_unaligned) {
  PreparedDataset out;
  for (const auto& ex : raw) {
    TokenizedExample te;
    te.id = ex.id;
    te.passage = ex.passage;
    auto q = tokenize_with_offsets(ex.question);
    te.question_tokens = std::move(q.tokens);
    auto p = tokenize_with_offsets(ex.passage);
    te.passage_tokens = std::move(p.tokens);
    te.passage_spans = std::move(p.spans);
    for (const auto& a : ex.answers) te.gold_texts.push_back(a.text);
    // training uses the first reference
    te.gold = align_answer_span(te.passage_spans, ex.answers[0].text,
                                ex.answers[0].answer_start);
    if (!te.gold) {
      ++out.dropped_unalignable;
      if (!keep_unaligned) continue;
    }
    out.examples.push_back(std::move(te));
  }
  return out;
}

}  // namespace rasor
