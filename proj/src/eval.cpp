#include "rasor/eval.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "rasor/errors.hpp"

namespace rasor {

namespace {

// the reference scorer's punctuation class: the 32 ASCII symbols
bool is_punct(char c) {
  static const std::string punct = R"(!"#$%&'()*+,-./:;<=>?@[\]^_`{|}~)";
  return punct.find(c) != std::string::npos;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace

std::string normalize_answer(const std::string& text) {
  std::string lowered;
  lowered.reserve(text.size());
  for (char c : text)
    lowered.push_back(
        static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  std::string no_punct;
  no_punct.reserve(lowered.size());
  for (char c : lowered)
    if (!is_punct(c)) no_punct.push_back(c);  // removed, not space-replaced
  std::string out;
  for (const auto& tok : split_ws(no_punct)) {
    if (tok == "a" || tok == "an" || tok == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

int exact_match(const std::string& prediction,
                const std::vector<std::string>& references) {
  if (references.empty())
    throw ContractError("exact_match: no reference answers");
  std::string p = normalize_answer(prediction);
  for (const auto& r : references)
    if (p == normalize_answer(r)) return 1;
  return 0;
}

double f1_score(const std::string& prediction,
                const std::vector<std::string>& references) {
  if (references.empty()) throw ContractError("f1_score: no reference answers");
  auto pred_toks = split_ws(normalize_answer(prediction));
  double best = 0;
  for (const auto& r : references) {
    auto ref_toks = split_ws(normalize_answer(r));
    if (pred_toks.empty() && ref_toks.empty()) {
      best = 1;
      continue;
    }
    if (pred_toks.empty() || ref_toks.empty()) continue;  // this ref scores 0
    std::unordered_map<std::string, int> counts;
    for (const auto& t : ref_toks) ++counts[t];
    int overlap = 0;
    for (const auto& t : pred_toks) {
      auto it = counts.find(t);
      if (it != counts.end() && it->second > 0) {
        ++overlap;
        --it->second;
      }
    }
    if (overlap == 0) continue;
    double precision = static_cast<double>(overlap) / pred_toks.size();
    double recall = static_cast<double>(overlap) / ref_toks.size();
    best = std::max(best, 2 * precision * recall / (precision + recall));
  }
  return best;
}

EvalReport evaluate_dataset(const std::map<std::string, std::string>& preds,
                            const std::vector<TokenizedExample>& examples) {
  EvalReport report;
  for (const auto& ex : examples) {
    if (ex.gold_texts.empty()) continue;
    QuestionRecord rec;
    rec.qid = ex.id;
    auto it = preds.find(ex.id);
    if (it == preds.end()) {
      rec.missing = true;
      ++report.missing_predictions;
    } else {
      rec.prediction = it->second;
      rec.em = exact_match(rec.prediction, ex.gold_texts);
      rec.f1 = f1_score(rec.prediction, ex.gold_texts);
    }
    rec.pred_token_len =
        static_cast<int>(tokenize_with_offsets(rec.prediction).tokens.size());
    report.em += rec.em;
    report.f1 += rec.f1;
    report.records.push_back(std::move(rec));
  }
  report.total = static_cast<long>(report.records.size());
  if (report.total > 0) {
    report.em = 100.0 * report.em / report.total;
    report.f1 = 100.0 * report.f1 / report.total;
  }
  return report;
}

std::vector<LengthBucket> length_bucket_report(
    const std::vector<QuestionRecord>& records, int max_len) {
  if (max_len < 1) throw ContractError("length_bucket_report: max_len < 1");
  // index 0 holds zero-length predictions, 1..max_len exact lengths,
  // max_len+1 the overflow bucket
  std::vector<long> count(max_len + 2, 0);
  std::vector<double> em(max_len + 2, 0), f1(max_len + 2, 0);
  for (const auto& r : records) {
    int b = r.pred_token_len;
    if (b > max_len) b = max_len + 1;
    if (b < 0) b = 0;
    ++count[b];
    em[b] += r.em;
    f1[b] += r.f1;
  }
  std::vector<LengthBucket> out;
  for (int b = 0; b <= max_len + 1; ++b) {
    if (b == 0 && count[0] == 0) continue;  // "0" row only when needed
    LengthBucket row;
    row.label = b <= max_len ? std::to_string(b)
                             : std::to_string(max_len) + "+";
    row.count = count[b];
    if (count[b] > 0) {
      row.em = 100.0 * em[b] / count[b];
      row.f1 = 100.0 * f1[b] / count[b];
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["exact_match"] = report.em;
  j["f1"] = report.f1;
  j["total"] = report.total;
  j["missing_predictions"] = report.missing_predictions;
  auto records = nlohmann::ordered_json::array();
  for (const auto& r : report.records) {
    nlohmann::ordered_json rec;
    rec["qid"] = r.qid;
    rec["prediction"] = r.prediction;
    rec["em"] = r.em;
    rec["f1"] = r.f1;
    rec["pred_token_len"] = r.pred_token_len;
    rec["missing"] = r.missing;
    records.push_back(std::move(rec));
  }
  j["records"] = std::move(records);
  return j.dump(2) + "\n";
}

std::string buckets_to_csv(const std::vector<LengthBucket>& buckets) {
  std::ostringstream os;
  os << "length,count,em,f1\n";
  for (const auto& b : buckets)
    os << b.label << "," << b.count << "," << b.em << "," << b.f1 << "\n";
  return os.str();
}

std::map<std::string, std::string> load_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("predictions: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw FormatError("predictions: " + path +
                      " is not a JSON object of qid -> answer");
  std::map<std::string, std::string> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_string())
      throw FormatError("predictions: " + path + ": value for '" + it.key() +
                        "' is not a string");
    out[it.key()] = it.value().get<std::string>();
  }
  return out;
}

void save_predictions(const std::map<std::string, std::string>& preds,
                      const std::string& path) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : preds) j[k] = v;  // std::map iterates sorted
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("predictions: cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw IoError("predictions: short write to " + path);
}

std::string attention_to_json(const AttentionRecord& rec) {
  nlohmann::ordered_json j;
  j["qid"] = rec.qid;
  j["question_tokens"] = rec.question_tokens;
  j["passage_tokens"] = rec.passage_tokens;
  j["independent_attention"] = rec.independent;
  j["aligned_attention"] = rec.aligned;
  auto top = nlohmann::ordered_json::array();
  for (const auto& t : rec.top) {
    nlohmann::ordered_json row;
    row["start"] = t.span.start;
    row["end"] = t.span.end;
    row["prob"] = t.prob;
    row["text"] = t.text;
    top.push_back(std::move(row));
  }
  j["top_spans"] = std::move(top);
  return j.dump(2) + "\n";
}

}  // namespace rasor
