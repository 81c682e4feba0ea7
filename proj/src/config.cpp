#include "rasor/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "rasor/errors.hpp"

namespace rasor {

ModelDims TrainConfig::to_dims() const {
  ModelDims m;
  m.emb_dim = emb_dim;
  m.align_width = ffnn_width;
  m.align_depth = ffnn_depth;
  m.d_q = d;
  m.q_layers = q_layers;
  m.indep_width = ffnn_width;
  m.indep_depth = ffnn_depth;
  m.d_p = d;
  m.p_layers = p_layers;
  m.span_width = ffnn_width;
  m.span_depth = ffnn_depth;
  m.max_span_len = max_span_len;
  m.dropout = dropout;
  m.train_oov = train_oov;
  return m;
}

std::vector<std::string> TrainConfig::off_grid_fields() const {
  std::vector<std::string> out;
  bool on_grid = false;
  for (double g : {0.9, 0.95, 1.0})
    if (std::fabs(decay_multiplier - g) < 1e-9) on_grid = true;
  if (!on_grid) out.push_back("decay_multiplier");
  if (q_layers < 1 || q_layers > 3) out.push_back("q_layers");
  if (p_layers < 1 || p_layers > 3) out.push_back("p_layers");
  return out;
}

void TrainConfig::validate() const {
  auto positive = [](const char* k, double v) {
    if (!(v > 0))
      throw ConfigError(std::string("config: ") + k + " must be positive");
  };
  positive("emb_dim", emb_dim);
  positive("d", d);
  positive("ffnn_width", ffnn_width);
  positive("ffnn_depth", ffnn_depth);
  positive("max_span_len", max_span_len);
  positive("num_buckets", num_buckets);
  positive("batch_size", batch_size);
  positive("base_lr", base_lr);
  positive("decay_multiplier", decay_multiplier);
  positive("decay_interval", decay_interval);
  positive("max_steps", max_steps);
  positive("eval_interval", eval_interval);
  positive("workers", workers);
  if (dropout < 0 || dropout >= 1)
    throw ConfigError("config: dropout must lie in [0, 1)");
  if (grad_clip < 0) throw ConfigError("config: grad_clip must be >= 0");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
    throw ConfigError("config: beta1/beta2 must lie in [0, 1)");
  if (auto off = off_grid_fields(); !off.empty() && !allow_off_grid) {
    std::string msg = "config: off-grid value for";
    for (const auto& f : off) msg += " " + f;
    msg += " (set allow_off_grid=true to accept)";
    throw ConfigError(msg);
  }
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" +
                      v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    std::uint64_t out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key +
                      "' expects an unsigned integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" +
                      v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: key '" + key + "' expects true/false, got '" +
                    v + "'");
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void apply_config_entry(TrainConfig& cfg, const std::string& key,
                        const std::string& value) {
  using Setter = std::function<void(TrainConfig&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      {"emb_dim", [](TrainConfig& c, const std::string& v) {
         c.emb_dim = parse_int("emb_dim", v); }},
      {"d", [](TrainConfig& c, const std::string& v) {
         c.d = parse_int("d", v); }},
      {"ffnn_width", [](TrainConfig& c, const std::string& v) {
         c.ffnn_width = parse_int("ffnn_width", v); }},
      {"ffnn_depth", [](TrainConfig& c, const std::string& v) {
         c.ffnn_depth = parse_int("ffnn_depth", v); }},
      {"q_layers", [](TrainConfig& c, const std::string& v) {
         c.q_layers = parse_int("q_layers", v); }},
      {"p_layers", [](TrainConfig& c, const std::string& v) {
         c.p_layers = parse_int("p_layers", v); }},
      {"max_span_len", [](TrainConfig& c, const std::string& v) {
         c.max_span_len = parse_int("max_span_len", v); }},
      {"dropout", [](TrainConfig& c, const std::string& v) {
         c.dropout = parse_double("dropout", v); }},
      {"train_oov", [](TrainConfig& c, const std::string& v) {
         c.train_oov = parse_bool("train_oov", v); }},
      {"num_buckets", [](TrainConfig& c, const std::string& v) {
         c.num_buckets = parse_int("num_buckets", v); }},
      {"hash_seed", [](TrainConfig& c, const std::string& v) {
         c.hash_seed = parse_u64("hash_seed", v); }},
      {"objective", [](TrainConfig& c, const std::string& v) {
         c.objective = parse_objective(v); }},
      {"crf_constrained", [](TrainConfig& c, const std::string& v) {
         c.crf_constrained = parse_bool("crf_constrained", v); }},
      {"batch_size", [](TrainConfig& c, const std::string& v) {
         c.batch_size = parse_int("batch_size", v); }},
      {"base_lr", [](TrainConfig& c, const std::string& v) {
         c.base_lr = parse_double("base_lr", v); }},
      {"decay_multiplier", [](TrainConfig& c, const std::string& v) {
         c.decay_multiplier = parse_double("decay_multiplier", v); }},
      {"decay_interval", [](TrainConfig& c, const std::string& v) {
         c.decay_interval = parse_int("decay_interval", v); }},
      {"beta1", [](TrainConfig& c, const std::string& v) {
         c.beta1 = parse_double("beta1", v); }},
      {"beta2", [](TrainConfig& c, const std::string& v) {
         c.beta2 = parse_double("beta2", v); }},
      {"epsilon", [](TrainConfig& c, const std::string& v) {
         c.epsilon = parse_double("epsilon", v); }},
      {"grad_clip", [](TrainConfig& c, const std::string& v) {
         c.grad_clip = parse_double("grad_clip", v); }},
      {"seed", [](TrainConfig& c, const std::string& v) {
         c.seed = parse_u64("seed", v); }},
      {"max_steps", [](TrainConfig& c, const std::string& v) {
         c.max_steps = parse_int("max_steps", v); }},
      {"eval_interval", [](TrainConfig& c, const std::string& v) {
         c.eval_interval = parse_int("eval_interval", v); }},
      {"workers", [](TrainConfig& c, const std::string& v) {
         c.workers = parse_int("workers", v); }},
      {"allow_off_grid", [](TrainConfig& c, const std::string& v) {
         c.allow_off_grid = parse_bool("allow_off_grid", v); }},
  };
  auto it = setters.find(key);
  if (it == setters.end())
    throw ConfigError("config: unknown key '" + key + "'");
  it->second(cfg, value);
}

std::vector<std::pair<std::string, std::string>> TrainConfig::to_key_values()
    const {
  auto b = [](bool v) { return v ? std::string("true") : std::string("false"); };
  return {
      {"emb_dim", std::to_string(emb_dim)},
      {"d", std::to_string(d)},
      {"ffnn_width", std::to_string(ffnn_width)},
      {"ffnn_depth", std::to_string(ffnn_depth)},
      {"q_layers", std::to_string(q_layers)},
      {"p_layers", std::to_string(p_layers)},
      {"max_span_len", std::to_string(max_span_len)},
      {"dropout", fmt_double(dropout)},
      {"train_oov", b(train_oov)},
      {"num_buckets", std::to_string(num_buckets)},
      {"hash_seed", std::to_string(hash_seed)},
      {"objective", objective_name(objective)},
      {"crf_constrained", b(crf_constrained)},
      {"batch_size", std::to_string(batch_size)},
      {"base_lr", fmt_double(base_lr)},
      {"decay_multiplier", fmt_double(decay_multiplier)},
      {"decay_interval", std::to_string(decay_interval)},
      {"beta1", fmt_double(beta1)},
      {"beta2", fmt_double(beta2)},
      {"epsilon", fmt_double(epsilon)},
      {"grad_clip", fmt_double(grad_clip)},
      {"seed", std::to_string(seed)},
      {"max_steps", std::to_string(max_steps)},
      {"eval_interval", std::to_string(eval_interval)},
      {"workers", std::to_string(workers)},
      {"allow_off_grid", b(allow_off_grid)},
  };
}

TrainConfig parse_config_text(const std::string& text,
                              const std::string& origin) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: " + origin + ":" + std::to_string(lineno) +
                        ": expected key=value, got '" + line + "'");
    apply_config_entry(cfg, trim(line.substr(0, eq)),
                       trim(line.substr(eq + 1)));
  }
  return cfg;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

}  // namespace rasor
