#include "rasor/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rasor/errors.hpp"

namespace rasor {

namespace {

constexpr char kMagic[] = "rasor-checkpoint";

// float32 <-> on-disk little-endian bytes
void put_f32le(std::string& out, float x) {
  std::uint32_t u;
  std::memcpy(&u, &x, 4);
  if constexpr (std::endian::native == std::endian::big)
    u = __builtin_bswap32(u);
  char b[4];
  std::memcpy(b, &u, 4);
  out.append(b, 4);
}

float get_f32le(const char* p) {
  std::uint32_t u;
  std::memcpy(&u, p, 4);
  if constexpr (std::endian::native == std::endian::big)
    u = __builtin_bswap32(u);
  float x;
  std::memcpy(&x, &u, 4);
  return x;
}

[[noreturn]] void truncated(const std::string& path, const std::string& what) {
  throw FormatError("checkpoint: " + path + " is truncated (" + what + ")");
}

std::string need_line(std::istringstream& in, const std::string& path,
                      const std::string& what) {
  std::string line;
  if (!std::getline(in, line)) truncated(path, what);
  return line;
}

long need_long(const std::string& line, const std::string& key,
               const std::string& path) {
  if (line.rfind(key + "=", 0) != 0)
    throw FormatError("checkpoint: " + path + ": expected '" + key +
                      "=', got '" + line + "'");
  return std::stol(line.substr(key.size() + 1));
}

}  // namespace

const TensorBlob* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string out;
  out += std::string(kMagic) + " v" + std::to_string(Checkpoint::kVersion) +
         "\n";
  out += "step=" + std::to_string(ckpt.step) + "\n";
  out += "skipped_nonfinite=" + std::to_string(ckpt.skipped_nonfinite) + "\n";
  out += "dropped_unalignable=" + std::to_string(ckpt.dropped_unalignable) +
         "\n";
  out += "skipped_long_gold=" + std::to_string(ckpt.skipped_long_gold) + "\n";
  out += "config_begin\n";
  for (const auto& [k, v] : ckpt.config.to_key_values())
    out += k + "=" + v + "\n";
  out += "config_end\n";
  out += "tensors=" + std::to_string(ckpt.tensors.size()) + "\n";
  for (const auto& t : ckpt.tensors) {
    out += "tensor " + t.name;
    for (int d : t.shape) out += " " + std::to_string(d);
    out += "\n";
    for (float x : t.data) put_f32le(out, x);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("checkpoint: cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("checkpoint: short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("checkpoint: cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  std::string bytes = buf.str();
  std::istringstream in(bytes);

  Checkpoint ckpt;
  std::string magic = need_line(in, path, "magic line");
  std::string expect =
      std::string(kMagic) + " v" + std::to_string(Checkpoint::kVersion);
  if (magic != expect)
    throw FormatError("checkpoint: " + path + ": version mismatch, got '" +
                      magic + "', expected '" + expect + "'");
  ckpt.step = need_long(need_line(in, path, "step"), "step", path);
  ckpt.skipped_nonfinite = need_long(
      need_line(in, path, "skipped_nonfinite"), "skipped_nonfinite", path);
  ckpt.dropped_unalignable =
      need_long(need_line(in, path, "dropped_unalignable"),
                "dropped_unalignable", path);
  ckpt.skipped_long_gold = need_long(
      need_line(in, path, "skipped_long_gold"), "skipped_long_gold", path);

  if (need_line(in, path, "config_begin") != "config_begin")
    throw FormatError("checkpoint: " + path + ": expected config_begin");
  std::string cfg_text;
  for (;;) {
    std::string line = need_line(in, path, "config body");
    if (line == "config_end") break;
    cfg_text += line + "\n";
  }
  ckpt.config = parse_config_text(cfg_text, path + " (embedded config)");

  long n = need_long(need_line(in, path, "tensor count"), "tensors", path);
  for (long i = 0; i < n; ++i) {
    std::string header = need_line(in, path, "tensor header");
    std::istringstream hs(header);
    std::string word;
    hs >> word;
    if (word != "tensor")
      throw FormatError("checkpoint: " + path + ": bad tensor header '" +
                        header + "'");
    TensorBlob blob;
    hs >> blob.name;
    int dim;
    std::size_t count = 1;
    while (hs >> dim) {
      if (dim <= 0)
        throw FormatError("checkpoint: " + path + ": bad tensor header '" +
                          header + "'");
      blob.shape.push_back(dim);
      count *= static_cast<std::size_t>(dim);
    }
    if (blob.name.empty() || blob.shape.empty())
      throw FormatError("checkpoint: " + path + ": bad tensor header '" +
                        header + "'");
    std::streamoff pos = in.tellg();
    if (pos < 0) truncated(path, blob.name);  // header line hit EOF
    std::size_t start = static_cast<std::size_t>(pos);
    if (start > bytes.size() || count > (bytes.size() - start) / 4)
      truncated(path, blob.name);
    blob.data.resize(count);
    for (std::size_t k = 0; k < count; ++k)
      blob.data[k] = get_f32le(bytes.data() + start + k * 4);
    in.seekg(static_cast<std::streamoff>(start + count * 4));
    ckpt.tensors.push_back(std::move(blob));
  }
  return ckpt;
}

}  // namespace rasor
