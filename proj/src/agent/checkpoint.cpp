#include "icprl/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "icprl/errors.hpp"

namespace icprl {

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  out << "icprl-checkpoint 1\n";
  out << "kind " << ckpt.kind << "\n";
  out << "env " << ckpt.env << "\n";
  out << "dims";
  for (const auto& [k, v] : ckpt.dims) out << ' ' << k << '=' << v;
  out << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(ckpt.vocab_hash));
  out << "vocab-hash " << buf << "\n";
  out << "count " << ckpt.values.size() << "\n";
  for (double v : ckpt.values) {
    std::snprintf(buf, sizeof buf, "%a", v);
    out << buf << "\n";
  }
  out << "end\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read checkpoint " + path.string());
  auto expect = [&](const std::string& key) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": truncated before '" + key + "'");
    if (line.rfind(key, 0) != 0) throw FormatError(path.string() + ": expected '" + key + "', got '" + line + "'");
    return line.size() > key.size() ? line.substr(key.size() + 1) : std::string{};
  };
  if (expect("icprl-checkpoint") != "1") throw FormatError(path.string() + ": unsupported checkpoint version");
  Checkpoint ckpt;
  ckpt.kind = expect("kind");
  ckpt.env = expect("env");
  std::istringstream dims(expect("dims"));
  std::string item;
  while (dims >> item) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw FormatError(path.string() + ": bad dims entry '" + item + "'");
    ckpt.dims[item.substr(0, eq)] = std::stoi(item.substr(eq + 1));
  }
  ckpt.vocab_hash = std::stoull(expect("vocab-hash"), nullptr, 16);
  const std::size_t count = std::stoull(expect("count"));
  ckpt.values.resize(count);
  std::string line;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw FormatError(path.string() + ": truncated parameter list");
    char* end = nullptr;
    ckpt.values[i] = std::strtod(line.c_str(), &end);
    if (end == line.c_str()) throw FormatError(path.string() + ": bad parameter '" + line + "'");
  }
  if (!std::getline(in, line) || line != "end") throw FormatError(path.string() + ": missing 'end'");
  return ckpt;
}

}  // namespace icprl
