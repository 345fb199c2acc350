#include "dse/checkpoint.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "dse/errors.hpp"

namespace dse {

namespace {
constexpr const char* kMagic = "dse-checkpoint v1";
}

void CheckpointData::set_int(const std::string& name, std::int64_t v) {
  for (auto& [n, old] : ints)
    if (n == name) {
      old = v;
      return;
    }
  ints.emplace_back(name, v);
}

void CheckpointData::set_vec(const std::string& name, std::vector<double> v) {
  for (auto& [n, old] : vecs)
    if (n == name) {
      old = std::move(v);
      return;
    }
  vecs.emplace_back(name, std::move(v));
}

std::int64_t CheckpointData::get_int(const std::string& name) const {
  for (const auto& [n, v] : ints)
    if (n == name) return v;
  throw ConfigError("checkpoint is missing counter '" + name + "'");
}

const std::vector<double>& CheckpointData::get_vec(const std::string& name) const {
  for (const auto& [n, v] : vecs)
    if (n == name) return v;
  throw ConfigError("checkpoint is missing vector '" + name + "'");
}

bool CheckpointData::has_vec(const std::string& name) const {
  for (const auto& [n, v] : vecs)
    if (n == name) return true;
  return false;
}

void save_checkpoint(const std::string& path, const CheckpointData& data) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write checkpoint file: " + path);
  out << kMagic << '\n';
  out << "config-begin\n" << data.config_text;
  if (!data.config_text.empty() && data.config_text.back() != '\n') out << '\n';
  out << "config-end\n";
  char buf[64];
  for (const auto& [name, v] : data.ints) {
    std::snprintf(buf, sizeof buf, "%" PRId64, v);
    out << "int " << name << ' ' << buf << '\n';
  }
  for (const auto& [name, vec] : data.vecs) {
    out << "vec " << name << ' ' << vec.size() << '\n';
    for (std::size_t k = 0; k < vec.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%a", vec[k]);
      out << buf << (k + 1 == vec.size() ? '\n' : ' ');
    }
    if (vec.empty()) out << '\n';
  }
  if (!out) throw ConfigError("failed writing checkpoint file: " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint file: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMagic)
    throw ConfigError("not a checkpoint file (bad header): " + path);
  CheckpointData data;
  if (!std::getline(in, line) || line != "config-begin")
    throw ConfigError("corrupt checkpoint (missing config block): " + path);
  std::string cfg;
  while (std::getline(in, line) && line != "config-end") {
    cfg += line;
    cfg += '\n';
  }
  if (line != "config-end")
    throw ConfigError("corrupt checkpoint (unterminated config block): " + path);
  data.config_text = std::move(cfg);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind, name;
    ls >> kind >> name;
    if (kind == "int") {
      std::int64_t v = 0;
      if (!(ls >> v))
        throw ConfigError("corrupt checkpoint counter '" + name + "'");
      data.ints.emplace_back(name, v);
    } else if (kind == "vec") {
      std::size_t n = 0;
      if (!(ls >> n))
        throw ConfigError("corrupt checkpoint vector header '" + name + "'");
      std::vector<double> vec;
      vec.reserve(n);
      while (vec.size() < n) {
        std::string tok;
        if (!(in >> tok))
          throw ConfigError("truncated checkpoint vector '" + name + "'");
        char* end = nullptr;
        double d = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0')
          throw ConfigError("corrupt value in checkpoint vector '" + name + "'");
        vec.push_back(d);
      }
      in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
      data.vecs.emplace_back(name, std::move(vec));
    } else {
      throw ConfigError("corrupt checkpoint line: '" + line + "'");
    }
  }
  return data;
}

}  // namespace dse
