#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dse {

/// Versioned flat-text training snapshot. The file embeds the run's full
/// config text (so a checkpoint alone suffices to rebuild networks,
/// embeddings, and environments) plus named integer counters and named
/// double vectors (parameters, optimizer moments, normalizer moments).
/// Doubles are stored as hexfloats, so save/load round-trips bit-exactly.
struct CheckpointData {
  std::string config_text;
  std::vector<std::pair<std::string, std::int64_t>> ints;
  std::vector<std::pair<std::string, std::vector<double>>> vecs;

  void set_int(const std::string& name, std::int64_t v);
  void set_vec(const std::string& name, std::vector<double> v);
  /// Throw ConfigError if the entry is missing (corrupt/mismatched file).
  std::int64_t get_int(const std::string& name) const;
  const std::vector<double>& get_vec(const std::string& name) const;
  bool has_vec(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& path);

}  // namespace dse
