#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include "dse/embeddings.hpp"

namespace dse {

/// One training-curve sample for one task cell. The schema is shared by all
/// algorithms; fields an algorithm does not produce are written as 0.
struct MetricsRow {
  std::int64_t iteration = 0;
  int i = 0;
  int j = 0;
  std::int64_t episodes = 0;  // cumulative episodes collected for the cell
  double mean_return = 0.0;
  double loss = 0.0;
  double loss_q = 0.0;
  double loss_v = 0.0;
  double kl_z = 0.0;
  double kl_g = 0.0;
};

/// Append-only CSV with a fixed header and deterministic number formatting,
/// so identical runs produce byte-identical files. Wall-clock timings go to
/// the separate TimingsWriter, never here.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);
  void write(const MetricsRow& row);
  void flush() { out_.flush(); }

  static std::string format_double(double v);

 private:
  std::ofstream out_;
};

/// Wall-clock sidecar (timings.csv): non-deterministic by nature, kept out
/// of the metrics file.
class TimingsWriter {
 public:
  explicit TimingsWriter(const std::string& path);
  void write(std::int64_t iteration, double seconds);
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

/// Latent dump rows: space,index,dim,mean,std for every row of a table.
void append_latent_space(std::ostream& out, const std::string& space,
                         const VariationalEmbedding& emb);
void write_latent_dump(const std::string& path, const VariationalEmbedding* z_table,
                       const VariationalEmbedding* g_table);

}  // namespace dse
