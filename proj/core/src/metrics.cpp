#include "dse/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "dse/errors.hpp"

namespace dse {

std::string MetricsWriter::format_double(double v) {
  // %.10g is compact, stable for a given libc, and plenty for curves.
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

MetricsWriter::MetricsWriter(const std::string& path) : out_(path) {
  if (!out_) throw ConfigError("cannot open metrics file: " + path);
  out_ << "iteration,i,j,episodes,mean_return,loss,loss_q,loss_v,kl_z,kl_g\n";
}

void MetricsWriter::write(const MetricsRow& r) {
  out_ << r.iteration << ',' << r.i << ',' << r.j << ',' << r.episodes << ','
       << format_double(r.mean_return) << ',' << format_double(r.loss) << ','
       << format_double(r.loss_q) << ',' << format_double(r.loss_v) << ','
       << format_double(r.kl_z) << ',' << format_double(r.kl_g) << '\n';
}

TimingsWriter::TimingsWriter(const std::string& path) : out_(path) {
  if (!out_) throw ConfigError("cannot open timings file: " + path);
  out_ << "iteration,seconds\n";
}

void TimingsWriter::write(std::int64_t iteration, double seconds) {
  out_ << iteration << ',' << MetricsWriter::format_double(seconds) << '\n';
}

void append_latent_space(std::ostream& out, const std::string& space,
                         const VariationalEmbedding& emb) {
  for (int r = 0; r < emb.index_count; ++r) {
    auto mu = emb.mean(r);
    auto ls = emb.log_std(r);
    for (int k = 0; k < emb.latent_dim; ++k) {
      out << space << ',' << r << ',' << k << ','
          << MetricsWriter::format_double(mu[k]) << ','
          << MetricsWriter::format_double(std::exp(ls[k])) << '\n';
    }
  }
}

void write_latent_dump(const std::string& path, const VariationalEmbedding* z_table,
                       const VariationalEmbedding* g_table) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open latent dump file: " + path);
  out << "space,index,dim,mean,std\n";
  if (z_table != nullptr) append_latent_space(out, "z", *z_table);
  if (g_table != nullptr) append_latent_space(out, "g", *g_table);
}

}  // namespace dse
