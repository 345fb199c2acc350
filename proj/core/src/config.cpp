#include "dse/config.hpp"

#include <cctype>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <variant>

#include "dse/errors.hpp"

namespace dse {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

using Slot = std::variant<std::int64_t*, double*, bool*, std::string*,
                          std::vector<int>*>;

struct Binding {
  const char* section;
  const char* key;
  Slot slot;
};

std::vector<Binding> bindings(ExperimentConfig& c) {
  return {
      {"run", "algorithm", &c.algorithm},
      {"run", "family", &c.family},
      {"run", "mask", &c.mask},
      {"run", "seed", &c.seed},
      {"run", "gamma", &c.gamma},
      {"run", "iterations", &c.iterations},
      {"run", "output_dir", &c.output_dir},
      {"run", "threads", &c.threads},
      {"run", "metrics_every", &c.metrics_every},

      {"policy", "hidden", &c.policy_hidden},
      {"policy", "activation", &c.activation},
      {"policy", "input_mode", &c.input_mode},
      {"policy", "z_dim", &c.z_dim},
      {"policy", "g_dim", &c.g_dim},
      {"policy", "latent_cadence", &c.latent_cadence},

      {"reinforce", "alpha_d", &c.rf_alpha_d},
      {"reinforce", "alpha_r", &c.rf_alpha_r},
      {"reinforce", "alpha_pi", &c.rf_alpha_pi},
      {"reinforce", "batch", &c.rf_batch},
      {"reinforce", "lr", &c.rf_lr},
      {"reinforce", "lr_emb", &c.rf_lr_emb},
      {"reinforce", "optimizer", &c.rf_optimizer},
      {"reinforce", "popart", &c.rf_popart},
      {"reinforce", "beta_art", &c.rf_beta_art},
      {"reinforce", "h_cutoff", &c.rf_h_cutoff},
      {"reinforce", "h_mode", &c.rf_h_mode},

      {"sac", "alpha_pi", &c.sac_alpha_pi},
      {"sac", "alpha_d", &c.sac_alpha_d},
      {"sac", "alpha_r", &c.sac_alpha_r},
      {"sac", "tau", &c.sac_tau},
      {"sac", "batch", &c.sac_batch},
      {"sac", "lr_policy", &c.sac_lr_policy},
      {"sac", "lr_emb", &c.sac_lr_emb},
      {"sac", "lr_q", &c.sac_lr_q},
      {"sac", "lr_v", &c.sac_lr_v},
      {"sac", "replay_capacity", &c.sac_replay_capacity},
      {"sac", "warmup", &c.sac_warmup},
      {"sac", "critic_hidden", &c.sac_critic_hidden},
      {"sac", "optimizer", &c.sac_optimizer},

      {"stop", "early_stop", &c.early_stop},
      {"stop", "target_return", &c.target_return},
      {"stop", "target_distance", &c.target_distance},
      {"stop", "stop_window", &c.stop_window},
      {"stop", "eval_every", &c.eval_every},
      {"stop", "eval_episodes", &c.eval_episodes},

      {"hrl", "env", &c.hrl_env},
      {"hrl", "low_checkpoint", &c.hrl_low_checkpoint},
      {"hrl", "interval", &c.hrl_interval},
      {"hrl", "n_asteroids", &c.hrl_n_asteroids},
      {"hrl", "asteroid_type", &c.hrl_asteroid_type},
      {"hrl", "extra_g_points", &c.hrl_extra_g_points},
      {"hrl", "g_box_sigma", &c.hrl_g_box_sigma},
      {"hrl", "circle_radius", &c.hrl_circle_radius},
      {"hrl", "circle_period", &c.hrl_circle_period},
      {"hrl", "max_steps", &c.hrl_max_steps},
      {"hrl", "deploy_i", &c.hrl_deploy_i},
      {"hrl", "stochastic_low", &c.hrl_stochastic_low},
  };
}

double parse_double(const std::string& v, const std::string& where) {
  std::string t = trim(v);
  if (t == "inf" || t == "infinity") return std::numeric_limits<double>::infinity();
  char* end = nullptr;
  double d = std::strtod(t.c_str(), &end);
  if (end == t.c_str() || *end != '\0')
    throw ConfigError("bad numeric value for " + where + ": '" + v + "'");
  return d;
}

std::int64_t parse_int(const std::string& v, const std::string& where) {
  std::string t = trim(v);
  char* end = nullptr;
  long long n = std::strtoll(t.c_str(), &end, 10);
  if (end == t.c_str() || *end != '\0')
    throw ConfigError("bad integer value for " + where + ": '" + v + "'");
  return n;
}

bool parse_bool(const std::string& v, const std::string& where) {
  std::string t = trim(v);
  if (t == "true") return true;
  if (t == "false") return false;
  throw ConfigError("bad boolean value for " + where + " (want true/false): '" +
                    v + "'");
}

std::vector<int> parse_int_list(const std::string& v, const std::string& where) {
  std::vector<int> out;
  std::string t = trim(v);
  if (t.empty()) return out;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(static_cast<int>(parse_int(item, where)));
  return out;
}

void assign(const Slot& slot, const std::string& value, const std::string& where) {
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, std::int64_t>)
          *p = parse_int(value, where);
        else if constexpr (std::is_same_v<T, double>)
          *p = parse_double(value, where);
        else if constexpr (std::is_same_v<T, bool>)
          *p = parse_bool(value, where);
        else if constexpr (std::is_same_v<T, std::string>)
          *p = trim(value);
        else
          *p = parse_int_list(value, where);
      },
      slot);
}

std::string format_value(const Slot& slot) {
  return std::visit(
      [](auto* p) -> std::string {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, std::int64_t>) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%" PRId64, *p);
          return buf;
        } else if constexpr (std::is_same_v<T, double>) {
          if (std::isinf(*p)) return *p > 0 ? "inf" : "-inf";
          char buf[40];
          std::snprintf(buf, sizeof buf, "%.17g", *p);
          return buf;
        } else if constexpr (std::is_same_v<T, bool>) {
          return *p ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return *p;
        } else {
          std::string s;
          for (std::size_t k = 0; k < p->size(); ++k) {
            if (k) s += ',';
            s += std::to_string((*p)[k]);
          }
          return s;
        }
      },
      slot);
}

const std::vector<std::string>& known_algorithms() {
  static const std::vector<std::string> v = {
      "dse-reinforce",        "dse-sac",
      "single-embedding-reinforce", "single-embedding-sac",
      "independent",          "independent-reinforce",
      "independent-sac",      "hrl-reinforce",
      "hrl-sac",              "flat-reinforce",
      "flat-sac"};
  return v;
}

void validate(const ExperimentConfig& c) {
  if (c.algorithm.empty())
    throw ConfigError("missing required key: run.algorithm");
  const auto& known = known_algorithms();
  bool ok = false;
  for (const auto& a : known) ok = ok || a == c.algorithm;
  if (!ok) throw ConfigError("unknown algorithm '" + c.algorithm + "'");
  if (c.activation != "tanh" && c.activation != "relu")
    throw ConfigError("policy.activation must be tanh or relu");
  parse_input_mode(c.input_mode);
  parse_latent_cadence(c.latent_cadence);
  parse_optimizer_kind(c.rf_optimizer);
  parse_optimizer_kind(c.sac_optimizer);
  parse_h_cutoff_mode(c.rf_h_mode);
  if (c.gamma <= 0.0 || c.gamma >= 1.0)
    throw ConfigError("run.gamma must lie in (0, 1)");
  if (c.threads < 1) throw ConfigError("run.threads must be >= 1");
  if (c.metrics_every < 1) throw ConfigError("run.metrics_every must be >= 1");
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  auto binds = bindings(cfg);
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      bool known = false;
      for (const auto& b : binds) known = known || section == b.section;
      if (!known)
        throw ConfigError("unknown config section [" + section + "] at line " +
                          std::to_string(lineno));
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("malformed config line " + std::to_string(lineno) +
                        ": '" + t + "'");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    const Binding* hit = nullptr;
    for (const auto& b : binds)
      if (section == b.section && key == b.key) hit = &b;
    if (hit == nullptr)
      throw ConfigError("unknown config key '" + section + "." + key +
                        "' at line " + std::to_string(lineno));
    assign(hit->slot, value, section + "." + key);
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  auto binds = bindings(const_cast<ExperimentConfig&>(cfg));
  std::string out;
  std::string section;
  for (const auto& b : binds) {
    if (section != b.section) {
      if (!out.empty()) out += '\n';
      section = b.section;
      out += '[';
      out += section;
      out += "]\n";
    }
    out += b.key;
    out += " = ";
    out += format_value(b.slot);
    out += '\n';
  }
  return out;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

bool algorithm_is_sac(const std::string& a) {
  return a.size() >= 4 && a.compare(a.size() - 4, 4, "-sac") == 0;
}
bool algorithm_is_hrl(const std::string& a) {
  return a.rfind("hrl-", 0) == 0;
}
bool algorithm_is_flat(const std::string& a) {
  return a.rfind("flat-", 0) == 0;
}
bool algorithm_is_independent(const std::string& a) {
  return a.rfind("independent", 0) == 0;
}

LatentMode algorithm_latent_mode(const std::string& a) {
  if (a.rfind("dse-", 0) == 0) return LatentMode::kDse;
  if (a.rfind("single-embedding-", 0) == 0) return LatentMode::kSingle;
  return LatentMode::kNone;
}

ReinforceSettings to_reinforce_settings(const ExperimentConfig& cfg) {
  ReinforceSettings s;
  s.gamma = cfg.gamma;
  s.alpha_d = cfg.rf_alpha_d;
  s.alpha_r = cfg.rf_alpha_r;
  s.alpha_pi = cfg.rf_alpha_pi;
  s.batch_m = static_cast<int>(cfg.rf_batch);
  s.lr = cfg.rf_lr;
  s.lr_emb = cfg.rf_lr_emb;
  s.optimizer = parse_optimizer_kind(cfg.rf_optimizer);
  s.popart = cfg.rf_popart;
  s.beta_art = cfg.rf_beta_art;
  s.h_cutoff = static_cast<int>(cfg.rf_h_cutoff);
  s.h_mode = parse_h_cutoff_mode(cfg.rf_h_mode);
  s.latent_mode = algorithm_latent_mode(cfg.algorithm);
  s.cadence = parse_latent_cadence(cfg.latent_cadence);
  s.run_seed = static_cast<uint64_t>(cfg.seed);
  s.threads = static_cast<int>(cfg.threads);
  s.metrics_every = static_cast<int>(cfg.metrics_every);
  return s;
}

SacSettings to_sac_settings(const ExperimentConfig& cfg) {
  SacSettings s;
  s.gamma = cfg.gamma;
  s.alpha_pi = cfg.sac_alpha_pi;
  s.alpha_d = cfg.sac_alpha_d;
  s.alpha_r = cfg.sac_alpha_r;
  s.tau = cfg.sac_tau;
  s.batch = static_cast<int>(cfg.sac_batch);
  s.lr_policy = cfg.sac_lr_policy;
  s.lr_emb = cfg.sac_lr_emb;
  s.lr_q = cfg.sac_lr_q;
  s.lr_v = cfg.sac_lr_v;
  s.replay_capacity = static_cast<std::size_t>(cfg.sac_replay_capacity);
  s.warmup_transitions = static_cast<int>(cfg.sac_warmup);
  s.latent_mode = algorithm_latent_mode(cfg.algorithm);
  s.cadence = parse_latent_cadence(cfg.latent_cadence);
  s.optimizer = parse_optimizer_kind(cfg.sac_optimizer);
  s.run_seed = static_cast<uint64_t>(cfg.seed);
  s.metrics_every = static_cast<int>(cfg.metrics_every);
  s.critic_hidden = cfg.sac_critic_hidden;
  return s;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::string t = trim(text);
  if (t.empty()) return out;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(parse_double(item, "list"));
  return out;
}

std::vector<std::vector<double>> parse_point_list(const std::string& text) {
  std::vector<std::vector<double>> out;
  std::string t = trim(text);
  if (t.empty()) return out;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ';')) out.push_back(parse_double_list(item));
  return out;
}

}  // namespace dse
