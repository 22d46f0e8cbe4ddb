#include "lesanet/run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

namespace lesanet {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return x;
}

double to_double(const std::string& v) {
  double x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty() || !std::isfinite(x))
    throw ConfigError("expected a finite number, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("expected true or false, got '" + v + "'");
}

std::vector<LrStage> to_schedule(const std::string& v) {
  std::vector<LrStage> out;
  for (const auto& item : split_list(v, ',')) {
    auto parts = split_list(item, ':');
    if (parts.size() != 2) throw ConfigError("schedule entries are epochs:rate, got '" + item + "'");
    out.push_back({static_cast<std::size_t>(to_u64(parts[0])), to_double(parts[1])});
  }
  return out;
}

std::string from_schedule(const std::vector<LrStage>& s) {
  std::string out;
  for (const auto& st : s) {
    if (!out.empty()) out += ',';
    out += std::to_string(st.epochs) + ':' + format_double(st.rate);
  }
  return out;
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

struct Key {
  std::string section;
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define LESANET_SIZE(sec, key, field)                                                            \
  Key {                                                                                          \
    sec, key, [](RunConfig& c, const std::string& v) { c.field = static_cast<std::size_t>(to_u64(v)); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }                               \
  }
#define LESANET_DOUBLE(sec, key, field)                                                          \
  Key {                                                                                          \
    sec, key, [](RunConfig& c, const std::string& v) { c.field = to_double(v); },                \
        [](const RunConfig& c) { return format_double(c.field); }                                \
  }
#define LESANET_BOOL(sec, key, field)                                                            \
  Key {                                                                                          \
    sec, key, [](RunConfig& c, const std::string& v) { c.field = to_bool(v); },                  \
        [](const RunConfig& c) { return from_bool(c.field); }                                    \
  }
#define LESANET_STRING(sec, key, field)                                                          \
  Key {                                                                                          \
    sec, key, [](RunConfig& c, const std::string& v) { c.field = v; },                           \
        [](const RunConfig& c) { return c.field; }                                               \
  }

const std::vector<Key>& schema() {
  static const std::vector<Key> keys = {
      Key{"run", "seed", [](RunConfig& c, const std::string& v) { c.seed = to_u64(v); },
          [](const RunConfig& c) { return std::to_string(c.seed); }},

      LESANET_STRING("paths", "ontology", paths.ontology),
      LESANET_STRING("paths", "dataset", paths.dataset),
      LESANET_STRING("paths", "mined_labels", paths.mined_labels),
      LESANET_STRING("paths", "checkpoint", paths.checkpoint),

      LESANET_SIZE("gen", "patients", gen.n_patients),
      LESANET_SIZE("gen", "lesions_per_patient", gen.lesions_per_patient),
      LESANET_SIZE("gen", "dim", gen.dim),
      LESANET_SIZE("gen", "train_patients", gen.split_quota[0]),
      LESANET_SIZE("gen", "val_patients", gen.split_quota[1]),
      LESANET_SIZE("gen", "test_patients", gen.split_quota[2]),
      LESANET_DOUBLE("gen", "train_ratio", gen.split_ratios[0]),
      LESANET_DOUBLE("gen", "val_ratio", gen.split_ratios[1]),
      LESANET_DOUBLE("gen", "test_ratio", gen.split_ratios[2]),
      LESANET_SIZE("gen", "max_leaves", gen.max_leaves),
      LESANET_DOUBLE("gen", "extra_leaf_prob", gen.extra_leaf_prob),
      LESANET_DOUBLE("gen", "zipf_exponent", gen.zipf_exponent),
      LESANET_DOUBLE("gen", "prototype_scale", gen.prototype_scale),
      LESANET_DOUBLE("gen", "feature_noise", gen.feature_noise),
      LESANET_DOUBLE("gen", "omission_bias", gen.omission_bias),
      LESANET_DOUBLE("gen", "p_drop_parent", gen.noise.p_drop_parent),
      LESANET_DOUBLE("gen", "p_drop", gen.noise.p_drop),
      LESANET_DOUBLE("gen", "p_inject", gen.noise.p_inject),

      LESANET_SIZE("vocab", "min_train", vocab.min_train),
      LESANET_SIZE("vocab", "min_val", vocab.min_val),
      LESANET_SIZE("vocab", "min_test", vocab.min_test),

      LESANET_SIZE("model", "hidden", hidden),
      LESANET_SIZE("model", "embedding", embedding),

      LESANET_SIZE("train", "batch_size", train.batch_size),
      Key{"train", "schedule", [](RunConfig& c, const std::string& v) { c.train.schedule = to_schedule(v); },
          [](const RunConfig& c) { return from_schedule(c.train.schedule); }},
      LESANET_DOUBLE("train", "momentum", train.momentum),
      LESANET_BOOL("train", "expand_labels", train.expand_labels),
      LESANET_BOOL("train", "rhem_reliable_only", train.rhem_reliable_only),
      LESANET_BOOL("train", "relevance_filter", relevance_filter),

      LESANET_DOUBLE("loss", "beta_clamp", train.loss.beta_clamp),
      LESANET_DOUBLE("loss", "gamma", train.loss.gamma),
      LESANET_SIZE("loss", "rhem_draws", train.loss.rhem_draws),
      LESANET_DOUBLE("loss", "theta", train.loss.theta),
      LESANET_DOUBLE("loss", "mu", train.loss.mu),
      LESANET_SIZE("loss", "triplets", train.loss.triplets),
      LESANET_DOUBLE("loss", "lambda", train.loss.lambda),
      LESANET_SIZE("loss", "triplet_attempts", train.loss.triplet_attempts),
      LESANET_BOOL("loss", "wce", train.loss.use_wce),
      LESANET_BOOL("loss", "rhem", train.loss.use_rhem),
      LESANET_BOOL("loss", "spl", train.loss.use_spl),
      LESANET_BOOL("loss", "triplet", train.loss.use_triplet),
      LESANET_BOOL("loss", "rhem_on_refined", train.loss.rhem_on_refined),

      LESANET_BOOL("eval", "use_refined", eval.use_refined),
      LESANET_SIZE("eval", "acg_k", eval.acg_k),
  };
  return keys;
}

#undef LESANET_SIZE
#undef LESANET_DOUBLE
#undef LESANET_BOOL
#undef LESANET_STRING

void set_key(RunConfig& cfg, const std::string& section, const std::string& name, const std::string& value,
             const std::string& where) {
  bool section_known = false;
  for (const auto& k : schema()) {
    if (k.section != section) continue;
    section_known = true;
    if (k.name != name) continue;
    try {
      k.set(cfg, trim(value));
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + section + "." + name + ": " + e.what());
    }
    return;
  }
  if (!section_known) throw ConfigError(where + ": unknown section [" + section + "]");
  throw ConfigError(where + ": unknown key '" + name + "' in [" + section + "]");
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    auto eq = o.find('=');
    auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
      throw ConfigError("override '" + o + "' is not of the form section.key=value");
    set_key(cfg, trim(o.substr(0, dot)), trim(o.substr(dot + 1, eq - dot - 1)), o.substr(eq + 1),
            "override");
  }
}

}  // namespace

void RunConfig::validate() const {
  if (hidden == 0 || embedding == 0) throw ConfigError("model.hidden and model.embedding must be positive");
  if (gen.dim == 0) throw ConfigError("gen.dim must be positive");
  if (gen.lesions_per_patient == 0) throw ConfigError("gen.lesions_per_patient must be positive");
  if (gen.max_leaves == 0) throw ConfigError("gen.max_leaves must be positive");
  for (double p : {gen.noise.p_drop_parent, gen.noise.p_drop, gen.noise.p_inject, gen.extra_leaf_prob,
                   gen.omission_bias})
    if (p < 0.0 || p > 1.0) throw ConfigError("gen probabilities must lie in [0,1]");
  double ratio_sum = 0.0;
  for (double r : gen.split_ratios) {
    if (r < 0.0) throw ConfigError("gen split ratios must be non-negative");
    ratio_sum += r;
  }
  if (ratio_sum <= 0.0) throw ConfigError("gen split ratios must not all be zero");
  if (eval.acg_k == 0) throw ConfigError("eval.acg_k must be positive");
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const LossError& e) {
    throw ConfigError(std::string("loss: ") + e.what());
  }
}

RunConfig parse_run_config(std::istream& in, const std::string& source,
                           const std::vector<std::string>& overrides) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError(source + ": key '" + section + "' outside any section");
    for (const auto& [key, value] : body) set_key(cfg, section, key, value.data(), source);
  }
  apply_overrides(cfg, overrides);
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_run_config(in, path, overrides);
}

RunConfig run_config_from_overrides(const std::vector<std::string>& overrides) {
  RunConfig cfg;
  apply_overrides(cfg, overrides);
  cfg.validate();
  return cfg;
}

void write_run_config(std::ostream& out, const RunConfig& cfg) {
  std::string section;
  for (const auto& k : schema()) {
    if (k.section != section) {
      if (!section.empty()) out << '\n';
      section = k.section;
      out << '[' << section << "]\n";
    }
    out << k.name << " = " << k.get(cfg) << '\n';
  }
}

std::vector<std::string> ablation_overrides(bool no_spl, bool no_rhem, bool no_expand,
                                            bool no_relevance_filter, bool no_triplet,
                                            bool rhem_all_negatives) {
  std::vector<std::string> out;
  if (no_spl) {
    out.emplace_back("loss.spl=false");
    out.emplace_back("eval.use_refined=false");
  }
  if (no_rhem) out.emplace_back("loss.rhem=false");
  if (no_expand) out.emplace_back("train.expand_labels=false");
  if (no_relevance_filter) out.emplace_back("train.relevance_filter=false");
  if (no_triplet) out.emplace_back("loss.triplet=false");
  if (rhem_all_negatives) out.emplace_back("train.rhem_reliable_only=false");
  return out;
}

}  // namespace lesanet
