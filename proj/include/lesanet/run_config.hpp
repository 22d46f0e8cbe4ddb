#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "lesanet/dataset.hpp"
#include "lesanet/model.hpp"
#include "lesanet/trainer.hpp"

namespace lesanet {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunPaths {
  std::string ontology;
  std::string dataset;
  std::string mined_labels;  // optional; replaces the dataset's mined labels
  std::string checkpoint;
};

struct EvalOptions {
  bool use_refined = true;
  std::size_t acg_k = 5;
};

// Everything one run needs. Serialized as an INI file with sections
// [run] [paths] [gen] [vocab] [model] [train] [loss] [eval].
struct RunConfig {
  std::uint64_t seed = 0;
  RunPaths paths;
  GeneratorConfig gen;
  VocabularyFilter vocab;
  std::size_t hidden = 256;
  std::size_t embedding = 256;
  TrainConfig train;
  // Train on relevant + uncertain mined labels only; off keeps irrelevant
  // mentions as well.
  bool relevance_filter = true;
  EvalOptions eval;

  void validate() const;
};

// "section.key=value" overrides are applied on top of the file. Unknown
// sections or keys and malformed values throw ConfigError.
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides = {});
RunConfig parse_run_config(std::istream& in, const std::string& source,
                           const std::vector<std::string>& overrides = {});
// Defaults plus overrides, no file.
RunConfig run_config_from_overrides(const std::vector<std::string>& overrides);

// Every key, in schema order. Reading the output back yields the same config.
void write_run_config(std::ostream& out, const RunConfig& cfg);

// Override strings for the ablation switches.
std::vector<std::string> ablation_overrides(bool no_spl, bool no_rhem, bool no_expand,
                                            bool no_relevance_filter, bool no_triplet,
                                            bool rhem_all_negatives);

}  // namespace lesanet
