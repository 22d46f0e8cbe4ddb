#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lesanet/ontology.hpp"

namespace lesanet {

enum class Split { kTrain = 0, kVal = 1, kTest = 2 };

std::string_view to_string(Split s);
std::optional<Split> parse_split(std::string_view s);

struct Sample {
  std::string lesion_id;
  std::string patient_id;
  Split split = Split::kTrain;
  std::vector<double> features;
  LabelSet mined_labels;
  LabelSet expanded_labels;
  std::optional<LabelSet> clean_labels;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Samples over a shared ontology. Expanded labels are always recomputed from
// mined labels, and a patient may only appear in one split.
class Dataset {
 public:
  Dataset(std::shared_ptr<const LabelOntology> ontology, std::size_t dim);

  const LabelOntology& ontology() const { return *ontology_; }
  std::shared_ptr<const LabelOntology> ontology_ptr() const { return ontology_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return samples_.size(); }
  const std::vector<Sample>& samples() const { return samples_; }
  const Sample& operator[](std::size_t i) const { return samples_.at(i); }

  void add(std::string lesion_id, std::string patient_id, Split split, std::vector<double> features,
           const LabelSet& mined, std::optional<LabelSet> clean = std::nullopt);

  // Replaces the mined labels of one sample; expanded labels follow.
  void set_mined_labels(std::size_t index, const LabelSet& mined);

  std::vector<std::size_t> indices(Split split) const;
  std::optional<std::size_t> find(const std::string& lesion_id) const;

 private:
  std::shared_ptr<const LabelOntology> ontology_;
  std::size_t dim_;
  std::vector<Sample> samples_;
  std::map<std::string, Split> patient_split_;
  std::map<std::string, std::size_t> lesion_index_;
};

// Split decided by a stable 64-bit FNV-1a hash of the patient id.
Split split_for_patient(const std::string& patient_id,
                        const std::array<double, 3>& ratios = {0.8, 0.1, 0.1});

struct VocabularyFilter {
  std::size_t min_train = 10;
  std::size_t min_val = 2;
  std::size_t min_test = 2;
};

struct FilteredDataset {
  Dataset dataset;
  // New dense id -> id in the source ontology.
  std::vector<LabelId> remap;
};

// Occurrence counts are taken over expanded labels. Surviving labels are
// renumbered densely and every sample is re-expanded under the restricted
// ontology. Throws DatasetError when no label survives.
FilteredDataset filter_vocabulary(const Dataset& ds, const VocabularyFilter& thresholds);

// Applies a stored remap (from filter_vocabulary) to a dataset over the source
// ontology.
Dataset apply_remap(const Dataset& ds, const std::vector<LabelId>& remap);

struct ClassCount {
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

// Per-label positives/negatives over the given samples, counting `labels_of`.
enum class LabelView { kMined, kExpanded, kClean };
const LabelSet& labels_of(const Sample& s, LabelView view);

std::vector<ClassCount> class_frequencies(const Dataset& ds, Split split,
                                          LabelView view = LabelView::kExpanded);

struct CorruptionConfig {
  double p_drop_parent = 0.0;  // drop a clean label that is an ancestor of another clean label
  double p_drop = 0.0;         // drop a clean label that is a leaf of the clean set
  double p_inject = 0.0;       // add one random non-conflicting label
};

struct GeneratorConfig {
  std::size_t n_patients = 1000;
  std::size_t lesions_per_patient = 2;
  std::size_t dim = 64;
  CorruptionConfig noise;
  std::uint64_t seed = 0;
  std::array<double, 3> split_ratios{0.8, 0.1, 0.1};
  // When any entry is nonzero, patient ids are enumerated until each split
  // holds exactly this many patients; n_patients is then ignored.
  std::array<std::size_t, 3> split_quota{0, 0, 0};
  std::size_t max_leaves = 3;
  double extra_leaf_prob = 0.5;
  double zipf_exponent = 1.0;  // tail shape of leaf popularity
  double prototype_scale = 1.0;
  double feature_noise = 1.0;
  // 0: labels are dropped independently of the features. Toward 1, each
  // label's prototype is scaled by a per-lesion salience and faint labels are
  // dropped more often (same mean drop rates).
  double omission_bias = 0.0;
};

// Ontology-consistent synthetic lesions: clean label sets from non-conflicting
// leaves plus their ancestors, features as a sum of per-label Gaussian
// prototypes plus isotropic noise, mined labels from corrupting the clean set.
Dataset generate_synthetic(std::shared_ptr<const LabelOntology> ontology, const GeneratorConfig& cfg);

// Dataset file, one tab-separated record per line:
//   lesion_id  patient_id  split  mined label ids  features  [clean label ids]
// Label ids are space-separated, features comma-separated shortest round-trip
// decimals.
void write_dataset(std::ostream& out, const Dataset& ds);
Dataset read_dataset(std::istream& in, std::shared_ptr<const LabelOntology> ontology,
                     const std::string& source = "<input>");

std::string format_double(double v);

}  // namespace lesanet
