#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lesanet/model.hpp"
#include "lesanet/ontology.hpp"

namespace lesanet {

// Mann-Whitney AUC, (concordant + ties/2) / (P N). nullopt unless both
// classes are present.
std::optional<double> auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Threshold that no score reaches; used for labels without validation positives.
inline const double kNeverFires = std::nextafter(1.0, 2.0);

// F1 = 2TP / (2TP + FP + FN), 0 when the denominator is 0.
double f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn);

// Best-F1 threshold for one label. Candidates are the lowest score, the
// midpoints between adjacent unique scores and a sentinel above the highest
// score; ties go to the lowest candidate. Decisions use score >= threshold.
double calibrate_threshold(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct CalibratedThresholds {
  std::vector<double> values;
  std::vector<LabelId> no_positives;  // set to kNeverFires
};

CalibratedThresholds calibrate_thresholds(const Matrix& scores, std::span<const LabelSet> truth);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
};

// Per-label precision/recall/F1; zero denominators give 0.
std::vector<Prf> prf1(std::span<const LabelSet> decided, std::span<const LabelSet> truth);

struct LabelMetrics {
  LabelId id = 0;
  std::string name;
  Category category = Category::kBodyPart;
  std::size_t positives = 0;
  std::optional<double> auc;
  double threshold = 0.0;
  Prf prf;
};

struct EvalReport {
  std::string truth_name;
  std::size_t samples = 0;
  std::vector<LabelMetrics> labels;
  // Unweighted means over labels with test positives (AUC: labels whose AUC
  // is defined).
  double macro_auc = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::size_t evaluated = 0;
  std::vector<std::pair<Category, double>> category_auc;
  std::vector<LabelId> excluded;       // no test positives
  std::vector<LabelId> auc_undefined;  // single-class on the test set
  std::optional<double> acg;
  std::size_t acg_k = 0;
};

EvalReport evaluate(const Matrix& probs, std::span<const LabelSet> decided,
                    std::span<const LabelSet> truth, std::span<const double> thresholds,
                    const LabelOntology& ontology, std::string truth_name);

void write_report_text(std::ostream& out, const EvalReport& r);
void write_report_kv(std::ostream& out, const EvalReport& r);

struct Retrieval {
  std::vector<std::size_t> indices;  // into the gallery, nearest first
  bool short_gallery = false;        // fewer than k candidates after exclusion
};

// k nearest gallery rows by Euclidean distance, skipping rows from the
// query's patient. Ties keep gallery order.
Retrieval retrieve(const RowVector& query, const std::string& query_patient, const Matrix& gallery,
                   std::span<const std::string> gallery_patients, std::size_t k);

// Mean |query & retrieved_i| over the first min(k, n) retrieved sets.
double acg(const LabelSet& query, std::span<const LabelSet> retrieved, std::size_t k);

}  // namespace lesanet
