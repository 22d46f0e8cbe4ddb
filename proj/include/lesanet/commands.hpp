#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lesanet/eval.hpp"
#include "lesanet/run_config.hpp"
#include "lesanet/textmine.hpp"

namespace lesanet {

// Library side of the command-line tool. Commands return a process exit
// status and write diagnostics to `err`.

enum class OntologyAction { kValidate, kExpand, kClosure };

// validate: prints a summary or the violations (exit 1).
// expand:   reads label-name sets, one comma-separated set per line, and writes
//           the expanded sets in id order.
// closure:  prints every closure-exclusive pair.
// Unreadable or malformed files exit 2 with a file:line diagnostic.
int cmd_ontology(OntologyAction action, const std::string& ontology_path, const std::string& sets_path,
                 std::ostream& out, std::ostream& err);

int cmd_mine(const std::string& sentences_path, const std::string& ontology_path,
             const std::string& out_path, std::ostream& err);

int cmd_gen(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err);
int cmd_train(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err);
int cmd_eval(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err);
int cmd_retrieve(const RunConfig& cfg, const std::filesystem::path& out_dir, std::size_t k, std::ostream& out,
                 std::ostream& err);

// Pieces shared by the commands and by in-process experiments.

std::shared_ptr<const LabelOntology> load_ontology(const std::string& path);
Dataset load_dataset(const std::string& path, std::shared_ptr<const LabelOntology> ontology);

// Replaces every sample's mined labels with the rows for its lesion id.
// With `relevance_filter`, irrelevant rows are dropped. Returns the number of
// rows whose lesion id is not in the dataset.
std::size_t apply_mined_labels(Dataset& ds, const std::vector<MinedLabelRow>& rows, bool relevance_filter);

struct FitResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
};

// Vocabulary filter, model init, training, threshold calibration on val.
FitResult fit(const Dataset& source, const RunConfig& cfg);

struct Evaluation {
  EvalReport mined;                 // against expanded mined labels
  std::optional<EvalReport> clean;  // against clean labels, when present
};

// Scores the test split. ACG uses test queries against the train gallery.
Evaluation evaluate_checkpoint(const Dataset& source, const Checkpoint& ckpt, const RunConfig& cfg);

// Creates out_dir, which must be absent or empty, and writes resolved_config.ini.
void prepare_run_dir(const std::filesystem::path& out_dir, const RunConfig& cfg);

}  // namespace lesanet
