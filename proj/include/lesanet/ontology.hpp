#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lesanet/label_set.hpp"

namespace lesanet {

enum class Category { kBodyPart, kType, kAttribute };

std::string_view to_string(Category c);
std::optional<Category> parse_category(std::string_view s);

struct LabelInfo {
  std::string name;
  Category category = Category::kBodyPart;
  std::vector<std::string> synonyms;
};

using LabelPair = std::pair<LabelId, LabelId>;

// Unvalidated label graph as authored. Parent edges are (child, parent).
struct OntologyDefinition {
  std::vector<LabelInfo> labels;
  std::vector<LabelPair> parent_edges;
  std::vector<LabelPair> exclusive_pairs;
};

enum class ViolationKind {
  kUnknownLabel,
  kDuplicateName,
  kDuplicateSynonym,
  kCycle,
  kSelfExclusion,
  kAncestorExclusion,
  kClosureConflict,
};

std::string_view to_string(ViolationKind k);

struct Violation {
  ViolationKind kind;
  std::vector<LabelId> ids;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(ViolationKind k) const;
  void print(std::ostream& os) const;
};

ValidationReport validate(const OntologyDefinition& def);

class OntologyError : public std::runtime_error {
 public:
  explicit OntologyError(ValidationReport report);
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

// Immutable, validated label graph with precomputed ancestor, descendant and
// closure-exclusive bitsets per label.
class LabelOntology {
 public:
  // Throws OntologyError when validate(def) reports any violation.
  static LabelOntology build(OntologyDefinition def);

  std::size_t size() const { return def_.labels.size(); }
  const OntologyDefinition& definition() const { return def_; }

  const std::string& name(LabelId id) const { return info(id).name; }
  Category category(LabelId id) const { return info(id).category; }
  std::optional<LabelId> find(std::string_view name) const;

  // Normalized phrase -> label id. Includes each label's own name.
  const std::map<std::string, LabelId>& synonyms() const { return synonyms_; }

  const std::vector<LabelId>& parents(LabelId id) const;
  const std::vector<LabelId>& children(LabelId id) const;
  bool is_leaf(LabelId id) const { return children(id).empty(); }

  const LabelSet& ancestors(LabelId id) const;
  const LabelSet& descendants(LabelId id) const;
  // Labels closure-exclusive with id.
  const LabelSet& exclusive_with(LabelId id) const;

  LabelSet empty_set() const { return LabelSet(size()); }
  LabelSet set_of(const std::vector<LabelId>& ids) const { return LabelSet::of(size(), ids); }

  // labels plus every ancestor of every member.
  LabelSet expand(const LabelSet& labels) const;

  // Every (x, y) with x < y such that x and y are closure-exclusive, sorted.
  const std::vector<LabelPair>& exclusivity_closure() const { return closure_; }

  // Closure-exclusive partners of the positives, minus the positives.
  LabelSet reliable_negatives(const LabelSet& positives) const;

  // Sub-ontology over the kept labels (ascending original ids). Ancestry and
  // closure-exclusivity among kept labels are preserved.
  LabelOntology restrict_to(const std::vector<LabelId>& kept) const;

 private:
  explicit LabelOntology(OntologyDefinition def);
  const LabelInfo& info(LabelId id) const;

  OntologyDefinition def_;
  std::map<std::string, LabelId> by_name_;
  std::map<std::string, LabelId> synonyms_;
  std::vector<std::vector<LabelId>> parents_;
  std::vector<std::vector<LabelId>> children_;
  std::vector<LabelSet> ancestors_;
  std::vector<LabelSet> descendants_;
  std::vector<LabelSet> exclusive_;
  std::vector<LabelPair> closure_;
};

// Ontology text format:
//
//   [labels]
//   name | category | synonym, synonym, ...
//   [parents]
//   child -> parent
//   [exclusive]
//   name <-> name
//
// '#' starts a comment. Names are case-insensitive; ids follow file order.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

OntologyDefinition parse_ontology(std::istream& in, const std::string& source = "<input>");
OntologyDefinition read_ontology_file(const std::string& path);
void write_ontology(std::ostream& out, const OntologyDefinition& def);

}  // namespace lesanet
