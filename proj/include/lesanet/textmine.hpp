#pragma once

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lesanet/ontology.hpp"
#include "lesanet/text.hpp"

namespace lesanet {

enum class Relevance { kIrrelevant = 0, kUncertain = 1, kRelevant = 2 };

std::string_view to_string(Relevance r);
std::optional<Relevance> parse_relevance(std::string_view s);

struct Mention {
  LabelId label;
  std::size_t begin;  // token span [begin, end)
  std::size_t end;
  Category category;
};

struct MinedSentence {
  // Normalized tokens; ';' and ',' are kept as delimiter tokens.
  std::vector<std::string> tokens;
  std::size_t target_bookmark = 0;
  std::vector<std::size_t> other_bookmarks;
  std::vector<Mention> mentions;
};

// Deterministic stand-in for a learned label/bookmark relation classifier.
// The version string identifies the table in mined label files.
struct RelevanceRules {
  std::string version;
  // A cue makes the mentions after it, up to the end of its clause, uncertain.
  std::vector<std::string> uncertainty_cues;
  // Disjunctive cues also make the nearest preceding mention in the clause
  // uncertain ("adenopathy or mass").
  std::vector<std::string> disjunctive_cues;
  // Token sequences that end a clause, in addition to ';'.
  std::vector<std::vector<std::string>> clause_breaks;
  // A ',' ends a clause when the next mention after it is a body part.
  bool comma_before_body_part_breaks = true;
};

const RelevanceRules& default_relevance_rules();

class MiningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Longest-match-first n-gram lookup against an ontology's synonym lexicon.
class MentionMatcher {
 public:
  explicit MentionMatcher(const LabelOntology& ontology);

  // Left-to-right scan; at each position the longest phrase wins and the
  // scan resumes after it, so overlapping shorter matches are suppressed.
  std::vector<Mention> match(const std::vector<std::string>& tokens) const;

 private:
  const LabelOntology* ontology_;
  std::map<std::vector<std::string>, LabelId> lexicon_;
  std::size_t longest_ = 0;
};

std::vector<Mention> match_mentions(const std::vector<std::string>& tokens,
                                    const LabelOntology& ontology);

// Tokenizes, locates bookmarks and matches mentions. Throws MiningError unless
// exactly one target bookmark is present.
MinedSentence mine_sentence(std::string_view sentence, const MentionMatcher& matcher);

struct LabelRelevance {
  LabelId label;
  Relevance relevance;
  friend bool operator==(const LabelRelevance&, const LabelRelevance&) = default;
};

// One entry per distinct label in first-mention order. A label mentioned
// more than once keeps its most relevant status.
std::vector<LabelRelevance> classify_relevance(
    const MinedSentence& sent, const RelevanceRules& rules = default_relevance_rules());

// Mined label file: "lesion_id \t label_id \t label_name \t relevance" rows.
struct MinedLabelRow {
  std::string lesion_id;
  LabelId label;
  std::string label_name;
  Relevance relevance;
};

struct MineStats {
  std::size_t lines = 0;
  std::size_t skipped = 0;
  std::size_t rows = 0;
};

// Reads "lesion_id \t sentence" lines, writes mined label rows. Lines without
// a single target bookmark are skipped with a warning on `warn`.
MineStats mine_file(std::istream& sentences, const LabelOntology& ontology, std::ostream& out,
                    std::ostream& warn, const RelevanceRules& rules = default_relevance_rules());

void write_mined_header(std::ostream& out, const RelevanceRules& rules);
std::vector<MinedLabelRow> read_mined_labels(std::istream& in, const std::string& source = "<input>");

}  // namespace lesanet
