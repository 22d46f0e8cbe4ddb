#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace lesanet {

inline constexpr std::string_view kTargetBookmark = "BOOKMARK";
inline constexpr std::string_view kOtherBookmark = "OTHER_BMK";

// Version tag of the built-in suffix table. Bump when the table changes.
inline constexpr std::string_view kSuffixTableVersion = "suffix-v1";

struct SuffixRule {
  std::string_view suffix;
  std::string_view replacement;
  std::size_t min_stem;  // characters that must remain before the suffix
};

// Ordered rules; the first matching rule wins. Irregular forms are handled
// by the exception table before the rules are tried.
const std::vector<SuffixRule>& suffix_rules();
const std::vector<std::pair<std::string_view, std::string_view>>& lemma_exceptions();

// Maps a lowercased word to its base form using the tables above.
std::string lemmatize(std::string_view word);

// Lowercases, splits on whitespace and punctuation, and lemmatizes. When
// keep_delimiters is set, ';' and ',' are emitted as their own tokens.
// Bookmark placeholders are kept verbatim.
std::vector<std::string> tokenize(std::string_view sentence, bool keep_delimiters);

inline std::vector<std::string> tokenize_normalize(std::string_view sentence) {
  return tokenize(sentence, false);
}

// Normalized tokens joined by single spaces; used as lexicon keys.
std::string normalize_phrase(std::string_view phrase);

// Lowercase with runs of whitespace collapsed and ends trimmed.
std::string normalize_name(std::string_view name);

inline bool is_delimiter_token(std::string_view t) { return t == ";" || t == ","; }
inline bool is_bookmark_token(std::string_view t) {
  return t == kTargetBookmark || t == kOtherBookmark;
}

}  // namespace lesanet
