#include "lesanet/text.hpp"

#include <algorithm>
#include <cctype>

namespace lesanet {

const std::vector<SuffixRule>& suffix_rules() {
  static const std::vector<SuffixRule> rules = {
      {"sses", "ss", 1},  // masses -> mass
      {"ies", "y", 2},    // opacities -> opacity
      {"xes", "x", 2},
      {"ches", "ch", 2},
      {"shes", "sh", 2},
      {"ss", "ss", 0},  // keep: mass, abscess
      {"us", "us", 0},  // keep: thrombus
      {"is", "is", 0},  // keep: metastasis
      {"s", "", 3},     // nodules -> nodule
      {"rging", "rge", 2},  // enlarging -> enlarge
      {"ncing", "nce", 2},  // enhancing -> enhance
      {"ating", "ate", 2},
      {"izing", "ize", 2},
      {"ying", "y", 2},
      {"ing", "", 3},
      {"ied", "y", 2},
  };
  return rules;
}

const std::vector<std::pair<std::string_view, std::string_view>>& lemma_exceptions() {
  static const std::vector<std::pair<std::string_view, std::string_view>> table = {
      {"metastases", "metastasis"},
      {"lymphadenopathies", "lymphadenopathy"},
      {"nodes", "node"},
      {"lesions", "lesion"},
      {"ribs", "rib"},
      {"cysts", "cyst"},
      {"pancreas", "pancreas"},
      {"gas", "gas"},
      {"series", "series"},
      {"is", "is"},
      {"was", "was"},
      {"has", "has"},
      {"this", "this"},
      {"thing", "thing"},
  };
  return table;
}

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

}  // namespace

std::string lemmatize(std::string_view word) {
  for (const auto& [form, lemma] : lemma_exceptions())
    if (word == form) return std::string(lemma);
  if (!std::all_of(word.begin(), word.end(),
                   [](char c) { return std::isalpha(static_cast<unsigned char>(c)); }))
    return std::string(word);
  for (const auto& rule : suffix_rules()) {
    if (!ends_with(word, rule.suffix)) continue;
    std::size_t stem = word.size() - rule.suffix.size();
    if (stem < rule.min_stem) continue;
    std::string out(word.substr(0, stem));
    out += rule.replacement;
    return out;
  }
  return std::string(word);
}

std::vector<std::string> tokenize(std::string_view sentence, bool keep_delimiters) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < sentence.size()) {
    char c = sentence[i];
    if (is_word_char(c)) {
      std::size_t j = i;
      while (j < sentence.size() && is_word_char(sentence[j])) ++j;
      std::string_view raw = sentence.substr(i, j - i);
      if (is_bookmark_token(raw)) {
        tokens.emplace_back(raw);
      } else {
        std::string lower(raw);
        for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        tokens.push_back(lemmatize(lower));
      }
      i = j;
    } else {
      if (keep_delimiters && (c == ';' || c == ',')) tokens.emplace_back(1, c);
      ++i;
    }
  }
  return tokens;
}

std::string normalize_phrase(std::string_view phrase) {
  std::string out;
  for (const auto& t : tokenize(phrase, false)) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

std::string normalize_name(std::string_view name) {
  std::string out;
  bool pending_space = false;
  for (char c : name) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

}  // namespace lesanet
