#include "lesanet/textmine.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

namespace lesanet {

std::string_view to_string(Relevance r) {
  switch (r) {
    case Relevance::kIrrelevant: return "irrelevant";
    case Relevance::kUncertain: return "uncertain";
    case Relevance::kRelevant: return "relevant";
  }
  return "?";
}

std::optional<Relevance> parse_relevance(std::string_view s) {
  if (s == "irrelevant") return Relevance::kIrrelevant;
  if (s == "uncertain") return Relevance::kUncertain;
  if (s == "relevant") return Relevance::kRelevant;
  return std::nullopt;
}

const RelevanceRules& default_relevance_rules() {
  static const RelevanceRules rules{
      "relevance-rules-v1",
      {"or", "versus", "vs", "possibly", "possible", "may", "suspicious", "likely", "probable",
       "questionable", "concern"},
      {"or", "versus", "vs"},
      {{"and", "a"}},
      true,
  };
  return rules;
}

MentionMatcher::MentionMatcher(const LabelOntology& ontology) : ontology_(&ontology) {
  for (const auto& [phrase, id] : ontology.synonyms()) {
    std::vector<std::string> key;
    std::istringstream is(phrase);
    for (std::string w; is >> w;) key.push_back(w);
    longest_ = std::max(longest_, key.size());
    lexicon_.emplace(std::move(key), id);
  }
}

std::vector<Mention> MentionMatcher::match(const std::vector<std::string>& tokens) const {
  std::vector<Mention> out;
  std::size_t i = 0;
  std::vector<std::string> key;
  while (i < tokens.size()) {
    bool found = false;
    for (std::size_t len = std::min(longest_, tokens.size() - i); len >= 1; --len) {
      key.assign(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                 tokens.begin() + static_cast<std::ptrdiff_t>(i + len));
      auto it = lexicon_.find(key);
      if (it == lexicon_.end()) continue;
      out.push_back({it->second, i, i + len, ontology_->category(it->second)});
      i += len;
      found = true;
      break;
    }
    if (!found) ++i;
  }
  return out;
}

std::vector<Mention> match_mentions(const std::vector<std::string>& tokens,
                                    const LabelOntology& ontology) {
  return MentionMatcher(ontology).match(tokens);
}

MinedSentence mine_sentence(std::string_view sentence, const MentionMatcher& matcher) {
  MinedSentence s;
  s.tokens = tokenize(sentence, true);
  std::size_t targets = 0;
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    if (s.tokens[i] == kTargetBookmark) {
      s.target_bookmark = i;
      ++targets;
    } else if (s.tokens[i] == kOtherBookmark) {
      s.other_bookmarks.push_back(i);
    }
  }
  if (targets == 0) throw MiningError("sentence has no BOOKMARK");
  if (targets > 1) throw MiningError("sentence has more than one BOOKMARK");
  s.mentions = matcher.match(s.tokens);
  return s;
}

std::vector<LabelRelevance> classify_relevance(const MinedSentence& sent,
                                               const RelevanceRules& rules) {
  const auto& tok = sent.tokens;
  const std::size_t n = tok.size();
  if (sent.target_bookmark >= n || tok[sent.target_bookmark] != kTargetBookmark)
    throw MiningError("sentence has no target bookmark");
  for (std::size_t i = 0; i < n; ++i)
    if (tok[i] == kTargetBookmark && i != sent.target_bookmark)
      throw MiningError("sentence has more than one BOOKMARK");

  auto mentions = sent.mentions;
  std::stable_sort(mentions.begin(), mentions.end(),
                   [](const Mention& a, const Mention& b) { return a.begin < b.begin; });

  // Clause breaks: ';', configured token sequences, and ',' before a body part.
  std::vector<bool> is_break(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (tok[i] == ";") is_break[i] = true;
    for (const auto& seq : rules.clause_breaks) {
      if (seq.empty() || i + seq.size() > n) continue;
      if (std::equal(seq.begin(), seq.end(), tok.begin() + static_cast<std::ptrdiff_t>(i)))
        is_break[i] = true;
    }
    if (tok[i] == "," && rules.comma_before_body_part_breaks) {
      auto next = std::find_if(mentions.begin(), mentions.end(),
                               [i](const Mention& m) { return m.begin > i; });
      if (next != mentions.end() && next->category == Category::kBodyPart) is_break[i] = true;
    }
  }
  std::vector<std::size_t> clause(n, 0);
  for (std::size_t i = 0, c = 0; i < n; ++i) {
    if (is_break[i]) ++c;
    clause[i] = c;
  }

  // Ownership segments additionally close right after each bookmark.
  std::vector<std::size_t> segment(n, 0);
  std::vector<std::ptrdiff_t> owner;  // bookmark token per segment, -1 if none
  {
    std::size_t seg = 0;
    owner.push_back(-1);
    for (std::size_t i = 0; i < n; ++i) {
      if (is_break[i]) {
        owner.push_back(-1);
        ++seg;
      }
      segment[i] = seg;
      if (is_bookmark_token(tok[i])) {
        owner[seg] = static_cast<std::ptrdiff_t>(i);
        owner.push_back(-1);
        ++seg;
      }
    }
  }
  // Unowned segments belong to the next bookmark, else the previous one.
  std::vector<std::ptrdiff_t> resolved(owner.size(), -1);
  std::ptrdiff_t next_owner = -1;
  for (std::size_t s = owner.size(); s-- > 0;) {
    if (owner[s] != -1) next_owner = owner[s];
    resolved[s] = next_owner;
  }
  std::ptrdiff_t prev_owner = -1;
  for (std::size_t s = 0; s < owner.size(); ++s) {
    if (owner[s] != -1) prev_owner = owner[s];
    if (resolved[s] == -1) resolved[s] = prev_owner;
  }

  std::vector<Relevance> status(mentions.size());
  for (std::size_t m = 0; m < mentions.size(); ++m)
    status[m] = resolved[segment[mentions[m].begin]] == static_cast<std::ptrdiff_t>(sent.target_bookmark)
                    ? Relevance::kRelevant
                    : Relevance::kIrrelevant;

  auto contains = [](const std::vector<std::string>& v, const std::string& t) {
    return std::find(v.begin(), v.end(), t) != v.end();
  };
  for (std::size_t p = 0; p < n; ++p) {
    if (!contains(rules.uncertainty_cues, tok[p])) continue;
    std::ptrdiff_t before = -1;
    for (std::size_t m = 0; m < mentions.size(); ++m) {
      if (clause[mentions[m].begin] != clause[p]) continue;
      if (mentions[m].begin > p) status[m] = Relevance::kUncertain;
      else if (mentions[m].end <= p) before = static_cast<std::ptrdiff_t>(m);
    }
    if (before >= 0 && contains(rules.disjunctive_cues, tok[p]))
      status[static_cast<std::size_t>(before)] = Relevance::kUncertain;
  }

  std::vector<LabelRelevance> out;
  for (std::size_t m = 0; m < mentions.size(); ++m) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const LabelRelevance& r) { return r.label == mentions[m].label; });
    if (it == out.end()) out.push_back({mentions[m].label, status[m]});
    else if (status[m] > it->relevance) it->relevance = status[m];
  }
  return out;
}

void write_mined_header(std::ostream& out, const RelevanceRules& rules) {
  out << "# lesion_id\tlabel_id\tlabel\trelevance\t(" << rules.version << ", " << kSuffixTableVersion
      << ")\n";
}

MineStats mine_file(std::istream& sentences, const LabelOntology& ontology, std::ostream& out,
                    std::ostream& warn, const RelevanceRules& rules) {
  MentionMatcher matcher(ontology);
  MineStats stats;
  write_mined_header(out, rules);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(sentences, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    ++stats.lines;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      warn << "warning: line " << lineno << ": expected 'lesion_id<TAB>sentence', skipped\n";
      ++stats.skipped;
      continue;
    }
    std::string lesion = line.substr(0, tab);
    MinedSentence sent;
    try {
      sent = mine_sentence(std::string_view(line).substr(tab + 1), matcher);
    } catch (const MiningError& e) {
      warn << "warning: line " << lineno << " (" << lesion << "): " << e.what() << ", skipped\n";
      ++stats.skipped;
      continue;
    }
    for (const auto& r : classify_relevance(sent, rules)) {
      out << lesion << '\t' << r.label << '\t' << ontology.name(r.label) << '\t'
          << to_string(r.relevance) << '\n';
      ++stats.rows;
    }
  }
  return stats;
}

std::vector<MinedLabelRow> read_mined_labels(std::istream& in, const std::string& source) {
  std::vector<MinedLabelRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      auto tab = line.find('\t', start);
      f.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    auto fail = [&](const std::string& what) {
      return ParseError(source, lineno, what);
    };
    if (f.size() != 4) throw fail("expected 4 tab-separated fields");
    auto rel = parse_relevance(f[3]);
    if (!rel) throw fail("unknown relevance '" + f[3] + "'");
    MinedLabelRow row;
    row.lesion_id = f[0];
    try {
      row.label = static_cast<LabelId>(std::stoul(f[1]));
    } catch (const std::exception&) {
      throw fail("bad label id '" + f[1] + "'");
    }
    row.label_name = f[2];
    row.relevance = *rel;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace lesanet
