#include "lesanet/ontology.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "lesanet/text.hpp"

namespace lesanet {

std::string_view to_string(Category c) {
  switch (c) {
    case Category::kBodyPart: return "body-part";
    case Category::kType: return "type";
    case Category::kAttribute: return "attribute";
  }
  return "?";
}

std::optional<Category> parse_category(std::string_view s) {
  std::string n = normalize_name(s);
  if (n == "body-part" || n == "bodypart" || n == "body part") return Category::kBodyPart;
  if (n == "type") return Category::kType;
  if (n == "attribute") return Category::kAttribute;
  return std::nullopt;
}

std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::kUnknownLabel: return "unknown-label";
    case ViolationKind::kDuplicateName: return "duplicate-name";
    case ViolationKind::kDuplicateSynonym: return "duplicate-synonym";
    case ViolationKind::kCycle: return "cycle";
    case ViolationKind::kSelfExclusion: return "self-exclusion";
    case ViolationKind::kAncestorExclusion: return "ancestor-exclusion";
    case ViolationKind::kClosureConflict: return "closure-conflict";
  }
  return "?";
}

bool ValidationReport::has(ViolationKind k) const {
  return std::any_of(violations.begin(), violations.end(),
                     [k](const Violation& v) { return v.kind == k; });
}

void ValidationReport::print(std::ostream& os) const {
  if (ok()) {
    os << "ontology: ok\n";
    return;
  }
  for (const auto& v : violations) {
    os << "ontology: " << to_string(v.kind) << " [";
    for (std::size_t i = 0; i < v.ids.size(); ++i) os << (i ? " " : "") << v.ids[i];
    os << "] " << v.message << "\n";
  }
}

namespace {

std::string describe(const ValidationReport& r) {
  std::ostringstream os;
  os << "invalid ontology: " << r.violations.size() << " violation(s)";
  if (!r.ok()) os << ", first: " << to_string(r.violations[0].kind) << " " << r.violations[0].message;
  return os.str();
}

// Strongly connected components of the child->parent graph with more than one
// member, or a self-loop.
std::vector<std::vector<LabelId>> find_cycles(std::size_t n,
                                              const std::vector<std::vector<LabelId>>& adj) {
  std::vector<int> index(n, -1), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<LabelId> stack;
  std::vector<std::vector<LabelId>> cycles;
  int counter = 0;

  std::function<void(LabelId)> strongconnect = [&](LabelId v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (LabelId w : adj[v]) {
      if (index[w] < 0) {
        strongconnect(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<LabelId> comp;
      LabelId w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        comp.push_back(w);
      } while (w != v);
      bool self_loop = std::find(adj[v].begin(), adj[v].end(), v) != adj[v].end();
      if (comp.size() > 1 || self_loop) {
        std::sort(comp.begin(), comp.end());
        cycles.push_back(std::move(comp));
      }
    }
  };
  for (LabelId v = 0; v < n; ++v)
    if (index[v] < 0) strongconnect(v);
  std::sort(cycles.begin(), cycles.end());
  return cycles;
}

// Strict ancestors by breadth-first search; tolerates cycles.
std::vector<LabelSet> reachability(std::size_t n, const std::vector<std::vector<LabelId>>& adj) {
  std::vector<LabelSet> out(n, LabelSet(n));
  std::vector<LabelId> frontier;
  for (LabelId v = 0; v < n; ++v) {
    frontier.assign(adj[v].begin(), adj[v].end());
    while (!frontier.empty()) {
      LabelId u = frontier.back();
      frontier.pop_back();
      if (out[v].test(u)) continue;
      out[v].set(u);
      for (LabelId p : adj[u])
        if (!out[v].test(p)) frontier.push_back(p);
    }
    if (out[v].test(v)) out[v].reset(v);
  }
  return out;
}

std::vector<LabelSet> invert(const std::vector<LabelSet>& rel) {
  std::size_t n = rel.size();
  std::vector<LabelSet> out(n, LabelSet(n));
  for (LabelId v = 0; v < n; ++v)
    for (LabelId a : rel[v].ids()) out[a].set(v);
  return out;
}

std::string pair_names(const OntologyDefinition& def, LabelId a, LabelId b) {
  return "'" + def.labels[a].name + "' / '" + def.labels[b].name + "'";
}

}  // namespace

ValidationReport validate(const OntologyDefinition& def) {
  ValidationReport report;
  const std::size_t n = def.labels.size();
  auto add = [&](ViolationKind k, std::vector<LabelId> ids, std::string msg) {
    report.violations.push_back({k, std::move(ids), std::move(msg)});
  };

  std::map<std::string, LabelId> names;
  for (LabelId i = 0; i < n; ++i) {
    auto key = normalize_name(def.labels[i].name);
    auto [it, fresh] = names.emplace(key, i);
    if (!fresh) add(ViolationKind::kDuplicateName, {it->second, i}, "name '" + key + "'");
  }

  std::map<std::string, LabelId> phrases;
  for (LabelId i = 0; i < n; ++i) {
    std::vector<std::string> forms{def.labels[i].name};
    forms.insert(forms.end(), def.labels[i].synonyms.begin(), def.labels[i].synonyms.end());
    for (const auto& f : forms) {
      auto key = normalize_phrase(f);
      if (key.empty()) continue;
      auto [it, fresh] = phrases.emplace(key, i);
      if (!fresh && it->second != i)
        add(ViolationKind::kDuplicateSynonym, {it->second, i}, "synonym '" + key + "'");
    }
  }

  auto in_range = [n](const LabelPair& p) { return p.first < n && p.second < n; };
  std::vector<std::vector<LabelId>> up(n);
  for (const auto& e : def.parent_edges) {
    if (!in_range(e)) {
      add(ViolationKind::kUnknownLabel, {e.first, e.second}, "parent edge references unknown id");
      continue;
    }
    up[e.first].push_back(e.second);
  }
  for (auto& comp : find_cycles(n, up)) {
    std::string msg = "cycle through";
    for (LabelId id : comp) msg += " '" + def.labels[id].name + "'";
    add(ViolationKind::kCycle, std::move(comp), msg);
  }

  auto anc = reachability(n, up);
  auto desc = invert(anc);
  for (const auto& p : def.exclusive_pairs) {
    if (!in_range(p)) {
      add(ViolationKind::kUnknownLabel, {p.first, p.second}, "exclusive pair references unknown id");
      continue;
    }
    auto [a, b] = p;
    if (a == b) {
      add(ViolationKind::kSelfExclusion, {a, a}, "label '" + def.labels[a].name + "' exclusive with itself");
      continue;
    }
    if (anc[a].test(b) || anc[b].test(a)) {
      add(ViolationKind::kAncestorExclusion, {std::min(a, b), std::max(a, b)},
          pair_names(def, a, b) + " are ancestor and descendant");
      continue;
    }
    LabelSet side_a = desc[a], side_b = desc[b];
    side_a.set(a);
    side_b.set(b);
    auto shared = (side_a & side_b).ids();
    if (!shared.empty()) {
      std::vector<LabelId> ids{std::min(a, b), std::max(a, b)};
      ids.insert(ids.end(), shared.begin(), shared.end());
      add(ViolationKind::kClosureConflict, std::move(ids),
          pair_names(def, a, b) + " share descendant '" + def.labels[shared[0]].name + "'");
    }
  }
  return report;
}

OntologyError::OntologyError(ValidationReport report)
    : std::runtime_error(describe(report)), report_(std::move(report)) {}

LabelOntology LabelOntology::build(OntologyDefinition def) {
  auto report = validate(def);
  if (!report.ok()) throw OntologyError(std::move(report));
  return LabelOntology(std::move(def));
}

LabelOntology::LabelOntology(OntologyDefinition def) : def_(std::move(def)) {
  const std::size_t n = def_.labels.size();
  parents_.resize(n);
  children_.resize(n);
  for (LabelId i = 0; i < n; ++i) {
    by_name_.emplace(normalize_name(def_.labels[i].name), i);
    synonyms_.emplace(normalize_phrase(def_.labels[i].name), i);
    for (const auto& s : def_.labels[i].synonyms) {
      auto key = normalize_phrase(s);
      if (!key.empty()) synonyms_.emplace(key, i);
    }
  }
  for (const auto& [child, parent] : def_.parent_edges) {
    auto& ps = parents_[child];
    if (std::find(ps.begin(), ps.end(), parent) != ps.end()) continue;
    ps.push_back(parent);
    children_[parent].push_back(child);
  }
  ancestors_ = reachability(n, parents_);
  descendants_ = invert(ancestors_);

  exclusive_.assign(n, LabelSet(n));
  for (const auto& [a, b] : def_.exclusive_pairs) {
    LabelSet side_a = descendants_[a], side_b = descendants_[b];
    side_a.set(a);
    side_b.set(b);
    for (LabelId x : side_a.ids()) exclusive_[x] |= side_b;
    for (LabelId y : side_b.ids()) exclusive_[y] |= side_a;
  }
  for (LabelId x = 0; x < n; ++x)
    for (LabelId y : exclusive_[x].ids())
      if (y > x) closure_.emplace_back(x, y);
}

const LabelInfo& LabelOntology::info(LabelId id) const {
  if (id >= size()) throw std::out_of_range("label id out of range");
  return def_.labels[id];
}

std::optional<LabelId> LabelOntology::find(std::string_view name) const {
  auto it = by_name_.find(normalize_name(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

const std::vector<LabelId>& LabelOntology::parents(LabelId id) const {
  info(id);
  return parents_[id];
}
const std::vector<LabelId>& LabelOntology::children(LabelId id) const {
  info(id);
  return children_[id];
}
const LabelSet& LabelOntology::ancestors(LabelId id) const {
  info(id);
  return ancestors_[id];
}
const LabelSet& LabelOntology::descendants(LabelId id) const {
  info(id);
  return descendants_[id];
}
const LabelSet& LabelOntology::exclusive_with(LabelId id) const {
  info(id);
  return exclusive_[id];
}

LabelSet LabelOntology::expand(const LabelSet& labels) const {
  LabelSet out = labels;
  for (LabelId id : labels.ids()) out |= ancestors_.at(id);
  return out;
}

LabelSet LabelOntology::reliable_negatives(const LabelSet& positives) const {
  LabelSet out(size());
  for (LabelId id : positives.ids()) out |= exclusive_.at(id);
  out -= positives;
  return out;
}

LabelOntology LabelOntology::restrict_to(const std::vector<LabelId>& kept) const {
  const std::size_t n = size();
  std::vector<LabelId> new_id(n, static_cast<LabelId>(n));
  LabelSet keep(n);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (i > 0 && kept[i] <= kept[i - 1]) throw std::invalid_argument("kept ids must be ascending");
    keep.set(kept[i]);
    new_id[kept[i]] = static_cast<LabelId>(i);
  }

  OntologyDefinition sub;
  for (LabelId old : kept) sub.labels.push_back(def_.labels[old]);
  for (LabelId x : kept) {
    LabelSet cand = ancestors_[x] & keep;
    std::set<LabelId> ps;
    for (LabelId p : parents_[x])
      if (keep.test(p)) ps.insert(p);
    for (LabelId y : cand.ids()) {
      bool covered = false;
      for (LabelId z : cand.ids())
        if (z != y && ancestors_[z].test(y)) covered = true;
      if (!covered) ps.insert(y);
    }
    for (LabelId p : ps) sub.parent_edges.emplace_back(new_id[x], new_id[p]);
  }
  for (const auto& [a, b] : def_.exclusive_pairs)
    if (keep.test(a) && keep.test(b)) sub.exclusive_pairs.emplace_back(new_id[a], new_id[b]);

  LabelOntology first = build(sub);
  bool added = false;
  for (const auto& [x, y] : closure_) {
    if (!keep.test(x) || !keep.test(y)) continue;
    if (!first.exclusive_with(new_id[x]).test(new_id[y])) {
      sub.exclusive_pairs.emplace_back(new_id[x], new_id[y]);
      added = true;
    }
  }
  return added ? build(std::move(sub)) : first;
}

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, std::string_view sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(s.substr(start)));
      return out;
    }
    out.push_back(trim(s.substr(start, pos - start)));
    start = pos + sep.size();
  }
}

}  // namespace

OntologyDefinition parse_ontology(std::istream& in, const std::string& source) {
  enum class Section { kNone, kLabels, kParents, kExclusive } section = Section::kNone;
  OntologyDefinition def;
  std::map<std::string, LabelId> names;
  std::string raw;
  std::size_t lineno = 0;

  auto lookup = [&](const std::string& name) {
    auto it = names.find(normalize_name(name));
    if (it == names.end()) throw ParseError(source, lineno, "unknown label '" + name + "'");
    return it->second;
  };

  while (std::getline(in, raw)) {
    ++lineno;
    auto hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line == "[labels]") section = Section::kLabels;
      else if (line == "[parents]") section = Section::kParents;
      else if (line == "[exclusive]") section = Section::kExclusive;
      else throw ParseError(source, lineno, "unknown section " + line);
      continue;
    }
    switch (section) {
      case Section::kNone:
        throw ParseError(source, lineno, "entry outside of a section");
      case Section::kLabels: {
        auto fields = split(line, "|");
        if (fields.size() < 2 || fields.size() > 3 || fields[0].empty())
          throw ParseError(source, lineno, "expected 'name | category | synonyms'");
        auto cat = parse_category(fields[1]);
        if (!cat) throw ParseError(source, lineno, "unknown category '" + fields[1] + "'");
        LabelInfo info{fields[0], *cat, {}};
        if (fields.size() == 3 && !fields[2].empty())
          for (auto& syn : split(fields[2], ","))
            if (!syn.empty()) info.synonyms.push_back(syn);
        names.emplace(normalize_name(info.name), static_cast<LabelId>(def.labels.size()));
        def.labels.push_back(std::move(info));
        break;
      }
      case Section::kParents: {
        auto fields = split(line, "->");
        if (fields.size() != 2) throw ParseError(source, lineno, "expected 'child -> parent'");
        def.parent_edges.emplace_back(lookup(fields[0]), lookup(fields[1]));
        break;
      }
      case Section::kExclusive: {
        auto fields = split(line, "<->");
        if (fields.size() != 2) throw ParseError(source, lineno, "expected 'a <-> b'");
        def.exclusive_pairs.emplace_back(lookup(fields[0]), lookup(fields[1]));
        break;
      }
    }
  }
  return def;
}

OntologyDefinition read_ontology_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ontology file " + path);
  return parse_ontology(in, path);
}

void write_ontology(std::ostream& out, const OntologyDefinition& def) {
  out << "[labels]\n";
  for (const auto& l : def.labels) {
    out << l.name << " | " << to_string(l.category);
    if (!l.synonyms.empty()) {
      out << " |";
      for (std::size_t i = 0; i < l.synonyms.size(); ++i) out << (i ? ", " : " ") << l.synonyms[i];
    }
    out << "\n";
  }
  out << "\n[parents]\n";
  for (const auto& [c, p] : def.parent_edges)
    out << def.labels[c].name << " -> " << def.labels[p].name << "\n";
  out << "\n[exclusive]\n";
  for (const auto& [a, b] : def.exclusive_pairs)
    out << def.labels[a].name << " <-> " << def.labels[b].name << "\n";
}

}  // namespace lesanet
