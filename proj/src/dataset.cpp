#include "lesanet/dataset.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "lesanet/random.hpp"

namespace lesanet {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  return std::nullopt;
}

Dataset::Dataset(std::shared_ptr<const LabelOntology> ontology, std::size_t dim)
    : ontology_(std::move(ontology)), dim_(dim) {
  if (!ontology_) throw DatasetError("dataset needs an ontology");
}

void Dataset::add(std::string lesion_id, std::string patient_id, Split split,
                  std::vector<double> features, const LabelSet& mined,
                  std::optional<LabelSet> clean) {
  if (features.size() != dim_)
    throw DatasetError("lesion " + lesion_id + ": feature length " + std::to_string(features.size()) +
                       " != " + std::to_string(dim_));
  if (mined.width() != ontology_->size() || (clean && clean->width() != ontology_->size()))
    throw DatasetError("lesion " + lesion_id + ": label set width does not match the ontology");
  if (lesion_index_.count(lesion_id)) throw DatasetError("duplicate lesion id " + lesion_id);
  auto [it, fresh] = patient_split_.emplace(patient_id, split);
  if (!fresh && it->second != split)
    throw DatasetError("patient " + patient_id + " appears in both " +
                       std::string(to_string(it->second)) + " and " + std::string(to_string(split)));

  Sample s;
  s.lesion_id = std::move(lesion_id);
  s.patient_id = std::move(patient_id);
  s.split = split;
  s.features = std::move(features);
  s.mined_labels = mined;
  s.expanded_labels = ontology_->expand(mined);
  s.clean_labels = std::move(clean);
  lesion_index_.emplace(s.lesion_id, samples_.size());
  samples_.push_back(std::move(s));
}

void Dataset::set_mined_labels(std::size_t index, const LabelSet& mined) {
  auto& s = samples_.at(index);
  if (mined.width() != ontology_->size()) throw DatasetError("label set width mismatch");
  s.mined_labels = mined;
  s.expanded_labels = ontology_->expand(mined);
}

std::vector<std::size_t> Dataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples_.size(); ++i)
    if (samples_[i].split == split) out.push_back(i);
  return out;
}

std::optional<std::size_t> Dataset::find(const std::string& lesion_id) const {
  auto it = lesion_index_.find(lesion_id);
  if (it == lesion_index_.end()) return std::nullopt;
  return it->second;
}

Split split_for_patient(const std::string& patient_id, const std::array<double, 3>& ratios) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : patient_id) {
    h ^= c;
    h *= 1099511628211ull;
  }
  double total = ratios[0] + ratios[1] + ratios[2];
  double u = static_cast<double>(h % 1000003ull) / 1000003.0 * total;
  if (u < ratios[0]) return Split::kTrain;
  if (u < ratios[0] + ratios[1]) return Split::kVal;
  return Split::kTest;
}

const LabelSet& labels_of(const Sample& s, LabelView view) {
  switch (view) {
    case LabelView::kMined: return s.mined_labels;
    case LabelView::kExpanded: return s.expanded_labels;
    case LabelView::kClean:
      if (!s.clean_labels) throw DatasetError("lesion " + s.lesion_id + " has no clean labels");
      return *s.clean_labels;
  }
  return s.expanded_labels;
}

std::vector<ClassCount> class_frequencies(const Dataset& ds, Split split, LabelView view) {
  std::vector<ClassCount> out(ds.ontology().size());
  std::size_t n = 0;
  for (const auto& s : ds.samples()) {
    if (s.split != split) continue;
    ++n;
    for (LabelId c : labels_of(s, view).ids()) ++out[c].positives;
  }
  for (auto& c : out) c.negatives = n - c.positives;
  return out;
}

namespace {

LabelSet remap_set(const LabelSet& src, const std::vector<LabelId>& remap) {
  LabelSet out(remap.size());
  for (std::size_t i = 0; i < remap.size(); ++i)
    if (src.test(remap[i])) out.set(static_cast<LabelId>(i));
  return out;
}

}  // namespace

Dataset apply_remap(const Dataset& ds, const std::vector<LabelId>& remap) {
  auto sub = std::make_shared<const LabelOntology>(ds.ontology().restrict_to(remap));
  Dataset out(sub, ds.dim());
  for (const auto& s : ds.samples()) {
    std::optional<LabelSet> clean;
    if (s.clean_labels) clean = remap_set(*s.clean_labels, remap);
    out.add(s.lesion_id, s.patient_id, s.split, s.features, remap_set(s.mined_labels, remap),
            std::move(clean));
  }
  return out;
}

FilteredDataset filter_vocabulary(const Dataset& ds, const VocabularyFilter& t) {
  auto train = class_frequencies(ds, Split::kTrain);
  auto val = class_frequencies(ds, Split::kVal);
  auto test = class_frequencies(ds, Split::kTest);
  std::vector<LabelId> kept;
  for (LabelId c = 0; c < ds.ontology().size(); ++c)
    if (train[c].positives >= t.min_train && val[c].positives >= t.min_val &&
        test[c].positives >= t.min_test)
      kept.push_back(c);
  if (kept.empty()) throw DatasetError("vocabulary filter removed every label");
  return {apply_remap(ds, kept), kept};
}

Dataset generate_synthetic(std::shared_ptr<const LabelOntology> ontology, const GeneratorConfig& cfg) {
  const auto& onto = *ontology;
  for (double p : {cfg.noise.p_drop_parent, cfg.noise.p_drop, cfg.noise.p_inject})
    if (!(p >= 0.0 && p <= 1.0)) throw DatasetError("corruption probabilities must lie in [0,1]");
  if (!(cfg.extra_leaf_prob >= 0.0 && cfg.extra_leaf_prob <= 1.0))
    throw DatasetError("extra_leaf_prob must lie in [0,1]");
  if (!(cfg.omission_bias >= 0.0 && cfg.omission_bias <= 1.0))
    throw DatasetError("omission_bias must lie in [0,1]");
  if (cfg.dim == 0 || cfg.lesions_per_patient == 0 || cfg.max_leaves == 0)
    throw DatasetError("generator sizes must be positive");

  const std::size_t n_labels = onto.size();
  Rng rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution extra_leaf(cfg.extra_leaf_prob);
  std::bernoulli_distribution drop_parent(cfg.noise.p_drop_parent);
  std::bernoulli_distribution drop_leaf(cfg.noise.p_drop);
  std::bernoulli_distribution inject(cfg.noise.p_inject);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double bias = cfg.omission_bias;

  std::vector<LabelId> leaves;
  for (LabelId c = 0; c < n_labels; ++c)
    if (onto.is_leaf(c)) leaves.push_back(c);
  std::shuffle(leaves.begin(), leaves.end(), rng);
  std::vector<double> popularity(leaves.size());
  for (std::size_t r = 0; r < leaves.size(); ++r)
    popularity[r] = 1.0 / std::pow(static_cast<double>(r + 1), cfg.zipf_exponent);
  WeightedSampler pick_leaf(popularity);

  std::vector<std::vector<double>> prototypes(n_labels, std::vector<double>(cfg.dim));
  for (auto& p : prototypes)
    for (auto& v : p) v = cfg.prototype_scale * normal(rng);

  std::vector<std::pair<std::string, Split>> patients;
  auto patient_name = [](std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "P%06zu", k);
    return std::string(buf);
  };
  bool quota = cfg.split_quota[0] || cfg.split_quota[1] || cfg.split_quota[2];
  if (quota) {
    std::array<std::size_t, 3> have{0, 0, 0};
    for (std::size_t k = 0; have != cfg.split_quota; ++k) {
      if (k > 100 * (cfg.split_quota[0] + cfg.split_quota[1] + cfg.split_quota[2]) + 1000)
        throw DatasetError("split quota cannot be met with the configured ratios");
      auto id = patient_name(k);
      auto split = split_for_patient(id, cfg.split_ratios);
      auto& h = have[static_cast<std::size_t>(split)];
      if (h >= cfg.split_quota[static_cast<std::size_t>(split)]) continue;
      ++h;
      patients.emplace_back(id, split);
    }
  } else {
    for (std::size_t k = 0; k < cfg.n_patients; ++k) {
      auto id = patient_name(k);
      patients.emplace_back(id, split_for_patient(id, cfg.split_ratios));
    }
  }

  Dataset ds(ontology, cfg.dim);
  for (const auto& [patient, split] : patients) {
    for (std::size_t j = 0; j < cfg.lesions_per_patient; ++j) {
      std::size_t want = 1;
      while (want < cfg.max_leaves && extra_leaf(rng)) ++want;
      LabelSet clean(n_labels);
      std::size_t chosen = 0;
      for (std::size_t attempt = 0; chosen < want && attempt < 20 * want; ++attempt) {
        LabelId leaf = leaves[pick_leaf(rng)];
        if (clean.test(leaf) || onto.exclusive_with(leaf).intersects(clean)) continue;
        clean |= onto.ancestors(leaf);
        clean.set(leaf);
        ++chosen;
      }

      // Salience scales a label's prototype and, with omission_bias, makes
      // faint findings more likely to go unreported. Mean drop rates are kept.
      std::vector<double> salience(n_labels, 0.5);
      if (bias > 0.0)
        for (LabelId c : clean.ids()) salience[c] = unit(rng);

      std::vector<double> x(cfg.dim, 0.0);
      for (LabelId c : clean.ids()) {
        double amp = 1.0 - bias + 2.0 * bias * salience[c];
        for (std::size_t d = 0; d < cfg.dim; ++d) x[d] += amp * prototypes[c][d];
      }
      for (auto& v : x) v += cfg.feature_noise * normal(rng);

      LabelSet mined = clean;
      for (LabelId c : clean.ids()) {
        bool inner = onto.descendants(c).intersects(clean);
        bool drop;
        if (bias > 0.0) {
          double p = inner ? cfg.noise.p_drop_parent : cfg.noise.p_drop;
          p *= 1.0 - bias + 2.0 * bias * (1.0 - salience[c]);
          drop = std::bernoulli_distribution(std::min(p, 1.0))(rng);
        } else {
          drop = inner ? drop_parent(rng) : drop_leaf(rng);
        }
        if (drop) mined.reset(c);
      }
      if (inject(rng)) {
        std::vector<LabelId> candidates;
        for (LabelId c = 0; c < n_labels; ++c)
          if (!clean.test(c) && !onto.exclusive_with(c).intersects(clean)) candidates.push_back(c);
        if (!candidates.empty()) mined.set(candidates[uniform_index(rng, candidates.size())]);
      }
      ds.add(patient + "-L" + std::to_string(j), patient, split, std::move(x), mined, clean);
    }
  }
  return ds;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

void write_ids(std::ostream& out, const LabelSet& s) {
  auto ids = s.ids();
  for (std::size_t i = 0; i < ids.size(); ++i) out << (i ? " " : "") << ids[i];
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> f;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    f.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) return f;
    start = tab + 1;
  }
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& ds) {
  out << "# lesanet-dataset v1 dim=" << ds.dim() << " labels=" << ds.ontology().size() << "\n";
  for (const auto& s : ds.samples()) {
    out << s.lesion_id << '\t' << s.patient_id << '\t' << to_string(s.split) << '\t';
    write_ids(out, s.mined_labels);
    out << '\t';
    for (std::size_t d = 0; d < s.features.size(); ++d) out << (d ? "," : "") << format_double(s.features[d]);
    if (s.clean_labels) {
      out << '\t';
      write_ids(out, *s.clean_labels);
    }
    out << '\n';
  }
}

Dataset read_dataset(std::istream& in, std::shared_ptr<const LabelOntology> ontology,
                     const std::string& source) {
  std::optional<Dataset> ds;
  const std::size_t n_labels = ontology->size();
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) { return ParseError(source, lineno, what); };

  auto parse_ids = [&](const std::string& field) {
    LabelSet s(n_labels);
    std::istringstream is(field);
    std::string tok;
    while (is >> tok) {
      unsigned long id = 0;
      auto r = std::from_chars(tok.data(), tok.data() + tok.size(), id);
      if (r.ec != std::errc() || r.ptr != tok.data() + tok.size()) throw fail("bad label id '" + tok + "'");
      if (id >= n_labels) throw fail("label id " + tok + " outside the ontology");
      s.set(static_cast<LabelId>(id));
    }
    return s;
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("# lesanet-dataset", 0) == 0) {
      std::istringstream hs(line.substr(17));
      std::string word;
      while (hs >> word) {
        std::size_t value = 0;
        auto eq = word.find('=');
        if (eq == std::string::npos) continue;
        auto r = std::from_chars(word.data() + eq + 1, word.data() + word.size(), value);
        if (r.ec != std::errc()) throw fail("bad header field '" + word + "'");
        std::string key = word.substr(0, eq);
        if (key == "labels" && value != n_labels)
          throw fail("dataset has " + std::to_string(value) + " labels, ontology has " + std::to_string(n_labels));
        if (key == "dim" && !ds) ds.emplace(ontology, value);
      }
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    auto f = split_tabs(line);
    if (f.size() != 5 && f.size() != 6) throw fail("expected 5 or 6 tab-separated fields");
    auto split = parse_split(f[2]);
    if (!split) throw fail("unknown split '" + f[2] + "'");
    std::vector<double> x;
    std::size_t start = 0;
    while (start <= f[4].size()) {
      auto comma = f[4].find(',', start);
      std::string_view tok = std::string_view(f[4]).substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      double v = 0.0;
      auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (r.ec != std::errc() || r.ptr != tok.data() + tok.size())
        throw fail("bad feature value '" + std::string(tok) + "'");
      if (!std::isfinite(v)) throw fail("non-finite feature value");
      x.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!ds) ds.emplace(ontology, x.size());
    std::optional<LabelSet> clean;
    if (f.size() == 6) clean = parse_ids(f[5]);
    try {
      ds->add(f[0], f[1], *split, std::move(x), parse_ids(f[3]), std::move(clean));
    } catch (const DatasetError& e) {
      throw fail(e.what());
    }
  }
  if (!ds) throw DatasetError(source + ": no header and no records");
  return std::move(*ds);
}

}  // namespace lesanet
