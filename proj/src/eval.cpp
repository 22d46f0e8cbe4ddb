#include "lesanet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace lesanet {

std::optional<double> auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: size mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of midranks of the positives.
  double rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]]) {
        rank_sum += midrank;
        ++positives;
      }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;
  double p = static_cast<double>(positives);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

double f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

double calibrate_threshold(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("calibrate: size mismatch");
  if (scores.empty()) throw std::invalid_argument("calibrate: empty validation set");
  const std::size_t total_pos =
      static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](auto v) { return v != 0; }));
  if (total_pos == 0) return kNeverFires;

  // Unique scores ascending with the positives/negatives at each value.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> values;
  std::vector<std::size_t> pos, neg;
  for (std::size_t i : order) {
    if (values.empty() || scores[i] != values.back()) {
      values.push_back(scores[i]);
      pos.push_back(0);
      neg.push_back(0);
    }
    (labels[i] ? pos.back() : neg.back())++;
  }

  // Candidate k predicts positive exactly for values[k..]. k == m predicts
  // nothing.
  const std::size_t m = values.size();
  std::size_t tp = total_pos, fp = scores.size() - total_pos;
  double best_f1 = -1.0, best_t = values[0];
  for (std::size_t k = 0; k <= m; ++k) {
    double t;
    if (k == 0) {
      t = values[0];
    } else if (k == m) {
      t = std::max(1.0, std::nextafter(values[m - 1], std::numeric_limits<double>::infinity()));
      if (!(t > values[m - 1])) t = std::nextafter(values[m - 1], std::numeric_limits<double>::infinity());
    } else {
      t = values[k - 1] + 0.5 * (values[k] - values[k - 1]);
      if (!(t > values[k - 1])) t = values[k];
    }
    double f1 = f1_from_counts(tp, fp, total_pos - tp);
    if (f1 > best_f1) {
      best_f1 = f1;
      best_t = t;
    }
    if (k < m) {
      tp -= pos[k];
      fp -= neg[k];
    }
  }
  return best_t;
}

CalibratedThresholds calibrate_thresholds(const Matrix& scores, std::span<const LabelSet> truth) {
  if (static_cast<std::size_t>(scores.rows()) != truth.size())
    throw std::invalid_argument("calibrate_thresholds: row count mismatch");
  if (truth.empty()) throw std::invalid_argument("calibrate_thresholds: empty validation set");
  CalibratedThresholds out;
  const auto n = static_cast<std::size_t>(scores.rows());
  std::vector<double> col(n);
  std::vector<std::uint8_t> lab(n);
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n; ++i) {
      col[i] = scores(static_cast<Eigen::Index>(i), c);
      lab[i] = truth[i].test(static_cast<LabelId>(c)) ? 1 : 0;
      positives += lab[i];
    }
    if (positives == 0) out.no_positives.push_back(static_cast<LabelId>(c));
    out.values.push_back(calibrate_threshold(col, lab));
  }
  return out;
}

std::vector<Prf> prf1(std::span<const LabelSet> decided, std::span<const LabelSet> truth) {
  if (decided.size() != truth.size()) throw std::invalid_argument("prf1: size mismatch");
  const std::size_t n_labels = truth.empty() ? 0 : truth[0].width();
  std::vector<Prf> out(n_labels);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (LabelId c : (decided[i] & truth[i]).ids()) ++out[c].tp;
    for (LabelId c : (decided[i] - truth[i]).ids()) ++out[c].fp;
    for (LabelId c : (truth[i] - decided[i]).ids()) ++out[c].fn;
  }
  for (auto& p : out) {
    p.precision = p.tp + p.fp ? static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fp) : 0.0;
    p.recall = p.tp + p.fn ? static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fn) : 0.0;
    p.f1 = f1_from_counts(p.tp, p.fp, p.fn);
  }
  return out;
}

EvalReport evaluate(const Matrix& probs, std::span<const LabelSet> decided,
                    std::span<const LabelSet> truth, std::span<const double> thresholds,
                    const LabelOntology& ontology, std::string truth_name) {
  const std::size_t n = truth.size();
  const std::size_t n_labels = ontology.size();
  if (static_cast<std::size_t>(probs.rows()) != n || static_cast<std::size_t>(probs.cols()) != n_labels ||
      decided.size() != n || thresholds.size() != n_labels)
    throw std::invalid_argument("evaluate: inconsistent sizes");

  EvalReport r;
  r.truth_name = std::move(truth_name);
  r.samples = n;
  auto prf = prf1(decided, truth);
  std::vector<double> col(n);
  std::vector<std::uint8_t> lab(n);
  std::map<Category, std::pair<double, std::size_t>> by_category;
  double auc_sum = 0.0;
  std::size_t auc_count = 0;

  for (LabelId c = 0; c < n_labels; ++c) {
    LabelMetrics m;
    m.id = c;
    m.name = ontology.name(c);
    m.category = ontology.category(c);
    m.threshold = thresholds[c];
    m.prf = prf[c];
    for (std::size_t i = 0; i < n; ++i) {
      col[i] = probs(static_cast<Eigen::Index>(i), c);
      lab[i] = truth[i].test(c) ? 1 : 0;
      m.positives += lab[i];
    }
    m.auc = auc(col, lab);
    if (m.positives == 0) {
      r.excluded.push_back(c);
    } else {
      r.macro_precision += m.prf.precision;
      r.macro_recall += m.prf.recall;
      r.macro_f1 += m.prf.f1;
      ++r.evaluated;
    }
    if (m.auc) {
      auc_sum += *m.auc;
      ++auc_count;
      auto& cat = by_category[m.category];
      cat.first += *m.auc;
      ++cat.second;
    } else {
      r.auc_undefined.push_back(c);
    }
    r.labels.push_back(std::move(m));
  }
  if (r.evaluated) {
    double inv = 1.0 / static_cast<double>(r.evaluated);
    r.macro_precision *= inv;
    r.macro_recall *= inv;
    r.macro_f1 *= inv;
  }
  if (auc_count) r.macro_auc = auc_sum / static_cast<double>(auc_count);
  for (const auto& [cat, acc] : by_category)
    r.category_auc.emplace_back(cat, acc.first / static_cast<double>(acc.second));
  return r;
}

namespace {

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string name_list(const EvalReport& r, const std::vector<LabelId>& ids) {
  std::string out;
  for (LabelId id : ids) {
    if (!out.empty()) out += ", ";
    out += r.labels[id].name;
  }
  return out.empty() ? "-" : out;
}

}  // namespace

void write_report_text(std::ostream& out, const EvalReport& r) {
  out << "# evaluation against " << r.truth_name << " labels, " << r.samples << " samples\n";
  out << "label\tcategory\tpositives\tauc\tthreshold\tprecision\trecall\tf1\n";
  for (const auto& m : r.labels) {
    out << m.name << '\t' << to_string(m.category) << '\t' << m.positives << '\t'
        << (m.auc ? fixed(*m.auc) : "n/a") << '\t' << fixed(m.threshold) << '\t' << fixed(m.prf.precision)
        << '\t' << fixed(m.prf.recall) << '\t' << fixed(m.prf.f1) << '\n';
  }
  out << "\n[summary]\n";
  out << "macro_auc = " << fixed(r.macro_auc) << '\n';
  out << "macro_precision = " << fixed(r.macro_precision) << '\n';
  out << "macro_recall = " << fixed(r.macro_recall) << '\n';
  out << "macro_f1 = " << fixed(r.macro_f1) << '\n';
  out << "labels_evaluated = " << r.evaluated << '\n';
  for (const auto& [cat, v] : r.category_auc) out << "auc[" << to_string(cat) << "] = " << fixed(v) << '\n';
  if (r.acg) out << "acg@" << r.acg_k << " = " << fixed(*r.acg) << '\n';
  out << "excluded (no positives) = " << name_list(r, r.excluded) << '\n';
  out << "auc undefined = " << name_list(r, r.auc_undefined) << '\n';
}

void write_report_kv(std::ostream& out, const EvalReport& r) {
  const std::string p = r.truth_name + ".";
  out << p << "samples=" << r.samples << '\n';
  out << p << "macro_auc=" << fixed(r.macro_auc) << '\n';
  out << p << "macro_precision=" << fixed(r.macro_precision) << '\n';
  out << p << "macro_recall=" << fixed(r.macro_recall) << '\n';
  out << p << "macro_f1=" << fixed(r.macro_f1) << '\n';
  out << p << "labels_evaluated=" << r.evaluated << '\n';
  for (const auto& [cat, v] : r.category_auc) out << p << "auc." << to_string(cat) << '=' << fixed(v) << '\n';
  if (r.acg) out << p << "acg@" << r.acg_k << '=' << fixed(*r.acg) << '\n';
  for (const auto& m : r.labels) {
    std::string k = p + "label." + std::to_string(m.id) + ".";
    out << k << "positives=" << m.positives << '\n';
    out << k << "auc=" << (m.auc ? fixed(*m.auc) : "nan") << '\n';
    out << k << "threshold=" << fixed(m.threshold) << '\n';
    out << k << "precision=" << fixed(m.prf.precision) << '\n';
    out << k << "recall=" << fixed(m.prf.recall) << '\n';
    out << k << "f1=" << fixed(m.prf.f1) << '\n';
  }
}

Retrieval retrieve(const RowVector& query, const std::string& query_patient, const Matrix& gallery,
                   std::span<const std::string> gallery_patients, std::size_t k) {
  if (static_cast<std::size_t>(gallery.rows()) != gallery_patients.size())
    throw std::invalid_argument("retrieve: gallery/patient count mismatch");
  if (gallery.rows() > 0 && gallery.cols() != query.size())
    throw std::invalid_argument("retrieve: embedding width mismatch");
  std::vector<std::pair<double, std::size_t>> cand;
  for (Eigen::Index i = 0; i < gallery.rows(); ++i) {
    if (gallery_patients[static_cast<std::size_t>(i)] == query_patient) continue;
    cand.emplace_back((gallery.row(i) - query).squaredNorm(), static_cast<std::size_t>(i));
  }
  Retrieval r;
  std::size_t take = std::min(k, cand.size());
  r.short_gallery = take < k;
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());
  for (std::size_t i = 0; i < take; ++i) r.indices.push_back(cand[i].second);
  return r;
}

double acg(const LabelSet& query, std::span<const LabelSet> retrieved, std::size_t k) {
  std::size_t take = std::min(k, retrieved.size());
  if (take == 0) return 0.0;
  std::size_t sum = 0;
  for (std::size_t i = 0; i < take; ++i) sum += query.intersection_count(retrieved[i]);
  return static_cast<double>(sum) / static_cast<double>(take);
}

}  // namespace lesanet
