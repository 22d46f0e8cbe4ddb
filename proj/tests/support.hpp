#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lesanet/losses.hpp"
#include "lesanet/model.hpp"
#include "lesanet/ontology.hpp"
#include "lesanet/random.hpp"

namespace lesanet::testing {

inline std::string data_path(const std::string& name) { return std::string(LESANET_DATA_DIR) + "/" + name; }

// Random valid ontology. Edges always point from a higher id to a lower one,
// so the graph is acyclic; exclusive pairs are kept only while the definition
// still validates.
inline OntologyDefinition random_definition(Rng& rng, std::size_t n, double edge_prob,
                                            std::size_t exclusive_attempts) {
  OntologyDefinition def;
  for (std::size_t i = 0; i < n; ++i)
    def.labels.push_back({"l" + std::to_string(i), static_cast<Category>(i % 3), {}});
  std::bernoulli_distribution edge(edge_prob);
  for (LabelId child = 1; child < n; ++child)
    for (LabelId parent = 0; parent < child; ++parent)
      if (edge(rng)) def.parent_edges.push_back({child, parent});
  for (std::size_t k = 0; k < exclusive_attempts && n > 1; ++k) {
    LabelId a = static_cast<LabelId>(uniform_index(rng, n));
    LabelId b = static_cast<LabelId>(uniform_index(rng, n));
    if (a == b) continue;
    def.exclusive_pairs.push_back({a, b});
    if (!validate(def).ok()) def.exclusive_pairs.pop_back();
  }
  return def;
}

// Plain depth-first reachability over the raw edge list.
inline std::set<LabelId> reach(const OntologyDefinition& def, LabelId start, bool upward) {
  std::set<LabelId> seen;
  std::vector<LabelId> stack{start};
  while (!stack.empty()) {
    LabelId v = stack.back();
    stack.pop_back();
    for (const auto& [child, parent] : def.parent_edges) {
      LabelId from = upward ? child : parent;
      LabelId to = upward ? parent : child;
      if (from == v && seen.insert(to).second) stack.push_back(to);
    }
  }
  return seen;
}

inline std::set<LabelId> expand_oracle(const OntologyDefinition& def, const std::vector<LabelId>& labels) {
  std::set<LabelId> out(labels.begin(), labels.end());
  for (LabelId l : labels) {
    auto up = reach(def, l, true);
    out.insert(up.begin(), up.end());
  }
  return out;
}

// Double loop over the descendant sets (each including the label itself) of
// every authored exclusive pair.
inline std::set<std::pair<LabelId, LabelId>> closure_oracle(const OntologyDefinition& def) {
  std::set<std::pair<LabelId, LabelId>> out;
  for (const auto& [a, b] : def.exclusive_pairs) {
    auto da = reach(def, a, false);
    auto db = reach(def, b, false);
    da.insert(a);
    db.insert(b);
    for (LabelId x : da)
      for (LabelId y : db)
        if (x != y) out.insert({std::min(x, y), std::max(x, y)});
  }
  return out;
}

inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Worst relative error over every parameter between the analytic gradient
// and central differences of `loss`.
struct FdSummary {
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;
};

inline FdSummary check_all_parameters(ModelParams params, const ParamGrads& analytic,
                                      const std::function<double(const ModelParams&)>& loss, double step) {
  FdSummary s;
  auto pb = params.blocks();
  auto gb = analytic.blocks();
  for (std::size_t b = 0; b < pb.size(); ++b) {
    for (std::size_t k = 0; k < pb[b].values.size(); ++k) {
      double keep = pb[b].values[k];
      pb[b].values[k] = keep + step;
      double up = loss(params);
      pb[b].values[k] = keep - step;
      double down = loss(params);
      pb[b].values[k] = keep;
      double err = relative_error(gb[b].values[k], (up - down) / (2.0 * step));
      ++s.checked;
      if (err > s.worst) {
        s.worst = err;
        s.where = std::string(pb[b].name) + "[" + std::to_string(k) + "]";
      }
    }
  }
  return s;
}

// A 16-sample combined-loss instance with fixed draws, away from the ReLU and
// hinge kinks so that central differences are meaningful.
struct GradInstance {
  ModelParams params;
  Matrix x;
  Matrix targets;
  ClassWeights weights;
  Draws draws;
  LossConfig cfg;
};

inline double instance_loss(const GradInstance& g, const ModelParams& p) {
  return combined_loss(forward(p, g.x), g.targets, g.weights, g.draws, g.cfg).terms.total;
}

inline bool near_kink(const GradInstance& g, double margin) {
  auto cache = forward(g.params, g.x);
  if ((cache.hidden_pre.array().abs() < margin).any()) return true;
  for (const auto& t : g.draws.triplets) {
    double dab = (cache.embedding.row(static_cast<Eigen::Index>(t.anchor)) -
                  cache.embedding.row(static_cast<Eigen::Index>(t.similar)))
                     .norm();
    double dac = (cache.embedding.row(static_cast<Eigen::Index>(t.anchor)) -
                  cache.embedding.row(static_cast<Eigen::Index>(t.dissimilar)))
                     .norm();
    if (std::abs(dab - dac + g.cfg.mu) < margin) return true;
  }
  return false;
}

// Labels are random subsets with a non-empty positive set per sample; W is
// perturbed away from the identity so its gradient is exercised generally.
inline GradInstance make_grad_instance(std::uint64_t seed, std::size_t n = 16, std::size_t c = 12,
                                       std::size_t d = 8, std::size_t h = 32, std::size_t e = 16) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(seed * 1000003 + attempt);
    std::normal_distribution<double> normal(0.0, 1.0);
    GradInstance g;
    g.params = ModelParams::init({d, h, c, e}, seed + attempt);
    for (Eigen::Index i = 0; i < g.params.w.size(); ++i) g.params.w.data()[i] += 0.05 * normal(rng);
    g.params.b1.setConstant(0.05);
    g.x = Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < g.x.size(); ++i) g.x.data()[i] = normal(rng);

    std::vector<LabelSet> labels;
    std::bernoulli_distribution on(0.3);
    for (std::size_t i = 0; i < n; ++i) {
      LabelSet s(c);
      for (LabelId k = 0; k < c; ++k)
        if (on(rng)) s.set(k);
      if (s.empty()) s.set(static_cast<LabelId>(uniform_index(rng, c)));
      labels.push_back(s);
    }
    g.targets = to_matrix(labels);
    std::vector<ClassCount> counts(c);
    for (const auto& s : labels)
      for (LabelId k : s.ids()) ++counts[k].positives;
    for (auto& cc : counts) cc.negatives = n - cc.positives;
    g.weights = class_weights(counts, g.cfg.beta_clamp);

    Matrix mask = Matrix::Ones(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c));
    g.draws = sample_draws(forward(g.params, g.x), g.targets, mask, labels, g.cfg, rng);
    if (!near_kink(g, 1e-4)) return g;
  }
}

}  // namespace lesanet::testing
