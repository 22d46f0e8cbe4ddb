#include "lesanet/losses.hpp"

#include <algorithm>
#include <cmath>

namespace lesanet {

void LossConfig::validate() const {
  auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!(std::isfinite(beta_clamp) && beta_clamp > 0.0)) throw LossError("beta_clamp must be > 0");
  if (!(std::isfinite(gamma) && gamma > 0.0)) throw LossError("gamma must be > 0");
  if (!std::isfinite(theta)) throw LossError("theta must be finite");
  if (!finite_nonneg(mu)) throw LossError("mu must be >= 0");
  if (!finite_nonneg(lambda)) throw LossError("lambda must be >= 0");
  if (use_rhem && rhem_draws == 0) throw LossError("rhem_draws must be positive");
  if (use_triplet && (triplets == 0 || triplet_attempts == 0))
    throw LossError("triplets and triplet_attempts must be positive");
}

ClassWeights class_weights(std::span<const ClassCount> counts, double clamp) {
  ClassWeights w;
  w.positive.resize(counts.size());
  w.negative.resize(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    double p = static_cast<double>(counts[c].positives);
    double n = static_cast<double>(counts[c].negatives);
    if (p == 0.0 || n == 0.0) {
      w.positive[c] = w.negative[c] = 1.0;
      w.degenerate.push_back(static_cast<LabelId>(c));
      continue;
    }
    w.positive[c] = std::min(clamp, (p + n) / (2.0 * p));
    w.negative[c] = std::min(clamp, (p + n) / (2.0 * n));
  }
  return w;
}

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw LossError(std::string("shape mismatch: ") + what);
}

double clamp_prob(double p) { return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon); }

double cross_entropy(double p, double y) {
  return -(y * std::log(clamp_prob(p)) + (1.0 - y) * std::log(clamp_prob(1.0 - p)));
}

}  // namespace

LossGrad weighted_ce(const Matrix& probs, const Matrix& targets, const ClassWeights& weights) {
  check_same_shape(probs, targets, "weighted_ce probs/targets");
  const auto cols = static_cast<std::size_t>(probs.cols());
  if (weights.positive.size() != cols || weights.negative.size() != cols)
    throw LossError("class weight count does not match label count");
  LossGrad out;
  out.grad = Matrix::Zero(probs.rows(), probs.cols());
  if (probs.size() == 0) return out;
  const double scale = 1.0 / static_cast<double>(probs.size());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      double p = probs(i, c), y = targets(i, c);
      double bp = weights.positive[static_cast<std::size_t>(c)];
      double bn = weights.negative[static_cast<std::size_t>(c)];
      sum += bp * y * std::log(clamp_prob(p)) + bn * (1.0 - y) * std::log(clamp_prob(1.0 - p));
      out.grad(i, c) = -scale * (bp * y * (1.0 - p) - bn * (1.0 - y) * p);
    }
  }
  out.loss = -scale * sum;
  return out;
}

Matrix rhem_difficulty(const Matrix& probs, const Matrix& targets, double gamma) {
  check_same_shape(probs, targets, "rhem_difficulty");
  return (probs - targets).cwiseAbs().unaryExpr([gamma](double v) { return std::pow(v, gamma); });
}

RhemDraws rhem_sample(const Matrix& difficulty, const Matrix& mask, std::size_t draws, Rng& rng) {
  check_same_shape(difficulty, mask, "rhem_sample difficulty/mask");
  RhemDraws out;
  out.counts = Matrix::Zero(difficulty.rows(), difficulty.cols());
  Matrix weights = difficulty.cwiseProduct(mask);
  out.empty_mask = !(mask.array() != 0.0).any();
  // Row-major storage: flat index i*C + c.
  WeightedSampler sampler(std::span<const double>(weights.data(), static_cast<std::size_t>(weights.size())));
  if (sampler.empty()) return out;
  double* counts = out.counts.data();
  for (std::size_t k = 0; k < draws; ++k) counts[sampler(rng)] += 1.0;
  out.total = draws;
  return out;
}

LossGrad rhem_ce(const Matrix& probs, const Matrix& targets, const RhemDraws& draws) {
  check_same_shape(probs, targets, "rhem_ce probs/targets");
  check_same_shape(probs, draws.counts, "rhem_ce probs/counts");
  LossGrad out;
  out.grad = Matrix::Zero(probs.rows(), probs.cols());
  if (draws.total == 0) return out;
  const double scale = 1.0 / static_cast<double>(draws.total);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      double k = draws.counts(i, c);
      if (k == 0.0) continue;
      sum += k * cross_entropy(probs(i, c), targets(i, c));
      out.grad(i, c) = scale * k * (probs(i, c) - targets(i, c));
    }
  }
  out.loss = scale * sum;
  return out;
}

RhemResult rhem_loss(const Matrix& probs, const Matrix& targets, const Matrix& mask,
                     const LossConfig& cfg, Rng& rng) {
  RhemResult r;
  r.draws = rhem_sample(rhem_difficulty(probs, targets, cfg.gamma), mask, cfg.rhem_draws, rng);
  r.value = rhem_ce(probs, targets, r.draws);
  return r;
}

double similarity(const LabelSet& x, const LabelSet& y) {
  std::size_t uni = x.union_count(y);
  if (uni == 0) return 0.0;
  double inter = static_cast<double>(x.intersection_count(y));
  return inter * inter / static_cast<double>(uni);
}

TripletBatch sample_triplets(std::span<const LabelSet> labels, const LossConfig& cfg, Rng& rng) {
  const std::size_t n = labels.size();
  TripletBatch out;
  if (n < 3) return out;

  std::vector<std::size_t> anchors;
  for (std::size_t i = 0; i < n; ++i)
    if (!labels[i].empty()) anchors.push_back(i);
  if (anchors.empty()) return out;

  Matrix sim(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      sim(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          sim(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = similarity(labels[i], labels[j]);

  // Per anchor: members other than the anchor sorted by ascending similarity,
  // and the candidates for B.
  struct AnchorInfo {
    std::vector<std::size_t> by_sim;
    std::vector<double> sims;
    std::vector<std::size_t> similar;
  };
  std::vector<AnchorInfo> info(n);
  for (std::size_t a : anchors) {
    auto& ai = info[a];
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      ai.by_sim.push_back(j);
      if (sim(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j)) >= cfg.theta) ai.similar.push_back(j);
    }
    std::stable_sort(ai.by_sim.begin(), ai.by_sim.end(), [&](std::size_t p, std::size_t q) {
      return sim(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(p)) <
             sim(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(q));
    });
    for (std::size_t j : ai.by_sim) ai.sims.push_back(sim(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j)));
  }

  for (std::size_t t = 0; t < cfg.triplets; ++t) {
    for (std::size_t attempt = 0; attempt < cfg.triplet_attempts; ++attempt) {
      std::size_t a = anchors[uniform_index(rng, anchors.size())];
      const auto& ai = info[a];
      if (ai.similar.empty()) continue;
      std::size_t b = ai.similar[uniform_index(rng, ai.similar.size())];
      double s_ab = sim(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      auto n_dissimilar = static_cast<std::size_t>(
          std::lower_bound(ai.sims.begin(), ai.sims.end(), s_ab) - ai.sims.begin());
      if (n_dissimilar == 0) continue;
      std::size_t c = ai.by_sim[uniform_index(rng, n_dissimilar)];
      out.push_back({a, b, c, s_ab, sim(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c))});
      break;
    }
  }
  return out;
}

LossGrad triplet_loss(const Matrix& embeddings, const TripletBatch& triplets, double mu) {
  LossGrad out;
  out.grad = Matrix::Zero(embeddings.rows(), embeddings.cols());
  if (triplets.empty()) return out;
  const double scale = 1.0 / static_cast<double>(triplets.size());
  double sum = 0.0;
  for (const auto& t : triplets) {
    auto ea = embeddings.row(static_cast<Eigen::Index>(t.anchor));
    auto eb = embeddings.row(static_cast<Eigen::Index>(t.similar));
    auto ec = embeddings.row(static_cast<Eigen::Index>(t.dissimilar));
    RowVector ab = ea - eb, ac = ea - ec;
    double d_ab = ab.norm(), d_ac = ac.norm();
    double margin = d_ab - d_ac + mu;
    if (margin <= 0.0) continue;
    sum += margin;
    RowVector g_ab = d_ab > 0.0 ? RowVector(ab / d_ab) : RowVector::Zero(ab.size());
    RowVector g_ac = d_ac > 0.0 ? RowVector(ac / d_ac) : RowVector::Zero(ac.size());
    out.grad.row(static_cast<Eigen::Index>(t.anchor)) += scale * (g_ab - g_ac);
    out.grad.row(static_cast<Eigen::Index>(t.similar)) -= scale * g_ab;
    out.grad.row(static_cast<Eigen::Index>(t.dissimilar)) += scale * g_ac;
  }
  out.loss = scale * sum;
  return out;
}

Matrix rhem_mask(const LabelOntology& ontology, std::span<const LabelSet> positives,
                 bool reliable_only) {
  const auto n_labels = static_cast<Eigen::Index>(ontology.size());
  Matrix mask = Matrix::Zero(static_cast<Eigen::Index>(positives.size()), n_labels);
  for (std::size_t i = 0; i < positives.size(); ++i) {
    if (!reliable_only) {
      mask.row(static_cast<Eigen::Index>(i)).setOnes();
      continue;
    }
    LabelSet reliable = positives[i] | ontology.reliable_negatives(positives[i]);
    for (LabelId c : reliable.ids()) mask(static_cast<Eigen::Index>(i), c) = 1.0;
  }
  return mask;
}

Matrix to_matrix(std::span<const LabelSet> labels) {
  const Eigen::Index cols = labels.empty() ? 0 : static_cast<Eigen::Index>(labels[0].width());
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), cols);
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (LabelId c : labels[i].ids()) m(static_cast<Eigen::Index>(i), c) = 1.0;
  return m;
}

Draws sample_draws(const ForwardCache& cache, const Matrix& targets, const Matrix& mask,
                   std::span<const LabelSet> labels, const LossConfig& cfg, Rng& rng) {
  Draws d;
  if (cfg.use_rhem) {
    const Matrix& probs = cfg.rhem_on_refined ? cache.refined_probs : cache.probs;
    d.rhem = rhem_sample(rhem_difficulty(probs, targets, cfg.gamma), mask, cfg.rhem_draws, rng);
  } else {
    d.rhem.counts = Matrix::Zero(targets.rows(), targets.cols());
  }
  if (cfg.use_triplet && cfg.lambda > 0.0) d.triplets = sample_triplets(labels, cfg, rng);
  return d;
}

CombinedResult combined_loss(const ForwardCache& cache, const Matrix& targets,
                             const ClassWeights& weights, const Draws& draws,
                             const LossConfig& cfg) {
  CombinedResult r;
  const Eigen::Index rows = cache.scores.rows(), cols = cache.scores.cols();
  check_same_shape(cache.scores, targets, "combined_loss scores/targets");
  r.upstream.d_scores = Matrix::Zero(rows, cols);
  r.upstream.d_refined = Matrix::Zero(rows, cols);
  r.upstream.d_embedding = Matrix::Zero(rows, cache.embedding.cols());

  if (cfg.use_wce) {
    auto v = weighted_ce(cache.probs, targets, weights);
    r.terms.wce = v.loss;
    r.upstream.d_scores += v.grad;
  }
  if (cfg.use_rhem) {
    const Matrix& probs = cfg.rhem_on_refined ? cache.refined_probs : cache.probs;
    auto v = rhem_ce(probs, targets, draws.rhem);
    r.terms.rhem = v.loss;
    (cfg.rhem_on_refined ? r.upstream.d_refined : r.upstream.d_scores) += v.grad;
  }
  if (cfg.use_spl) {
    auto v = spl_loss(cache.refined_probs, targets, weights);
    r.terms.spl = v.loss;
    r.upstream.d_refined += v.grad;
  }
  if (cfg.use_triplet && cfg.lambda > 0.0) {
    auto v = triplet_loss(cache.embedding, draws.triplets, cfg.mu);
    r.terms.triplet = v.loss;
    r.upstream.d_embedding += cfg.lambda * v.grad;
  }
  r.terms.total = r.terms.wce + r.terms.rhem + r.terms.spl + cfg.lambda * r.terms.triplet;
  return r;
}

}  // namespace lesanet
