#pragma once

#include <span>
#include <vector>

#include "lesanet/dataset.hpp"
#include "lesanet/model.hpp"
#include "lesanet/random.hpp"

namespace lesanet {

class LossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LossConfig {
  double beta_clamp = 300.0;
  double gamma = 2.0;             // RHEM focusing exponent
  std::size_t rhem_draws = 10000; // S
  double theta = 1.0;             // triplet similarity threshold
  double mu = 0.1;                // triplet margin
  std::size_t triplets = 5000;    // T
  double lambda = 5.0;            // triplet loss weight
  std::size_t triplet_attempts = 10;

  bool use_wce = true;
  bool use_rhem = true;
  bool use_spl = true;
  bool use_triplet = true;
  // Draw RHEM pairs on sigmoid(s~) instead of sigmoid(s).
  bool rhem_on_refined = false;

  // Throws LossError on out-of-domain values.
  void validate() const;
};

inline constexpr double kProbEpsilon = 1e-12;

struct ClassWeights {
  std::vector<double> positive;
  std::vector<double> negative;
  // Labels with no positives or no negatives; both weights fall back to 1.
  std::vector<LabelId> degenerate;
};

// beta_p = (P+N)/(2P), beta_n = (P+N)/(2N), each clamped to at most `clamp`.
ClassWeights class_weights(std::span<const ClassCount> counts, double clamp);

// A loss value with its gradient. For the cross-entropy losses the gradient
// is taken with respect to the pre-sigmoid scores.
struct LossGrad {
  double loss = 0.0;
  Matrix grad;
};

// -(1/(B*C)) sum_ic [bp_c y log p + bn_c (1-y) log(1-p)], p clamped to
// [eps, 1-eps] inside the logs.
LossGrad weighted_ce(const Matrix& probs, const Matrix& targets, const ClassWeights& weights);

// |p - y|^gamma elementwise.
Matrix rhem_difficulty(const Matrix& probs, const Matrix& targets, double gamma);

struct RhemDraws {
  Matrix counts;          // draws per (sample, label)
  std::size_t total = 0;  // number of draws taken
  bool empty_mask = false;
};

// Draws `draws` pairs with replacement, proportional to difficulty on the
// mask. No draws are taken when every masked difficulty is zero.
RhemDraws rhem_sample(const Matrix& difficulty, const Matrix& mask, std::size_t draws, Rng& rng);

// Mean unweighted CE over the drawn pairs, a pair drawn k times counting k
// times.
LossGrad rhem_ce(const Matrix& probs, const Matrix& targets, const RhemDraws& draws);

struct RhemResult {
  LossGrad value;
  RhemDraws draws;
};
RhemResult rhem_loss(const Matrix& probs, const Matrix& targets, const Matrix& mask,
                     const LossConfig& cfg, Rng& rng);

// Weighted CE on the refined confidences; same contract as weighted_ce.
inline LossGrad spl_loss(const Matrix& refined_probs, const Matrix& targets,
                         const ClassWeights& weights) {
  return weighted_ce(refined_probs, targets, weights);
}

// |X & Y|^2 / |X | Y|, zero when both are empty.
double similarity(const LabelSet& x, const LabelSet& y);

struct Triplet {
  std::size_t anchor;
  std::size_t similar;
  std::size_t dissimilar;
  double sim_similar;
  double sim_dissimilar;
  friend bool operator==(const Triplet&, const Triplet&) = default;
};
using TripletBatch = std::vector<Triplet>;

// Up to cfg.triplets draws: a uniform anchor with a non-empty label set, a
// uniform B != A with sim(A,B) >= theta, a uniform C with sim(A,C) < sim(A,B).
// A draw that fails cfg.triplet_attempts times is skipped.
TripletBatch sample_triplets(std::span<const LabelSet> labels, const LossConfig& cfg, Rng& rng);

// (1/T) sum max(0, d(A,B) - d(A,C) + mu) with Euclidean d; gradient with
// respect to the embedding rows.
LossGrad triplet_loss(const Matrix& embeddings, const TripletBatch& triplets, double mu);

// Positives plus their reliable negatives, or every label when
// reliable_only is false. One row per sample, 0/1 entries.
Matrix rhem_mask(const LabelOntology& ontology, std::span<const LabelSet> positives,
                 bool reliable_only);

Matrix to_matrix(std::span<const LabelSet> labels);

struct LossTerms {
  double wce = 0.0;
  double rhem = 0.0;
  double spl = 0.0;
  double triplet = 0.0;  // unweighted; total carries lambda
  double total = 0.0;
};

struct Draws {
  RhemDraws rhem;
  TripletBatch triplets;
};

struct CombinedResult {
  LossTerms terms;
  Upstream upstream;
};

// Samples RHEM pairs and triplets for one minibatch.
Draws sample_draws(const ForwardCache& cache, const Matrix& targets, const Matrix& mask,
                   std::span<const LabelSet> labels, const LossConfig& cfg, Rng& rng);

// L = L_wce + L_rhem + L_spl + lambda L_triplet for fixed draws. Disabled
// terms contribute zero loss and zero gradient.
CombinedResult combined_loss(const ForwardCache& cache, const Matrix& targets,
                             const ClassWeights& weights, const Draws& draws,
                             const LossConfig& cfg);

}  // namespace lesanet
