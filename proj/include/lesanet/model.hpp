#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lesanet/ontology.hpp"

namespace lesanet {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelDims {
  std::size_t input = 0;      // D
  std::size_t hidden = 256;   // H
  std::size_t labels = 0;     // C
  std::size_t embedding = 256;  // E
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct ParamBlock {
  std::string_view name;
  std::span<double> values;
};
struct ConstParamBlock {
  std::string_view name;
  std::span<const double> values;
};

// Scorer weights. Rows index inputs, columns outputs, so a batch X (B x D)
// maps to relu(X w1 + b1). The propagation matrix w is applied per sample as
// refined = w * scores, i.e. refined rows = score rows * w^T.
struct ModelParams {
  Matrix w1;
  RowVector b1;
  Matrix ws;
  RowVector bs;
  Matrix w;
  Matrix we;
  RowVector be;

  // w = identity, biases zero, other weights small Gaussian (seeded).
  static ModelParams init(const ModelDims& dims, std::uint64_t seed);
  static ModelParams zeros_like(const ModelParams& p);

  ModelDims dims() const;
  std::size_t parameter_count() const;
  std::vector<ParamBlock> blocks();
  std::vector<ConstParamBlock> blocks() const;
};

using ParamGrads = ModelParams;

struct ForwardCache {
  Matrix input;
  Matrix hidden_pre;
  Matrix hidden;
  Matrix scores;          // s
  Matrix probs;           // sigmoid(s)
  Matrix refined;         // s~ = W s
  Matrix refined_probs;   // sigmoid(s~)
  Matrix embedding_raw;
  RowVector embedding_norm;  // per-sample norm of embedding_raw
  Matrix embedding;       // unit length rows
};

ForwardCache forward(const ModelParams& params, const Matrix& batch);

// Gradients of a scalar loss with respect to s, s~ and the unit embedding.
// An empty matrix means zero.
struct Upstream {
  Matrix d_scores;
  Matrix d_refined;
  Matrix d_embedding;
};

ParamGrads backward(const ModelParams& params, const ForwardCache& cache, const Upstream& up);

Matrix sigmoid(const Matrix& x);

struct Prediction {
  Matrix probs;                 // sigmoid(s~) or sigmoid(s)
  std::vector<LabelSet> decided;  // thresholded, then expanded
};

// Decides c when prob_c >= threshold_c, then adds ancestors.
Prediction predict(const ModelParams& params, const Matrix& features,
                   std::span<const double> thresholds, const LabelOntology& ontology,
                   bool use_refined = true);

std::vector<LabelSet> decide(const Matrix& probs, std::span<const double> thresholds,
                             const LabelOntology& ontology);

struct Checkpoint {
  ModelParams params;
  std::vector<LabelId> label_remap;  // model label -> source ontology id
  std::vector<double> thresholds;
  bool use_refined = true;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in, const std::string& source = "<input>");

}  // namespace lesanet
