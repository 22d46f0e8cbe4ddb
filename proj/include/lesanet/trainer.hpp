#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "lesanet/dataset.hpp"
#include "lesanet/losses.hpp"
#include "lesanet/model.hpp"

namespace lesanet {

struct LrStage {
  std::size_t epochs;
  double rate;
};

struct TrainConfig {
  std::size_t batch_size = 128;
  std::vector<LrStage> schedule{{10, 0.01}, {5, 0.001}};
  double momentum = 0.0;
  std::uint64_t seed = 0;
  LossConfig loss;
  // Train on expanded labels; off trains on mined labels as-is.
  bool expand_labels = true;
  // RHEM mask: positives plus reliable negatives, or every label.
  bool rhem_reliable_only = true;

  std::size_t total_epochs() const;
  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double rate = 0.0;
  std::size_t batches = 0;
  LossTerms mean;  // per-batch mean of each component
  double seconds = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> log;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::size_t epoch, std::size_t batch, const std::string& what);
  std::size_t epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

// Training targets for a sample under the config: expanded or mined labels.
const LabelSet& training_targets(const Sample& s, const TrainConfig& cfg);

// Train-split samples with at least one positive target, in dataset order.
std::vector<std::size_t> training_indices(const Dataset& ds, const TrainConfig& cfg);

// Minibatch SGD over the train split. Deterministic for a given seed.
// `on_epoch`, when set, is called after each epoch.
TrainResult train(const Dataset& ds, ModelParams params, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

Matrix feature_matrix(const Dataset& ds, std::span<const std::size_t> indices);

void write_train_log_header(std::ostream& out);
void write_train_log_row(std::ostream& out, const EpochLog& row);

}  // namespace lesanet
