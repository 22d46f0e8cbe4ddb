#include "lesanet/trainer.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

namespace lesanet {

std::size_t TrainConfig::total_epochs() const {
  std::size_t n = 0;
  for (const auto& s : schedule) n += s.epochs;
  return n;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (schedule.empty()) throw std::invalid_argument("learning-rate schedule is empty");
  for (const auto& s : schedule) {
    if (s.epochs < 1) throw std::invalid_argument("schedule stages need at least one epoch");
    if (!(std::isfinite(s.rate) && s.rate >= 0.0))
      throw std::invalid_argument("learning rates must be finite and non-negative");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0,1)");
  loss.validate();
}

TrainingError::TrainingError(std::size_t epoch, std::size_t batch, const std::string& what)
    : std::runtime_error("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ": " + what),
      epoch_(epoch),
      batch_(batch) {}

const LabelSet& training_targets(const Sample& s, const TrainConfig& cfg) {
  return cfg.expand_labels ? s.expanded_labels : s.mined_labels;
}

std::vector<std::size_t> training_indices(const Dataset& ds, const TrainConfig& cfg) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& s = ds[i];
    if (s.split == Split::kTrain && !training_targets(s, cfg).empty()) out.push_back(i);
  }
  return out;
}

Matrix feature_matrix(const Dataset& ds, std::span<const std::size_t> indices) {
  Matrix x(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(ds.dim()));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& f = ds[indices[r]].features;
    for (std::size_t d = 0; d < f.size(); ++d) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d)) = f[d];
  }
  return x;
}

TrainResult train(const Dataset& ds, ModelParams params, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  const auto dims = params.dims();
  if (dims.input != ds.dim() || dims.labels != ds.ontology().size())
    throw ModelError("model dimensions do not match the dataset");

  auto pool = training_indices(ds, cfg);
  if (pool.empty()) throw std::invalid_argument("no training samples with positive labels");

  // Class weights from the training targets of the samples that enter training.
  std::vector<ClassCount> counts(dims.labels);
  for (std::size_t i : pool)
    for (LabelId c : training_targets(ds[i], cfg).ids()) ++counts[c].positives;
  for (auto& c : counts) c.negatives = pool.size() - c.positives;
  const ClassWeights weights = class_weights(counts, cfg.loss.beta_clamp);

  Rng rng(cfg.seed);
  ModelParams velocity = ModelParams::zeros_like(params);
  TrainResult result;
  std::size_t epoch = 0;

  for (const auto& stage : cfg.schedule) {
    for (std::size_t e = 0; e < stage.epochs; ++e, ++epoch) {
      auto t0 = std::chrono::steady_clock::now();
      std::shuffle(pool.begin(), pool.end(), rng);
      EpochLog log;
      log.epoch = epoch;
      log.rate = stage.rate;

      for (std::size_t start = 0; start < pool.size(); start += cfg.batch_size) {
        const std::size_t batch_id = log.batches;
        std::span<const std::size_t> idx(pool.data() + start, std::min(cfg.batch_size, pool.size() - start));
        std::vector<LabelSet> targets;
        targets.reserve(idx.size());
        for (std::size_t i : idx) targets.push_back(training_targets(ds[i], cfg));

        Matrix x = feature_matrix(ds, idx);
        Matrix y = to_matrix(targets);
        Matrix mask = rhem_mask(ds.ontology(), targets, cfg.rhem_reliable_only);

        auto cache = forward(params, x);
        auto draws = sample_draws(cache, y, mask, targets, cfg.loss, rng);
        auto loss = combined_loss(cache, y, weights, draws, cfg.loss);
        if (!std::isfinite(loss.terms.total)) throw TrainingError(epoch, batch_id, "non-finite loss");
        auto grads = backward(params, cache, loss.upstream);

        auto pb = params.blocks();
        auto gb = std::as_const(grads).blocks();
        auto vb = velocity.blocks();
        for (std::size_t b = 0; b < pb.size(); ++b) {
          for (std::size_t k = 0; k < pb[b].values.size(); ++k) {
            double g = gb[b].values[k];
            if (!std::isfinite(g)) throw TrainingError(epoch, batch_id, "non-finite gradient");
            double v = cfg.momentum * vb[b].values[k] + g;
            vb[b].values[k] = v;
            pb[b].values[k] -= stage.rate * v;
          }
        }

        log.mean.wce += loss.terms.wce;
        log.mean.rhem += loss.terms.rhem;
        log.mean.spl += loss.terms.spl;
        log.mean.triplet += loss.terms.triplet;
        log.mean.total += loss.terms.total;
        ++log.batches;
      }
      const double inv = 1.0 / static_cast<double>(log.batches);
      log.mean.wce *= inv;
      log.mean.rhem *= inv;
      log.mean.spl *= inv;
      log.mean.triplet *= inv;
      log.mean.total *= inv;
      log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (on_epoch) on_epoch(log);
      result.log.push_back(log);
    }
  }
  result.params = std::move(params);
  return result;
}

void write_train_log_header(std::ostream& out) {
  out << "epoch\trate\tbatches\twce\trhem\tspl\ttriplet\ttotal\tseconds\n";
}

void write_train_log_row(std::ostream& out, const EpochLog& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu\t%g\t%zu\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.3f\n", r.epoch, r.rate,
                r.batches, r.mean.wce, r.mean.rhem, r.mean.spl, r.mean.triplet, r.mean.total, r.seconds);
  out << buf;
}

}  // namespace lesanet
