#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mtseq/checkpoint.hpp"
#include "mtseq/models.hpp"

namespace mtseq::training {

struct TrainConfig {
  double learning_rate = 0.0002;
  double dropout = 0.2;
  std::size_t max_epochs = 500;
  std::uint64_t seed = 1;
  double clip_threshold = 5.0;
  // Worker threads for dev evaluation; results are reduced in utterance order.
  std::size_t threads = 1;
  // When set, epoch<k>.ckpt, best.ckpt and train.log are written here.
  std::string outdir;
  bool keep_epoch_checkpoints = true;
};

void validate(const TrainConfig& cfg);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

// Global L2 norm of all parameter gradients.
double gradient_norm(const nn::ParameterStore& params);

// Rescales every gradient so the global norm is at most `threshold`
// (threshold <= 0 disables clipping). Returns the norm before clipping.
double clip_gradients(nn::ParameterStore& params, double threshold);

// One bias-corrected Adam step from the gradients stored on the parameters,
// after clipping. Gradients are zeroed afterwards. Throws NumericError on a
// non-finite gradient without touching any parameter.
void adam_update(nn::ParameterStore& params, AdamState& state, double lr, double clip_threshold);

struct EpochLog {
  std::size_t epoch = 0;
  double train_objective = 0.0;  // mean per-utterance loss (negated objective)
  double dev_objective = 0.0;    // selection metric, lower is better
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_dev = 0.0;
  std::size_t updates = 0;
};

// Returns a dev metric where lower is better. Defaults to the dev loss.
using DevMetric = std::function<double(const models::Model&)>;
// Called after every epoch; returning false stops training early.
using EpochHook = std::function<bool(const EpochLog&, const models::Model&)>;

class Trainer {
 public:
  Trainer(models::Model& model, models::ScoreConfig score, TrainConfig cfg);

  // Forward + backward + Adam step on one triple; returns its loss.
  double train_step(const models::SentenceTriple& t, std::size_t index = 0);
  // Mean dropout-free loss.
  double evaluate(const std::vector<models::SentenceTriple>& data) const;
  double loss(const models::SentenceTriple& t) const;

  // Runs up to max_epochs, keeps the best-dev parameters, and restores them
  // into the model before returning.
  TrainResult train(const std::vector<models::SentenceTriple>& train,
                    const std::vector<models::SentenceTriple>& dev, const VocabSet* vocab = nullptr,
                    DevMetric metric = {}, EpochHook hook = {});

  const AdamState& adam() const { return adam_; }
  // Seeded utterance order for the given epoch (1-based).
  std::vector<std::size_t> epoch_order(std::size_t n, std::size_t epoch) const;

 private:
  models::Model& model_;
  models::ScoreConfig score_;
  TrainConfig cfg_;
  AdamState adam_;
  std::mt19937_64 dropout_rng_;
};

}  // namespace mtseq::training
