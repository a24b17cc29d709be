#include "mtseq/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <numeric>

#include "mtseq/errors.hpp"

namespace mtseq::training {

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (cfg.max_epochs == 0) throw ConfigError("max epochs must be >= 1");
  if (cfg.threads == 0) throw ConfigError("threads must be >= 1");
}

double gradient_norm(const nn::ParameterStore& params) {
  double sq = 0.0;
  for (const auto& e : params.entries())
    for (double g : e.tensor.grad()) sq += g * g;
  return std::sqrt(sq);
}

double clip_gradients(nn::ParameterStore& params, double threshold) {
  const double norm = gradient_norm(params);
  if (threshold > 0.0 && norm > threshold) {
    const double k = threshold / norm;
    for (auto& e : params.entries())
      if (e.tensor.has_grad())
        for (auto& g : e.tensor.grad()) g *= k;
  }
  return norm;
}

void adam_update(nn::ParameterStore& params, AdamState& st, double lr, double clip_threshold) {
  auto& entries = params.entries();
  for (const auto& e : entries)
    for (double g : e.tensor.grad())
      if (!std::isfinite(g)) throw NumericError("adam_update: non-finite gradient in " + e.name);
  clip_gradients(params, clip_threshold);
  if (st.first_moment.size() != entries.size()) {
    st.first_moment.clear();
    st.second_moment.clear();
    for (const auto& e : entries) {
      st.first_moment.emplace_back(e.tensor.size(), 0.0);
      st.second_moment.emplace_back(e.tensor.size(), 0.0);
    }
  }
  ++st.step;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t k = 0; k < entries.size(); ++k) {
    auto& t = entries[k].tensor;
    if (!t.has_grad()) continue;
    auto& m = st.first_moment[k];
    auto& v = st.second_moment[k];
    if (m.size() != t.size()) throw ShapeError("adam_update: moment shape mismatch for " + entries[k].name);
    auto g = t.grad();
    auto w = t.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
      v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + st.epsilon);
    }
    t.zero_grad();
  }
}

Trainer::Trainer(models::Model& model, models::ScoreConfig score, TrainConfig cfg)
    : model_(model), score_(score), cfg_(std::move(cfg)), dropout_rng_(cfg_.seed ^ 0x9e3779b97f4a7c15ULL) {
  validate(cfg_);
  models::validate(model_.config(), score_);
}

double Trainer::train_step(const models::SentenceTriple& t, std::size_t index) {
  Tape tape;
  nn::ForwardContext ctx{true, cfg_.dropout, &dropout_rng_};
  const auto r = model_.forward(tape, t, ctx);
  const Var loss = ops::scale(models::objective(r, model_.config(), score_), -1.0);
  const double value = loss.item();
  if (!std::isfinite(value))
    throw NumericError("non-finite loss at utterance index " + std::to_string(index) +
                       (t.id.empty() ? "" : " (" + t.id + ")"));
  tape.backward(loss);
  adam_update(model_.parameters(), adam_, cfg_.learning_rate, cfg_.clip_threshold);
  return value;
}

double Trainer::loss(const models::SentenceTriple& t) const {
  Tape tape;
  const auto r = model_.forward(tape, t, nn::ForwardContext{});
  return -models::objective(r, model_.config(), score_).item();
}

double Trainer::evaluate(const std::vector<models::SentenceTriple>& data) const {
  if (data.empty()) return 0.0;
  std::vector<double> losses(data.size());
  const std::size_t workers = std::min(cfg_.threads, data.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < data.size(); ++i) losses[i] = loss(data[i]);
  } else {
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < workers; ++w)
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t i = w; i < data.size(); i += workers) losses[i] = loss(data[i]);
      }));
    for (auto& j : jobs) j.get();
  }
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(data.size());
}

std::vector<std::size_t> Trainer::epoch_order(std::size_t n, std::size_t epoch) const {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg_.seed * 1000003ULL + epoch);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

namespace {

using Snapshot = std::vector<std::vector<double>>;

Snapshot snapshot(const nn::ParameterStore& p) {
  Snapshot s;
  for (const auto& e : p.entries()) s.emplace_back(e.tensor.values().begin(), e.tensor.values().end());
  return s;
}

void restore(nn::ParameterStore& p, const Snapshot& s) {
  auto& entries = p.entries();
  for (std::size_t k = 0; k < entries.size(); ++k)
    std::copy(s[k].begin(), s[k].end(), entries[k].tensor.values().begin());
}

}  // namespace

TrainResult Trainer::train(const std::vector<models::SentenceTriple>& train,
                           const std::vector<models::SentenceTriple>& dev, const VocabSet* vocab,
                           DevMetric metric, EpochHook hook) {
  if (train.empty()) throw ContractError("training split is empty");
  if (!metric) metric = [&](const models::Model&) { return evaluate(dev.empty() ? train : dev); };
  const bool write = !cfg_.outdir.empty();
  std::ofstream log_file;
  if (write) {
    std::filesystem::create_directories(cfg_.outdir);
    log_file.open(cfg_.outdir + "/train.log", std::ios::trunc);
  }

  TrainResult result;
  Snapshot best;
  for (std::size_t epoch = 1; epoch <= cfg_.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double total = 0.0;
    for (std::size_t i : epoch_order(train.size(), epoch)) {
      total += train_step(train[i], i);
      ++result.updates;
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.train_objective = total / static_cast<double>(train.size());
    entry.dev_objective = metric(model_);
    entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(entry);

    const bool improved = result.best_epoch == 0 || entry.dev_objective < result.best_dev;
    if (improved) {
      result.best_epoch = epoch;
      result.best_dev = entry.dev_objective;
      best = snapshot(model_.parameters());
    }
    if (write) {
      log_file << entry.epoch << '\t' << std::setprecision(10) << entry.train_objective << '\t'
               << entry.dev_objective << '\t' << std::setprecision(4) << entry.seconds << '\n';
      log_file.flush();
      if (vocab) {
        if (cfg_.keep_epoch_checkpoints)
          save_checkpoint(cfg_.outdir + "/epoch" + std::to_string(epoch) + ".ckpt", model_, score_, *vocab);
        if (improved) save_checkpoint(cfg_.outdir + "/best.ckpt", model_, score_, *vocab);
      }
    }
    if (hook && !hook(entry, model_)) break;
  }
  restore(model_.parameters(), best);
  return result;
}

}  // namespace mtseq::training
