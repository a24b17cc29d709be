#pragma once

// Shared toy fixtures: tiny models, table-driven step scorers and the
// gradient-check suites used by both unit tests and the acceptance runner.

#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gradcheck.hpp"
#include "mtseq/decoding.hpp"
#include "mtseq/models.hpp"
#include "mtseq/ops.hpp"

namespace mtseq::testing {

// Vocabulary of 3 real symbols on every side (IDs 4..6).
inline models::ModelConfig toy_config(models::Architecture kind, bool reconstruction = false) {
  models::ModelConfig c;
  c.arch = {kind, reconstruction};
  c.source_vocab = 7;
  c.target1_vocab = 7;
  c.target2_vocab = kind == models::Architecture::single ? 0 : 7;
  c.source_embed = c.target1_embed = c.target2_embed = 3;
  c.encoder_hidden = 3;
  c.decoder_hidden = 4;
  c.attention_dim = 3;
  return c;
}

// 3-symbol source; targets end with EOS.
inline models::SentenceTriple toy_triple(bool reconstruction = false) {
  models::SentenceTriple t;
  t.id = "toy";
  t.x.tokens = {4, 5, 6};
  t.y1 = {5, 4, kEos};
  t.y2 = reconstruction ? std::vector<int>{4, 5, 6, kEos} : std::vector<int>{6, 6, 4, kEos};
  return t;
}

// Finite-difference check of the full training objective w.r.t. every model
// parameter.
inline GradReport architecture_gradcheck(models::Architecture kind, bool reconstruction,
                                         const models::ScoreConfig& score, std::uint64_t seed = 3) {
  const auto cfg = toy_config(kind, reconstruction);
  models::validate(cfg, score);
  models::Model model(cfg, seed);
  const auto triple = toy_triple(reconstruction);
  auto loss = [&](Tape& tape) {
    const auto r = model.forward(tape, triple, nn::ForwardContext{});
    return models::objective(r, cfg, score);
  };
  return check_gradients(loss, all_parameters(model.parameters()));
}

struct NamedReport {
  std::string name;
  GradReport report;
};

// Every differentiable primitive, each composed into a scalar with a random
// linear read-out so that no gradient is trivially uniform.
inline std::vector<NamedReport> primitive_gradchecks(std::uint64_t seed = 11) {
  std::mt19937_64 rng(seed);
  std::vector<NamedReport> out;
  auto readout = [&](Tape& tape, Var v, const Tensor& w) { return ops::sum(ops::mul(v, tape.constant(w))); };

  auto run = [&](const std::string& name, std::vector<Tensor*> inputs, Shape out_shape,
                 std::function<Var(Tape&, const std::vector<Var>&)> f) {
    Tensor w = random_tensor(out_shape, rng);
    std::vector<GradTarget> targets;
    for (std::size_t i = 0; i < inputs.size(); ++i) targets.push_back({name + ".in" + std::to_string(i), inputs[i]});
    auto loss = [&](Tape& tape) {
      std::vector<Var> vs;
      for (auto* t : inputs) vs.push_back(tape.parameter(*t));
      return readout(tape, f(tape, vs), w);
    };
    out.push_back({name, check_gradients(loss, targets)});
  };

  Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng), c = random_tensor({4, 2}, rng);
  Tensor v = random_tensor({4}, rng), u = random_tensor({4}, rng), p = random_tensor({5}, rng);
  Tensor pos = random_tensor({3, 4}, rng, 0.2, 2.0);
  run("add", {&a, &b}, {3, 4}, [](Tape&, const std::vector<Var>& x) { return ops::add(x[0], x[1]); });
  run("sub", {&a, &b}, {3, 4}, [](Tape&, const std::vector<Var>& x) { return ops::sub(x[0], x[1]); });
  run("mul", {&a, &b}, {3, 4}, [](Tape&, const std::vector<Var>& x) { return ops::mul(x[0], x[1]); });
  run("scale", {&a}, {3, 4}, [](Tape&, const std::vector<Var>& x) { return ops::scale(x[0], -1.7); });
  run("add_row_broadcast", {&a, &v}, {3, 4},
      [](Tape&, const std::vector<Var>& x) { return ops::add_row_broadcast(x[0], x[1]); });
  run("matmul", {&a, &c}, {3, 2}, [](Tape&, const std::vector<Var>& x) { return ops::matmul(x[0], x[1]); });
  run("matvec", {&a, &v}, {3}, [](Tape&, const std::vector<Var>& x) { return ops::matmul(x[0], x[1]); });
  run("transpose", {&a}, {4, 3}, [](Tape&, const std::vector<Var>& x) { return ops::transpose(x[0]); });
  run("tanh", {&a}, {3, 4}, [](Tape&, const std::vector<Var>& x) { return ops::tanh(x[0]); });
  run("sigmoid", {&a}, {3, 4}, [](Tape&, const std::vector<Var>& x) { return ops::sigmoid(x[0]); });
  run("log", {&pos}, {3, 4}, [](Tape&, const std::vector<Var>& x) { return ops::log(x[0]); });
  run("concat_vectors", {&v, &p}, {9}, [](Tape&, const std::vector<Var>& x) { return ops::concat({x[0], x[1]}); });
  run("concat_rows", {&a, &b}, {6, 4},
      [](Tape&, const std::vector<Var>& x) { return ops::concat({x[0], x[1]}, ops::Axis::rows); });
  run("concat_cols", {&a, &b}, {3, 8},
      [](Tape&, const std::vector<Var>& x) { return ops::concat({x[0], x[1]}, ops::Axis::cols); });
  run("stack_rows", {&v, &u}, {2, 4}, [](Tape&, const std::vector<Var>& x) { return ops::stack_rows({x[0], x[1]}); });
  run("pick_row", {&a}, {4}, [](Tape&, const std::vector<Var>& x) { return ops::pick_row(x[0], 2); });
  run("slice", {&p}, {3}, [](Tape&, const std::vector<Var>& x) { return ops::slice(x[0], 1, 3); });
  {
    // Fixed mask: the same seed on every evaluation.
    run("dropout", {&a}, {3, 4}, [](Tape&, const std::vector<Var>& x) {
      std::mt19937_64 r(5);
      return ops::dropout(x[0], 0.3, r);
    });
  }
  run("softmax_T1", {&p}, {5}, [](Tape&, const std::vector<Var>& x) { return ops::softmax_temperature(x[0], 1.0); });
  run("softmax_T10", {&p}, {5}, [](Tape&, const std::vector<Var>& x) { return ops::softmax_temperature(x[0], 10.0); });
  run("log_softmax", {&p}, {5}, [](Tape&, const std::vector<Var>& x) { return ops::log_softmax(x[0]); });
  run("pick", {&p}, {1}, [](Tape&, const std::vector<Var>& x) { return ops::pick(x[0], 3); });
  run("nll_pick", {&p}, {1}, [](Tape&, const std::vector<Var>& x) { return ops::nll_pick(ops::log_softmax(x[0]), 1); });
  run("sum", {&a}, {1}, [](Tape&, const std::vector<Var>& x) { return ops::sum(x[0]); });
  run("sum_scalars", {&v}, {1}, [](Tape&, const std::vector<Var>& x) {
    return ops::sum_scalars({ops::pick(x[0], 0), ops::pick(x[0], 2), ops::pick(x[0], 2)});
  });
  run("frobenius_norm_sq", {&a}, {1}, [](Tape&, const std::vector<Var>& x) { return ops::frobenius_norm_sq(x[0]); });
  return out;
}

// Table-driven scorer: the distribution over the next token depends on the
// whole prefix. Missing prefixes fall back to `fallback`.
class TableScorer {
 public:
  struct State {
    std::vector<int> prefix;
  };

  TableScorer(std::size_t vocab, int eos) : vocab_(vocab), eos_(eos) {}

  void set(const std::vector<int>& prefix, const std::vector<double>& probs) {
    std::vector<double> lp;
    for (double p : probs) lp.push_back(p > 0 ? std::log(p) : -std::numeric_limits<double>::infinity());
    table_[prefix] = lp;
  }
  void set_fallback(const std::vector<double>& probs) {
    fallback_.clear();
    for (double p : probs) fallback_.push_back(std::log(p));
  }

  State start() { return {}; }
  std::span<const double> log_probs(const State& s) const {
    auto it = table_.find(s.prefix);
    return it == table_.end() ? std::span<const double>(fallback_) : std::span<const double>(it->second);
  }
  State advance(const State& s, int token) {
    State n = s;
    n.prefix.push_back(token);
    return n;
  }
  int eos() const { return eos_; }
  std::size_t vocab() const { return vocab_; }

  // log P(seq), seq including the final EOS.
  double sequence_log_prob(const std::vector<int>& seq) const {
    State s;
    double lp = 0;
    for (int t : seq) {
      lp += log_probs(s)[static_cast<std::size_t>(t)];
      s.prefix.push_back(t);
    }
    return lp;
  }

 private:
  std::size_t vocab_;
  int eos_;
  std::map<std::vector<int>, std::vector<double>> table_;
  std::vector<double> fallback_;
};

// Every token sequence that ends in `eos` (and contains it only at the end)
// with length 1..max_len.
inline std::vector<std::vector<int>> complete_sequences(std::size_t vocab, int eos, std::size_t max_len) {
  std::vector<std::vector<int>> out, frontier{{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::vector<int>> next;
    for (const auto& pre : frontier) {
      for (std::size_t t = 0; t < vocab; ++t) {
        auto s = pre;
        s.push_back(static_cast<int>(t));
        if (static_cast<int>(t) == eos)
          out.push_back(s);
        else
          next.push_back(s);
      }
    }
    frontier = std::move(next);
  }
  return out;
}

// Two-phase decoding fixture over vocab {x=0, y=1, EOS=2}, lengths <= 2.
// Phase 1 prefers "x" (0.55 vs 0.45), but the second task is confident only
// after "y", so the joint optimum pairs the phase-1 runner-up with "x".
struct TwoPhaseFixture {
  TableScorer first{3, 2};
  std::map<std::vector<int>, TableScorer> second;

  TwoPhaseFixture() {
    first.set({}, {0.55, 0.45, 0.0});
    first.set({0}, {0.0, 0.0, 1.0});
    first.set({1}, {0.0, 0.0, 1.0});
    first.set_fallback({0.0001, 0.0001, 0.9998});
    TableScorer after_x(3, 2), after_y(3, 2);
    after_x.set({}, {0.34, 0.33, 0.33});
    after_x.set_fallback({0.0001, 0.0001, 0.9998});
    after_y.set({}, {0.96, 0.02, 0.02});
    after_y.set_fallback({0.0001, 0.0001, 0.9998});
    second.emplace(std::vector<int>{0, 2}, after_x);
    second.emplace(std::vector<int>{1, 2}, after_y);
  }

  TableScorer second_for(const std::vector<int>& y1) const {
    auto it = second.find(y1);
    if (it != second.end()) return it->second;
    TableScorer s(3, 2);
    s.set_fallback({0.0001, 0.0001, 0.9998});
    return s;
  }
};

}  // namespace mtseq::testing
