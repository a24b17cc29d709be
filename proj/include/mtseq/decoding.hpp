#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <span>
#include <type_traits>
#include <string>
#include <vector>

#include "mtseq/attention.hpp"
#include "mtseq/errors.hpp"
#include "mtseq/models.hpp"

namespace mtseq::decoding {

enum class SearchMode { joint, first_1best };

std::string to_string(SearchMode m);
SearchMode parse_search_mode(const std::string& s);

struct BeamConfig {
  std::size_t beam = 4;
  double length_alpha = 0.8;
  // 0 selects the default: 3x source length for text, frames/2 for speech.
  std::size_t max_length = 0;
  SearchMode mode = SearchMode::joint;
  // Combine raw log-probabilities instead of length-normalized scores.
  bool combine_raw = false;
};

void validate(const BeamConfig& cfg);

// GNMT length penalty ((5 + length) / 6)^alpha.
double length_penalty(std::size_t length, double alpha);

template <class State>
struct Hypothesis {
  std::vector<int> tokens;  // includes the final EOS when complete
  double log_prob = 0.0;
  double score = 0.0;  // log_prob / length_penalty(|tokens|)
  State state;         // state from which the last token was chosen
  bool complete = false;
  std::size_t finished_step = 0;
};

// Anything that can be expanded one token at a time.
template <class S>
concept StepScorer = requires(S s, const typename S::State& st, int token) {
  { s.start() } -> std::same_as<typename S::State>;
  { s.log_probs(st) } -> std::convertible_to<std::span<const double>>;
  { s.advance(st, token) } -> std::same_as<typename S::State>;
  { s.eos() } -> std::convertible_to<int>;
};

template <class State>
struct BeamResult {
  std::vector<Hypothesis<State>> hypotheses;
  // Set when nothing reached EOS; `hypotheses` then holds the best partial one.
  bool incomplete = false;
};

namespace detail {

template <class State>
bool better(const Hypothesis<State>& a, const Hypothesis<State>& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.finished_step != b.finished_step) return a.finished_step < b.finished_step;
  return a.tokens < b.tokens;
}

}  // namespace detail

// Standard left-to-right beam search. Each step keeps the `beam` best
// expansions; expansions ending in EOS move to the finished list. Search
// stops once `beam` hypotheses have finished, no live hypothesis remains, or
// the length limit is reached.
template <StepScorer S>
BeamResult<typename S::State> beam_search(S& scorer, const BeamConfig& cfg) {
  using State = typename S::State;
  using Hyp = Hypothesis<State>;
  if (cfg.beam == 0) throw ContractError("beam size must be >= 1");
  if (cfg.max_length == 0) throw ContractError("max output length must be > 0");
  const int eos = scorer.eos();

  struct Candidate {
    std::size_t parent;
    int token;
    double log_prob;
  };

  std::vector<Hyp> live(1);
  live[0].state = scorer.start();
  std::vector<Hyp> finished;

  for (std::size_t step = 1; step <= cfg.max_length && !live.empty(); ++step) {
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < live.size(); ++i) {
      const std::span<const double> lp = scorer.log_probs(live[i].state);
      for (std::size_t tok = 0; tok < lp.size(); ++tok) {
        if (!std::isfinite(lp[tok])) continue;
        cands.push_back({i, static_cast<int>(tok), live[i].log_prob + lp[tok]});
      }
    }
    // All candidates share one length, so raw log-probability orders them.
    std::sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      const auto& ta = live[a.parent].tokens;
      const auto& tb = live[b.parent].tokens;
      if (ta != tb) return ta < tb;
      return a.token < b.token;
    });
    if (cands.size() > cfg.beam) cands.resize(cfg.beam);

    std::vector<Hyp> next;
    for (const auto& c : cands) {
      Hyp h;
      h.tokens = live[c.parent].tokens;
      h.tokens.push_back(c.token);
      h.log_prob = c.log_prob;
      h.score = c.log_prob / length_penalty(h.tokens.size(), cfg.length_alpha);
      if (c.token == eos) {
        h.state = live[c.parent].state;
        h.complete = true;
        h.finished_step = step;
        finished.push_back(std::move(h));
      } else {
        h.state = scorer.advance(live[c.parent].state, c.token);
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
    if (finished.size() >= cfg.beam) break;
  }

  BeamResult<State> result;
  if (finished.empty()) {
    if (live.empty()) throw NumericError("beam search: every expansion had zero probability");
    for (auto& h : live) h.finished_step = h.tokens.size();
    std::sort(live.begin(), live.end(), detail::better<State>);
    result.hypotheses.push_back(std::move(live.front()));
    result.incomplete = true;
    return result;
  }
  std::sort(finished.begin(), finished.end(), detail::better<State>);
  if (finished.size() > cfg.beam) finished.resize(cfg.beam);
  result.hypotheses = std::move(finished);
  return result;
}

template <class State1, class State2>
struct JointCandidate {
  std::size_t first_index = 0;   // rank in the phase-1 k-best list
  std::size_t second_index = 0;  // rank in that candidate's phase-2 list
  double joint = 0.0;
};

template <class State1, class State2>
struct TwoPhaseResult {
  Hypothesis<State1> first;
  Hypothesis<State2> second;
  double joint = 0.0;
  bool incomplete = false;
  std::vector<JointCandidate<State1, State2>> explored;
};

// Phase 1 beam-decodes the first task; phase 2 beam-decodes the second task
// once per phase-1 candidate (only the top one in first-1best mode). The pair
// with the highest lambda-interpolated score wins; ties keep the earliest
// (phase-1 rank, phase-2 rank).
template <StepScorer S1, class MakeSecond>
auto two_phase_decode(S1& first, MakeSecond&& make_second, const BeamConfig& cfg, double lambda) {
  using State1 = typename S1::State;
  using S2 = std::invoke_result_t<MakeSecond&, const Hypothesis<State1>&>;
  static_assert(StepScorer<S2>);
  using State2 = typename S2::State;

  auto phase1 = beam_search(first, cfg);
  auto& cands = phase1.hypotheses;
  const std::size_t use = cfg.mode == SearchMode::first_1best ? 1 : cands.size();

  TwoPhaseResult<State1, State2> out;
  out.incomplete = phase1.incomplete;
  out.joint = -std::numeric_limits<double>::infinity();
  bool have = false;
  for (std::size_t i = 0; i < use; ++i) {
    S2 second = make_second(cands[i]);
    auto phase2 = beam_search(second, cfg);
    for (std::size_t j = 0; j < phase2.hypotheses.size(); ++j) {
      const auto& h2 = phase2.hypotheses[j];
      const double a = cfg.combine_raw ? cands[i].log_prob : cands[i].score;
      const double b = cfg.combine_raw ? h2.log_prob : h2.score;
      const double joint = lambda * a + (1.0 - lambda) * b;
      out.explored.push_back({i, j, joint});
      if (!have || joint > out.joint) {
        have = true;
        out.joint = joint;
        out.first = cands[i];
        out.second = h2;
        out.incomplete = phase1.incomplete || phase2.incomplete;
      }
    }
  }
  return out;
}

// Beam-search adaptor over one decoder of a trained model. All work is
// recorded on the caller's tape (no backward pass is ever run on it).
class DecoderScorer {
 public:
  struct State {
    models::Decoder::State decoder;
    std::vector<double> log_probs;  // PAD and BOS masked to -inf
    std::vector<Var> outputs;
    std::vector<std::vector<Var>> weights;
  };

  DecoderScorer(const models::Decoder& decoder, Tape& tape, const std::vector<Var>& memories);

  State start();
  std::span<const double> log_probs(const State& s) const;
  State advance(const State& s, int token);
  int eos() const { return kEos; }

 private:
  State expand(const models::Decoder::State& prev, int token, const State* parent);

  const models::Decoder* decoder_;
  Tape* tape_;
  std::vector<attention::AttentionLayer::Memory> memories_;
};

struct DecodeOutput {
  std::vector<int> y1;  // without EOS
  std::vector<int> y2;
  double joint_score = 0.0;
  double score1 = 0.0;
  double score2 = 0.0;
  bool incomplete = false;
  attention::AttentionMatrix a1;
  attention::AttentionMatrix a2;
  attention::AttentionMatrix a12;
};

std::size_t default_max_length(const models::Source& x);

// Decodes one source with a trained model: plain beam search for single-task
// models, two-phase search otherwise.
DecodeOutput decode(const models::Model& model, const models::Source& x, const BeamConfig& cfg,
                    double lambda);

}  // namespace mtseq::decoding
