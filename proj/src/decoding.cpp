#include "mtseq/decoding.hpp"

namespace mtseq::decoding {

std::string to_string(SearchMode m) { return m == SearchMode::joint ? "joint" : "first-1best"; }

SearchMode parse_search_mode(const std::string& s) {
  if (s == "joint") return SearchMode::joint;
  if (s == "first-1best") return SearchMode::first_1best;
  throw ConfigError("unknown search mode '" + s + "' (expected joint or first-1best)");
}

void validate(const BeamConfig& cfg) {
  if (cfg.beam == 0) throw ConfigError("beam size must be >= 1");
  if (cfg.length_alpha < 0.0 || cfg.length_alpha > 1.0)
    throw ConfigError("length normalization weight must lie in [0, 1]");
}

double length_penalty(std::size_t length, double alpha) {
  if (length == 0) throw ContractError("length_penalty: length must be >= 1");
  return std::pow((5.0 + static_cast<double>(length)) / 6.0, alpha);
}

DecoderScorer::DecoderScorer(const models::Decoder& decoder, Tape& tape,
                             const std::vector<Var>& memories)
    : decoder_(&decoder), tape_(&tape), memories_(decoder.prepare(tape, memories)) {}

DecoderScorer::State DecoderScorer::expand(const models::Decoder::State& prev, int token,
                                           const State* parent) {
  auto st = decoder_->step(*tape_, prev, token, memories_, nn::ForwardContext{});
  State s;
  if (parent) {
    s.outputs = parent->outputs;
    s.weights = parent->weights;
  } else {
    s.weights.resize(memories_.size());
  }
  s.outputs.push_back(st.state.output);
  for (std::size_t k = 0; k < st.weights.size(); ++k) s.weights[k].push_back(st.weights[k]);
  const auto lp = st.log_probs.value().values();
  s.log_probs.assign(lp.begin(), lp.end());
  s.log_probs[kPad] = -std::numeric_limits<double>::infinity();
  s.log_probs[kBos] = -std::numeric_limits<double>::infinity();
  s.decoder = std::move(st.state);
  return s;
}

DecoderScorer::State DecoderScorer::start() {
  return expand(decoder_->initial(*tape_), kBos, nullptr);
}

std::span<const double> DecoderScorer::log_probs(const State& s) const { return s.log_probs; }

DecoderScorer::State DecoderScorer::advance(const State& s, int token) {
  return expand(s.decoder, token, &s);
}

std::size_t default_max_length(const models::Source& x) {
  if (x.is_speech()) return std::max<std::size_t>(1, x.features.rows() / 2);
  return 3 * x.tokens.size();
}

namespace {

std::vector<int> strip_eos(std::vector<int> tokens) {
  if (!tokens.empty() && tokens.back() == kEos) tokens.pop_back();
  return tokens;
}

attention::AttentionMatrix capture(const std::vector<Var>& rows) {
  if (rows.empty()) return {};
  return attention::AttentionMatrix(ops::stack_rows(rows).value());
}

}  // namespace

DecodeOutput decode(const models::Model& model, const models::Source& x, const BeamConfig& cfg_in,
                    double lambda) {
  BeamConfig cfg = cfg_in;
  if (cfg.max_length == 0) cfg.max_length = default_max_length(x);
  Tape tape;
  const Var h = model.encode(tape, x, nn::ForwardContext{});
  DecoderScorer first(model.first_decoder(), tape, {h});
  DecodeOutput out;
  if (!model.config().two_decoders()) {
    auto r = beam_search(first, cfg);
    const auto& best = r.hypotheses.front();
    out.y1 = strip_eos(best.tokens);
    out.score1 = cfg.combine_raw ? best.log_prob : best.score;
    out.joint_score = out.score1;
    out.incomplete = r.incomplete;
    out.a1 = capture(best.state.weights[0]);
    return out;
  }
  auto make_second = [&](const Hypothesis<DecoderScorer::State>& hyp) {
    const Var s1 = ops::stack_rows(hyp.state.outputs);
    return DecoderScorer(model.second_decoder(), tape, model.second_memories(h, s1));
  };
  auto r = two_phase_decode(first, make_second, cfg, lambda);
  out.y1 = strip_eos(r.first.tokens);
  out.y2 = strip_eos(r.second.tokens);
  out.score1 = cfg.combine_raw ? r.first.log_prob : r.first.score;
  out.score2 = cfg.combine_raw ? r.second.log_prob : r.second.score;
  out.joint_score = r.joint;
  out.incomplete = r.incomplete;
  out.a1 = capture(r.first.state.weights[0]);
  switch (model.config().arch.kind) {
    case models::Architecture::multitask: out.a2 = capture(r.second.state.weights[0]); break;
    case models::Architecture::cascade: out.a12 = capture(r.second.state.weights[0]); break;
    case models::Architecture::triangle:
      out.a12 = capture(r.second.state.weights[0]);
      out.a2 = capture(r.second.state.weights[1]);
      break;
    case models::Architecture::single: break;
  }
  return out;
}

}  // namespace mtseq::decoding
