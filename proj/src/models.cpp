#include "mtseq/models.hpp"

#include "mtseq/errors.hpp"

namespace mtseq::models {

std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::single: return "single";
    case Architecture::multitask: return "multitask";
    case Architecture::cascade: return "cascade";
    case Architecture::triangle: return "triangle";
  }
  return "?";
}

Architecture parse_architecture(const std::string& s) {
  if (s == "single") return Architecture::single;
  if (s == "multitask") return Architecture::multitask;
  if (s == "cascade") return Architecture::cascade;
  if (s == "triangle") return Architecture::triangle;
  throw ConfigError("unknown architecture '" + s + "'");
}

std::string to_string(SourceKind k) { return k == SourceKind::text ? "text" : "speech"; }

SourceKind parse_source_kind(const std::string& s) {
  if (s == "text") return SourceKind::text;
  if (s == "speech") return SourceKind::speech;
  throw ConfigError("unknown source kind '" + s + "'");
}

void validate(const ModelConfig& m, const ScoreConfig& s) {
  if (s.lambda < 0.0 || s.lambda > 1.0) throw ConfigError("lambda must lie in [0, 1]");
  if (s.trans_weight < 0.0 || s.inv_weight < 0.0)
    throw ConfigError("regularizer weights must be non-negative");
  if (s.trans_weight > 0.0 && m.arch.kind != Architecture::triangle)
    throw ConfigError("the transitivity regularizer needs A1, A2 and A12: use --arch triangle");
  if (s.inv_weight > 0.0 && !(m.arch.kind == Architecture::cascade && m.arch.reconstruction))
    throw ConfigError("the invertibility regularizer needs a reconstruction cascade");
  if (m.arch.reconstruction) {
    if (m.arch.kind != Architecture::cascade)
      throw ConfigError("reconstruction is only defined for the cascade architecture");
    if (m.source != SourceKind::text)
      throw ConfigError("reconstruction needs a text source");
  }
  if (m.source == SourceKind::text && m.source_vocab <= static_cast<std::size_t>(kReservedSymbols))
    throw ConfigError("source vocabulary is empty");
  if (m.target1_vocab <= static_cast<std::size_t>(kReservedSymbols))
    throw ConfigError("first target vocabulary is empty");
  if (m.two_decoders() && m.target2_vocab <= static_cast<std::size_t>(kReservedSymbols))
    throw ConfigError("second target vocabulary is empty");
  if (m.decoder_layers == 0 || m.encoder_layers == 0)
    throw ConfigError("layer counts must be >= 1");
  if (!(m.attention_temperature > 0.0)) throw ConfigError("attention temperature must be positive");
}

Decoder::Decoder(nn::ParameterStore& store, const std::string& name, std::size_t vocab,
                 std::size_t embed_dim, std::size_t hidden, std::size_t layers,
                 const std::vector<std::size_t>& memory_dims, std::size_t attention_dim,
                 double temperature, std::mt19937_64& rng)
    : embedding_(store, name + ".embed", vocab, embed_dim, rng), hidden_(hidden) {
  std::size_t input = embed_dim;
  for (std::size_t k = 0; k < memory_dims.size(); ++k) {
    attentions_.emplace_back(store, name + ".attn" + std::to_string(k), hidden, memory_dims[k],
                             attention_dim, rng, temperature);
    input += memory_dims[k];
  }
  for (std::size_t l = 0; l < layers; ++l) {
    cells_.emplace_back(store, name + ".lstm" + std::to_string(l), l == 0 ? input : hidden, hidden,
                        rng);
  }
  projection_ = nn::VocabProjection(store, name + ".out", hidden, vocab, rng);
}

void Decoder::set_temperature(double t) {
  for (auto& a : attentions_) a.set_temperature(t);
}

Decoder::State Decoder::initial(Tape& tape) const {
  State s;
  for (const auto& cell : cells_) s.layers.push_back(cell.initial_state(tape));
  s.output = s.layers.back().h;
  return s;
}

std::vector<AttentionLayer::Memory> Decoder::prepare(Tape& tape, const std::vector<Var>& keys) const {
  if (keys.size() != attentions_.size())
    throw ContractError("decoder has " + std::to_string(attentions_.size()) + " attentions but got " +
                        std::to_string(keys.size()) + " memories");
  std::vector<AttentionLayer::Memory> out;
  for (std::size_t k = 0; k < keys.size(); ++k) out.push_back(attentions_[k].prepare(tape, keys[k]));
  return out;
}

Decoder::Step Decoder::step(Tape& tape, const State& prev, int prev_token,
                            const std::vector<AttentionLayer::Memory>& memories,
                            const nn::ForwardContext& ctx) const {
  if (memories.size() != attentions_.size())
    throw ContractError("decoder step: memory count mismatch");
  Step out;
  std::vector<Var> inputs{ctx.apply_dropout(embedding_.lookup(tape, prev_token))};
  for (std::size_t k = 0; k < attentions_.size(); ++k) {
    auto r = attentions_[k].attend(tape, memories[k], prev.output);
    inputs.push_back(r.context);
    out.weights.push_back(r.weights);
  }
  Var x = ops::concat(inputs);
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    out.state.layers.push_back(cells_[l].step(tape, prev.layers[l], x));
    x = out.state.layers.back().h;
  }
  out.state.output = x;
  out.log_probs = projection_(tape, ctx.apply_dropout(x));
  return out;
}

Decoder::Trace Decoder::force(Tape& tape, const std::vector<int>& targets,
                              const std::vector<AttentionLayer::Memory>& memories,
                              const nn::ForwardContext& ctx) const {
  if (targets.empty()) throw ContractError("decoder: empty target sequence");
  if (targets.back() != kEos) throw ContractError("decoder: target sequence must end with EOS");
  Trace tr;
  tr.weights.resize(attentions_.size());
  State state = initial(tape);
  int prev = kBos;
  std::vector<Var> terms;
  for (int y : targets) {
    auto st = step(tape, state, prev, memories, ctx);
    terms.push_back(ops::pick(st.log_probs, static_cast<std::size_t>(y)));
    for (std::size_t k = 0; k < st.weights.size(); ++k) tr.weights[k].push_back(st.weights[k]);
    state = std::move(st.state);
    tr.outputs.push_back(state.output);
    prev = y;
  }
  tr.log_prob = ops::sum_scalars(terms);
  return tr;
}

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  std::mt19937_64 rng(seed);
  std::size_t enc_dim = 0;
  if (cfg.source == SourceKind::text) {
    text_encoder_ = nn::TextEncoder(store_, "encoder",
                                    {cfg.source_vocab, cfg.source_embed, cfg.encoder_hidden,
                                     cfg.encoder_layers},
                                    rng);
    enc_dim = text_encoder_.output_size();
  } else {
    speech_encoder_ = nn::SpeechEncoder(store_, "encoder", cfg.speech, rng);
    enc_dim = speech_encoder_.output_size();
  }
  dec1_ = Decoder(store_, "dec1", cfg.target1_vocab, cfg.target1_embed, cfg.decoder_hidden,
                  cfg.decoder_layers, {enc_dim}, cfg.attention_dim, cfg.attention_temperature, rng);
  std::vector<std::size_t> mem2;
  switch (cfg.arch.kind) {
    case Architecture::single: break;
    case Architecture::multitask: mem2 = {enc_dim}; break;
    case Architecture::cascade: mem2 = {cfg.decoder_hidden}; break;
    case Architecture::triangle: mem2 = {cfg.decoder_hidden, enc_dim}; break;
  }
  if (!mem2.empty())
    dec2_ = Decoder(store_, "dec2", cfg.target2_vocab, cfg.target2_embed, cfg.decoder_hidden,
                    cfg.decoder_layers, mem2, cfg.attention_dim, cfg.attention_temperature, rng);
}

std::size_t Model::encoder_output_size() const {
  return cfg_.source == SourceKind::text ? text_encoder_.output_size()
                                         : speech_encoder_.output_size();
}

void Model::set_attention_temperature(double t) {
  cfg_.attention_temperature = t;
  dec1_.set_temperature(t);
  dec2_.set_temperature(t);
}

Var Model::encode(Tape& tape, const Source& x, const nn::ForwardContext& ctx) const {
  if (cfg_.source == SourceKind::speech) {
    if (!x.is_speech()) throw ContractError("speech model given a token source");
    return speech_encoder_.encode(tape, x.features, ctx);
  }
  if (x.tokens.empty()) throw ContractError("empty source sequence");
  auto tokens = x.tokens;
  tokens.push_back(kEos);
  return text_encoder_.encode(tape, tokens, ctx);
}

std::vector<Var> Model::second_memories(Var encoder_states, Var first_states) const {
  switch (cfg_.arch.kind) {
    case Architecture::multitask: return {encoder_states};
    case Architecture::cascade: return {first_states};
    case Architecture::triangle: return {first_states, encoder_states};
    case Architecture::single: break;
  }
  throw ContractError("single-task model has no second decoder");
}

ForwardResult Model::forward(Tape& tape, const SentenceTriple& t,
                             const nn::ForwardContext& ctx) const {
  switch (cfg_.arch.kind) {
    case Architecture::single: return forward_single(tape, t, ctx);
    case Architecture::multitask: return forward_multitask(tape, t, ctx);
    case Architecture::cascade: return forward_cascade(tape, t, ctx);
    case Architecture::triangle: return forward_triangle(tape, t, ctx);
  }
  throw ContractError("unknown architecture");
}

ForwardResult Model::forward_single(Tape& tape, const SentenceTriple& t,
                                    const nn::ForwardContext& ctx) const {
  ForwardResult r;
  r.encoder_states = encode(tape, t.x, ctx);
  auto tr = dec1_.force(tape, t.y1, dec1_.prepare(tape, {r.encoder_states}), ctx);
  r.logp1 = tr.log_prob;
  r.a1 = ops::stack_rows(tr.weights[0]);
  r.first_states = ops::stack_rows(tr.outputs);
  return r;
}

ForwardResult Model::forward_multitask(Tape& tape, const SentenceTriple& t,
                                       const nn::ForwardContext& ctx) const {
  if (cfg_.arch.kind != Architecture::multitask)
    throw ContractError("forward_multitask on a " + to_string(cfg_.arch.kind) + " model");
  ForwardResult r = forward_single(tape, t, ctx);
  auto tr = dec2_.force(tape, t.y2, dec2_.prepare(tape, {r.encoder_states}), ctx);
  r.logp2 = tr.log_prob;
  r.a2 = ops::stack_rows(tr.weights[0]);
  return r;
}

ForwardResult Model::forward_cascade(Tape& tape, const SentenceTriple& t,
                                     const nn::ForwardContext& ctx) const {
  if (cfg_.arch.kind != Architecture::cascade)
    throw ContractError("forward_cascade on a " + to_string(cfg_.arch.kind) + " model");
  if (cfg_.arch.reconstruction) {
    auto expect = t.x.tokens;
    expect.push_back(kEos);
    if (t.y2 != expect)
      throw ContractError("reconstruction: second target must equal the source sequence");
  }
  ForwardResult r = forward_single(tape, t, ctx);
  auto tr = dec2_.force(tape, t.y2, dec2_.prepare(tape, {r.first_states}), ctx);
  r.logp2 = tr.log_prob;
  r.a12 = ops::stack_rows(tr.weights[0]);
  return r;
}

ForwardResult Model::forward_triangle(Tape& tape, const SentenceTriple& t,
                                      const nn::ForwardContext& ctx) const {
  if (cfg_.arch.kind != Architecture::triangle)
    throw ContractError("forward_triangle on a " + to_string(cfg_.arch.kind) + " model");
  ForwardResult r = forward_single(tape, t, ctx);
  auto tr = dec2_.force(tape, t.y2, dec2_.prepare(tape, {r.first_states, r.encoder_states}), ctx);
  r.logp2 = tr.log_prob;
  r.a12 = ops::stack_rows(tr.weights[0]);
  r.a2 = ops::stack_rows(tr.weights[1]);
  return r;
}

double score_triple(double logp1, double logp2, const ScoreConfig& cfg) {
  return cfg.lambda * logp1 + (1.0 - cfg.lambda) * logp2;
}

Var score_triple(Var logp1, Var logp2, const ScoreConfig& cfg) {
  return ops::add(ops::scale(logp1, cfg.lambda), ops::scale(logp2, 1.0 - cfg.lambda));
}

Var loss_transitivity(Var score, Var a1, Var a2, Var a12, double weight) {
  const auto& s1 = a1.value();
  const auto& s2 = a2.value();
  const auto& s12 = a12.value();
  if (s1.rank() != 2 || s2.rank() != 2 || s12.rank() != 2 || s12.cols() != s1.rows() ||
      s12.rows() != s2.rows() || s1.cols() != s2.cols())
    throw ShapeError("transitivity: need A12 [M2xM1], A1 [M1xN], A2 [M2xN]; got A12 " +
                     shape_str(s12.shape()) + ", A1 " + shape_str(s1.shape()) + ", A2 " +
                     shape_str(s2.shape()));
  const Var diff = ops::sub(ops::matmul(a12, a1), a2);
  return ops::sub(score, ops::scale(ops::frobenius_norm_sq(diff), weight));
}

Var loss_invertibility(Var score, Var a1, Var a12, double weight) {
  const auto& s1 = a1.value();
  const auto& s12 = a12.value();
  if (s1.rank() != 2 || s12.rank() != 2 || s1.cols() != s12.rows() || s12.cols() != s1.rows())
    throw ShapeError("invertibility: A1 A12 must be square; got A1 " + shape_str(s1.shape()) +
                     ", A12 " + shape_str(s12.shape()));
  Tape& tape = a1.tape();
  const Var eye = tape.constant(Tensor::identity(s1.rows()));
  const Var diff = ops::sub(ops::matmul(a1, a12), eye);
  return ops::sub(score, ops::scale(ops::frobenius_norm_sq(diff), weight));
}

double transitivity_penalty(const Tensor& a1, const Tensor& a2, const Tensor& a12) {
  Tape tape;
  const Var zero = tape.constant(Tensor::scalar(0.0));
  return -loss_transitivity(zero, tape.constant(a1), tape.constant(a2), tape.constant(a12), 1.0)
              .item();
}

double invertibility_penalty(const Tensor& a1, const Tensor& a12) {
  Tape tape;
  const Var zero = tape.constant(Tensor::scalar(0.0));
  return -loss_invertibility(zero, tape.constant(a1), tape.constant(a12), 1.0).item();
}

Var objective(const ForwardResult& r, const ModelConfig& model, const ScoreConfig& score) {
  if (!model.two_decoders()) return r.logp1;
  Var obj = score_triple(r.logp1, r.logp2, score);
  if (score.trans_weight > 0.0) {
    if (!r.a2.valid() || !r.a12.valid())
      throw ConfigError("transitivity regularizer needs A2 and A12");
    obj = loss_transitivity(obj, r.a1, r.a2, r.a12, score.trans_weight);
  }
  if (score.inv_weight > 0.0) {
    if (!r.a12.valid() || !model.arch.reconstruction)
      throw ConfigError("invertibility regularizer needs a reconstruction cascade");
    obj = loss_invertibility(obj, r.a1, r.a12, score.inv_weight);
  }
  return obj;
}

}  // namespace mtseq::models
