#include "mtseq/nn.hpp"

#include <cmath>

#include "mtseq/errors.hpp"

namespace mtseq::nn {

Tensor& ParameterStore::add(const std::string& name, Shape shape) {
  if (contains(name)) throw ConfigError("duplicate parameter name: " + name);
  index_.emplace(name, entries_.size());
  entries_.push_back(Entry{name, Tensor(std::move(shape))});
  return entries_.back().tensor;
}

Tensor& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return entries_[it->second].tensor;
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return entries_[it->second].tensor;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

void glorot_uniform(Tensor& t, std::mt19937_64& rng) {
  const double fan_out = static_cast<double>(t.rows());
  const double fan_in = static_cast<double>(t.cols());
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : t.values()) v = dist(rng);
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
               std::mt19937_64& rng)
    : in_(in), out_(out) {
  weight_ = &store.add(name + ".W", {out, in});
  bias_ = &store.add(name + ".b", {out});
  glorot_uniform(*weight_, rng);
}

Var Linear::operator()(Tape& tape, Var x) const {
  return ops::add(ops::matmul(tape.parameter(*weight_), x), tape.parameter(*bias_));
}

EmbeddingTable::EmbeddingTable(ParameterStore& store, const std::string& name, std::size_t vocab,
                               std::size_t dim, std::mt19937_64& rng)
    : vocab_(vocab), dim_(dim) {
  table_ = &store.add(name + ".E", {vocab, dim});
  glorot_uniform(*table_, rng);
}

Var EmbeddingTable::lookup(Tape& tape, std::size_t id) const {
  if (id >= vocab_)
    throw ContractError("embedding id " + std::to_string(id) + " outside vocabulary of " +
                        std::to_string(vocab_));
  return ops::pick_row(tape.parameter(*table_), id);
}

LstmCell::LstmCell(ParameterStore& store, const std::string& name, std::size_t input,
                   std::size_t hidden, std::mt19937_64& rng)
    : input_(input), hidden_(hidden) {
  weight_ = &store.add(name + ".W", {4 * hidden, input + hidden});
  bias_ = &store.add(name + ".b", {4 * hidden});
  glorot_uniform(*weight_, rng);
  // forget gate occupies rows [H, 2H)
  for (std::size_t i = hidden; i < 2 * hidden; ++i) (*bias_)[i] = 1.0;
}

LstmState LstmCell::initial_state(Tape& tape) const {
  return {tape.constant(Tensor({hidden_})), tape.constant(Tensor({hidden_}))};
}

LstmState LstmCell::step(Tape& tape, const LstmState& prev, Var x) const {
  if (x.value().rank() != 1 || x.value().size() != input_)
    throw ShapeError("lstm_step: input " + shape_str(x.shape()) + " but cell expects [" +
                     std::to_string(input_) + "]");
  if (prev.h.value().size() != hidden_ || prev.c.value().size() != hidden_)
    throw ShapeError("lstm_step: state " + shape_str(prev.h.shape()) + " but cell hidden size is " +
                     std::to_string(hidden_));
  const Var z = ops::add(ops::matmul(tape.parameter(*weight_), ops::concat({x, prev.h})),
                         tape.parameter(*bias_));
  const Var in_gate = ops::sigmoid(ops::slice(z, 0, hidden_));
  const Var forget_gate = ops::sigmoid(ops::slice(z, hidden_, hidden_));
  const Var out_gate = ops::sigmoid(ops::slice(z, 2 * hidden_, hidden_));
  const Var candidate = ops::tanh(ops::slice(z, 3 * hidden_, hidden_));
  const Var c = ops::add(ops::mul(forget_gate, prev.c), ops::mul(in_gate, candidate));
  const Var h = ops::mul(out_gate, ops::tanh(c));
  return {h, c};
}

std::vector<Var> LstmCell::run(Tape& tape, const std::vector<Var>& inputs, bool reverse) const {
  std::vector<Var> out(inputs.size());
  LstmState state = initial_state(tape);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const std::size_t i = reverse ? inputs.size() - 1 - k : k;
    state = step(tape, state, inputs[i]);
    out[i] = state.h;
  }
  return out;
}

BiLstm::BiLstm(ParameterStore& store, const std::string& name, std::size_t input,
               std::size_t hidden, std::mt19937_64& rng)
    : forward_(store, name + ".fwd", input, hidden, rng),
      backward_(store, name + ".bwd", input, hidden, rng) {}

std::vector<Var> BiLstm::run(Tape& tape, const std::vector<Var>& inputs) const {
  const auto fwd = forward_.run(tape, inputs, false);
  const auto bwd = backward_.run(tape, inputs, true);
  std::vector<Var> out;
  out.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) out.push_back(ops::concat({fwd[i], bwd[i]}));
  return out;
}

TextEncoder::TextEncoder(ParameterStore& store, const std::string& name,
                         const TextEncoderConfig& cfg, std::mt19937_64& rng)
    : cfg_(cfg), embedding_(store, name + ".embed", cfg.vocab, cfg.embed_dim, rng) {
  if (cfg.layers == 0) throw ConfigError("text encoder needs at least one layer");
  std::size_t in = cfg.embed_dim;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    layers_.emplace_back(store, name + ".layer" + std::to_string(l), in, cfg.hidden, rng);
    in = layers_.back().output_size();
  }
}

Var TextEncoder::encode(Tape& tape, const std::vector<int>& tokens,
                        const ForwardContext& ctx) const {
  if (tokens.empty()) throw ContractError("encode_text: empty input sequence");
  std::vector<Var> states;
  states.reserve(tokens.size());
  for (int t : tokens) states.push_back(ctx.apply_dropout(embedding_.lookup(tape, t)));
  for (const auto& layer : layers_) states = layer.run(tape, states);
  return ops::stack_rows(states);
}

std::size_t downsampled_length(std::size_t frames, std::size_t stride) {
  if (stride == 0) throw ConfigError("downsampling stride must be >= 1");
  const std::size_t mid = (frames + stride - 1) / stride;
  return (mid + stride - 1) / stride;
}

namespace {

std::vector<Var> every_nth(const std::vector<Var>& xs, std::size_t stride) {
  std::vector<Var> out;
  for (std::size_t i = 0; i < xs.size(); i += stride) out.push_back(xs[i]);
  return out;
}

}  // namespace

SpeechEncoder::SpeechEncoder(ParameterStore& store, const std::string& name,
                             const SpeechEncoderConfig& cfg, std::mt19937_64& rng)
    : cfg_(cfg),
      layer1_(store, name + ".layer1", cfg.input_dim, cfg.layer1_hidden, rng),
      layer2_(store, name + ".layer2", layer1_.output_size(), cfg.layer2_hidden, rng),
      layer3_(store, name + ".layer3", cfg.layer2_hidden, cfg.layer3_hidden, rng) {
  if (cfg.stride == 0) throw ConfigError("downsampling stride must be >= 1");
}

Var SpeechEncoder::encode(Tape& tape, const Tensor& features, const ForwardContext& ctx) const {
  if (features.rank() != 2 || features.cols() != cfg_.input_dim)
    throw ShapeError("encode_speech: features " + shape_str(features.shape()) + " but encoder expects [N x " +
                     std::to_string(cfg_.input_dim) + "]");
  if (features.rows() < kMinFrames)
    throw ContractError("encode_speech: need at least " + std::to_string(kMinFrames) +
                        " frames, got " + std::to_string(features.rows()));
  const Var frames = tape.constant(features);
  std::vector<Var> xs;
  xs.reserve(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i)
    xs.push_back(ctx.apply_dropout(ops::pick_row(frames, i)));
  auto h1 = layer1_.run(tape, xs);
  auto h2 = layer2_.run(tape, every_nth(h1, cfg_.stride));
  auto h3 = layer3_.run(tape, every_nth(h2, cfg_.stride));
  return ops::stack_rows(h3);
}

VocabProjection::VocabProjection(ParameterStore& store, const std::string& name,
                                 std::size_t state_dim, std::size_t vocab, std::mt19937_64& rng)
    : linear_(store, name, state_dim, vocab, rng) {}

Var VocabProjection::operator()(Tape& tape, Var state) const {
  return ops::log_softmax(linear_(tape, state));
}

}  // namespace mtseq::nn
