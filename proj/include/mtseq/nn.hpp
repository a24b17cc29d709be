#pragma once

#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtseq/ops.hpp"
#include "mtseq/tape.hpp"

namespace mtseq::nn {

// Named, address-stable parameter storage. Components keep raw pointers to
// the tensors they own here.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
  };

  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Tensor& add(const std::string& name, Shape shape);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::deque<Entry>& entries() { return entries_; }
  const std::deque<Entry>& entries() const { return entries_; }
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::deque<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

void glorot_uniform(Tensor& t, std::mt19937_64& rng);

// Dropout switch threaded through every forward pass. Inference passes use
// the default (inactive) context.
struct ForwardContext {
  bool training = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  Var apply_dropout(Var x) const {
    if (!training || dropout == 0.0 || rng == nullptr) return x;
    return ops::dropout(x, dropout, *rng);
  }
};

class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
         std::mt19937_64& rng);
  Var operator()(Tape& tape, Var x) const;
  std::size_t in_dim() const { return in_; }
  std::size_t out_dim() const { return out_; }

 private:
  Tensor* weight_ = nullptr;
  Tensor* bias_ = nullptr;
  std::size_t in_ = 0, out_ = 0;
};

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(ParameterStore& store, const std::string& name, std::size_t vocab,
                 std::size_t dim, std::mt19937_64& rng);
  Var lookup(Tape& tape, std::size_t id) const;
  std::size_t vocab_size() const { return vocab_; }
  std::size_t dim() const { return dim_; }

 private:
  Tensor* table_ = nullptr;
  std::size_t vocab_ = 0, dim_ = 0;
};

struct LstmState {
  Var h;
  Var c;
};

// Single LSTM layer. The four gates (input, forget, output, candidate) share
// one stacked weight matrix [4H x (input + H)] and one bias [4H].
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(ParameterStore& store, const std::string& name, std::size_t input, std::size_t hidden,
           std::mt19937_64& rng);

  LstmState initial_state(Tape& tape) const;
  LstmState step(Tape& tape, const LstmState& prev, Var x) const;
  // Runs the cell over a sequence; returns the hidden state at every step.
  std::vector<Var> run(Tape& tape, const std::vector<Var>& inputs, bool reverse = false) const;

  std::size_t input_size() const { return input_; }
  std::size_t hidden_size() const { return hidden_; }
  std::size_t parameter_count() const { return 4 * (hidden_ * (input_ + hidden_) + hidden_); }

 private:
  Tensor* weight_ = nullptr;
  Tensor* bias_ = nullptr;
  std::size_t input_ = 0, hidden_ = 0;
};

// Forward and backward cells whose outputs are concatenated per position.
class BiLstm {
 public:
  BiLstm() = default;
  BiLstm(ParameterStore& store, const std::string& name, std::size_t input, std::size_t hidden,
         std::mt19937_64& rng);
  std::vector<Var> run(Tape& tape, const std::vector<Var>& inputs) const;
  std::size_t output_size() const { return 2 * forward_.hidden_size(); }

 private:
  LstmCell forward_;
  LstmCell backward_;
};

struct TextEncoderConfig {
  std::size_t vocab = 0;
  std::size_t embed_dim = 64;
  std::size_t hidden = 64;
  std::size_t layers = 1;
};

class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(ParameterStore& store, const std::string& name, const TextEncoderConfig& cfg,
              std::mt19937_64& rng);
  // Token IDs -> [N x 2H] matrix of concatenated forward/backward states.
  Var encode(Tape& tape, const std::vector<int>& tokens, const ForwardContext& ctx) const;
  std::size_t output_size() const { return 2 * cfg_.hidden; }

 private:
  TextEncoderConfig cfg_;
  EmbeddingTable embedding_;
  std::vector<BiLstm> layers_;
};

struct SpeechEncoderConfig {
  std::size_t input_dim = 39;
  std::size_t layer1_hidden = 128;  // per direction
  std::size_t layer2_hidden = 128;
  std::size_t layer3_hidden = 512;
  std::size_t stride = 2;
};

// Number of states left after the two downsampling stages.
std::size_t downsampled_length(std::size_t frames, std::size_t stride);

// Three-layer pyramidal encoder: a bidirectional layer over raw frames, then
// two unidirectional layers that each read every `stride`-th output of the
// layer below (indices 0, stride, 2*stride, ...).
class SpeechEncoder {
 public:
  static constexpr std::size_t kMinFrames = 4;

  SpeechEncoder() = default;
  SpeechEncoder(ParameterStore& store, const std::string& name, const SpeechEncoderConfig& cfg,
                std::mt19937_64& rng);
  Var encode(Tape& tape, const Tensor& features, const ForwardContext& ctx) const;
  std::size_t output_size() const { return cfg_.layer3_hidden; }
  const SpeechEncoderConfig& config() const { return cfg_; }

 private:
  SpeechEncoderConfig cfg_;
  BiLstm layer1_;
  LstmCell layer2_;
  LstmCell layer3_;
};

// Affine map to vocabulary scores followed by log-softmax.
class VocabProjection {
 public:
  VocabProjection() = default;
  VocabProjection(ParameterStore& store, const std::string& name, std::size_t state_dim,
                  std::size_t vocab, std::mt19937_64& rng);
  Var operator()(Tape& tape, Var state) const;
  std::size_t vocab_size() const { return linear_.out_dim(); }

 private:
  Linear linear_;
};

}  // namespace mtseq::nn
