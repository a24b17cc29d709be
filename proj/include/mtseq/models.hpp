#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mtseq/attention.hpp"
#include "mtseq/nn.hpp"
#include "mtseq/vocab.hpp"

namespace mtseq::models {

enum class Architecture { single, multitask, cascade, triangle };
enum class SourceKind { text, speech };

std::string to_string(Architecture a);
Architecture parse_architecture(const std::string& s);
std::string to_string(SourceKind k);
SourceKind parse_source_kind(const std::string& s);

struct ArchitectureConfig {
  Architecture kind = Architecture::single;
  // Cascade whose second target is the source sequence itself.
  bool reconstruction = false;
};

// Weight applied to a regularizer when it is switched on without a value.
inline constexpr double kDefaultRegularizerWeight = 0.2;

struct ScoreConfig {
  double lambda = 0.5;
  double trans_weight = 0.0;
  double inv_weight = 0.0;
};

struct ModelConfig {
  ArchitectureConfig arch;
  SourceKind source = SourceKind::text;
  std::size_t source_vocab = 0;
  std::size_t target1_vocab = 0;
  std::size_t target2_vocab = 0;
  std::size_t source_embed = 64;
  std::size_t target1_embed = 64;
  std::size_t target2_embed = 64;
  std::size_t encoder_hidden = 64;
  std::size_t encoder_layers = 1;
  nn::SpeechEncoderConfig speech;
  std::size_t decoder_hidden = 64;
  std::size_t decoder_layers = 1;
  std::size_t attention_dim = 64;
  double attention_temperature = 1.0;

  bool two_decoders() const { return arch.kind != Architecture::single; }
};

// Throws ConfigError for inconsistent settings, e.g. a transitivity weight
// on an architecture that has no A2 matrix.
void validate(const ModelConfig& model, const ScoreConfig& score);

// Source side of an utterance: token IDs (text) or a frame matrix (speech).
// Text tokens do not carry the end marker; the encoder appends it.
struct Source {
  std::vector<int> tokens;
  Tensor features;

  bool is_speech() const { return tokens.empty(); }
  std::size_t length() const { return is_speech() ? features.rows() : tokens.size(); }
};

// (X, Y1, Y2). Both targets end with EOS; Y2 is empty for single-task data.
struct SentenceTriple {
  std::string id;
  Source x;
  std::vector<int> y1;
  std::vector<int> y2;
};

using attention::AttentionLayer;

// Attentional LSTM decoder. The query for every attention layer is the
// previous top-layer state; the contexts of all attention layers are
// concatenated with the previous-token embedding to form the LSTM input.
class Decoder {
 public:
  struct State {
    std::vector<nn::LstmState> layers;
    Var output;  // top-layer hidden state
  };
  struct Step {
    State state;
    std::vector<Var> weights;  // one attention row per memory
    Var log_probs;
  };
  struct Trace {
    Var log_prob;                            // sum over target positions
    std::vector<Var> outputs;                // s_1 .. s_M
    std::vector<std::vector<Var>> weights;   // [memory][step] attention rows
  };

  Decoder() = default;
  Decoder(nn::ParameterStore& store, const std::string& name, std::size_t vocab,
          std::size_t embed_dim, std::size_t hidden, std::size_t layers,
          const std::vector<std::size_t>& memory_dims, std::size_t attention_dim,
          double temperature, std::mt19937_64& rng);

  State initial(Tape& tape) const;
  Step step(Tape& tape, const State& prev, int prev_token,
            const std::vector<AttentionLayer::Memory>& memories,
            const nn::ForwardContext& ctx) const;
  // Teacher-forced pass: feeds BOS, y_1 .. y_{M-1} and scores y_1 .. y_M.
  Trace force(Tape& tape, const std::vector<int>& targets,
              const std::vector<AttentionLayer::Memory>& memories,
              const nn::ForwardContext& ctx) const;
  std::vector<AttentionLayer::Memory> prepare(Tape& tape, const std::vector<Var>& keys) const;

  std::size_t vocab_size() const { return projection_.vocab_size(); }
  std::size_t hidden_size() const { return hidden_; }
  std::size_t memory_count() const { return attentions_.size(); }
  void set_temperature(double t);

 private:
  nn::EmbeddingTable embedding_;
  std::vector<AttentionLayer> attentions_;
  std::vector<nn::LstmCell> cells_;
  nn::VocabProjection projection_;
  std::size_t hidden_ = 0;
};

// Everything one forward pass produces. Fields an architecture does not
// define are left invalid.
struct ForwardResult {
  Var logp1;
  Var logp2;
  Var a1;   // M1 x N
  Var a2;   // M2 x N
  Var a12;  // M2 x M1
  Var encoder_states;  // H
  Var first_states;    // S1
};

class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }
  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }

  Var encode(Tape& tape, const Source& x, const nn::ForwardContext& ctx) const;
  std::size_t encoder_output_size() const;

  ForwardResult forward(Tape& tape, const SentenceTriple& t, const nn::ForwardContext& ctx) const;
  ForwardResult forward_single(Tape& tape, const SentenceTriple& t,
                               const nn::ForwardContext& ctx) const;
  ForwardResult forward_multitask(Tape& tape, const SentenceTriple& t,
                                  const nn::ForwardContext& ctx) const;
  ForwardResult forward_cascade(Tape& tape, const SentenceTriple& t,
                                const nn::ForwardContext& ctx) const;
  ForwardResult forward_triangle(Tape& tape, const SentenceTriple& t,
                                 const nn::ForwardContext& ctx) const;

  // Memories the second decoder attends to, in context-concatenation order.
  std::vector<Var> second_memories(Var encoder_states, Var first_states) const;

  const Decoder& first_decoder() const { return dec1_; }
  const Decoder& second_decoder() const { return dec2_; }
  // Applies to every attention layer (word-discovery smoothing).
  void set_attention_temperature(double t);

 private:
  ModelConfig cfg_;
  nn::ParameterStore store_;
  nn::TextEncoder text_encoder_;
  nn::SpeechEncoder speech_encoder_;
  Decoder dec1_;
  Decoder dec2_;
};

double score_triple(double logp1, double logp2, const ScoreConfig& cfg);
Var score_triple(Var logp1, Var logp2, const ScoreConfig& cfg);
// score - weight * ||A12 A1 - A2||_F^2
Var loss_transitivity(Var score, Var a1, Var a2, Var a12, double weight);
// score - weight * ||A1 A12 - I||_F^2
Var loss_invertibility(Var score, Var a1, Var a12, double weight);

double transitivity_penalty(const Tensor& a1, const Tensor& a2, const Tensor& a12);
double invertibility_penalty(const Tensor& a1, const Tensor& a12);

// Full training objective (to be maximized) for the model's architecture.
Var objective(const ForwardResult& r, const ModelConfig& model, const ScoreConfig& score);

}  // namespace mtseq::models
