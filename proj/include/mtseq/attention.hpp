#pragma once

#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "mtseq/nn.hpp"

namespace mtseq::attention {

// Row-stochastic alignment weights: rows are decoder steps, columns are the
// attended states.
class AttentionMatrix {
 public:
  AttentionMatrix() = default;
  AttentionMatrix(std::size_t rows, std::size_t cols, std::vector<double> weights);
  explicit AttentionMatrix(const Tensor& t);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double at(std::size_t r, std::size_t c) const { return weights_[r * cols_ + c]; }
  double& at(std::size_t r, std::size_t c) { return weights_[r * cols_ + c]; }
  const std::vector<double>& weights() const { return weights_; }

  Tensor to_tensor() const;
  AttentionMatrix transposed() const;
  // Largest |row sum - 1| over all rows.
  double max_row_deviation() const;
  bool is_row_stochastic(double tol = 1e-9) const;

  // Text form: "M N" on the first line, then M lines of N decimals.
  void write_text(std::ostream& os) const;
  static AttentionMatrix read_text(std::istream& is);
  void save(const std::string& path) const;
  static AttentionMatrix load(const std::string& path);

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> weights_;
};

// Additive (MLP) scoring: score_n = v . tanh(Wk k_n + Wq q), weights are the
// temperature softmax of the scores.
class AttentionLayer {
 public:
  struct Memory {
    Var keys;       // [N x D]
    Var keys_t;     // [D x N]
    Var projected;  // [N x A]
    std::size_t length = 0;
  };
  struct Result {
    Var context;  // [D]
    Var weights;  // [N]
  };

  AttentionLayer() = default;
  AttentionLayer(nn::ParameterStore& store, const std::string& name, std::size_t query_dim,
                 std::size_t key_dim, std::size_t attention_dim, std::mt19937_64& rng,
                 double temperature = 1.0);

  // Key-side work shared by every decoder step over the same memory.
  Memory prepare(Tape& tape, Var keys) const;
  Result attend(Tape& tape, const Memory& memory, Var query) const;
  Result attend(Tape& tape, Var query, Var keys) const;

  double temperature() const { return temperature_; }
  void set_temperature(double t);
  std::size_t key_dim() const { return key_dim_; }

 private:
  Tensor* query_proj_ = nullptr;
  Tensor* key_proj_ = nullptr;
  Tensor* score_vec_ = nullptr;
  std::size_t query_dim_ = 0, key_dim_ = 0;
  double temperature_ = 1.0;
};

// Half-open block [row_begin, row_end) x [col_begin, col_end).
struct Span {
  std::size_t row_begin = 0, row_end = 0;
  std::size_t col_begin = 0, col_end = 0;
};

// Fraction of the total attention mass falling inside the union of spans.
double attention_mass_in_spans(const AttentionMatrix& a, const std::vector<Span>& spans);

}  // namespace mtseq::attention
