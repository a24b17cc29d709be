#include "mtseq/attention.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>

#include "mtseq/errors.hpp"

namespace mtseq::attention {

AttentionMatrix::AttentionMatrix(std::size_t rows, std::size_t cols, std::vector<double> weights)
    : rows_(rows), cols_(cols), weights_(std::move(weights)) {
  if (weights_.size() != rows * cols)
    throw ShapeError("attention matrix " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " given " + std::to_string(weights_.size()) + " weights");
}

AttentionMatrix::AttentionMatrix(const Tensor& t)
    : AttentionMatrix(t.rows(), t.cols(), {t.values().begin(), t.values().end()}) {
  if (t.rank() != 2) throw ShapeError("attention matrix from non-matrix " + shape_str(t.shape()));
}

Tensor AttentionMatrix::to_tensor() const { return Tensor::matrix(rows_, cols_, weights_); }

AttentionMatrix AttentionMatrix::transposed() const {
  std::vector<double> w(weights_.size());
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) w[c * rows_ + r] = at(r, c);
  return {cols_, rows_, std::move(w)};
}

double AttentionMatrix::max_row_deviation() const {
  double worst = 0.0;
  for (std::size_t r = 0; r < rows_; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols_; ++c) s += at(r, c);
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

bool AttentionMatrix::is_row_stochastic(double tol) const {
  for (double w : weights_)
    if (w < 0.0) return false;
  return max_row_deviation() <= tol;
}

void AttentionMatrix::write_text(std::ostream& os) const {
  os << rows_ << ' ' << cols_ << '\n';
  os << std::setprecision(17);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) {
      if (c) os << ' ';
      os << at(r, c);
    }
    os << '\n';
  }
}

AttentionMatrix AttentionMatrix::read_text(std::istream& is) {
  std::size_t rows = 0, cols = 0;
  if (!(is >> rows >> cols)) throw FormatError("attention matrix: missing 'M N' header");
  std::vector<double> w(rows * cols);
  for (auto& x : w)
    if (!(is >> x)) throw FormatError("attention matrix: expected " + std::to_string(rows * cols) + " weights");
  return {rows, cols, std::move(w)};
}

void AttentionMatrix::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_text(os);
}

AttentionMatrix AttentionMatrix::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  return read_text(is);
}

AttentionLayer::AttentionLayer(nn::ParameterStore& store, const std::string& name,
                               std::size_t query_dim, std::size_t key_dim,
                               std::size_t attention_dim, std::mt19937_64& rng, double temperature)
    : query_dim_(query_dim), key_dim_(key_dim) {
  query_proj_ = &store.add(name + ".Wq", {attention_dim, query_dim});
  key_proj_ = &store.add(name + ".Wk", {attention_dim, key_dim});
  score_vec_ = &store.add(name + ".v", {attention_dim});
  nn::glorot_uniform(*query_proj_, rng);
  nn::glorot_uniform(*key_proj_, rng);
  const double limit = std::sqrt(6.0 / (attention_dim + 1.0));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : score_vec_->values()) v = dist(rng);
  set_temperature(temperature);
}

void AttentionLayer::set_temperature(double t) {
  if (!(t > 0.0)) throw ConfigError("attention temperature must be positive");
  temperature_ = t;
}

AttentionLayer::Memory AttentionLayer::prepare(Tape& tape, Var keys) const {
  const auto& kv = keys.value();
  if (kv.rank() != 2) throw ShapeError("attention keys must be a matrix, got " + shape_str(kv.shape()));
  if (kv.cols() != key_dim_)
    throw ShapeError("attention keys " + shape_str(kv.shape()) + " but layer expects key dim " +
                     std::to_string(key_dim_));
  Memory m;
  m.keys = keys;
  m.keys_t = ops::transpose(keys);
  m.projected = ops::transpose(ops::matmul(tape.parameter(*key_proj_), m.keys_t));
  m.length = kv.rows();
  return m;
}

AttentionLayer::Result AttentionLayer::attend(Tape& tape, const Memory& memory, Var query) const {
  if (memory.length == 0) throw ContractError("attend: empty memory");
  if (query.value().rank() != 1 || query.value().size() != query_dim_)
    throw ShapeError("attend: query " + shape_str(query.shape()) + " but layer expects [" +
                     std::to_string(query_dim_) + "]");
  const Var q = ops::matmul(tape.parameter(*query_proj_), query);
  const Var hidden = ops::tanh(ops::add_row_broadcast(memory.projected, q));
  const Var scores = ops::matmul(hidden, tape.parameter(*score_vec_));
  const Var weights = ops::softmax_temperature(scores, temperature_);
  return {ops::matmul(memory.keys_t, weights), weights};
}

AttentionLayer::Result AttentionLayer::attend(Tape& tape, Var query, Var keys) const {
  if (keys.value().rank() == 2 && keys.value().rows() == 0) throw ContractError("attend: N = 0");
  return attend(tape, prepare(tape, keys), query);
}

double attention_mass_in_spans(const AttentionMatrix& a, const std::vector<Span>& spans) {
  std::vector<char> covered(a.rows() * a.cols(), 0);
  for (const auto& s : spans) {
    if (s.row_begin > s.row_end || s.col_begin > s.col_end || s.row_end > a.rows() ||
        s.col_end > a.cols())
      throw ContractError("attention span [" + std::to_string(s.row_begin) + "," +
                          std::to_string(s.row_end) + ")x[" + std::to_string(s.col_begin) + "," +
                          std::to_string(s.col_end) + ") outside " + std::to_string(a.rows()) +
                          "x" + std::to_string(a.cols()) + " matrix");
    for (std::size_t r = s.row_begin; r < s.row_end; ++r)
      for (std::size_t c = s.col_begin; c < s.col_end; ++c) covered[r * a.cols() + c] = 1;
  }
  double inside = 0.0, total = 0.0;
  for (std::size_t i = 0; i < covered.size(); ++i) {
    total += a.weights()[i];
    if (covered[i]) inside += a.weights()[i];
  }
  return total > 0.0 ? inside / total : 0.0;
}

}  // namespace mtseq::attention
