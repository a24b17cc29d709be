#include "mtseq/word_discovery.hpp"

#include "mtseq/errors.hpp"

namespace mtseq::wd {

AttentionMatrix combine_matrices(const AttentionMatrix& a1, const AttentionMatrix& a12) {
  if (a1.rows() != a12.cols() || a1.cols() != a12.rows())
    throw ShapeError("combine_matrices: A1 is " + std::to_string(a1.rows()) + "x" +
                     std::to_string(a1.cols()) + " but A12^T is " + std::to_string(a12.cols()) +
                     "x" + std::to_string(a12.rows()));
  // rows = source symbols: A^T = A1^T + A12
  AttentionMatrix out(a12.rows(), a12.cols(), a12.weights());
  for (std::size_t n = 0; n < out.rows(); ++n)
    for (std::size_t m = 0; m < out.cols(); ++m) out.at(n, m) += a1.at(m, n);
  return out;
}

AttentionMatrix post_smooth(const AttentionMatrix& a) {
  if (a.cols() < 2) return a;
  AttentionMatrix out = a;
  const std::size_t last = a.cols() - 1;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    out.at(r, 0) = (a.at(r, 0) + a.at(r, 1)) / 2.0;
    out.at(r, last) = (a.at(r, last - 1) + a.at(r, last)) / 2.0;
    for (std::size_t c = 1; c < last; ++c)
      out.at(r, c) = (a.at(r, c - 1) + a.at(r, c) + a.at(r, c + 1)) / 3.0;
  }
  return out;
}

eval::Segmentation project_boundaries(const SoftAlignment& a) {
  const auto& m = a.matrix;
  if (!a.source.empty() && a.source.size() != m.rows())
    throw ShapeError("project_boundaries: " + std::to_string(a.source.size()) +
                     " source symbols for a matrix with " + std::to_string(m.rows()) + " rows");
  eval::Segmentation seg;
  seg.symbols = a.source;
  if (seg.symbols.empty())
    for (std::size_t i = 0; i < m.rows(); ++i) seg.symbols.push_back(std::to_string(i));
  std::size_t prev = 0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < m.cols(); ++c)
      if (m.at(r, c) > m.at(r, best)) best = c;
    if (r > 0 && best != prev) seg.cuts.push_back(r);
    prev = best;
  }
  return seg;
}

Direction parse_direction(const std::string& s) {
  if (s == "base") return Direction::base;
  if (s == "reverse") return Direction::reverse;
  throw ConfigError("unknown direction '" + s + "' (expected base or reverse)");
}

namespace {

AttentionMatrix crop(const AttentionMatrix& a, std::size_t rows, std::size_t cols) {
  std::vector<double> w;
  w.reserve(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) w.push_back(a.at(r, c));
  return {rows, cols, std::move(w)};
}

}  // namespace

eval::Segmentation discover_one(models::Model& model, const DiscoveryItem& item,
                                const DiscoverOptions& opt) {
  const auto& cfg = model.config();
  const bool recon = cfg.arch.kind == models::Architecture::cascade && cfg.arch.reconstruction;
  if (cfg.arch.kind != models::Architecture::single && !recon)
    throw ConfigError("word discovery needs a single-task or reconstruction model, got " +
                      models::to_string(cfg.arch.kind));
  const double saved_t = cfg.attention_temperature;
  if (opt.extraction_temperature > 0.0) model.set_attention_temperature(opt.extraction_temperature);
  Tape tape;
  models::ForwardResult r;
  try {
    r = model.forward(tape, item.triple, nn::ForwardContext{});
  } catch (...) {
    model.set_attention_temperature(saved_t);
    throw;
  }
  model.set_attention_temperature(saved_t);

  // Decoder-major matrix: rows are decoder steps, columns encoder positions.
  AttentionMatrix dec(r.a1.value());
  if (recon) dec = combine_matrices(dec, AttentionMatrix(r.a12.value())).transposed();

  const std::size_t n_sym = item.symbols.size();
  const std::size_t n_words = item.words.size();
  AttentionMatrix aligned;
  if (opt.direction == Direction::base) {
    // rows: words + EOS, cols: symbols + EOS
    if (dec.rows() != n_words + 1 || dec.cols() != n_sym + 1)
      throw ShapeError("discover: attention shape does not match the utterance");
    dec = crop(dec, opt.include_eos ? n_words + 1 : n_words, n_sym);
    if (opt.smooth) dec = post_smooth(dec);
    aligned = dec.transposed();
  } else {
    // rows: symbols + EOS, cols: words + EOS
    if (dec.rows() != n_sym + 1 || dec.cols() != n_words + 1)
      throw ShapeError("discover: attention shape does not match the utterance");
    dec = crop(dec, n_sym, opt.include_eos ? n_words + 1 : n_words);
    if (opt.smooth) dec = post_smooth(dec);
    aligned = dec;
  }
  std::vector<std::string> targets = item.words;
  if (opt.include_eos) targets.push_back("</s>");
  return project_boundaries({aligned, item.symbols, targets});
}

std::vector<eval::Segmentation> discover(models::Model& model,
                                         const std::vector<DiscoveryItem>& items,
                                         const DiscoverOptions& opt) {
  std::vector<eval::Segmentation> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(discover_one(model, it, opt));
  return out;
}

}  // namespace mtseq::wd
