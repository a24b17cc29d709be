#pragma once

#include <string>
#include <vector>

#include "mtseq/attention.hpp"
#include "mtseq/evaluation.hpp"
#include "mtseq/models.hpp"

namespace mtseq::wd {

using attention::AttentionMatrix;

// Soft alignment with rows = source symbols, columns = target words.
struct SoftAlignment {
  AttentionMatrix matrix;
  std::vector<std::string> source;
  std::vector<std::string> target;
};

// A = A1 + A12^T, returned with rows = source symbols (i.e. transposed).
// a1 is M1 x N (target words x source symbols), a12 is N x M1.
AttentionMatrix combine_matrices(const AttentionMatrix& a1, const AttentionMatrix& a12);

// Three-point moving average along each row; edge cells average the two
// values that exist. Single-column matrices are returned unchanged.
AttentionMatrix post_smooth(const AttentionMatrix& a);

// Assigns every source symbol (row) to its argmax target word, lower index on
// ties, and cuts wherever consecutive symbols change word.
eval::Segmentation project_boundaries(const SoftAlignment& a);

enum class Direction { base, reverse };
Direction parse_direction(const std::string& s);

struct DiscoverOptions {
  Direction direction = Direction::base;
  bool smooth = true;
  // Keep the target end-of-sentence column in the argmax.
  bool include_eos = false;
  // If > 0, overrides the model's attention temperature for extraction.
  double extraction_temperature = 0.0;
};

// One utterance for discovery. Base direction: x = unsegmented symbols,
// y1 = target words. Reverse direction: x = words, y1 = the symbols.
// Reconstruction models additionally carry y2 = x + EOS.
struct DiscoveryItem {
  models::SentenceTriple triple;
  std::vector<std::string> symbols;  // the unsegmented side, as strings
  std::vector<std::string> words;    // the word side, as strings
};

// Extracts the teacher-forced attention and turns it into a segmentation of
// the symbol side. Single-task models use A1; reconstruction models use
// A1 + A12^T.
eval::Segmentation discover_one(models::Model& model, const DiscoveryItem& item,
                                const DiscoverOptions& opt);
std::vector<eval::Segmentation> discover(models::Model& model,
                                         const std::vector<DiscoveryItem>& items,
                                         const DiscoverOptions& opt);

}  // namespace mtseq::wd
