#pragma once

#include <string>
#include <vector>

namespace mtseq::eval {

using Symbols = std::vector<std::string>;

// Precision/recall/F in percent.
struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

PRF make_prf(double precision, double recall);

std::size_t edit_distance(const Symbols& hyp, const Symbols& ref);

// Levenshtein(hyp, ref) / |ref| * 100 with unit costs.
double cer(const Symbols& hyp, const Symbols& ref);
// Corpus-level: total edits over total reference length.
double corpus_cer(const std::vector<Symbols>& hyps, const std::vector<Symbols>& refs);

// Corpus BLEU (x100), unsmoothed, geometric mean of 1..max_order precisions
// with brevity penalty. Works on any symbol granularity.
double bleu(const std::vector<Symbols>& hyps, const std::vector<Symbols>& refs,
            std::size_t max_order = 4);

// Splits a UTF-8 line into characters. Whitespace characters are kept as
// tokens unless `keep_whitespace` is false.
Symbols utf8_chars(const std::string& line, bool keep_whitespace = true);

double char_bleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs,
                 bool keep_whitespace = true);
double word_bleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs);

// A segmented utterance: the symbol sequence plus cut positions. Cut k sits
// between symbol k-1 and symbol k, so valid cuts lie in [1, size).
struct Segmentation {
  Symbols symbols;
  std::vector<std::size_t> cuts;

  std::vector<Symbols> words() const;
  // [begin, end) symbol spans of every word.
  std::vector<std::pair<std::size_t, std::size_t>> spans() const;
  void validate() const;
};

// "a b | c d": space-separated symbols, "|" marks a cut.
Segmentation parse_segmentation(const std::string& line);
std::string format_segmentation(const Segmentation& s);

struct WordDiscoveryScores {
  PRF tokens;
  PRF types;
};

// Token level: a discovered word counts iff both of its boundaries match a
// gold word of the same utterance. Type level: distinct discovered word
// strings against distinct gold word strings.
WordDiscoveryScores word_discovery_prf(const std::vector<Segmentation>& hyp,
                                       const std::vector<Segmentation>& gold);

}  // namespace mtseq::eval
