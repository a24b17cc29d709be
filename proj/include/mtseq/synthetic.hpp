#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtseq/evaluation.hpp"

namespace mtseq::synthetic {

// Toy transduction task with known alignments and word boundaries.
// Utterances are concatenations of lexicon words over a small alphabet.
// Y1 maps every character through a fixed permutation, Y2 maps Y1 through a
// second permutation, so A1, A12 and A2 are all diagonal for a perfect model.
struct Config {
  std::uint64_t seed = 7;
  std::size_t alphabet = 10;
  std::size_t lexicon = 12;
  std::size_t min_word = 2;
  std::size_t max_word = 4;
  std::size_t max_length = 12;  // characters per utterance
  std::size_t train = 1000;
  std::size_t dev = 100;
  std::size_t test = 100;
};

struct Utterance {
  std::string id;
  eval::Symbols chars;   // X
  eval::Symbols y1;      // pi(X)
  eval::Symbols y2;      // sigma(pi(X))
  eval::Symbols words;   // word tokens, e.g. "w3"
  std::vector<std::size_t> cuts;  // gold word boundaries in X

  eval::Segmentation segmentation() const { return {chars, cuts}; }
};

struct Dataset {
  std::vector<std::string> alphabet;
  std::vector<eval::Symbols> lexicon;  // spelling of word i
  std::vector<Utterance> train, dev, test;
};

Dataset generate(const Config& cfg);

// Writes <dir>/<split>.{src,y1,y2,ids} for the transduction task and
// <dir>/wd-<split>.{src,y1,ids,gold} for word discovery (X = characters,
// Y1 = word tokens, gold = segmented characters).
void write_dataset(const Dataset& data, const std::string& dir);

}  // namespace mtseq::synthetic
