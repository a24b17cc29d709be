#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mtseq/checkpoint.hpp"
#include "mtseq/models.hpp"

namespace mtseq::corpus {

struct Utterance {
  std::string id;
  std::vector<std::string> source;  // text symbols; empty for speech
  std::string feature_path;         // speech only
  std::vector<std::string> target1;
  std::vector<std::string> target2;
};

struct Corpus {
  std::string split;
  models::SourceKind kind = models::SourceKind::text;
  bool has_target2 = false;
  std::vector<Utterance> utterances;

  std::size_t size() const { return utterances.size(); }
};

struct CorpusPaths {
  std::string source;
  std::string target1;
  std::string target2;  // optional
  std::string ids;      // optional
};

// <prefix>.src, <prefix>.y1 and, when present, <prefix>.y2 and <prefix>.ids.
CorpusPaths paths_for_prefix(const std::string& prefix);

std::vector<std::string> split_symbols(const std::string& line);
std::vector<std::string> read_lines(const std::string& path);

// Loads line-aligned parallel files. For speech corpora each source line is a
// feature-file path, relative to the directory of the source list.
Corpus load_parallel(const CorpusPaths& paths, models::SourceKind kind,
                     const std::string& split = "train");

// Vocabularies from the training split. Reconstruction shares the source
// vocabulary for the second target.
VocabSet build_vocabs(const Corpus& train, bool reconstruction);

// Maps symbols to IDs, appends EOS to targets, and reads feature files.
// Reconstruction replaces the second target with the source sequence.
std::vector<models::SentenceTriple> encode(const Corpus& corpus, const VocabSet& vocab,
                                           bool reconstruction);

struct Fold {
  std::string name;
  std::string train;
  std::string dev;
  std::string test;
};

// One fold per line: "<name> <train-prefix> <dev-prefix> <test-prefix>";
// relative prefixes resolve against the manifest's directory; '#' comments.
std::vector<Fold> read_fold_manifest(const std::string& path);

}  // namespace mtseq::corpus
