#include "mtseq/corpus.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "mtseq/errors.hpp"
#include "mtseq/feature_file.hpp"

namespace mtseq::corpus {

namespace fs = std::filesystem;

CorpusPaths paths_for_prefix(const std::string& prefix) {
  CorpusPaths p{prefix + ".src", prefix + ".y1", "", ""};
  if (fs::exists(prefix + ".y2")) p.target2 = prefix + ".y2";
  if (fs::exists(prefix + ".ids")) p.ids = prefix + ".ids";
  return p;
}

std::vector<std::string> split_symbols(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

Corpus load_parallel(const CorpusPaths& paths, models::SourceKind kind, const std::string& split) {
  const auto src = read_lines(paths.source);
  const auto y1 = read_lines(paths.target1);
  auto mismatch = [&](const std::string& other, std::size_t n) {
    return FormatError("line count mismatch: " + paths.source + " has " + std::to_string(src.size()) +
                       " lines, " + other + " has " + std::to_string(n));
  };
  if (y1.size() != src.size()) throw mismatch(paths.target1, y1.size());
  std::vector<std::string> y2, ids;
  if (!paths.target2.empty()) {
    y2 = read_lines(paths.target2);
    if (y2.size() != src.size()) throw mismatch(paths.target2, y2.size());
  }
  if (!paths.ids.empty()) {
    ids = read_lines(paths.ids);
    if (ids.size() != src.size()) throw mismatch(paths.ids, ids.size());
  }
  Corpus c;
  c.split = split;
  c.kind = kind;
  c.has_target2 = !paths.target2.empty();
  const fs::path base = fs::path(paths.source).parent_path();
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < src.size(); ++i) {
    Utterance u;
    u.id = ids.empty() ? split + "-" + std::to_string(i + 1) : ids[i];
    if (!seen.insert(u.id).second) throw FormatError("duplicate utterance id '" + u.id + "' in " + split);
    if (kind == models::SourceKind::text) {
      u.source = split_symbols(src[i]);
      if (u.source.empty())
        throw FormatError(paths.source + ":" + std::to_string(i + 1) + ": empty source line");
    } else {
      const fs::path p(src[i]);
      u.feature_path = p.is_absolute() ? p.string() : (base / p).string();
    }
    u.target1 = split_symbols(y1[i]);
    if (c.has_target2) u.target2 = split_symbols(y2[i]);
    c.utterances.push_back(std::move(u));
  }
  return c;
}

VocabSet build_vocabs(const Corpus& train, bool reconstruction) {
  if (train.utterances.empty()) throw ContractError("cannot build vocabularies from an empty split");
  VocabSet v;
  for (const auto& u : train.utterances) {
    for (const auto& s : u.source) v.source.add(s);
    for (const auto& s : u.target1) v.target1.add(s);
    for (const auto& s : u.target2) v.target2.add(s);
  }
  if (reconstruction) v.target2 = v.source;
  return v;
}

std::vector<models::SentenceTriple> encode(const Corpus& corpus, const VocabSet& vocab,
                                           bool reconstruction) {
  std::vector<models::SentenceTriple> out;
  out.reserve(corpus.size());
  for (const auto& u : corpus.utterances) {
    models::SentenceTriple t;
    t.id = u.id;
    if (corpus.kind == models::SourceKind::text)
      t.x.tokens = vocab.source.encode(u.source);
    else
      t.x.features = read_feature_file(u.feature_path);
    t.y1 = vocab.target1.encode(u.target1);
    t.y1.push_back(kEos);
    if (reconstruction) {
      t.y2 = t.x.tokens;
      t.y2.push_back(kEos);
    } else if (corpus.has_target2) {
      t.y2 = vocab.target2.encode(u.target2);
      t.y2.push_back(kEos);
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Fold> read_fold_manifest(const std::string& path) {
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    const fs::path fp(p);
    return fp.is_absolute() ? p : (base / fp).string();
  };
  std::vector<Fold> folds;
  std::size_t lineno = 0;
  for (const auto& raw : read_lines(path)) {
    ++lineno;
    const auto hash = raw.find('#');
    const auto toks = split_symbols(raw.substr(0, hash));
    if (toks.empty()) continue;
    if (toks.size() != 4)
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": expected '<name> <train> <dev> <test>'");
    folds.push_back({toks[0], resolve(toks[1]), resolve(toks[2]), resolve(toks[3])});
  }
  if (folds.empty()) throw FormatError(path + ": no folds");
  return folds;
}

}  // namespace mtseq::corpus
