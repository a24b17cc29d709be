#include "mtseq/synthetic.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "mtseq/errors.hpp"

namespace mtseq::synthetic {

namespace {

std::string join(const eval::Symbols& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ' ';
    out += s[i];
  }
  return out;
}

std::size_t uniform(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace

Dataset generate(const Config& cfg) {
  if (cfg.alphabet < 2 || cfg.alphabet > 26) throw ConfigError("synthetic alphabet must be in [2, 26]");
  if (cfg.min_word == 0 || cfg.min_word > cfg.max_word || cfg.max_word > cfg.max_length)
    throw ConfigError("synthetic word lengths must satisfy 1 <= min <= max <= max_length");
  if (cfg.lexicon == 0) throw ConfigError("synthetic lexicon must be nonempty");

  std::mt19937_64 rng(cfg.seed);
  Dataset d;
  for (std::size_t i = 0; i < cfg.alphabet; ++i) d.alphabet.push_back(std::string(1, char('a' + i)));

  std::vector<std::size_t> pi(cfg.alphabet), sigma(cfg.alphabet);
  std::iota(pi.begin(), pi.end(), 0);
  std::iota(sigma.begin(), sigma.end(), 0);
  std::shuffle(pi.begin(), pi.end(), rng);
  std::shuffle(sigma.begin(), sigma.end(), rng);

  // Distinct spellings; capital letters keep the output sides visually apart.
  std::set<eval::Symbols> seen;
  std::size_t attempts = 0;
  while (d.lexicon.size() < cfg.lexicon) {
    if (++attempts > 100000) throw ConfigError("synthetic lexicon: not enough distinct spellings");
    eval::Symbols w(uniform(rng, cfg.min_word, cfg.max_word));
    for (auto& c : w) c = d.alphabet[uniform(rng, 0, cfg.alphabet - 1)];
    if (seen.insert(w).second) d.lexicon.push_back(w);
  }

  auto make = [&](const std::string& id) {
    Utterance u;
    u.id = id;
    // At least one word; keep adding while the next word still fits.
    for (;;) {
      const std::size_t w = uniform(rng, 0, cfg.lexicon - 1);
      const auto& spelling = d.lexicon[w];
      if (!u.words.empty() && u.chars.size() + spelling.size() > cfg.max_length) break;
      if (u.words.empty() && spelling.size() > cfg.max_length) continue;
      if (!u.chars.empty()) u.cuts.push_back(u.chars.size());
      u.chars.insert(u.chars.end(), spelling.begin(), spelling.end());
      u.words.push_back("w" + std::to_string(w));
      if (uniform(rng, 0, 3) == 0) break;
    }
    for (const auto& c : u.chars) {
      const std::size_t k = static_cast<std::size_t>(c[0] - 'a');
      u.y1.push_back(std::string(1, char('A' + pi[k])));
      u.y2.push_back(std::string(1, char('a' + sigma[pi[k]])) + "'");
    }
    return u;
  };
  for (std::size_t i = 0; i < cfg.train; ++i) d.train.push_back(make("train-" + std::to_string(i + 1)));
  for (std::size_t i = 0; i < cfg.dev; ++i) d.dev.push_back(make("dev-" + std::to_string(i + 1)));
  for (std::size_t i = 0; i < cfg.test; ++i) d.test.push_back(make("test-" + std::to_string(i + 1)));
  return d;
}

void write_dataset(const Dataset& data, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream os(fs::path(dir) / name);
    if (!os) throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
    return os;
  };
  auto write_split = [&](const std::string& split, const std::vector<Utterance>& us) {
    auto src = open(split + ".src"), y1 = open(split + ".y1"), y2 = open(split + ".y2"),
         ids = open(split + ".ids");
    auto wsrc = open("wd-" + split + ".src"), wy1 = open("wd-" + split + ".y1"),
         wids = open("wd-" + split + ".ids"), gold = open("wd-" + split + ".gold");
    for (const auto& u : us) {
      src << join(u.chars) << '\n';
      y1 << join(u.y1) << '\n';
      y2 << join(u.y2) << '\n';
      ids << u.id << '\n';
      wsrc << join(u.chars) << '\n';
      wy1 << join(u.words) << '\n';
      wids << u.id << '\n';
      gold << eval::format_segmentation(u.segmentation()) << '\n';
    }
  };
  write_split("train", data.train);
  write_split("dev", data.dev);
  write_split("test", data.test);
}

}  // namespace mtseq::synthetic
