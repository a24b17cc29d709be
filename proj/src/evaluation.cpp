#include "mtseq/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "mtseq/errors.hpp"

namespace mtseq::eval {

PRF make_prf(double precision, double recall) {
  PRF p{precision, recall, 0.0};
  if (precision + recall > 0.0) p.f = 2.0 * precision * recall / (precision + recall);
  return p;
}

std::size_t edit_distance(const Symbols& hyp, const Symbols& ref) {
  std::vector<std::size_t> prev(ref.size() + 1), cur(ref.size() + 1);
  for (std::size_t j = 0; j <= ref.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[ref.size()];
}

double cer(const Symbols& hyp, const Symbols& ref) {
  if (ref.empty()) throw ContractError("cer: empty reference");
  return 100.0 * static_cast<double>(edit_distance(hyp, ref)) / static_cast<double>(ref.size());
}

double corpus_cer(const std::vector<Symbols>& hyps, const std::vector<Symbols>& refs) {
  if (hyps.size() != refs.size()) throw ContractError("cer: hypothesis/reference count mismatch");
  std::size_t edits = 0, len = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    edits += edit_distance(hyps[i], refs[i]);
    len += refs[i].size();
  }
  if (len == 0) throw ContractError("cer: empty reference corpus");
  return 100.0 * static_cast<double>(edits) / static_cast<double>(len);
}

namespace {

using NGramCounts = std::map<Symbols, std::size_t>;

NGramCounts ngrams(const Symbols& s, std::size_t n) {
  NGramCounts out;
  if (s.size() < n) return out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++out[Symbols(s.begin() + i, s.begin() + i + n)];
  return out;
}

Symbols split_spaces(const std::string& line) {
  Symbols out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

}  // namespace

double bleu(const std::vector<Symbols>& hyps, const std::vector<Symbols>& refs,
            std::size_t max_order) {
  if (hyps.size() != refs.size()) throw ContractError("bleu: hypothesis/reference count mismatch");
  if (refs.empty()) throw ContractError("bleu: empty corpus");
  std::vector<double> matched(max_order, 0.0), total(max_order, 0.0);
  double hyp_len = 0.0, ref_len = 0.0;
  for (std::size_t k = 0; k < hyps.size(); ++k) {
    hyp_len += static_cast<double>(hyps[k].size());
    ref_len += static_cast<double>(refs[k].size());
    for (std::size_t n = 1; n <= max_order; ++n) {
      const auto h = ngrams(hyps[k], n);
      const auto r = ngrams(refs[k], n);
      for (const auto& [g, c] : h) {
        total[n - 1] += static_cast<double>(c);
        if (auto it = r.find(g); it != r.end())
          matched[n - 1] += static_cast<double>(std::min(c, it->second));
      }
    }
  }
  if (ref_len == 0.0) throw ContractError("bleu: references are empty");
  double log_sum = 0.0;
  for (std::size_t n = 0; n < max_order; ++n) {
    if (matched[n] == 0.0) return 0.0;
    log_sum += std::log(matched[n] / total[n]);
  }
  const double bp = hyp_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / hyp_len);
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(max_order));
}

Symbols utf8_chars(const std::string& line, bool keep_whitespace) {
  Symbols out;
  for (std::size_t i = 0; i < line.size();) {
    const auto c = static_cast<unsigned char>(line[i]);
    std::size_t len = 1;
    if (c >= 0xF0) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC0) len = 2;
    len = std::min(len, line.size() - i);
    std::string ch = line.substr(i, len);
    i += len;
    if (!keep_whitespace && len == 1 && std::isspace(c)) continue;
    out.push_back(std::move(ch));
  }
  return out;
}

double char_bleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs,
                 bool keep_whitespace) {
  std::vector<Symbols> h, r;
  for (const auto& s : hyps) h.push_back(utf8_chars(s, keep_whitespace));
  for (const auto& s : refs) r.push_back(utf8_chars(s, keep_whitespace));
  return bleu(h, r, 4);
}

double word_bleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs) {
  std::vector<Symbols> h, r;
  for (const auto& s : hyps) h.push_back(split_spaces(s));
  for (const auto& s : refs) r.push_back(split_spaces(s));
  return bleu(h, r, 4);
}

std::vector<Symbols> Segmentation::words() const {
  std::vector<Symbols> out;
  for (auto [b, e] : spans()) out.emplace_back(symbols.begin() + b, symbols.begin() + e);
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> Segmentation::spans() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (symbols.empty()) return out;
  std::size_t begin = 0;
  for (auto c : cuts) {
    out.emplace_back(begin, c);
    begin = c;
  }
  out.emplace_back(begin, symbols.size());
  return out;
}

void Segmentation::validate() const {
  std::size_t last = 0;
  for (auto c : cuts) {
    if (c <= last || c >= symbols.size())
      throw ContractError("segmentation cuts must be strictly increasing within (0, " +
                          std::to_string(symbols.size()) + ")");
    last = c;
  }
}

Segmentation parse_segmentation(const std::string& line) {
  Segmentation s;
  for (const auto& tok : split_spaces(line)) {
    if (tok == "|") {
      if (!s.symbols.empty() && (s.cuts.empty() || s.cuts.back() != s.symbols.size()))
        s.cuts.push_back(s.symbols.size());
    } else {
      s.symbols.push_back(tok);
    }
  }
  if (!s.cuts.empty() && s.cuts.back() == s.symbols.size()) s.cuts.pop_back();
  return s;
}

std::string format_segmentation(const Segmentation& s) {
  std::string out;
  std::size_t next = 0;
  for (std::size_t i = 0; i < s.symbols.size(); ++i) {
    if (next < s.cuts.size() && s.cuts[next] == i) {
      out += " |";
      ++next;
    }
    if (!out.empty()) out += ' ';
    out += s.symbols[i];
  }
  return out;
}

WordDiscoveryScores word_discovery_prf(const std::vector<Segmentation>& hyp,
                                       const std::vector<Segmentation>& gold) {
  if (hyp.size() != gold.size())
    throw ContractError("word discovery: " + std::to_string(hyp.size()) + " hypotheses vs " +
                        std::to_string(gold.size()) + " gold utterances");
  std::size_t hyp_tokens = 0, gold_tokens = 0, correct = 0;
  std::set<Symbols> hyp_types, gold_types;
  for (std::size_t u = 0; u < hyp.size(); ++u) {
    if (hyp[u].symbols.size() != gold[u].symbols.size())
      throw ContractError("word discovery: utterance " + std::to_string(u) +
                          " has different symbol counts in hypothesis and gold");
    const auto hs = hyp[u].spans();
    const auto gs = gold[u].spans();
    const std::set<std::pair<std::size_t, std::size_t>> gold_set(gs.begin(), gs.end());
    hyp_tokens += hs.size();
    gold_tokens += gs.size();
    for (const auto& s : hs) correct += gold_set.count(s);
    for (auto& w : hyp[u].words()) hyp_types.insert(std::move(w));
    for (auto& w : gold[u].words()) gold_types.insert(std::move(w));
  }
  std::size_t type_hits = 0;
  for (const auto& w : hyp_types) type_hits += gold_types.count(w);
  auto pct = [](std::size_t a, std::size_t b) { return b ? 100.0 * a / static_cast<double>(b) : 0.0; };
  WordDiscoveryScores out;
  out.tokens = make_prf(pct(correct, hyp_tokens), pct(correct, gold_tokens));
  out.types = make_prf(pct(type_hits, hyp_types.size()), pct(type_hits, gold_types.size()));
  return out;
}

}  // namespace mtseq::eval
