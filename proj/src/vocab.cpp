#include "mtseq/vocab.hpp"

#include "mtseq/errors.hpp"

namespace mtseq {

Vocabulary::Vocabulary() : symbols_{"<pad>", "<s>", "</s>", "<unk>"} {
  for (int i = 0; i < kReservedSymbols; ++i) ids_.emplace(symbols_[i], i);
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& sentences) {
  Vocabulary v;
  for (const auto& s : sentences)
    for (const auto& sym : s) v.add(sym);
  return v;
}

Vocabulary Vocabulary::from_symbols(const std::vector<std::string>& symbols) {
  Vocabulary v;
  for (const auto& s : symbols) v.add(s);
  return v;
}

int Vocabulary::add(const std::string& symbol) {
  if (auto it = ids_.find(symbol); it != ids_.end()) return it->second;
  const int id = static_cast<int>(symbols_.size());
  symbols_.push_back(symbol);
  ids_.emplace(symbol, id);
  return id;
}

int Vocabulary::id(const std::string& symbol) const {
  auto it = ids_.find(symbol);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::symbol(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= symbols_.size())
    throw ContractError("vocabulary id " + std::to_string(id) + " out of range");
  return symbols_[id];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& symbols) const {
  std::vector<int> out;
  out.reserve(symbols.size());
  for (const auto& s : symbols) out.push_back(id(s));
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  for (int i : ids)
    if (i >= kReservedSymbols || i == kUnk) out.push_back(symbol(i));
  return out;
}

std::vector<std::string> Vocabulary::symbols() const {
  return {symbols_.begin() + kReservedSymbols, symbols_.end()};
}

}  // namespace mtseq
