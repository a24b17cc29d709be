#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace mtseq {

inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kUnk = 3;
inline constexpr int kReservedSymbols = 4;

// Symbol <-> ID map. IDs 0..3 are PAD, BOS, EOS, UNK; everything else is
// assigned in first-seen order over the training side it was built from.
class Vocabulary {
 public:
  Vocabulary();

  static Vocabulary build(const std::vector<std::vector<std::string>>& sentences);
  static Vocabulary from_symbols(const std::vector<std::string>& symbols);

  int add(const std::string& symbol);
  int id(const std::string& symbol) const;
  const std::string& symbol(int id) const;
  bool contains(const std::string& symbol) const { return ids_.count(symbol) > 0; }
  std::size_t size() const { return symbols_.size(); }

  std::vector<int> encode(const std::vector<std::string>& symbols) const;
  // Drops reserved IDs (EOS, padding, ...) except UNK.
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  // Non-reserved symbols in ID order.
  std::vector<std::string> symbols() const;

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace mtseq
