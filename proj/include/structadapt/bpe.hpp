// Byte-level pair-merge subword vocabulary.
#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace structadapt::bpe {

inline constexpr int kPad = 0;
inline constexpr int kEos = 1;
inline constexpr int kMask = 2;
inline constexpr int kNumSpecials = 3;
inline constexpr int kByteBase = kNumSpecials;  // byte b has id kByteBase + b

/// Splits text into merge domains: a chunk starts at the beginning of the
/// text or at a space that is followed by a non-space. Concatenating the
/// chunks gives back the input.
inline std::vector<std::string_view> pre_split(std::string_view text) {
  std::vector<std::string_view> chunks;
  std::size_t start = 0;
  for (std::size_t i = 1; i < text.size(); ++i) {
    if (text[i] == ' ' && i + 1 < text.size() && text[i + 1] != ' ') {
      chunks.push_back(text.substr(start, i - start));
      start = i;
    }
  }
  if (start < text.size()) chunks.push_back(text.substr(start));
  return chunks;
}

class Vocabulary {
 public:
  Vocabulary() { reset_bytes(); }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::pair<int, int>>& merges() const { return merges_; }
  const std::string& token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
      throw std::out_of_range("unknown token id " + std::to_string(id));
    }
    return tokens_[id];
  }

  std::vector<int> encode(std::string_view text) const {
    std::vector<int> out;
    std::vector<int> word;
    for (auto chunk : pre_split(text)) {
      word.clear();
      for (unsigned char c : chunk) word.push_back(kByteBase + c);
      apply_merges(word);
      out.insert(out.end(), word.begin(), word.end());
    }
    return out;
  }

  /// Concatenates token bytes. Specials decode to nothing; ids outside the
  /// table throw.
  std::string decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
      const std::string& t = token(id);
      if (id >= kByteBase) out += t;
    }
    return out;
  }

  void save(std::ostream& os) const {
    os << "structadapt-bpe 1\n";
    os << "merges " << merges_.size() << "\n";
    for (auto [a, b] : merges_) os << hex(tokens_[a]) << ' ' << hex(tokens_[b]) << "\n";
    os << "tokens " << tokens_.size() << "\n";
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      os << i << ' ' << (i < kByteBase ? special_name(static_cast<int>(i)) : hex(tokens_[i]))
         << "\n";
    }
  }

  static Vocabulary load(std::istream& is) {
    Vocabulary v;
    std::string magic, kw;
    int version = 0;
    std::size_t n = 0;
    if (!(is >> magic >> version) || magic != "structadapt-bpe" || version != 1) {
      throw std::runtime_error("vocabulary: bad header");
    }
    if (!(is >> kw >> n) || kw != "merges") throw std::runtime_error("vocabulary: expected merges");
    for (std::size_t i = 0; i < n; ++i) {
      std::string a, b;
      if (!(is >> a >> b)) throw std::runtime_error("vocabulary: truncated merge list");
      v.add_merge(v.id_of(unhex(a)), v.id_of(unhex(b)));
    }
    std::size_t m = 0;
    if (!(is >> kw >> m) || kw != "tokens") throw std::runtime_error("vocabulary: expected tokens");
    if (m != v.tokens_.size()) throw std::runtime_error("vocabulary: token table size mismatch");
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t id;
      std::string t;
      if (!(is >> id >> t) || id != i) throw std::runtime_error("vocabulary: bad token row");
      std::string expect = i < kByteBase ? special_name(static_cast<int>(i)) : hex(v.tokens_[i]);
      if (t != expect) throw std::runtime_error("vocabulary: token table disagrees with merges");
    }
    return v;
  }

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    save(os);
  }
  static Vocabulary load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path);
    return load(is);
  }

  bool operator==(const Vocabulary& o) const { return merges_ == o.merges_ && tokens_ == o.tokens_; }

 private:
  friend Vocabulary train_vocab(const std::vector<std::string>&, std::size_t);

  void reset_bytes() {
    tokens_ = {"<pad>", "</s>", "<mask>"};
    for (int b = 0; b < 256; ++b) tokens_.push_back(std::string(1, static_cast<char>(b)));
    ids_.clear();
    for (std::size_t i = kByteBase; i < tokens_.size(); ++i) ids_[tokens_[i]] = static_cast<int>(i);
    merges_.clear();
    rank_.clear();
  }

  int id_of(const std::string& t) const {
    auto it = ids_.find(t);
    if (it == ids_.end()) throw std::runtime_error("vocabulary: unknown merge operand");
    return it->second;
  }

  void add_merge(int a, int b) {
    std::string t = tokens_[a] + tokens_[b];
    rank_[key(a, b)] = static_cast<int>(merges_.size());
    merges_.emplace_back(a, b);
    if (!ids_.count(t)) {
      ids_[t] = static_cast<int>(tokens_.size());
      tokens_.push_back(t);
    }
    merged_id_[key(a, b)] = ids_[t];
  }

  static std::uint64_t key(int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
  }

  void apply_merges(std::vector<int>& word) const {
    while (word.size() > 1) {
      int best = -1;
      std::size_t at = 0;
      for (std::size_t i = 0; i + 1 < word.size(); ++i) {
        auto it = rank_.find(key(word[i], word[i + 1]));
        if (it != rank_.end() && (best < 0 || it->second < best)) {
          best = it->second;
          at = i;
        }
      }
      if (best < 0) break;
      int a = word[at], b = word[at + 1];
      int merged = merged_id_.at(key(a, b));
      std::vector<int> next;
      next.reserve(word.size());
      for (std::size_t i = 0; i < word.size(); ++i) {
        if (i + 1 < word.size() && word[i] == a && word[i + 1] == b) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(word[i]);
        }
      }
      word.swap(next);
    }
  }

  static std::string special_name(int id) {
    switch (id) {
      case kPad: return "<pad>";
      case kEos: return "</s>";
      default: return "<mask>";
    }
  }
  static std::string hex(const std::string& s) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned char c : s) {
      out += digits[c >> 4];
      out += digits[c & 15];
    }
    return out;
  }
  static std::string unhex(const std::string& s) {
    if (s.size() % 2) throw std::runtime_error("vocabulary: odd hex string");
    std::string out;
    for (std::size_t i = 0; i < s.size(); i += 2) {
      out += static_cast<char>(std::stoi(s.substr(i, 2), nullptr, 16));
    }
    return out;
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  std::vector<std::pair<int, int>> merges_;
  std::unordered_map<std::uint64_t, int> rank_;
  std::unordered_map<std::uint64_t, int> merged_id_;
};

/// Greedy most-frequent-pair merging until the table reaches `target_size`
/// or no pair occurs twice. Ties go to the lexicographically smallest pair
/// of token strings.
inline Vocabulary train_vocab(const std::vector<std::string>& corpus, std::size_t target_size) {
  if (corpus.empty()) throw std::invalid_argument("train_vocab: empty corpus");
  if (target_size < 256 + kNumSpecials) {
    throw std::invalid_argument("train_vocab: target size below byte alphabet plus specials");
  }
  Vocabulary v;
  std::map<std::string, std::size_t> chunk_counts;
  for (const auto& line : corpus) {
    for (auto c : pre_split(line)) ++chunk_counts[std::string(c)];
  }
  std::vector<std::pair<std::vector<int>, std::size_t>> words;
  for (const auto& [chunk, count] : chunk_counts) {
    std::vector<int> w;
    for (unsigned char c : chunk) w.push_back(kByteBase + c);
    words.emplace_back(std::move(w), count);
  }
  while (v.size() < target_size) {
    std::unordered_map<std::uint64_t, std::size_t> pair_counts;
    for (const auto& [w, count] : words) {
      for (std::size_t i = 0; i + 1 < w.size(); ++i) pair_counts[Vocabulary::key(w[i], w[i + 1])] += count;
    }
    std::uint64_t best_key = 0;
    std::size_t best_count = 0;
    for (const auto& [k, c] : pair_counts) {
      if (c > best_count) {
        best_key = k;
        best_count = c;
      } else if (c == best_count && c > 0) {
        auto ka = static_cast<int>(k >> 32), kb = static_cast<int>(k & 0xffffffffu);
        auto ba = static_cast<int>(best_key >> 32), bb = static_cast<int>(best_key & 0xffffffffu);
        if (std::tie(v.tokens_[ka], v.tokens_[kb]) < std::tie(v.tokens_[ba], v.tokens_[bb])) {
          best_key = k;
        }
      }
    }
    if (best_count < 2) break;
    int a = static_cast<int>(best_key >> 32), b = static_cast<int>(best_key & 0xffffffffu);
    v.add_merge(a, b);
    int merged = v.merged_id_.at(best_key);
    for (auto& [w, count] : words) {
      std::vector<int> next;
      next.reserve(w.size());
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (i + 1 < w.size() && w[i] == a && w[i + 1] == b) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(w[i]);
        }
      }
      w.swap(next);
    }
  }
  return v;
}

}  // namespace structadapt::bpe
