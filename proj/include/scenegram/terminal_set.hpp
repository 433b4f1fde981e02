#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace scenegram {

/// Fixed-capacity bitset over terminal indices. A span of a parse node is
/// one of these; the capacity bounds the number of segments per scene.
class TerminalSet {
 public:
  static constexpr int kCapacity = 256;

  TerminalSet() = default;

  static TerminalSet single(int index) {
    TerminalSet s;
    s.insert(index);
    return s;
  }

  static TerminalSet first_n(int n) {
    TerminalSet s;
    for (int i = 0; i < n; ++i) s.insert(i);
    return s;
  }

  void insert(int index) {
    check(index);
    words_[index >> 6] |= std::uint64_t{1} << (index & 63);
  }

  void erase(int index) {
    check(index);
    words_[index >> 6] &= ~(std::uint64_t{1} << (index & 63));
  }

  bool contains(int index) const {
    if (index < 0 || index >= kCapacity) return false;
    return (words_[index >> 6] >> (index & 63)) & 1u;
  }

  int size() const {
    int n = 0;
    for (auto w : words_) n += std::popcount(w);
    return n;
  }

  bool empty() const {
    for (auto w : words_)
      if (w) return false;
    return true;
  }

  bool intersects(const TerminalSet& o) const {
    for (std::size_t i = 0; i < kWords; ++i)
      if (words_[i] & o.words_[i]) return true;
    return false;
  }

  TerminalSet operator|(const TerminalSet& o) const {
    TerminalSet r;
    for (std::size_t i = 0; i < kWords; ++i) r.words_[i] = words_[i] | o.words_[i];
    return r;
  }

  TerminalSet operator&(const TerminalSet& o) const {
    TerminalSet r;
    for (std::size_t i = 0; i < kWords; ++i) r.words_[i] = words_[i] & o.words_[i];
    return r;
  }

  TerminalSet& operator|=(const TerminalSet& o) {
    for (std::size_t i = 0; i < kWords; ++i) words_[i] |= o.words_[i];
    return *this;
  }

  bool operator==(const TerminalSet&) const = default;

  /// Lexicographic on words; only used for deterministic ordering.
  bool operator<(const TerminalSet& o) const { return words_ < o.words_; }

  /// Indices in increasing order.
  std::vector<int> indices() const {
    std::vector<int> out;
    for_each([&](int i) { out.push_back(i); });
    return out;
  }

  template <typename F>
  void for_each(F&& f) const {
    for (std::size_t w = 0; w < kWords; ++w) {
      std::uint64_t bits = words_[w];
      while (bits) {
        int b = std::countr_zero(bits);
        f(static_cast<int>(w * 64 + b));
        bits &= bits - 1;
      }
    }
  }

  std::size_t hash() const {
    std::size_t h = 0x9e3779b97f4a7c15ull;
    for (auto w : words_) {
      h ^= std::hash<std::uint64_t>{}(w) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
  }

 private:
  static constexpr std::size_t kWords = kCapacity / 64;

  static void check(int index) {
    if (index < 0 || index >= kCapacity) throw std::out_of_range("terminal index out of range");
  }

  std::array<std::uint64_t, kWords> words_{};
};

}  // namespace scenegram

template <>
struct std::hash<scenegram::TerminalSet> {
  std::size_t operator()(const scenegram::TerminalSet& s) const noexcept { return s.hash(); }
};
