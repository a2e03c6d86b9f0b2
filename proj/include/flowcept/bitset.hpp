#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <vector>

namespace flowcept {

/* Set of small non-negative integers packed into 64-bit words.
 *
 * Trailing zero words are trimmed after every mutation, so equality and
 * hashing are representation-independent and bits beyond the stored words
 * read as 0.  That implicit zero-extension is what lets extents and intents
 * keep working unchanged when the context later grows by a flow or a
 * matchfield column. */
class Bitset {
public:
  Bitset() = default;

  static Bitset single(uint32_t i) {
    Bitset b;
    b.set(i);
    return b;
  }

  // {0, 1, ..., n-1}
  static Bitset all_below(uint32_t n) {
    Bitset b;
    if (n == 0) return b;
    b.words_.assign((n + 63) / 64, ~uint64_t{0});
    uint32_t rem = n % 64;
    if (rem) b.words_.back() = (uint64_t{1} << rem) - 1;
    return b;
  }

  static Bitset of(std::initializer_list<uint32_t> xs) {
    Bitset b;
    for (uint32_t x : xs) b.set(x);
    return b;
  }

  template <typename Iterable>
  static Bitset of_range(const Iterable& xs) {
    Bitset b;
    for (uint32_t x : xs) b.set(x);
    return b;
  }

  bool test(uint32_t i) const {
    size_t w = i / 64;
    if (w >= words_.size()) return false;
    return (words_[w] >> (i % 64)) & 1;
  }

  void set(uint32_t i) {
    size_t w = i / 64;
    if (w >= words_.size()) words_.resize(w + 1, 0);
    words_[w] |= uint64_t{1} << (i % 64);
  }

  void reset(uint32_t i) {
    size_t w = i / 64;
    if (w >= words_.size()) return;
    words_[w] &= ~(uint64_t{1} << (i % 64));
    trim();
  }

  void clear() { words_.clear(); }
  bool empty() const { return words_.empty(); }

  size_t count() const {
    size_t n = 0;
    for (uint64_t w : words_) n += std::popcount(w);
    return n;
  }

  // -1 when empty
  int64_t highest() const {
    if (words_.empty()) return -1;
    uint64_t last = words_.back();
    return int64_t(words_.size() - 1) * 64 + (63 - std::countl_zero(last));
  }

  bool subset_of(const Bitset& o) const {
    if (words_.size() > o.words_.size()) return false;
    for (size_t i = 0; i < words_.size(); ++i)
      if (words_[i] & ~o.words_[i]) return false;
    return true;
  }

  bool intersects(const Bitset& o) const {
    size_t n = std::min(words_.size(), o.words_.size());
    for (size_t i = 0; i < n; ++i)
      if (words_[i] & o.words_[i]) return true;
    return false;
  }

  Bitset& operator&=(const Bitset& o) {
    if (words_.size() > o.words_.size()) words_.resize(o.words_.size());
    for (size_t i = 0; i < words_.size(); ++i) words_[i] &= o.words_[i];
    trim();
    return *this;
  }

  Bitset& operator|=(const Bitset& o) {
    if (words_.size() < o.words_.size()) words_.resize(o.words_.size(), 0);
    for (size_t i = 0; i < o.words_.size(); ++i) words_[i] |= o.words_[i];
    return *this;
  }

  // set difference
  Bitset& and_not(const Bitset& o) {
    size_t n = std::min(words_.size(), o.words_.size());
    for (size_t i = 0; i < n; ++i) words_[i] &= ~o.words_[i];
    trim();
    return *this;
  }

  friend Bitset operator&(Bitset a, const Bitset& b) {
    a &= b;
    return a;
  }

  friend Bitset operator|(Bitset a, const Bitset& b) {
    a |= b;
    return a;
  }

  bool operator==(const Bitset& o) const { return words_ == o.words_; }
  bool operator!=(const Bitset& o) const { return words_ != o.words_; }

  // arbitrary but deterministic total order (for sorted containers)
  bool operator<(const Bitset& o) const {
    if (words_.size() != o.words_.size()) return words_.size() < o.words_.size();
    for (size_t i = words_.size(); i-- > 0;)
      if (words_[i] != o.words_[i]) return words_[i] < o.words_[i];
    return false;
  }

  template <typename F>
  void for_each(F f) const {
    for (size_t wi = 0; wi < words_.size(); ++wi) {
      uint64_t w = words_[wi];
      while (w) {
        uint32_t b = std::countr_zero(w);
        f(uint32_t(wi * 64 + b));
        w &= w - 1;
      }
    }
  }

  std::vector<uint32_t> indices() const {
    std::vector<uint32_t> out;
    out.reserve(count());
    for_each([&](uint32_t i) { out.push_back(i); });
    return out;
  }

  size_t hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (uint64_t w : words_) {
      h ^= w;
      h *= 0x100000001b3ull;
    }
    return size_t(h ^ (words_.size() << 1));
  }

private:
  void trim() {
    while (!words_.empty() && words_.back() == 0) words_.pop_back();
  }

  std::vector<uint64_t> words_;
};

}  // namespace flowcept

template <>
struct std::hash<flowcept::Bitset> {
  size_t operator()(const flowcept::Bitset& b) const { return b.hash(); }
};
