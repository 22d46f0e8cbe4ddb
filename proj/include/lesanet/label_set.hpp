#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace lesanet {

using LabelId = std::uint32_t;

// Fixed-width set of label ids, one bit per label of an ontology.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::size_t width)
      : width_(width), words_((width + 63) / 64, 0) {}

  static LabelSet of(std::size_t width, const std::vector<LabelId>& ids) {
    LabelSet s(width);
    for (LabelId id : ids) s.set(id);
    return s;
  }

  std::size_t width() const { return width_; }

  bool test(LabelId id) const {
    check(id);
    return (words_[id >> 6] >> (id & 63)) & 1u;
  }
  void set(LabelId id) {
    check(id);
    words_[id >> 6] |= std::uint64_t{1} << (id & 63);
  }
  void reset(LabelId id) {
    check(id);
    words_[id >> 6] &= ~(std::uint64_t{1} << (id & 63));
  }
  void clear() {
    for (auto& w : words_) w = 0;
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }
  bool empty() const {
    for (auto w : words_)
      if (w) return false;
    return true;
  }

  LabelSet& operator|=(const LabelSet& o) {
    same_width(o);
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= o.words_[i];
    return *this;
  }
  LabelSet& operator&=(const LabelSet& o) {
    same_width(o);
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= o.words_[i];
    return *this;
  }
  // Set difference.
  LabelSet& operator-=(const LabelSet& o) {
    same_width(o);
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= ~o.words_[i];
    return *this;
  }
  friend LabelSet operator|(LabelSet a, const LabelSet& b) { return a |= b; }
  friend LabelSet operator&(LabelSet a, const LabelSet& b) { return a &= b; }
  friend LabelSet operator-(LabelSet a, const LabelSet& b) { return a -= b; }
  friend bool operator==(const LabelSet&, const LabelSet&) = default;

  bool intersects(const LabelSet& o) const {
    same_width(o);
    for (std::size_t i = 0; i < words_.size(); ++i)
      if (words_[i] & o.words_[i]) return true;
    return false;
  }
  std::size_t intersection_count(const LabelSet& o) const {
    same_width(o);
    std::size_t n = 0;
    for (std::size_t i = 0; i < words_.size(); ++i)
      n += static_cast<std::size_t>(std::popcount(words_[i] & o.words_[i]));
    return n;
  }
  std::size_t union_count(const LabelSet& o) const {
    same_width(o);
    std::size_t n = 0;
    for (std::size_t i = 0; i < words_.size(); ++i)
      n += static_cast<std::size_t>(std::popcount(words_[i] | o.words_[i]));
    return n;
  }
  bool is_subset_of(const LabelSet& o) const {
    same_width(o);
    for (std::size_t i = 0; i < words_.size(); ++i)
      if (words_[i] & ~o.words_[i]) return false;
    return true;
  }

  // Ascending ids of the set bits.
  std::vector<LabelId> ids() const {
    std::vector<LabelId> out;
    for (std::size_t w = 0; w < words_.size(); ++w) {
      std::uint64_t bits = words_[w];
      while (bits) {
        int b = std::countr_zero(bits);
        out.push_back(static_cast<LabelId>(w * 64 + static_cast<std::size_t>(b)));
        bits &= bits - 1;
      }
    }
    return out;
  }

 private:
  void check(LabelId id) const {
    if (id >= width_) throw std::out_of_range("label id out of range");
  }
  void same_width(const LabelSet& o) const {
    if (o.width_ != width_) throw std::invalid_argument("label set width mismatch");
  }

  std::size_t width_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace lesanet
