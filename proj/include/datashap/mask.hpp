#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace datashap {

// Coalition indicator over n players with a cached popcount.
class SubsetMask {
 public:
  SubsetMask() = default;
  explicit SubsetMask(std::size_t n, bool value = false);
  explicit SubsetMask(std::vector<std::uint8_t> bits);

  static SubsetMask zeros(std::size_t n) { return SubsetMask(n, false); }
  static SubsetMask ones(std::size_t n) { return SubsetMask(n, true); }
  // Bit i of `index` becomes player i. Requires n <= 63.
  static SubsetMask from_index(std::uint64_t index, std::size_t n);
  // Parses "1011"-style strings, first character is player 0.
  static SubsetMask from_string(const std::string& bits);

  std::size_t size() const { return bits_.size(); }
  std::size_t count() const { return count_; }
  bool empty_coalition() const { return count_ == 0; }
  bool grand_coalition() const { return count_ == bits_.size(); }

  bool test(std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool value = true);

  // Inverse of from_index. Requires n <= 63.
  std::uint64_t to_index() const;
  std::string to_string() const;
  std::vector<std::size_t> members() const;
  std::span<const std::uint8_t> bytes() const { return bits_; }
  std::uint64_t hash() const;

  friend bool operator==(const SubsetMask& a, const SubsetMask& b) {
    return a.bits_ == b.bits_;
  }

 private:
  std::vector<std::uint8_t> bits_;
  std::size_t count_ = 0;
};

}  // namespace datashap
