#include "datashap/mask.hpp"

#include <algorithm>

#include "datashap/errors.hpp"
#include "datashap/rng.hpp"

namespace datashap {

SubsetMask::SubsetMask(std::size_t n, bool value)
    : bits_(n, value ? 1 : 0), count_(value ? n : 0) {}

SubsetMask::SubsetMask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (auto& b : bits_) b = b ? 1 : 0;
  count_ = static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

SubsetMask SubsetMask::from_index(std::uint64_t index, std::size_t n) {
  if (n > 63) throw DomainError("mask index form supports at most 63 players");
  SubsetMask mask(n);
  for (std::size_t i = 0; i < n; ++i) {
    if ((index >> i) & 1U) mask.set(i);
  }
  return mask;
}

SubsetMask SubsetMask::from_string(const std::string& bits) {
  SubsetMask mask(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') {
      mask.set(i);
    } else if (bits[i] != '0') {
      throw ParseError("mask string may only contain '0' and '1'");
    }
  }
  return mask;
}

void SubsetMask::set(std::size_t i, bool value) {
  const std::uint8_t next = value ? 1 : 0;
  if (bits_[i] == next) return;
  bits_[i] = next;
  if (value) {
    ++count_;
  } else {
    --count_;
  }
}

std::uint64_t SubsetMask::to_index() const {
  if (bits_.size() > 63) throw DomainError("mask index form supports at most 63 players");
  std::uint64_t index = 0;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) index |= std::uint64_t{1} << i;
  }
  return index;
}

std::string SubsetMask::to_string() const {
  std::string out(bits_.size(), '0');
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) out[i] = '1';
  }
  return out;
}

std::vector<std::size_t> SubsetMask::members() const {
  std::vector<std::size_t> out;
  out.reserve(count_);
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) out.push_back(i);
  }
  return out;
}

std::uint64_t SubsetMask::hash() const {
  return fnv1a(bytes(), fnv1a(std::string_view("mask")) ^ bits_.size());
}

}  // namespace datashap
