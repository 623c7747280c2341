#include "idlink/context.hpp"

#include <bit>
#include <cmath>

#include "idlink/errors.hpp"

namespace idlink {
namespace {

void require_same_length(const ContextVector& a, const ContextVector& b) {
  if (a.size() != b.size()) {
    throw ContractError("context vector length mismatch: " + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()));
  }
}

}  // namespace

ContextVector::ContextVector(std::size_t size)
    : size_(size), words_((size + 63) / 64, 0) {}

bool ContextVector::test(std::size_t i) const {
  if (i >= size_) throw ContractError("context vector index out of range");
  return (words_[i / 64] >> (i % 64)) & 1u;
}

void ContextVector::set(std::size_t i, bool value) {
  if (i >= size_) throw ContractError("context vector index out of range");
  const std::uint64_t mask = std::uint64_t{1} << (i % 64);
  if (value) {
    words_[i / 64] |= mask;
  } else {
    words_[i / 64] &= ~mask;
  }
}

std::size_t ContextVector::count() const {
  std::size_t n = 0;
  for (const auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

void ContextVector::or_with(const ContextVector& other) {
  require_same_length(*this, other);
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= other.words_[i];
}

std::string ContextVector::to_string() const {
  std::string out(size_, '0');
  for (std::size_t i = 0; i < size_; ++i) {
    if (test(i)) out[i] = '1';
  }
  return out;
}

ContextVector ContextVector::from_string(const std::string& bits) {
  ContextVector v(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') {
      v.set(i);
    } else if (bits[i] != '0') {
      throw ParseError("invalid context bit string \"" + bits + "\"");
    }
  }
  return v;
}

std::size_t ContextVector::intersection_count(const ContextVector& a, const ContextVector& b) {
  require_same_length(a, b);
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.words_.size(); ++i) {
    n += static_cast<std::size_t>(std::popcount(a.words_[i] & b.words_[i]));
  }
  return n;
}

std::size_t ContextVector::hamming_distance(const ContextVector& a, const ContextVector& b) {
  require_same_length(a, b);
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.words_.size(); ++i) {
    n += static_cast<std::size_t>(std::popcount(a.words_[i] ^ b.words_[i]));
  }
  return n;
}

double context_dice(const ContextVector& a, const ContextVector& b) {
  require_same_length(a, b);
  const std::size_t total = a.count() + b.count();
  if (total == 0) return 0.0;
  return 2.0 * static_cast<double>(ContextVector::intersection_count(a, b)) /
         static_cast<double>(total);
}

double context_euclidean_similarity(const ContextVector& a, const ContextVector& b) {
  const auto differing = ContextVector::hamming_distance(a, b);
  return 1.0 / (1.0 + std::sqrt(static_cast<double>(differing)));
}

}  // namespace idlink
