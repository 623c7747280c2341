#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace idlink {

// Binary session-attendance vector. Bit j corresponds to the j-th
// session in the dataset's ordered session list.
class ContextVector {
public:
  ContextVector() = default;
  explicit ContextVector(std::size_t size);

  std::size_t size() const { return size_; }
  bool test(std::size_t i) const;
  void set(std::size_t i, bool value = true);

  // Number of set bits.
  std::size_t count() const;

  // Bitwise OR with another vector of the same length.
  void or_with(const ContextVector& other);

  bool operator==(const ContextVector& other) const = default;

  // "0101..." with index 0 leftmost.
  std::string to_string() const;
  static ContextVector from_string(const std::string& bits);

  // |a AND b| as a set-bit count. Lengths must match.
  static std::size_t intersection_count(const ContextVector& a, const ContextVector& b);
  // Number of positions where the vectors differ. Lengths must match.
  static std::size_t hamming_distance(const ContextVector& a, const ContextVector& b);

private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

// Dice coefficient 2|a AND b| / (|a| + |b|). Two all-zero vectors
// score 0: an entity never seen in any session matches nothing.
double context_dice(const ContextVector& a, const ContextVector& b);

// Euclidean-distance baseline mapped onto [0,1] as 1 / (1 + ||a-b||),
// treating bits as 0/1 reals.
double context_euclidean_similarity(const ContextVector& a, const ContextVector& b);

}  // namespace idlink
