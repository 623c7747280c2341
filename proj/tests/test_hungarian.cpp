#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "idlink/errors.hpp"
#include "idlink/hungarian.hpp"

using namespace idlink;

namespace {

double brute_force_best(const std::vector<std::vector<double>>& w) {
  const std::size_t rows = w.size();
  const std::size_t cols = w[0].size();
  std::vector<std::size_t> perm(cols);
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1e300;
  do {
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) total += w[r][perm[r]];
    best = std::max(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double value_of(const std::vector<std::vector<double>>& w, const std::vector<int>& cols) {
  double total = 0.0;
  for (std::size_t r = 0; r < w.size(); ++r) total += w[r][static_cast<std::size_t>(cols[r])];
  return total;
}

}  // namespace

TEST_CASE("hungarian picks the obvious diagonal") {
  const std::vector<std::vector<double>> w = {{5, 1}, {2, 4}};
  CHECK(hungarian_max(w) == std::vector<int>{0, 1});
}

TEST_CASE("hungarian handles rectangular matrices") {
  const std::vector<std::vector<double>> w = {{1, 9, 2}, {8, 3, 1}};
  const auto cols = hungarian_max(w);
  CHECK(cols == std::vector<int>{1, 0});
  CHECK(value_of(w, cols) == doctest::Approx(17.0));
}

TEST_CASE("hungarian works with negative weights") {
  const std::vector<std::vector<double>> w = {{-5, -1}, {-2, -4}};
  const auto cols = hungarian_max(w);
  CHECK(value_of(w, cols) == doctest::Approx(-3.0));  // -1 + -2
}

TEST_CASE("hungarian rejects malformed inputs") {
  CHECK_THROWS_AS(hungarian_max({{1.0}, {2.0}}), ContractError);        // rows > cols
  CHECK_THROWS_AS(hungarian_max({{1.0, 2.0}, {3.0}}), ContractError);   // ragged
}

TEST_CASE("hungarian matches permutation brute force on random matrices") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int round = 0; round < 60; ++round) {
    const std::size_t cols = 1 + rng() % 7;
    const std::size_t rows = 1 + rng() % cols;
    std::vector<std::vector<double>> w(rows, std::vector<double>(cols));
    for (auto& row : w)
      for (auto& x : row) x = uni(rng);
    const auto assigned = hungarian_max(w);
    // injective, in range
    std::vector<char> used(cols, 0);
    for (const int c : assigned) {
      REQUIRE(c >= 0);
      REQUIRE(static_cast<std::size_t>(c) < cols);
      CHECK(!used[static_cast<std::size_t>(c)]);
      used[static_cast<std::size_t>(c)] = 1;
    }
    CHECK(value_of(w, assigned) == doctest::Approx(brute_force_best(w)).epsilon(1e-9));
  }
}
