#include "idlink/hungarian.hpp"

#include <limits>

#include "idlink/errors.hpp"

namespace idlink {

std::vector<int> hungarian_max(const std::vector<std::vector<double>>& weights) {
  const std::size_t n = weights.size();
  if (n == 0) return {};
  const std::size_t m = weights[0].size();
  if (n > m) throw ContractError("assignment needs at least as many columns as rows");
  for (const auto& row : weights) {
    if (row.size() != m) throw ContractError("assignment matrix is ragged");
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // Shortest augmenting paths over the cost matrix (negated weights),
  // 1-based with a virtual row/column 0.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> match(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      std::size_t j1 = 0;
      double delta = kInf;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = -weights[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(n, -1);
  for (std::size_t j = 1; j <= m; ++j) {
    if (match[j] != 0) row_to_col[match[j] - 1] = static_cast<int>(j - 1);
  }
  return row_to_col;
}

}  // namespace idlink
