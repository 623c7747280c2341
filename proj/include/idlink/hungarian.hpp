#pragma once

#include <vector>

namespace idlink {

// Max-weight one-to-one assignment of rows to columns (Jonker-Volgenant
// style with potentials, O(R^2 * C)). Requires rows <= cols; every row
// is assigned a distinct column. Returns the column index per row.
std::vector<int> hungarian_max(const std::vector<std::vector<double>>& weights);

}  // namespace idlink
