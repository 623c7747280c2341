#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "idlink/association.hpp"
#include "idlink/context.hpp"
#include "idlink/linkage_tree.hpp"
#include "idlink/mac.hpp"
#include "idlink/types.hpp"

namespace idlink {

struct PairEval {
  int node_id = 0;
  MacAddress mac;
  std::string owner;  // empty when the mac is not in the registry
  std::string majority_label;
  bool correct = false;
  double purity = 0.0;  // fraction of members belonging to the owner
};

struct EvalReport {
  double accuracy = 0.0;
  std::optional<double> mean_purity;  // over correct pairs; absent if none
  std::size_t victims_total = 0;
  std::vector<PairEval> per_pair;

  nlohmann::json to_json() const;
};

// Most frequent true_label among the node's members; ties break toward
// the lexicographically smallest label. Every member must be labeled.
std::string majority_label(const TreeNode& node, const std::vector<BiometricSample>& samples);

// A pair is correct iff the node's majority label equals the device
// owner; macs outside the registry count as incorrect. The denominator
// is always the number of victims (registry size).
EvalReport evaluate(const Assignment& assignment, const LinkageTree& tree,
                    const std::vector<BiometricSample>& samples,
                    const std::map<MacAddress, std::string>& registry);

double association_accuracy(const Assignment& assignment, const LinkageTree& tree,
                            const std::vector<BiometricSample>& samples,
                            const std::map<MacAddress, std::string>& registry);

// Unweighted mean purity over correct pairs; 0.0 when none are correct
// (evaluate() reports the distinction via the optional).
double cluster_purity(const Assignment& assignment, const LinkageTree& tree,
                      const std::vector<BiometricSample>& samples,
                      const std::map<MacAddress, std::string>& registry);

// Attendance-uniqueness feasibility: per trial and victim, draw g of
// the victim's attended sessions (uniformly at random / a contiguous
// run in attended order) and ask whether any other victim also attends
// them all. Draws clamp to the victim's attended count, so g >= that
// count uses the full attended set. Returns the mean distinguishable
// fraction over trials.
double rand_g_distinguishability(const std::vector<ContextVector>& attendance, std::size_t g,
                                 std::size_t trials, std::uint64_t seed);
double cont_g_distinguishability(const std::vector<ContextVector>& attendance, std::size_t g,
                                 std::size_t trials, std::uint64_t seed);

}  // namespace idlink
