#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "idlink/context.hpp"
#include "idlink/linkage_tree.hpp"
#include "idlink/mac.hpp"
#include "idlink/types.hpp"

namespace idlink {

enum class ContextMetric { dice, euclidean };

ContextMetric metric_from_string(const std::string& name);
std::string to_string(ContextMetric metric);

double context_similarity(const ContextVector& a, const ContextVector& b, ContextMetric metric);

// Dense candidate-node x device score matrix.
struct ScoreMatrix {
  std::vector<int> node_ids;                // rows, ascending tree node ids
  std::vector<MacAddress> devices;          // columns, canonical MAC order
  std::vector<std::vector<double>> values;  // node_ids.size() x devices.size()
  double omega = 0.5;
};

struct AssignedPair {
  int node_id = 0;
  MacAddress mac;
  double score = 0.0;
};

struct Assignment {
  std::vector<AssignedPair> pairs;  // sorted by node_id
  double objective = 0.0;
  std::size_t k_requested = 0;
  std::size_t k_achieved = 0;
  bool clamped = false;

  nlohmann::json to_json() const;
};

// Inverse of Assignment::to_json. Throws ParseError on malformed input.
Assignment assignment_from_json(const nlohmann::json& j);

// Attendance-pattern similarity between candidate nodes and devices.
std::vector<std::vector<double>> assoc_scores(
    const LinkageTree& tree, const std::vector<int>& node_ids,
    const std::map<MacAddress, ContextVector>& device_vectors, ContextMetric metric);

// Entry-wise mix: (1-omega) * q_link + omega * q_assoc.
ScoreMatrix composite_scores(const std::vector<int>& node_ids, const std::vector<double>& q_link,
                             const std::vector<MacAddress>& devices,
                             const std::vector<std::vector<double>>& q_assoc, double omega);

// Convenience wrapper computing q_assoc and pulling q_link off the tree.
ScoreMatrix composite_scores(const LinkageTree& tree, const std::vector<int>& node_ids,
                             const std::map<MacAddress, ContextVector>& device_vectors,
                             ContextMetric metric, double omega);

// Exact solver for the constrained selection program: maximize the
// total score of exactly min(K, devices, max-antichain) pairs subject
// to node/device one-to-one use and the selected nodes forming an
// antichain of the tree. Among co-optimal solutions returns the
// lexicographically smallest pair set under (node_id, mac).
Assignment select_nodes(const LinkageTree& tree, const ScoreMatrix& score, std::size_t k);

// Exhaustive reference: enumerates every antichain of the clamped size
// and every injective device assignment. Only for small instances
// (leaf count <= 16, devices <= 8).
Assignment brute_force_select(const LinkageTree& tree, const ScoreMatrix& score, std::size_t k);

// Two-step baseline: cut the dendrogram into exactly k flat clusters,
// then one-to-one assign clusters to devices by attendance similarity
// alone (optimal bipartite matching). Reported node ids are the flat
// clusters' subtree roots.
Assignment naive_baseline(const LinkageTree& tree,
                          const std::map<MacAddress, ContextVector>& device_vectors,
                          std::size_t k, ContextMetric metric);

// Same, building the dendrogram from the samples first.
Assignment naive_baseline(const std::vector<BiometricSample>& samples,
                          const std::vector<Session>& sessions,
                          const std::map<MacAddress, ContextVector>& device_vectors,
                          std::size_t k, ContextMetric metric);

}  // namespace idlink
