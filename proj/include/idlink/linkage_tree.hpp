#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "idlink/context.hpp"
#include "idlink/types.hpp"

namespace idlink {

// One dendrogram node. Leaves carry ids 0..N-1 in sample input order;
// internal nodes are numbered N.. in merge order, so ids double as a
// height-sorted merge sequence.
struct TreeNode {
  int node_id = 0;
  std::vector<int> children;         // empty for leaves, else exactly 2 (ascending)
  std::vector<std::string> members;  // sorted sample_ids of all descendant leaves
  double q_link = 1.0;               // mean pairwise (1+cos)/2 within the cluster
  ContextVector context{0};          // OR of member samples' session bits
  double merge_height = 0.0;         // cosine distance at the merge; 0 for leaves
  // Structural helpers (not serialized): parent id (-1 at root) and the
  // half-open span of this cluster in the DFS leaf ordering. Antichain
  // checks reduce to span containment.
  int parent = -1;
  int span_lo = 0;
  int span_hi = 0;

  bool is_leaf() const { return children.empty(); }
};

struct LinkageTree {
  std::vector<TreeNode> nodes;  // indexed by node_id, size 2N-1
  int root_id = 0;
  std::size_t leaf_count = 0;

  const TreeNode& node(int id) const { return nodes.at(static_cast<std::size_t>(id)); }

  // True iff a is a strict ancestor of b.
  bool is_ancestor(int a, int b) const {
    const TreeNode& na = node(a);
    const TreeNode& nb = node(b);
    return a != b && na.span_lo <= nb.span_lo && nb.span_hi <= na.span_hi;
  }

  nlohmann::json to_json() const;
};

// Average-linkage agglomerative clustering under cosine distance
// (1 - dot on normalized embeddings). Deterministic: ties in the
// minimum pairwise distance break toward the smallest (id, id) pair.
LinkageTree build_tree(const std::vector<BiometricSample>& samples,
                       const std::vector<Session>& sessions);

// Reference node score: mean over unordered member pairs of
// (1 + cosine)/2; 1.0 for singletons. build_tree computes the same
// value incrementally; this recomputes it from scratch.
double linkage_score(const TreeNode& node, const std::vector<BiometricSample>& samples);

// Reference context vector: bit j set iff some member sample was
// captured in session j (sessions in their manifest order).
ContextVector node_context_vector(const TreeNode& node,
                                  const std::vector<BiometricSample>& samples,
                                  const std::vector<Session>& sessions);

// All node ids with at least min_cluster_size members, ascending.
std::vector<int> candidate_nodes(const LinkageTree& tree, std::size_t min_cluster_size = 1);

// Cuts the dendrogram into exactly k flat clusters by undoing the
// k-1 highest merges; returns the k cluster root ids, ascending.
std::vector<int> flat_clusters(const LinkageTree& tree, std::size_t k);

}  // namespace idlink
