#include "idlink/linkage_tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "idlink/errors.hpp"

namespace idlink {
namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::map<std::string, std::size_t> session_index_of(const std::vector<Session>& sessions) {
  std::map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < sessions.size(); ++j) index.emplace(sessions[j].id, j);
  return index;
}

std::size_t resolve_session(const std::map<std::string, std::size_t>& index,
                            const BiometricSample& sample) {
  const auto it = index.find(sample.session_id);
  if (it == index.end())
    throw ContractError("sample \"" + sample.sample_id + "\" references unknown session \"" +
                        sample.session_id + "\"");
  return it->second;
}

std::vector<std::string> merge_sorted(const std::vector<std::string>& a,
                                      const std::vector<std::string>& b) {
  std::vector<std::string> out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// Orders candidate merges by (distance, smaller id, larger id) so the
// merge sequence is reproducible even under exact distance ties.
struct MergeChoice {
  double dist = std::numeric_limits<double>::infinity();
  int id_lo = 0;
  int id_hi = 0;

  static MergeChoice of(double d, int ida, int idb) {
    return {d, std::min(ida, idb), std::max(ida, idb)};
  }
  bool operator<(const MergeChoice& o) const {
    if (dist != o.dist) return dist < o.dist;
    if (id_lo != o.id_lo) return id_lo < o.id_lo;
    return id_hi < o.id_hi;
  }
};

}  // namespace

LinkageTree build_tree(const std::vector<BiometricSample>& samples,
                       const std::vector<Session>& sessions) {
  const std::size_t n = samples.size();
  if (n == 0) throw ContractError("cannot build a linkage tree from zero samples");

  const auto session_index = session_index_of(sessions);
  const std::size_t dim = samples[0].embedding.size();
  std::set<std::string> ids;
  for (const auto& s : samples) {
    if (s.embedding.size() != dim)
      throw ContractError("sample \"" + s.sample_id + "\" has mismatched embedding dimension");
    const double norm = std::sqrt(dot(s.embedding, s.embedding));
    if (std::abs(norm - 1.0) > 1e-6)
      throw ContractError("sample \"" + s.sample_id + "\" embedding is not L2-normalized");
    if (!ids.insert(s.sample_id).second)
      throw ContractError("duplicate sample_id \"" + s.sample_id + "\"");
  }

  LinkageTree tree;
  tree.leaf_count = n;
  tree.nodes.reserve(2 * n - 1);
  // Per-cluster running embedding sums make q_link O(d): with unit
  // vectors, sum of pairwise cosines = (||S||^2 - size) / 2.
  std::vector<std::vector<double>> sums;
  sums.reserve(2 * n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    TreeNode leaf;
    leaf.node_id = static_cast<int>(i);
    leaf.members = {samples[i].sample_id};
    leaf.q_link = 1.0;
    leaf.context = ContextVector(sessions.size());
    leaf.context.set(resolve_session(session_index, samples[i]));
    leaf.merge_height = 0.0;
    tree.nodes.push_back(std::move(leaf));
    sums.push_back(samples[i].embedding);
  }

  // Slot-based agglomeration: slot i starts as leaf i; merges reuse the
  // lower slot. Distances live in a dense n*n matrix updated by the
  // average-linkage (Lance-Williams) rule.
  std::vector<double> dist(n * n, 0.0);
  const auto d_at = [&](std::size_t a, std::size_t b) -> double& { return dist[a * n + b]; };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = 1.0 - dot(samples[i].embedding, samples[j].embedding);
      d_at(i, j) = d;
      d_at(j, i) = d;
    }
  }

  std::vector<bool> active(n, true);
  std::vector<int> slot_node(n);        // node id currently held by each slot
  std::vector<std::size_t> slot_size(n, 1);
  for (std::size_t i = 0; i < n; ++i) slot_node[i] = static_cast<int>(i);

  // Cached nearest neighbor per active slot, kept consistent with the
  // deterministic merge order.
  std::vector<std::size_t> nn_slot(n, 0);
  std::vector<MergeChoice> nn_choice(n);
  const auto rescan_nn = [&](std::size_t i) {
    MergeChoice best;
    std::size_t best_slot = i;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i || !active[k]) continue;
      const auto c = MergeChoice::of(d_at(i, k), slot_node[i], slot_node[k]);
      if (c < best) {
        best = c;
        best_slot = k;
      }
    }
    nn_choice[i] = best;
    nn_slot[i] = best_slot;
  };
  if (n > 1) {
    for (std::size_t i = 0; i < n; ++i) rescan_nn(i);
  }

  for (std::size_t step = 0; step + 1 < n; ++step) {
    MergeChoice best;
    std::size_t slot_a = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i] && nn_choice[i] < best) {
        best = nn_choice[i];
        slot_a = i;
      }
    }
    std::size_t slot_b = nn_slot[slot_a];
    if (slot_b < slot_a) std::swap(slot_a, slot_b);

    const int new_id = static_cast<int>(n + step);
    const int id_a = slot_node[slot_a];
    const int id_b = slot_node[slot_b];
    TreeNode node;
    node.node_id = new_id;
    node.children = {std::min(id_a, id_b), std::max(id_a, id_b)};
    node.members = merge_sorted(tree.nodes[id_a].members, tree.nodes[id_b].members);
    node.context = tree.nodes[id_a].context;
    node.context.or_with(tree.nodes[id_b].context);
    node.merge_height = best.dist;

    std::vector<double> sum = sums[id_a];
    for (std::size_t k = 0; k < dim; ++k) sum[k] += sums[id_b][k];
    const double m = static_cast<double>(node.members.size());
    const double mean_cos = (dot(sum, sum) - m) / (m * (m - 1.0));
    node.q_link = std::clamp((1.0 + mean_cos) / 2.0, 0.0, 1.0);
    sums.push_back(std::move(sum));

    tree.nodes[id_a].parent = new_id;
    tree.nodes[id_b].parent = new_id;
    tree.nodes.push_back(std::move(node));

    const std::size_t na = slot_size[slot_a];
    const std::size_t nb = slot_size[slot_b];
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == slot_a || k == slot_b) continue;
      const double d = (static_cast<double>(na) * d_at(slot_a, k) +
                        static_cast<double>(nb) * d_at(slot_b, k)) /
                       static_cast<double>(na + nb);
      d_at(slot_a, k) = d;
      d_at(k, slot_a) = d;
    }
    active[slot_b] = false;
    slot_node[slot_a] = new_id;
    slot_size[slot_a] = na + nb;

    if (step + 2 == n) break;  // last merge; no neighbors left to track

    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == slot_a) continue;
      if (nn_slot[k] == slot_a || nn_slot[k] == slot_b) {
        rescan_nn(k);
      } else {
        // The merged cluster may have moved closer than k's cached
        // neighbor; its new id is the largest, so ties keep the cache.
        const auto c = MergeChoice::of(d_at(k, slot_a), slot_node[k], new_id);
        if (c < nn_choice[k]) {
          nn_choice[k] = c;
          nn_slot[k] = slot_a;
        }
      }
    }
    rescan_nn(slot_a);
  }

  tree.root_id = static_cast<int>(tree.nodes.size()) - 1;

  // DFS from the root (children in ascending id order) assigns each
  // leaf a position; every cluster then spans a contiguous interval.
  std::vector<int> stack = {tree.root_id};
  int next_pos = 0;
  std::vector<int> order;
  order.reserve(tree.nodes.size());
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    order.push_back(id);
    const auto& children = tree.nodes[id].children;
    for (auto it = children.rbegin(); it != children.rend(); ++it) stack.push_back(*it);
    if (children.empty()) {
      tree.nodes[id].span_lo = next_pos;
      tree.nodes[id].span_hi = next_pos + 1;
      ++next_pos;
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TreeNode& nd = tree.nodes[*it];
    if (nd.is_leaf()) continue;
    nd.span_lo = std::min(tree.nodes[nd.children[0]].span_lo,
                          tree.nodes[nd.children[1]].span_lo);
    nd.span_hi = std::max(tree.nodes[nd.children[0]].span_hi,
                          tree.nodes[nd.children[1]].span_hi);
  }
  return tree;
}

double linkage_score(const TreeNode& node, const std::vector<BiometricSample>& samples) {
  if (node.members.size() < 2) return 1.0;
  std::map<std::string, const std::vector<double>*> by_id;
  for (const auto& s : samples) by_id.emplace(s.sample_id, &s.embedding);
  std::vector<const std::vector<double>*> vecs;
  for (const auto& id : node.members) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw ContractError("node member \"" + id + "\" not in sample set");
    vecs.push_back(it->second);
  }
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    for (std::size_t j = i + 1; j < vecs.size(); ++j) {
      total += (1.0 + dot(*vecs[i], *vecs[j])) / 2.0;
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

ContextVector node_context_vector(const TreeNode& node,
                                  const std::vector<BiometricSample>& samples,
                                  const std::vector<Session>& sessions) {
  const auto session_index = session_index_of(sessions);
  std::map<std::string, std::size_t> sample_session;
  for (const auto& s : samples) sample_session.emplace(s.sample_id, resolve_session(session_index, s));
  ContextVector context(sessions.size());
  for (const auto& id : node.members) {
    const auto it = sample_session.find(id);
    if (it == sample_session.end())
      throw ContractError("node member \"" + id + "\" not in sample set");
    context.set(it->second);
  }
  return context;
}

std::vector<int> candidate_nodes(const LinkageTree& tree, std::size_t min_cluster_size) {
  if (min_cluster_size < 1) throw ConfigError("min_cluster_size must be >= 1");
  std::vector<int> out;
  for (const auto& node : tree.nodes) {
    if (node.members.size() >= min_cluster_size) out.push_back(node.node_id);
  }
  return out;
}

std::vector<int> flat_clusters(const LinkageTree& tree, std::size_t k) {
  const std::size_t n = tree.leaf_count;
  if (k < 1 || k > n)
    throw ContractError("cannot cut a " + std::to_string(n) + "-leaf tree into " +
                        std::to_string(k) + " clusters");
  std::vector<bool> active(tree.nodes.size(), false);
  for (std::size_t i = 0; i < n; ++i) active[i] = true;
  for (std::size_t id = n; id < n + (n - k); ++id) {
    for (const int child : tree.nodes[id].children) active[child] = false;
    active[id] = true;
  }
  std::vector<int> out;
  for (std::size_t id = 0; id < active.size(); ++id) {
    if (active[id]) out.push_back(static_cast<int>(id));
  }
  return out;
}

nlohmann::json LinkageTree::to_json() const {
  nlohmann::json j;
  j["root_id"] = root_id;
  j["leaf_count"] = leaf_count;
  j["node_count"] = nodes.size();
  auto arr = nlohmann::json::array();
  for (const auto& node : nodes) {
    nlohmann::json nj;
    nj["node_id"] = node.node_id;
    nj["children"] = node.children;
    nj["members"] = node.members;
    nj["q_link"] = node.q_link;
    nj["context"] = node.context.to_string();
    nj["merge_height"] = node.merge_height;
    arr.push_back(std::move(nj));
  }
  j["nodes"] = std::move(arr);
  return j;
}

}  // namespace idlink
