#include "idlink/evaluation.hpp"

#include <algorithm>

#include "idlink/errors.hpp"
#include "idlink/rng.hpp"

namespace idlink {
namespace {

std::map<std::string, std::string> labels_by_sample(const std::vector<BiometricSample>& samples) {
  std::map<std::string, std::string> out;
  for (const auto& s : samples) {
    if (s.true_label) out.emplace(s.sample_id, *s.true_label);
  }
  return out;
}

const std::string& label_of(const std::map<std::string, std::string>& labels,
                            const std::string& sample_id) {
  const auto it = labels.find(sample_id);
  if (it == labels.end())
    throw ContractError("sample \"" + sample_id + "\" has no ground-truth label");
  return it->second;
}

std::vector<std::size_t> attended_sessions(const ContextVector& row) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (row.test(j)) out.push_back(j);
  }
  return out;
}

bool someone_else_matches(const std::vector<ContextVector>& attendance, std::size_t u,
                          const std::vector<std::size_t>& sessions) {
  for (std::size_t v = 0; v < attendance.size(); ++v) {
    if (v == u) continue;
    bool all = true;
    for (const std::size_t j : sessions) {
      if (!attendance[v].test(j)) {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

// Shared driver for the two feasibility curves; `contiguous` selects a
// run in attended order instead of a uniform subset.
double distinguishability(const std::vector<ContextVector>& attendance, std::size_t g,
                          std::size_t trials, std::uint64_t seed, bool contiguous) {
  if (g == 0) throw ConfigError("g must be >= 1");
  if (trials == 0) throw ConfigError("trials must be >= 1");
  if (attendance.empty()) throw ContractError("attendance matrix has no victims");
  const std::size_t sessions = attendance[0].size();
  for (const auto& row : attendance) {
    if (row.size() != sessions) throw ContractError("attendance rows differ in length");
  }
  std::vector<std::vector<std::size_t>> attended;
  attended.reserve(attendance.size());
  for (const auto& row : attendance) attended.push_back(attended_sessions(row));

  double total = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    std::size_t distinguishable = 0;
    for (std::size_t u = 0; u < attendance.size(); ++u) {
      const auto& own = attended[u];
      const std::size_t take = std::min(g, own.size());
      if (own.empty() && attendance.size() > 1) continue;  // empty pattern matches anyone
      RandomStream rng(derive_seed(seed, t, u, contiguous ? 1 : 0));
      std::vector<std::size_t> chosen;
      chosen.reserve(take);
      if (contiguous) {
        const std::size_t start =
            own.size() > take ? static_cast<std::size_t>(rng.uniform_int(
                                    0, static_cast<std::int64_t>(own.size() - take)))
                              : 0;
        for (std::size_t i = 0; i < take; ++i) chosen.push_back(own[start + i]);
      } else {
        for (const std::size_t idx : rng.sample_without_replacement(own.size(), take))
          chosen.push_back(own[idx]);
      }
      if (!someone_else_matches(attendance, u, chosen)) ++distinguishable;
    }
    total += static_cast<double>(distinguishable) / static_cast<double>(attendance.size());
  }
  return total / static_cast<double>(trials);
}

}  // namespace

std::string majority_label(const TreeNode& node, const std::vector<BiometricSample>& samples) {
  const auto labels = labels_by_sample(samples);
  std::map<std::string, std::size_t> counts;
  for (const auto& member : node.members) ++counts[label_of(labels, member)];
  if (counts.empty()) throw ContractError("node has no members to vote over");
  // std::map iterates labels ascending, so the first maximum is the
  // lexicographically smallest among ties.
  std::string best;
  std::size_t best_count = 0;
  for (const auto& [label, count] : counts) {
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  }
  return best;
}

EvalReport evaluate(const Assignment& assignment, const LinkageTree& tree,
                    const std::vector<BiometricSample>& samples,
                    const std::map<MacAddress, std::string>& registry) {
  if (registry.empty()) throw ContractError("evaluation requires a nonempty registry");
  const auto labels = labels_by_sample(samples);

  EvalReport report;
  report.victims_total = registry.size();
  std::size_t correct = 0;
  double purity_sum = 0.0;
  for (const auto& pair : assignment.pairs) {
    PairEval pe;
    pe.node_id = pair.node_id;
    pe.mac = pair.mac;
    const auto owner_it = registry.find(pair.mac);
    if (owner_it != registry.end()) pe.owner = owner_it->second;
    const TreeNode& node = tree.node(pair.node_id);
    pe.majority_label = majority_label(node, samples);
    pe.correct = !pe.owner.empty() && pe.majority_label == pe.owner;
    if (!pe.owner.empty()) {
      std::size_t matching = 0;
      for (const auto& member : node.members) {
        if (label_of(labels, member) == pe.owner) ++matching;
      }
      pe.purity = static_cast<double>(matching) / static_cast<double>(node.members.size());
    }
    if (pe.correct) {
      ++correct;
      purity_sum += pe.purity;
    }
    report.per_pair.push_back(std::move(pe));
  }
  report.accuracy = static_cast<double>(correct) / static_cast<double>(registry.size());
  if (correct > 0) report.mean_purity = purity_sum / static_cast<double>(correct);
  return report;
}

double association_accuracy(const Assignment& assignment, const LinkageTree& tree,
                            const std::vector<BiometricSample>& samples,
                            const std::map<MacAddress, std::string>& registry) {
  return evaluate(assignment, tree, samples, registry).accuracy;
}

double cluster_purity(const Assignment& assignment, const LinkageTree& tree,
                      const std::vector<BiometricSample>& samples,
                      const std::map<MacAddress, std::string>& registry) {
  return evaluate(assignment, tree, samples, registry).mean_purity.value_or(0.0);
}

double rand_g_distinguishability(const std::vector<ContextVector>& attendance, std::size_t g,
                                 std::size_t trials, std::uint64_t seed) {
  return distinguishability(attendance, g, trials, seed, false);
}

double cont_g_distinguishability(const std::vector<ContextVector>& attendance, std::size_t g,
                                 std::size_t trials, std::uint64_t seed) {
  return distinguishability(attendance, g, trials, seed, true);
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["accuracy"] = accuracy;
  if (mean_purity) {
    j["mean_purity"] = *mean_purity;
  } else {
    j["mean_purity"] = nullptr;
  }
  j["victims_total"] = victims_total;
  auto arr = nlohmann::json::array();
  for (const auto& pe : per_pair) {
    nlohmann::json pj;
    pj["node_id"] = pe.node_id;
    pj["mac"] = pe.mac.to_string();
    pj["owner"] = pe.owner;
    pj["majority_label"] = pe.majority_label;
    pj["correct"] = pe.correct;
    pj["purity"] = pe.purity;
    arr.push_back(std::move(pj));
  }
  j["per_pair"] = std::move(arr);
  return j;
}

}  // namespace idlink
