#include "idlink/association.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "idlink/errors.hpp"
#include "idlink/hungarian.hpp"

namespace idlink {

ContextMetric metric_from_string(const std::string& name) {
  if (name == "dice") return ContextMetric::dice;
  if (name == "euclidean") return ContextMetric::euclidean;
  throw ConfigError("unknown context metric \"" + name + "\" (expected dice or euclidean)");
}

std::string to_string(ContextMetric metric) {
  return metric == ContextMetric::dice ? "dice" : "euclidean";
}

double context_similarity(const ContextVector& a, const ContextVector& b, ContextMetric metric) {
  return metric == ContextMetric::dice ? context_dice(a, b) : context_euclidean_similarity(a, b);
}

std::vector<std::vector<double>> assoc_scores(
    const LinkageTree& tree, const std::vector<int>& node_ids,
    const std::map<MacAddress, ContextVector>& device_vectors, ContextMetric metric) {
  std::vector<std::vector<double>> out;
  out.reserve(node_ids.size());
  for (const int id : node_ids) {
    const ContextVector& node_ctx = tree.node(id).context;
    std::vector<double> row;
    row.reserve(device_vectors.size());
    for (const auto& [mac, ctx] : device_vectors) row.push_back(context_similarity(node_ctx, ctx, metric));
    out.push_back(std::move(row));
  }
  return out;
}

ScoreMatrix composite_scores(const std::vector<int>& node_ids, const std::vector<double>& q_link,
                             const std::vector<MacAddress>& devices,
                             const std::vector<std::vector<double>>& q_assoc, double omega) {
  if (omega < 0.0 || omega > 1.0) throw ConfigError("omega must lie in [0, 1]");
  if (q_link.size() != node_ids.size() || q_assoc.size() != node_ids.size())
    throw ContractError("score inputs disagree on the number of candidate nodes");
  ScoreMatrix score;
  score.node_ids = node_ids;
  score.devices = devices;
  score.omega = omega;
  score.values.reserve(node_ids.size());
  for (std::size_t i = 0; i < node_ids.size(); ++i) {
    if (q_assoc[i].size() != devices.size())
      throw ContractError("q_assoc row width disagrees with the device count");
    std::vector<double> row;
    row.reserve(devices.size());
    for (const double qa : q_assoc[i]) row.push_back((1.0 - omega) * q_link[i] + omega * qa);
    score.values.push_back(std::move(row));
  }
  return score;
}

ScoreMatrix composite_scores(const LinkageTree& tree, const std::vector<int>& node_ids,
                             const std::map<MacAddress, ContextVector>& device_vectors,
                             ContextMetric metric, double omega) {
  std::vector<double> q_link;
  q_link.reserve(node_ids.size());
  for (const int id : node_ids) q_link.push_back(tree.node(id).q_link);
  std::vector<MacAddress> devices;
  devices.reserve(device_vectors.size());
  for (const auto& [mac, ctx] : device_vectors) devices.push_back(mac);
  return composite_scores(node_ids, q_link, devices,
                          assoc_scores(tree, node_ids, device_vectors, metric), omega);
}

nlohmann::json Assignment::to_json() const {
  nlohmann::json j;
  auto arr = nlohmann::json::array();
  for (const auto& p : pairs) {
    nlohmann::json pj;
    pj["node"] = p.node_id;
    pj["mac"] = p.mac.to_string();
    pj["score"] = p.score;
    arr.push_back(std::move(pj));
  }
  j["pairs"] = std::move(arr);
  j["objective"] = objective;
  j["k_requested"] = k_requested;
  j["k_achieved"] = k_achieved;
  j["clamped"] = clamped;
  return j;
}

Assignment assignment_from_json(const nlohmann::json& j) {
  try {
    Assignment a;
    for (const auto& pj : j.at("pairs")) {
      AssignedPair p;
      p.node_id = pj.at("node").get<int>();
      p.mac = MacAddress::parse(pj.at("mac").get<std::string>());
      p.score = pj.at("score").get<double>();
      a.pairs.push_back(p);
    }
    a.objective = j.at("objective").get<double>();
    a.k_requested = j.at("k_requested").get<std::size_t>();
    a.k_achieved = j.at("k_achieved").get<std::size_t>();
    a.clamped = j.at("clamped").get<bool>();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad assignment document: ") + e.what());
  }
}

namespace {

constexpr double kNeg = -1e100;
constexpr double kEpsTie = 1e-12;   // strict-improvement margin for incumbents
constexpr double kEpsOpt = 1e-10;   // band treated as co-optimal during tie-breaking
bool valid(double x) { return x > -1e90; }

// Per-solve context shared by every subproblem. `node_off`/`pair_off`
// mark candidates proven absent from every assignment within tolerance
// of the incumbent; they only ever grow, so all bounds stay valid.
struct Ctx {
  const LinkageTree* tree = nullptr;
  const ScoreMatrix* score = nullptr;
  std::size_t total_nodes = 0;
  std::size_t m = 0;            // device count
  std::size_t want = 0;         // clamped selection size
  std::vector<int> row_of;      // node id -> score row, -1 if not a candidate
  std::vector<char> node_off;   // node id -> permanently eliminated
  std::vector<char> pair_off;   // score row * m + col -> permanently eliminated

  double q(int v, std::size_t col) const {
    return score->values[static_cast<std::size_t>(row_of[v])][col];
  }
  bool is_cand(int v) const { return row_of[v] >= 0 && !node_off[v]; }
  bool allowed(int v, std::size_t col) const {
    return !pair_off[static_cast<std::size_t>(row_of[v]) * m + col];
  }
};

// One branch-and-bound subproblem: node bans plus fixed and forbidden
// (node, device) pairs accumulated along the search path.
struct Sub {
  std::vector<char> node_banned;
  std::vector<std::pair<int, int>> forced_pairs;  // device column locked
  std::vector<std::pair<int, int>> banned_pairs;
};

struct DpOut {
  bool feasible = false;
  double bound = kNeg;
  double fixed_value = 0.0;
  std::vector<int> picks;       // chosen free nodes, ascending
  std::vector<int> pick_cols;   // greedy device per pick under lambda
};

struct Incumbent {
  double value = kNeg;
  std::vector<std::pair<int, int>> pairs;  // (node, col), sorted by node
};

Ctx make_ctx(const LinkageTree& tree, const ScoreMatrix& score) {
  Ctx ctx;
  ctx.tree = &tree;
  ctx.score = &score;
  ctx.total_nodes = tree.nodes.size();
  ctx.m = score.devices.size();
  if (score.node_ids.empty()) throw ContractError("no candidate nodes to select from");
  if (score.values.size() != score.node_ids.size())
    throw ContractError("score matrix row count disagrees with candidate nodes");
  ctx.row_of.assign(ctx.total_nodes, -1);
  ctx.node_off.assign(ctx.total_nodes, 0);
  ctx.pair_off.assign(score.node_ids.size() * ctx.m, 0);
  int prev = -1;
  for (std::size_t r = 0; r < score.node_ids.size(); ++r) {
    const int id = score.node_ids[r];
    if (id <= prev) throw ContractError("candidate node ids must be ascending and unique");
    if (id < 0 || static_cast<std::size_t>(id) >= ctx.total_nodes)
      throw ContractError("candidate node id " + std::to_string(id) + " is not in the tree");
    if (score.values[r].size() != ctx.m) throw ContractError("score matrix is ragged");
    for (const double v : score.values[r]) {
      if (!std::isfinite(v)) throw ContractError("score matrix contains a non-finite entry");
    }
    ctx.row_of[id] = static_cast<int>(r);
    prev = id;
  }
  for (std::size_t c = 1; c < ctx.m; ++c) {
    if (!(score.devices[c - 1] < score.devices[c]))
      throw ContractError("device columns must be in ascending canonical order");
  }
  return ctx;
}

std::size_t max_antichain_size(const Ctx& ctx) {
  std::vector<std::size_t> g(ctx.total_nodes, 0);
  for (std::size_t v = 0; v < ctx.total_nodes; ++v) {
    const auto& node = ctx.tree->nodes[v];
    const std::size_t own = ctx.is_cand(static_cast<int>(v)) ? 1 : 0;
    if (node.is_leaf()) {
      g[v] = own;
    } else {
      g[v] = std::max(own, g[node.children[0]] + g[node.children[1]]);
    }
  }
  return g[ctx.total_nodes - 1];
}

// Lagrangian-relaxed tree DP. Device capacity constraints are priced by
// lambda >= 0; the result is a valid upper bound for any lambda. Fixed
// pairs contribute constants and block their subtrees; `slots` free
// nodes must still be chosen.
DpOut run_dp(const Ctx& ctx, const Sub& sub, const std::vector<double>& lambda,
             std::size_t slots, bool want_argmax) {
  DpOut out;
  const std::size_t V = ctx.total_nodes;

  std::vector<char> fixed(V, 0);
  std::vector<char> dev_used(ctx.m, 0);
  for (const auto& [v, c] : sub.forced_pairs) {
    fixed[v] = 1;
    dev_used[c] = 1;
    out.fixed_value += ctx.q(v, static_cast<std::size_t>(c));
  }
  std::map<int, std::vector<int>> banned_cols;
  for (const auto& [v, c] : sub.banned_pairs) banned_cols[v].push_back(c);

  // Per-node best lambda-reduced score over the still-free devices.
  std::vector<double> w(V, kNeg);
  std::vector<int> gcol(V, -1);
  for (const int v : ctx.score->node_ids) {
    if (ctx.node_off[v] || sub.node_banned[v] || fixed[v]) continue;
    const std::vector<int>* banned = nullptr;
    const auto bit = banned_cols.find(v);
    if (bit != banned_cols.end()) banned = &bit->second;
    double best = kNeg;
    int best_col = -1;
    for (std::size_t c = 0; c < ctx.m; ++c) {
      if (dev_used[c] || !ctx.allowed(v, c)) continue;
      if (banned && std::find(banned->begin(), banned->end(), static_cast<int>(c)) != banned->end())
        continue;
      const double val = ctx.q(v, c) - lambda[c];
      if (val > best) {
        best = val;
        best_col = static_cast<int>(c);
      }
    }
    w[v] = best;
    gcol[v] = best_col;
  }

  // f[v][k]: best lambda-reduced total of an antichain of k free nodes
  // inside subtree(v). fb[v]: some fixed pair lies in subtree(v), which
  // forbids choosing any ancestor.
  std::vector<std::vector<double>> f(V);
  std::vector<char> fb(V, 0);
  for (std::size_t v = 0; v < V; ++v) {
    const auto& node = ctx.tree->nodes[v];
    const std::size_t leaves = static_cast<std::size_t>(node.span_hi - node.span_lo);
    const std::size_t cap = std::min(leaves, slots);
    if (node.is_leaf()) {
      fb[v] = fixed[v];
      if (fixed[v]) {
        f[v] = {0.0};
        continue;
      }
      f[v].assign(cap + 1, kNeg);
      f[v][0] = 0.0;
      if (cap >= 1 && !sub.node_banned[v] && ctx.is_cand(static_cast<int>(v)) && valid(w[v]))
        f[v][1] = w[v];
      continue;
    }
    const int l = node.children[0];
    const int r = node.children[1];
    if (fixed[v]) {
      if (fb[l] || fb[r]) return out;  // contradictory fixed pairs: infeasible
      f[v] = {0.0};
      fb[v] = 1;
      continue;
    }
    fb[v] = fb[l] || fb[r];
    f[v].assign(cap + 1, kNeg);
    for (std::size_t k1 = 0; k1 < f[l].size(); ++k1) {
      if (!valid(f[l][k1])) continue;
      const std::size_t k2_max = std::min(f[r].size() - 1, cap - std::min(cap, k1));
      if (k1 > cap) break;
      for (std::size_t k2 = 0; k2 <= k2_max; ++k2) {
        if (!valid(f[r][k2])) continue;
        const double val = f[l][k1] + f[r][k2];
        if (val > f[v][k1 + k2]) f[v][k1 + k2] = val;
      }
    }
    if (cap >= 1 && !fb[l] && !fb[r] && !sub.node_banned[v] &&
        ctx.is_cand(static_cast<int>(v)) && valid(w[v])) {
      if (w[v] > f[v][1]) f[v][1] = w[v];
    }
  }

  const std::size_t root = V - 1;
  if (slots >= f[root].size() || !valid(f[root][slots])) return out;
  double lambda_free = 0.0;
  for (std::size_t c = 0; c < ctx.m; ++c) {
    if (!dev_used[c]) lambda_free += lambda[c];
  }
  out.feasible = true;
  out.bound = out.fixed_value + f[root][slots] + lambda_free;

  if (!want_argmax) return out;

  // Recover one optimal antichain by retracing the DP decisions.
  std::vector<std::pair<int, std::size_t>> stack = {{static_cast<int>(root), slots}};
  while (!stack.empty()) {
    const auto [v, k] = stack.back();
    stack.pop_back();
    if (fixed[v] || k == 0) continue;
    const auto& node = ctx.tree->nodes[static_cast<std::size_t>(v)];
    if (node.is_leaf()) {
      out.picks.push_back(v);
      continue;
    }
    const int l = node.children[0];
    const int r = node.children[1];
    if (k == 1 && !fb[l] && !fb[r] && !sub.node_banned[v] && ctx.is_cand(v) && valid(w[v]) &&
        f[v][1] == w[v]) {
      out.picks.push_back(v);
      continue;
    }
    bool split = false;
    for (std::size_t k1 = 0; k1 < f[l].size() && k1 <= k; ++k1) {
      const std::size_t k2 = k - k1;
      if (k2 >= f[r].size()) continue;
      if (!valid(f[l][k1]) || !valid(f[r][k2])) continue;
      if (f[l][k1] + f[r][k2] == f[v][k]) {
        stack.push_back({l, k1});
        stack.push_back({r, k2});
        split = true;
        break;
      }
    }
    if (!split) throw ContractError("internal: tree DP retrace failed");
  }
  std::sort(out.picks.begin(), out.picks.end());
  out.pick_cols.reserve(out.picks.size());
  for (const int v : out.picks) out.pick_cols.push_back(gcol[v]);
  return out;
}

// Turns a DP antichain into a feasible assignment by optimally matching
// its nodes to the free devices. Returns the assignment's true value and
// fills `pairs_out` (sorted), or kNeg when no repair exists.
double repair_pairs(const Ctx& ctx, const Sub& sub, const DpOut& dp,
                    std::vector<std::pair<int, int>>& pairs_out) {
  std::vector<char> dev_used(ctx.m, 0);
  for (const auto& [v, c] : sub.forced_pairs) dev_used[c] = 1;
  std::vector<int> free_cols;
  for (std::size_t c = 0; c < ctx.m; ++c) {
    if (!dev_used[c]) free_cols.push_back(static_cast<int>(c));
  }
  if (dp.picks.size() > free_cols.size()) return kNeg;

  std::map<int, std::vector<int>> banned_cols;
  for (const auto& [v, c] : sub.banned_pairs) banned_cols[v].push_back(c);

  std::vector<std::pair<int, int>> pairs = sub.forced_pairs;
  double value = dp.fixed_value;
  if (!dp.picks.empty()) {
    std::vector<std::vector<double>> weights(dp.picks.size(),
                                             std::vector<double>(free_cols.size(), 0.0));
    for (std::size_t i = 0; i < dp.picks.size(); ++i) {
      const int v = dp.picks[i];
      const auto bit = banned_cols.find(v);
      for (std::size_t j = 0; j < free_cols.size(); ++j) {
        const int c = free_cols[j];
        const bool banned = (bit != banned_cols.end() &&
                             std::find(bit->second.begin(), bit->second.end(), c) !=
                                 bit->second.end()) ||
                            !ctx.allowed(v, static_cast<std::size_t>(c));
        weights[i][j] = banned ? -1e6 : ctx.q(v, static_cast<std::size_t>(c));
      }
    }
    const auto cols = hungarian_max(weights);
    for (std::size_t i = 0; i < dp.picks.size(); ++i) {
      if (weights[i][static_cast<std::size_t>(cols[i])] <= -1e5) return kNeg;  // banned pair forced
      const int c = free_cols[static_cast<std::size_t>(cols[i])];
      pairs.emplace_back(dp.picks[i], c);
      value += ctx.q(dp.picks[i], static_cast<std::size_t>(c));
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs_out = std::move(pairs);
  return value;
}

void repair_incumbent(const Ctx& ctx, const Sub& sub, const DpOut& dp, Incumbent& inc) {
  std::vector<std::pair<int, int>> pairs;
  const double value = repair_pairs(ctx, sub, dp, pairs);
  if (valid(value) && value > inc.value + kEpsTie) {
    inc.value = value;
    inc.pairs = std::move(pairs);
  }
}

// Projected subgradient walk on the device prices. Returns the best
// bound seen; `lambda` ends at the prices achieving it and `dp_best`
// holds the matching argmax.
double refine_lambda(const Ctx& ctx, const Sub& sub, std::size_t slots,
                     std::vector<double>& lambda, int iters, Incumbent& inc, DpOut& dp_best) {
  std::vector<double> current = lambda;
  std::vector<double> best_lambda = lambda;
  double best_bound = std::numeric_limits<double>::infinity();
  bool have = false;
  double theta = 2.0;
  int stale = 0;
  int restarts = 3;
  double restart_mark = std::numeric_limits<double>::infinity();
  for (int t = 0; t < iters; ++t) {
    DpOut dp = run_dp(ctx, sub, current, slots, true);
    if (!dp.feasible) {
      if (!have) {
        dp_best = std::move(dp);
        lambda = current;
        return kNeg;
      }
      break;
    }
    repair_incumbent(ctx, sub, dp, inc);
    if (dp.bound < best_bound - 1e-15) {
      best_bound = dp.bound;
      best_lambda = current;
      dp_best = dp;
      have = true;
      stale = 0;
    } else if (++stale >= 6) {
      theta /= 2.0;
      stale = 0;
      if (theta < 1e-4) {
        // The step collapsed. While it keeps paying off, rewind to the
        // best prices seen and sweep the step range again.
        if (restarts > 0 && best_bound < restart_mark - kEpsTie) {
          restart_mark = best_bound;
          --restarts;
          theta = 0.5;
          current = best_lambda;
        } else {
          break;
        }
      }
    }
    const double gap = dp.bound - std::max(inc.value, 0.0);
    if (gap <= kEpsTie) break;
    std::vector<char> dev_used(ctx.m, 0);
    for (const auto& [v, c] : sub.forced_pairs) dev_used[c] = 1;
    std::vector<int> counts(ctx.m, 0);
    for (const int c : dp.pick_cols) ++counts[c];
    double denom = 0.0;
    for (std::size_t c = 0; c < ctx.m; ++c) {
      if (dev_used[c]) continue;
      const double g = static_cast<double>(counts[c]) - 1.0;
      denom += g * g;
    }
    if (denom < 1e-12) break;
    const double step = theta * gap / denom;
    for (std::size_t c = 0; c < ctx.m; ++c) {
      if (dev_used[c]) continue;
      current[c] = std::max(0.0, current[c] + step * (static_cast<double>(counts[c]) - 1.0));
    }
  }
  lambda = std::move(best_lambda);
  return best_bound;
}

// One linear piece of the dual price function: a fixed antichain and
// column choice evaluated as the prices move.
struct Cut {
  std::vector<double> a;  // column usage counts
  double b = 0.0;         // raw score total of the choice
};

// Dense simplex (Bland's rule throughout, so it cannot cycle) for the
// cutting-plane master
//   minimize sum(lambda) + t
//   subject to a_i . lambda + t >= b_i and 0 <= lambda_c <= ub.
// Writes the argmin to `lambda_out` and returns the master optimum, or
// -infinity when the pivot cap trips; callers then keep their current
// prices, which leaves every bound valid and only costs convergence.
double master_solve(const std::vector<Cut>& cuts, std::size_t m, double ub,
                    std::vector<double>& lambda_out) {
  constexpr double eps = 1e-9;
  const std::size_t K = cuts.size();
  const std::size_t rows = K + m;
  const std::size_t n = 2 * m + 2 + K;  // lambda | t+ | t- | cut slacks | bound slacks
  std::vector<std::vector<double>> T(rows + 1, std::vector<double>(n + 1, 0.0));
  for (std::size_t i = 0; i < K; ++i) {
    for (std::size_t c = 0; c < m; ++c) T[i][c] = cuts[i].a[c];
    T[i][m] = 1.0;
    T[i][m + 1] = -1.0;
    T[i][m + 2 + i] = -1.0;
    T[i][n] = cuts[i].b;
  }
  for (std::size_t c = 0; c < m; ++c) {
    T[K + c][c] = 1.0;
    T[K + c][m + 2 + K + c] = 1.0;
    T[K + c][n] = ub;
  }
  auto& z = T[rows];  // reduced-cost row
  for (std::size_t c = 0; c < m; ++c) z[c] = 1.0;
  z[m] = 1.0;
  z[m + 1] = -1.0;

  const auto pivot = [&](std::size_t pr, std::size_t pc) {
    const double inv = 1.0 / T[pr][pc];
    for (double& x : T[pr]) x *= inv;
    for (std::size_t r = 0; r <= rows; ++r) {
      if (r == pr) continue;
      const double factor = T[r][pc];
      if (factor == 0.0) continue;
      for (std::size_t j = 0; j <= n; ++j) T[r][j] -= factor * T[pr][j];
    }
  };

  // Start from the basis {t+ on the largest cut, slacks elsewhere},
  // which is feasible at lambda = 0.
  std::size_t istar = 0;
  for (std::size_t i = 1; i < K; ++i) {
    if (cuts[i].b > cuts[istar].b) istar = i;
  }
  std::vector<std::size_t> basis(rows);
  for (std::size_t i = 0; i < K; ++i) basis[i] = (i == istar) ? m : m + 2 + i;
  for (std::size_t c = 0; c < m; ++c) basis[K + c] = m + 2 + K + c;
  for (std::size_t r = 0; r < rows; ++r) pivot(r, basis[r]);

  for (int it = 0; it < 5000; ++it) {
    std::size_t enter = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (z[j] < -eps) {
        enter = j;
        break;
      }
    }
    if (enter == n) {
      lambda_out.assign(m, 0.0);
      double value = 0.0;
      for (std::size_t r = 0; r < rows; ++r) {
        if (basis[r] < m) {
          lambda_out[basis[r]] = T[r][n];
          value += T[r][n];
        } else if (basis[r] == m) {
          value += T[r][n];
        } else if (basis[r] == m + 1) {
          value -= T[r][n];
        }
      }
      for (double& l : lambda_out) l = std::max(0.0, l);
      return value;
    }
    std::size_t leave = rows;
    double best_ratio = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      if (T[r][enter] <= eps) continue;
      const double ratio = T[r][n] / T[r][enter];
      if (leave == rows || ratio < best_ratio - eps ||
          (ratio < best_ratio + eps && basis[r] < basis[leave])) {
        leave = r;
        best_ratio = ratio;
      }
    }
    if (leave == rows) break;  // unbounded: cannot happen inside the box
    pivot(leave, enter);
    basis[leave] = enter;
  }
  return -std::numeric_limits<double>::infinity();
}

// Cutting-plane refinement of the device prices at the root: alternate
// the exact master over every linear piece seen so far with a fresh
// relaxation solve at its argmin. The evaluations upper-bound the dual
// optimum and the master lower-bounds it, so the loop stops when the
// bound meets the incumbent (optimality proved), when the sandwich
// closes (prices are dual-optimal; any leftover gap is integrality), or
// on budget. Expects a subproblem with no forced pairs.
double polish_lambda(const Ctx& ctx, const Sub& sub, std::size_t slots,
                     std::vector<double>& lambda, Incumbent& inc, DpOut& dp_best, int budget) {
  double qmax = 0.0;
  for (const int v : ctx.score->node_ids) {
    if (!ctx.is_cand(v)) continue;
    for (std::size_t c = 0; c < ctx.m; ++c) {
      if (ctx.allowed(v, c)) qmax = std::max(qmax, ctx.q(v, c));
    }
  }
  const double ub = (qmax + 1.0) * (static_cast<double>(slots) + 1.0);
  double best_bound = std::numeric_limits<double>::infinity();
  std::vector<double> best_lambda = lambda;
  std::vector<double> probe = lambda;
  std::vector<Cut> cuts;
  for (int it = 0; it < budget; ++it) {
    DpOut dp = run_dp(ctx, sub, probe, slots, true);
    if (!dp.feasible) break;
    repair_incumbent(ctx, sub, dp, inc);
    if (dp.bound < best_bound - 1e-15) {
      best_bound = dp.bound;
      best_lambda = probe;
      dp_best = dp;
    }
    if (best_bound - std::max(inc.value, 0.0) <= kEpsTie) break;
    Cut cut;
    cut.a.assign(ctx.m, 0.0);
    cut.b = 0.0;
    for (std::size_t i = 0; i < dp.picks.size(); ++i) {
      cut.a[static_cast<std::size_t>(dp.pick_cols[i])] += 1.0;
      cut.b += ctx.q(dp.picks[i], static_cast<std::size_t>(dp.pick_cols[i]));
    }
    cuts.push_back(std::move(cut));
    const double master = master_solve(cuts, ctx.m, ub, probe);
    if (!std::isfinite(master) || best_bound - master <= kEpsTie) break;
  }
  if (std::isfinite(best_bound)) lambda = std::move(best_lambda);
  return best_bound;
}

// Permanently discards candidate nodes and (node, device) pairs that
// provably appear in no assignment scoring within tolerance of the
// incumbent. For any lambda >= 0, every full-size assignment through
// (v, c) is worth at most
//   sum(lambda) + (q(v,c) - lambda_c) + best reduced antichain of
//   want-1 nodes wholly outside span(v),
// so cutting on that quantity is sound. Eliminations shrink every later
// relaxation, repair, and probe without affecting their validity.
void fix_variables(Ctx& ctx, const std::vector<double>& lambda, const Incumbent& inc) {
  if (!valid(inc.value) || ctx.want == 0) return;
  const double cut = inc.value - kEpsOpt;
  const std::size_t V = ctx.total_nodes;
  const std::size_t W = ctx.want;

  std::vector<double> w(V, kNeg);
  for (const int v : ctx.score->node_ids) {
    if (!ctx.is_cand(v)) continue;
    double best = kNeg;
    for (std::size_t c = 0; c < ctx.m; ++c) {
      if (!ctx.allowed(v, c)) continue;
      best = std::max(best, ctx.q(v, c) - lambda[c]);
    }
    w[v] = best;
  }

  // f[v][k]: best reduced total of an antichain of k nodes in subtree(v).
  std::vector<std::vector<double>> f(V);
  for (std::size_t v = 0; v < V; ++v) {
    const auto& node = ctx.tree->nodes[v];
    const std::size_t leaves = static_cast<std::size_t>(node.span_hi - node.span_lo);
    const std::size_t cap = std::min(leaves, W);
    f[v].assign(cap + 1, kNeg);
    f[v][0] = 0.0;
    if (!node.is_leaf()) {
      const int l = node.children[0];
      const int r = node.children[1];
      for (std::size_t k1 = 0; k1 < f[l].size() && k1 <= cap; ++k1) {
        if (!valid(f[l][k1])) continue;
        const std::size_t k2_max = std::min(f[r].size() - 1, cap - k1);
        for (std::size_t k2 = 0; k2 <= k2_max; ++k2) {
          if (!valid(f[r][k2])) continue;
          const double val = f[l][k1] + f[r][k2];
          if (val > f[v][k1 + k2]) f[v][k1 + k2] = val;
        }
      }
    }
    if (cap >= 1 && ctx.is_cand(static_cast<int>(v)) && valid(w[v]) && w[v] > f[v][1])
      f[v][1] = w[v];
  }

  // g[v][j]: best reduced total of an antichain of j nodes wholly
  // outside span(v). Computed root-down; ids are topological, so a
  // parent is finished before either child is visited.
  std::vector<std::vector<double>> g(V);
  g[V - 1].assign(W + 1, kNeg);
  g[V - 1][0] = 0.0;
  for (std::size_t v = V; v-- > 0;) {
    const auto& node = ctx.tree->nodes[v];
    if (node.is_leaf()) continue;
    const int l = node.children[0];
    const int r = node.children[1];
    g[l].assign(W + 1, kNeg);
    g[r].assign(W + 1, kNeg);
    for (std::size_t j1 = 0; j1 <= W; ++j1) {
      if (!valid(g[v][j1])) continue;
      for (std::size_t j2 = 0; j2 < f[r].size() && j1 + j2 <= W; ++j2) {
        if (!valid(f[r][j2])) continue;
        const double val = g[v][j1] + f[r][j2];
        if (val > g[l][j1 + j2]) g[l][j1 + j2] = val;
      }
      for (std::size_t j2 = 0; j2 < f[l].size() && j1 + j2 <= W; ++j2) {
        if (!valid(f[l][j2])) continue;
        const double val = g[v][j1] + f[l][j2];
        if (val > g[r][j1 + j2]) g[r][j1 + j2] = val;
      }
    }
  }

  double lam_sum = 0.0;
  for (std::size_t c = 0; c < ctx.m; ++c) lam_sum += lambda[c];

  for (const int v : ctx.score->node_ids) {
    if (!ctx.is_cand(v)) continue;
    const double outside = g[static_cast<std::size_t>(v)][W - 1];
    if (!valid(outside)) {
      ctx.node_off[v] = 1;
      continue;
    }
    const std::size_t row = static_cast<std::size_t>(ctx.row_of[v]);
    bool any = false;
    for (std::size_t c = 0; c < ctx.m; ++c) {
      if (!ctx.allowed(v, c)) continue;
      if (lam_sum + ctx.q(v, c) - lambda[c] + outside < cut) {
        ctx.pair_off[row * ctx.m + c] = 1;
      } else {
        any = true;
      }
    }
    if (!any) ctx.node_off[v] = 1;
  }
}

// Depth-first branch-and-bound over (node, device) pair decisions.
// With success_at = +inf it runs to exhaustion and proves optimality of
// the incumbent; with a finite target it returns as soon as the
// incumbent reaches it (used as a feasibility probe).
bool run_bnb(const Ctx& ctx, Sub root, const std::vector<double>& lambda_base, Incumbent& inc,
             double success_at, int node_iters) {
  std::vector<Sub> stack;
  stack.push_back(std::move(root));
  while (!stack.empty()) {
    if (inc.value >= success_at) return true;
    Sub sub = std::move(stack.back());
    stack.pop_back();
    if (sub.forced_pairs.size() > ctx.want) continue;
    const std::size_t slots = ctx.want - sub.forced_pairs.size();
    std::vector<double> lambda = lambda_base;
    DpOut dp;
    const double bound = refine_lambda(ctx, sub, slots, lambda, node_iters, inc, dp);
    if (!dp.feasible) continue;
    if (bound <= inc.value + kEpsTie) continue;
    if (std::isfinite(success_at) && bound < success_at) continue;
    if (slots == 0) continue;  // value is exact; repair already recorded it

    // Branch on the most contended device if the relaxed antichain
    // reuses one, else on the first undecided pick.
    std::vector<int> counts(ctx.m, 0);
    for (const int c : dp.pick_cols) ++counts[c];
    int branch_node = -1, branch_col = -1;
    for (std::size_t i = 0; i < dp.picks.size(); ++i) {
      const int c = dp.pick_cols[i];
      if (counts[c] < 2) continue;
      if (branch_col == -1 || c < branch_col) {
        branch_col = c;
      }
    }
    if (branch_col >= 0) {
      double best_q = kNeg;
      for (std::size_t i = 0; i < dp.picks.size(); ++i) {
        if (dp.pick_cols[i] != branch_col) continue;
        const double qv = ctx.q(dp.picks[i], static_cast<std::size_t>(branch_col));
        if (qv > best_q) {
          best_q = qv;
          branch_node = dp.picks[i];
        }
      }
    } else {
      branch_node = dp.picks[0];
      branch_col = dp.pick_cols[0];
    }
    Sub forbid = sub;
    forbid.banned_pairs.emplace_back(branch_node, branch_col);
    Sub force = std::move(sub);
    force.forced_pairs.emplace_back(branch_node, branch_col);
    stack.push_back(std::move(forbid));
    stack.push_back(std::move(force));  // dive toward feasible completions first
  }
  return inc.value >= success_at;
}

Assignment finish(const Ctx& ctx, std::size_t k_requested,
                  const std::vector<std::pair<int, int>>& pairs) {
  Assignment out;
  out.k_requested = k_requested;
  out.k_achieved = pairs.size();
  out.clamped = pairs.size() < k_requested;
  for (const auto& [v, c] : pairs) {
    AssignedPair p;
    p.node_id = v;
    p.mac = ctx.score->devices[static_cast<std::size_t>(c)];
    p.score = ctx.q(v, static_cast<std::size_t>(c));
    out.objective += p.score;
    out.pairs.push_back(std::move(p));
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const AssignedPair& a, const AssignedPair& b) { return a.node_id < b.node_id; });
  return out;
}

bool spans_disjoint(const TreeNode& a, const TreeNode& b) {
  return a.span_hi <= b.span_lo || b.span_hi <= a.span_lo;
}

}  // namespace

Assignment select_nodes(const LinkageTree& tree, const ScoreMatrix& score, std::size_t k) {
  if (k < 1) throw ConfigError("k must be >= 1");
  Ctx ctx = make_ctx(tree, score);
  ctx.want = std::min({k, ctx.m, max_antichain_size(ctx)});
  if (ctx.want == 0) return finish(ctx, k, {});

  // Phase 1: prove the optimal objective value. A short subgradient
  // walk warms the device prices and the incumbent; a first elimination
  // pass shrinks the instance; the cutting-plane polish then drives the
  // prices to the dual optimum so that the final elimination and the
  // branch and bound below have an essentially closed gap to work with.
  Sub root;
  root.node_banned.assign(ctx.total_nodes, 0);
  std::vector<double> lambda(ctx.m, 0.0);
  Incumbent inc;
  DpOut dp_root;
  double root_bound = refine_lambda(ctx, root, ctx.want, lambda, 120, inc, dp_root);
  fix_variables(ctx, lambda, inc);
  if (root_bound - std::max(inc.value, 0.0) > kEpsTie) {
    root_bound = polish_lambda(ctx, root, ctx.want, lambda, inc, dp_root, 400);
    fix_variables(ctx, lambda, inc);
  }
  run_bnb(ctx, root, lambda, inc, std::numeric_limits<double>::infinity(), 8);
  if (inc.pairs.empty() && ctx.want > 0)
    throw ContractError("internal: solver found no feasible assignment");
  const double target = inc.value - kEpsOpt;

  // Phase 2: rebuild the pair set position by position, taking the
  // lexicographically smallest (node, mac) at each step that still
  // admits a completion of optimal value. `known` always holds one
  // optimal assignment whose first `pos` pairs equal the accepted
  // prefix, so reaching its next pair in the scan costs nothing; all
  // earlier candidates must be refuted (cheap bound) or shown optimal
  // (one priced DP plus a matching repair, branch and bound as a last
  // resort), in which case their completion becomes the new `known`.
  std::vector<std::pair<int, int>> known = inc.pairs;
  std::sort(known.begin(), known.end());
  std::vector<std::pair<int, int>> prefix;
  std::vector<char> used(ctx.m, 0);
  int u_prev = -1;
  for (std::size_t pos = 0; pos < ctx.want; ++pos) {
    const std::size_t slots = ctx.want - pos - 1;
    Sub rest;
    rest.node_banned.assign(ctx.total_nodes, 0);
    rest.forced_pairs = prefix;
    const DpOut dp_rest = run_dp(ctx, rest, lambda, slots, false);
    bool accepted = false;
    for (const int u : ctx.score->node_ids) {
      if (accepted) break;
      if (u <= u_prev || !ctx.is_cand(u)) continue;
      bool conflict = false;
      for (const auto& [pv, pc] : prefix) {
        if (!spans_disjoint(tree.node(u), tree.node(pv))) {
          conflict = true;
          break;
        }
      }
      if (conflict) continue;
      for (std::size_t c = 0; c < ctx.m && !accepted; ++c) {
        if (used[c] || !ctx.allowed(u, c)) continue;
        if (known[pos] == std::make_pair(u, static_cast<int>(c))) {
          accepted = true;
          break;
        }
        const double q = ctx.q(u, c);
        // Forcing (u, c) removes column c from the relaxation's free
        // set, so its price tightens the cheap bound.
        if (dp_rest.feasible && dp_rest.bound + q - lambda[c] < target) continue;
        Sub probe;
        probe.node_banned.assign(ctx.total_nodes, 0);
        for (const int v : ctx.score->node_ids) {
          if (v < u) probe.node_banned[v] = 1;
        }
        for (const auto& [pv, pc] : prefix) probe.node_banned[pv] = 0;
        probe.forced_pairs = prefix;
        probe.forced_pairs.emplace_back(u, static_cast<int>(c));
        const DpOut dp_probe = run_dp(ctx, probe, lambda, slots, true);
        if (!dp_probe.feasible || dp_probe.bound < target) continue;
        std::vector<std::pair<int, int>> repaired;
        const double rep_val = repair_pairs(ctx, probe, dp_probe, repaired);
        if (valid(rep_val) && rep_val >= target) {
          known = std::move(repaired);
          accepted = true;
        } else {
          Incumbent local;
          if (run_bnb(ctx, std::move(probe), lambda, local, target, 6)) {
            known = std::move(local.pairs);
            accepted = true;
          }
        }
      }
    }
    if (!accepted) throw ContractError("internal: lexicographic refinement failed");
    // Every accept path leaves the position's pair at known[pos]: the
    // scan bans smaller node ids, so the completion sorts prefix first,
    // the accepted pair next, and strictly larger node ids after it.
    prefix.push_back(known[pos]);
    used[static_cast<std::size_t>(known[pos].second)] = 1;
    u_prev = known[pos].first;
  }
  return finish(ctx, k, prefix);
}

Assignment brute_force_select(const LinkageTree& tree, const ScoreMatrix& score, std::size_t k) {
  if (k < 1) throw ConfigError("k must be >= 1");
  Ctx ctx = make_ctx(tree, score);
  if (tree.leaf_count > 16 || ctx.m > 8)
    throw ContractError("instance exceeds brute-force bounds (16 leaves, 8 devices)");
  ctx.want = std::min({k, ctx.m, max_antichain_size(ctx)});
  if (ctx.want == 0) return finish(ctx, k, {});

  const auto& cand = ctx.score->node_ids;
  double best_val = kNeg;
  std::vector<std::pair<int, int>> best_pairs;

  std::vector<int> chosen;
  std::vector<char> used(ctx.m, 0);
  std::vector<std::pair<int, int>> pairs;

  // Assigns devices to the already-chosen antichain, position by
  // position, then scores the complete assignment.
  auto assign_devices = [&](auto&& self, std::size_t pos, double value) -> void {
    if (pos == chosen.size()) {
      const bool better = value > best_val + kEpsTie;
      const bool tie = !better && value > best_val - kEpsTie && pairs < best_pairs;
      if (better || tie) {
        best_val = std::max(best_val, value);
        best_pairs = pairs;
      }
      return;
    }
    for (std::size_t c = 0; c < ctx.m; ++c) {
      if (used[c]) continue;
      used[c] = 1;
      pairs.emplace_back(chosen[pos], static_cast<int>(c));
      self(self, pos + 1, value + ctx.q(chosen[pos], c));
      pairs.pop_back();
      used[c] = 0;
    }
  };

  auto enumerate = [&](auto&& self, std::size_t idx) -> void {
    if (chosen.size() == ctx.want) {
      assign_devices(assign_devices, 0, 0.0);
      return;
    }
    if (idx >= cand.size() || cand.size() - idx < ctx.want - chosen.size()) return;
    const TreeNode& node = tree.node(cand[idx]);
    bool compatible = true;
    for (const int c : chosen) {
      if (!spans_disjoint(node, tree.node(c))) {
        compatible = false;
        break;
      }
    }
    if (compatible) {
      chosen.push_back(cand[idx]);
      self(self, idx + 1);
      chosen.pop_back();
    }
    self(self, idx + 1);
  };
  enumerate(enumerate, 0);

  if (best_pairs.empty() && ctx.want > 0)
    throw ContractError("internal: brute force found no feasible assignment");
  return finish(ctx, k, best_pairs);
}

Assignment naive_baseline(const LinkageTree& tree,
                          const std::map<MacAddress, ContextVector>& device_vectors,
                          std::size_t k, ContextMetric metric) {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (k > tree.leaf_count)
    throw ContractError("cannot form " + std::to_string(k) + " clusters from " +
                        std::to_string(tree.leaf_count) + " samples");
  const auto clusters = flat_clusters(tree, k);
  std::vector<MacAddress> devices;
  devices.reserve(device_vectors.size());
  for (const auto& [mac, ctx] : device_vectors) devices.push_back(mac);

  Assignment out;
  out.k_requested = k;
  if (devices.empty()) {
    out.clamped = true;
    return out;
  }
  std::vector<std::vector<double>> sim(clusters.size(), std::vector<double>(devices.size(), 0.0));
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const ContextVector& node_ctx = tree.node(clusters[i]).context;
    std::size_t j = 0;
    for (const auto& [mac, ctx] : device_vectors) sim[i][j++] = context_similarity(node_ctx, ctx, metric);
  }

  // Optimal one-to-one matching; when clusters outnumber devices the
  // matrix is transposed so every device gets its best cluster.
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (cluster, device)
  if (clusters.size() <= devices.size()) {
    const auto cols = hungarian_max(sim);
    for (std::size_t i = 0; i < clusters.size(); ++i)
      matches.emplace_back(i, static_cast<std::size_t>(cols[i]));
  } else {
    std::vector<std::vector<double>> t(devices.size(), std::vector<double>(clusters.size(), 0.0));
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      for (std::size_t j = 0; j < devices.size(); ++j) t[j][i] = sim[i][j];
    }
    const auto rows = hungarian_max(t);
    for (std::size_t j = 0; j < devices.size(); ++j)
      matches.emplace_back(static_cast<std::size_t>(rows[j]), j);
  }
  std::sort(matches.begin(), matches.end());
  for (const auto& [i, j] : matches) {
    AssignedPair p;
    p.node_id = clusters[i];
    p.mac = devices[j];
    p.score = sim[i][j];
    out.objective += p.score;
    out.pairs.push_back(std::move(p));
  }
  out.k_achieved = out.pairs.size();
  out.clamped = out.k_achieved < k;
  return out;
}

Assignment naive_baseline(const std::vector<BiometricSample>& samples,
                          const std::vector<Session>& sessions,
                          const std::map<MacAddress, ContextVector>& device_vectors,
                          std::size_t k, ContextMetric metric) {
  return naive_baseline(build_tree(samples, sessions), device_vectors, k, metric);
}

}  // namespace idlink
