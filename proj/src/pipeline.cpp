#include "idlink/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "idlink/errors.hpp"

namespace idlink {
namespace {

bool fully_labeled(const std::vector<BiometricSample>& samples) {
  return std::all_of(samples.begin(), samples.end(),
                     [](const BiometricSample& s) { return s.true_label.has_value(); });
}

std::size_t to_count(double value, const char* parameter) {
  const double rounded = std::llround(value);
  if (value < 0.0 || std::abs(value - rounded) > 1e-9)
    throw ConfigError(std::string(parameter) + " sweep values must be non-negative integers");
  return static_cast<std::size_t>(rounded);
}

struct MethodOutcome {
  double accuracy = 0.0;
  double mean_purity = 0.0;
};

// Runs all three methods on one dataset, sharing the loaded files and
// the linkage tree across methods.
std::map<std::string, MethodOutcome> run_methods(const GeneratedDataset& files,
                                                 int rss_threshold, double omega,
                                                 const std::optional<std::size_t>& k,
                                                 double k_ratio) {
  RunConfig config;
  config.paths.sessions = files.sessions;
  config.paths.sightings = files.sightings;
  config.paths.embeddings = files.embeddings;
  config.paths.registry = files.registry;
  config.paths.truth = files.truth;
  config.oui_path = files.oui;
  config.filter.rss_threshold = rss_threshold;
  config.omega = omega;
  config.k = k;
  config.k_ratio = k_ratio;

  const Dataset dataset = load_dataset(config.paths);
  const OuiDatabase oui_db = load_oui(config.oui_path);
  const SessionizedSightings sessionized = sessionize(dataset.sightings, dataset.sessions);
  const FilterReport report = run_filter(dataset, oui_db, config.filter);
  const auto device_vectors =
      device_context_vectors(report.survivors, sessionized, config.filter.rss_threshold);
  const LinkageTree tree = build_tree(dataset.samples, dataset.sessions);
  const auto& registry = *dataset.registry;
  const std::size_t want = resolve_k(config, registry.size());
  const std::vector<int> candidates = candidate_nodes(tree, config.min_cluster_size);

  std::map<std::string, MethodOutcome> out;
  const auto record = [&](const std::string& name, const Assignment& assignment) {
    const EvalReport eval = evaluate(assignment, tree, dataset.samples, registry);
    out[name] = {eval.accuracy, eval.mean_purity.value_or(0.0)};
  };
  for (const ContextMetric metric : {ContextMetric::dice, ContextMetric::euclidean}) {
    const ScoreMatrix score = composite_scores(tree, candidates, device_vectors, metric, omega);
    record(metric == ContextMetric::dice ? "ours" : "ours-euclidean",
           select_nodes(tree, score, want));
  }
  record("naive", naive_baseline(tree, device_vectors, want, ContextMetric::dice));
  return out;
}

}  // namespace

Method method_from_string(const std::string& name) {
  if (name == "ours") return Method::ours;
  if (name == "naive") return Method::naive;
  throw ConfigError("unknown method '" + name + "' (expected ours or naive)");
}

std::size_t resolve_k(const RunConfig& config, std::size_t registry_size) {
  if (config.k) {
    if (*config.k == 0) throw ConfigError("k must be >= 1");
    return *config.k;
  }
  if (config.k_ratio <= 0.0) throw ConfigError("k-ratio must be > 0");
  if (registry_size == 0)
    throw ConfigError("k must be given explicitly when no registry is available");
  const auto k = static_cast<std::size_t>(
      std::llround(config.k_ratio * static_cast<double>(registry_size)));
  return std::max<std::size_t>(1, k);
}

RunResult run_pipeline(const RunConfig& config) {
  LoadOptions opts;
  opts.lenient = config.lenient;

  RunResult run;
  run.dataset = load_dataset(config.paths, opts);
  const OuiDatabase oui_db = load_oui(config.oui_path, opts);
  run.sessionized = sessionize(run.dataset.sightings, run.dataset.sessions);
  run.filter_report = run_filter(run.dataset, oui_db, config.filter);
  run.device_vectors = device_context_vectors(run.filter_report.survivors, run.sessionized,
                                              config.filter.rss_threshold);
  run.tree = build_tree(run.dataset.samples, run.dataset.sessions);
  run.k = resolve_k(config, run.dataset.registry ? run.dataset.registry->size() : 0);

  if (config.method == Method::naive) {
    run.assignment = naive_baseline(run.tree, run.device_vectors, run.k, config.metric);
  } else {
    const std::vector<int> candidates = candidate_nodes(run.tree, config.min_cluster_size);
    const ScoreMatrix score =
        composite_scores(run.tree, candidates, run.device_vectors, config.metric, config.omega);
    run.assignment = select_nodes(run.tree, score, run.k);
  }

  if (run.dataset.registry && !run.dataset.registry->empty() &&
      fully_labeled(run.dataset.samples)) {
    run.eval = evaluate(run.assignment, run.tree, run.dataset.samples, *run.dataset.registry);
  }
  return run;
}

std::vector<ContextVector> registry_attendance(const RunResult& run) {
  if (!run.dataset.registry || run.dataset.registry->empty())
    throw ContractError("attendance analysis needs a device registry");
  const std::size_t sessions = run.sessionized.session_ids.size();
  std::vector<ContextVector> rows;
  rows.reserve(run.dataset.registry->size());
  for (const auto& [mac, owner] : *run.dataset.registry) {
    const auto it = run.device_vectors.find(mac);
    rows.push_back(it != run.device_vectors.end() ? it->second : ContextVector(sessions));
  }
  return rows;
}

std::vector<SweepPoint> run_sweep(const SweepConfig& config) {
  static const std::vector<std::string> kMethods = {"ours", "ours-euclidean", "naive"};
  const bool dataset_side =
      config.parameter == "oos_subjects" || config.parameter == "sessions";
  if (!dataset_side && config.parameter != "rss_threshold" && config.parameter != "omega")
    throw ConfigError("unknown sweep parameter '" + config.parameter +
                      "' (expected oos_subjects, sessions, rss_threshold, or omega)");
  if (config.values.empty()) throw ConfigError("sweep needs at least one value");
  if (config.seeds == 0) throw ConfigError("sweep needs at least one seed");
  if (config.work_dir.empty()) throw ConfigError("sweep needs a working directory");

  // Evaluation-side sweeps reuse one dataset per seed across values.
  std::vector<GeneratedDataset> shared(config.seeds);
  if (!dataset_side) {
    for (std::size_t s = 0; s < config.seeds; ++s) {
      SimConfig sim = config.base;
      sim.seed = config.base.seed + s;
      shared[s] = generate(sim, config.work_dir + "/seed_" + std::to_string(s));
    }
  }

  std::vector<SweepPoint> out;
  for (std::size_t i = 0; i < config.values.size(); ++i) {
    const double value = config.values[i];
    std::map<std::string, MethodOutcome> sums;
    for (std::size_t s = 0; s < config.seeds; ++s) {
      GeneratedDataset files;
      int rss = config.rss_threshold;
      double omega = config.omega;
      if (dataset_side) {
        SimConfig sim = config.base;
        sim.seed = config.base.seed + i * config.seeds + s;
        if (config.parameter == "oos_subjects") {
          sim.oos_subjects = to_count(value, "oos_subjects");
        } else {
          sim.sessions = to_count(value, "sessions");
          if (sim.sessions == 0) throw ConfigError("sessions sweep values must be >= 1");
        }
        char tag[32];
        std::snprintf(tag, sizeof tag, "/v%zu_s%zu", i, s);
        files = generate(sim, config.work_dir + tag);
      } else {
        files = shared[s];
        if (config.parameter == "rss_threshold") {
          if (value != std::llround(value) || value < -120.0 || value > 0.0)
            throw ConfigError("rss_threshold sweep values must be integers in [-120, 0]");
          rss = static_cast<int>(std::llround(value));
        } else {
          omega = value;
        }
      }
      for (const auto& [name, outcome] : run_methods(files, rss, omega, config.k, config.k_ratio)) {
        sums[name].accuracy += outcome.accuracy;
        sums[name].mean_purity += outcome.mean_purity;
      }
    }
    for (const auto& name : kMethods) {
      const MethodOutcome& sum = sums.at(name);
      SweepPoint point;
      point.value = value;
      point.method = name;
      point.accuracy = sum.accuracy / static_cast<double>(config.seeds);
      point.mean_purity = sum.mean_purity / static_cast<double>(config.seeds);
      out.push_back(std::move(point));
    }
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepPoint>& rows) {
  std::ostringstream out;
  out << "value,method,accuracy,mean_purity\n";
  char buf[128];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%g,%s,%.6f,%.6f\n", row.value, row.method.c_str(),
                  row.accuracy, row.mean_purity);
    out << buf;
  }
  return out.str();
}

}  // namespace idlink
