#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "idlink/association.hpp"
#include "idlink/context.hpp"
#include "idlink/device_filter.hpp"
#include "idlink/evaluation.hpp"
#include "idlink/ingest.hpp"
#include "idlink/linkage_tree.hpp"
#include "idlink/simulate.hpp"
#include "idlink/types.hpp"

namespace idlink {

enum class Method { ours, naive };

Method method_from_string(const std::string& name);

// Everything one end-to-end run needs: input paths plus the knobs of
// every stage. K is absolute when `k` is set, otherwise k_ratio times
// the registry size.
struct RunConfig {
  DatasetPaths paths;
  std::string oui_path;
  FilterConfig filter;
  double omega = 0.5;
  std::optional<std::size_t> k;
  double k_ratio = 1.25;
  ContextMetric metric = ContextMetric::dice;
  Method method = Method::ours;
  std::size_t min_cluster_size = 1;
  bool lenient = false;
};

// One end-to-end run with all intermediates kept for reporting.
struct RunResult {
  Dataset dataset;
  SessionizedSightings sessionized;
  FilterReport filter_report;
  std::map<MacAddress, ContextVector> device_vectors;
  LinkageTree tree;
  std::size_t k = 0;
  Assignment assignment;
  // Present when the dataset carries a registry and labeled samples.
  std::optional<EvalReport> eval;
};

std::size_t resolve_k(const RunConfig& config, std::size_t registry_size);

// load -> sessionize -> filter -> device contexts -> tree -> scores ->
// select (or naive cut+match) -> evaluate when truth is available.
RunResult run_pipeline(const RunConfig& config);

// Attendance rows for the feasibility analysis: post-filter context
// vectors of the registry MACs, in canonical MAC order.
std::vector<ContextVector> registry_attendance(const RunResult& run);

// One sweep sample: a parameter value, a method name out of
// {ours, ours-euclidean, naive}, and metrics averaged over seeds.
struct SweepPoint {
  double value = 0.0;
  std::string method;
  double accuracy = 0.0;
  double mean_purity = 0.0;
};

// Sweeps one parameter over `values`, running `seeds` simulated
// datasets per value. Dataset-shape parameters (oos_subjects,
// sessions) get a fresh dataset per (value, seed); evaluation-side
// parameters (rss_threshold, omega) reuse one dataset per seed.
struct SweepConfig {
  SimConfig base;
  std::string parameter;  // oos_subjects | sessions | rss_threshold | omega
  std::vector<double> values;
  std::size_t seeds = 5;
  std::optional<std::size_t> k;
  double k_ratio = 1.25;
  double omega = 0.5;
  int rss_threshold = -55;
  std::string work_dir;  // generated datasets land here
};

std::vector<SweepPoint> run_sweep(const SweepConfig& config);

// "value,method,accuracy,mean_purity" rows, header included.
std::string sweep_csv(const std::vector<SweepPoint>& rows);

}  // namespace idlink
