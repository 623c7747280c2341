#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

namespace idlink {

// Knobs of the synthetic-dataset generator. Embeddings come from a
// Gaussian mixture on the unit sphere (one mean per subject); device
// observation noise is modeled by miss/phantom channels plus injected
// randomized, infrastructure, and distant nuisance MACs.
struct SimConfig {
  std::uint64_t seed = 1;
  std::size_t victims = 15;
  std::size_t oos_subjects = 0;
  std::size_t sessions = 40;
  std::size_t embed_dim = 64;
  double embed_noise_sigma = 0.35;
  double samples_per_attendee_mean = 5.0;
  std::pair<double, double> victim_attend_prob_range{0.2, 0.8};
  std::pair<double, double> oos_attend_prob_range{0.05, 0.3};
  double device_miss_prob = 0.1;
  double phantom_prob = 0.05;
  std::size_t randomized_macs_per_session = 20;
  std::size_t infra_macs = 5;
  std::size_t distant_macs = 10;
  std::pair<int, int> rss_inside_range{-54, -30};
  std::pair<int, int> rss_outside_range{-90, -60};

  void validate() const;  // throws ConfigError on any bad knob
  nlohmann::json to_json() const;
};

// File layout of one generated dataset directory.
struct GeneratedDataset {
  std::string dir;
  std::string sessions;    // sessions.jsonl
  std::string sightings;   // sightings.csv
  std::string embeddings;  // embeddings.jsonl
  std::string registry;    // registry.csv
  std::string oui;         // oui.csv
  std::string truth;       // truth.jsonl
  std::string config;      // config.json echo
};

GeneratedDataset dataset_paths(const std::string& dir);

// Writes a complete synthetic dataset under `dir`. Deterministic:
// identical config (including seed) yields byte-identical files.
GeneratedDataset generate(const SimConfig& config, const std::string& dir);

}  // namespace idlink
