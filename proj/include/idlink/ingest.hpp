#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "idlink/mac.hpp"
#include "idlink/types.hpp"

namespace idlink {

// Prefix -> vendor name, from the public registration database.
struct OuiDatabase {
  std::map<Oui, std::string> entries;

  std::optional<std::string> vendor_of(const MacAddress& mac) const {
    const auto it = entries.find(oui_of(mac));
    if (it == entries.end()) return std::nullopt;
    return it->second;
  }
};

// Per-session device presence, summarized as the maximum RSS observed
// for each address inside the session window. Index-aligned with the
// ordered session list.
struct SessionizedSightings {
  std::vector<std::string> session_ids;
  std::vector<std::map<MacAddress, int>> rss_by_session;
  std::size_t dropped = 0;       // sightings outside every session window
  std::size_t multi_window = 0;  // sightings matched by more than one window
};

struct LoadStats {
  std::size_t skipped_rows = 0;
};

struct LoadOptions {
  // Strict parsing by default; lenient mode skips bad rows and counts
  // them in LoadStats instead of failing.
  bool lenient = false;
};

// JSONL {"id", "start_ms", "end_ms", "location"}; result sorted by
// (start_ms, id). That order defines context-vector bit positions.
std::vector<Session> load_sessions(const std::string& path, const LoadOptions& opts = {},
                                   LoadStats* stats = nullptr);

// CSV with header timestamp_ms,mac,rss_dbm. RSS must be in [-120, 0].
std::vector<Sighting> load_sightings(const std::string& path, const LoadOptions& opts = {},
                                     LoadStats* stats = nullptr);

// JSONL {"sample_id", "session_id", "vector", "true_label"?}. All
// vectors must share one dimension; each is L2-normalized on load.
std::vector<BiometricSample> load_embeddings(const std::string& path,
                                             const LoadOptions& opts = {},
                                             LoadStats* stats = nullptr);

// CSV with header mac,owner (ground truth for evaluation).
std::map<MacAddress, std::string> load_registry(const std::string& path,
                                                const LoadOptions& opts = {},
                                                LoadStats* stats = nullptr);

// CSV with header prefix,vendor; prefix is 6 bare hex digits.
OuiDatabase load_oui(const std::string& path, const LoadOptions& opts = {},
                     LoadStats* stats = nullptr);

// Truth manifest: JSONL lines of either {"sample_id", "subject"} or
// {"mac", "subject"}.
struct TruthManifest {
  std::map<std::string, std::string> sample_subject;
  std::map<MacAddress, std::string> mac_subject;
};
TruthManifest load_truth(const std::string& path, const LoadOptions& opts = {},
                         LoadStats* stats = nullptr);

// Assigns each sighting to the earliest-starting session whose
// half-open window [start, end) contains its timestamp, keeping the
// per-(session, mac) maximum RSS.
SessionizedSightings sessionize(const std::vector<Sighting>& sightings,
                                const std::vector<Session>& sessions);

struct DatasetPaths {
  std::string sessions;
  std::string sightings;
  std::string embeddings;
  std::optional<std::string> registry;
  std::optional<std::string> truth;  // used to attach true labels
};

// Loads and cross-validates a full dataset: every sample's session_id
// must exist; truth labels, when given, are attached to the samples.
Dataset load_dataset(const DatasetPaths& paths, const LoadOptions& opts = {});

}  // namespace idlink
