#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "idlink/mac.hpp"

namespace idlink {

// A time-bounded, located eavesdropping interval. The unit over which
// co-occurrence of biometric samples and device sightings is recorded.
struct Session {
  std::string id;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  std::string location;
};

// One sniffed packet source: address, capture time, signal strength.
struct Sighting {
  MacAddress mac;
  std::int64_t timestamp_ms = 0;
  int rss_dbm = 0;
};

// One biometric embedding tied to the session it was captured in.
// true_label is ground truth carried only for evaluation.
struct BiometricSample {
  std::string sample_id;
  std::string session_id;
  std::vector<double> embedding;
  std::optional<std::string> true_label;
};

struct Dataset {
  std::vector<Session> sessions;  // sorted by (start_ms, id)
  std::vector<BiometricSample> samples;
  std::vector<Sighting> sightings;
  // Ground-truth device ownership; present only for evaluation.
  std::optional<std::map<MacAddress, std::string>> registry;
};

}  // namespace idlink
