#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "idlink/context.hpp"
#include "idlink/ingest.hpp"
#include "idlink/mac.hpp"
#include "idlink/types.hpp"

namespace idlink {

inline std::vector<std::string> default_vendor_blacklist() {
  return {"tp-link", "cisco", "3com", "juniper", "linksys", "d-link", "netgear"};
}

struct FilterConfig {
  int rss_threshold = -55;  // dBm geo-fence; -45 suits voice-like deployments
  std::vector<std::string> vendor_blacklist = default_vendor_blacklist();
  bool drop_randomized = true;
};

// Per-stage accounting over the full distinct input set. A MAC can be
// counted removed by several stages at once; it survives only if no
// enabled stage removes it.
struct FilterReport {
  std::size_t input_distinct = 0;
  std::size_t removed_randomized = 0;
  std::size_t removed_vendor = 0;
  std::size_t removed_rss = 0;
  std::vector<MacAddress> survivors;  // canonical (byte) order

  nlohmann::json to_json() const;
};

using MacSet = std::set<MacAddress>;

// Drops locally-administered (randomized) addresses.
std::pair<MacSet, MacSet> filter_randomized(const MacSet& macs);

// Drops addresses whose OUI resolves to a blacklisted vendor
// (case-insensitive substring match). Unknown OUIs are kept.
std::pair<MacSet, MacSet> filter_vendors(const MacSet& macs, const OuiDatabase& oui_db,
                                         const std::vector<std::string>& blacklist);

// Keeps a MAC iff its per-session max RSS reaches the threshold in at
// least one session. The universe is the MACs present in `sessionized`.
std::pair<MacSet, MacSet> filter_rss(const SessionizedSightings& sessionized, int threshold);

// Applies all three stages over the distinct MACs of the dataset's
// sightings; stage counts are computed independently over that full set.
FilterReport run_filter(const Dataset& dataset, const OuiDatabase& oui_db,
                        const FilterConfig& config);

// Bit j of a device's vector is 1 iff its max RSS in session j reaches
// the threshold. Devices absent from the sightings get all-zero vectors.
std::map<MacAddress, ContextVector> device_context_vectors(
    const std::vector<MacAddress>& survivors, const SessionizedSightings& sessionized,
    int threshold);

}  // namespace idlink
