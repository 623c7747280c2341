#include "idlink/device_filter.hpp"

#include <algorithm>
#include <cctype>

#include "idlink/errors.hpp"

namespace idlink {
namespace {

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool vendor_blacklisted(const std::string& vendor, const std::vector<std::string>& blacklist) {
  const std::string v = lowercase(vendor);
  for (const auto& needle : blacklist) {
    if (!needle.empty() && v.find(lowercase(needle)) != std::string::npos) return true;
  }
  return false;
}

// Max RSS the device reached in any single session, if seen at all.
std::map<MacAddress, int> best_rss_any_session(const SessionizedSightings& sessionized) {
  std::map<MacAddress, int> best;
  for (const auto& per_session : sessionized.rss_by_session) {
    for (const auto& [mac, rss] : per_session) {
      const auto it = best.find(mac);
      if (it == best.end()) {
        best.emplace(mac, rss);
      } else if (rss > it->second) {
        it->second = rss;
      }
    }
  }
  return best;
}

}  // namespace

nlohmann::json FilterReport::to_json() const {
  nlohmann::json j;
  j["input_distinct"] = input_distinct;
  j["removed_randomized"] = removed_randomized;
  j["removed_vendor"] = removed_vendor;
  j["removed_rss"] = removed_rss;
  auto survivors_json = nlohmann::json::array();
  for (const auto& mac : survivors) survivors_json.push_back(mac.to_string());
  j["survivors"] = std::move(survivors_json);
  return j;
}

std::pair<MacSet, MacSet> filter_randomized(const MacSet& macs) {
  MacSet kept, removed;
  for (const auto& mac : macs) {
    (is_locally_administered(mac) ? removed : kept).insert(mac);
  }
  return {std::move(kept), std::move(removed)};
}

std::pair<MacSet, MacSet> filter_vendors(const MacSet& macs, const OuiDatabase& oui_db,
                                         const std::vector<std::string>& blacklist) {
  MacSet kept, removed;
  for (const auto& mac : macs) {
    const auto vendor = oui_db.vendor_of(mac);
    const bool drop = vendor && vendor_blacklisted(*vendor, blacklist);
    (drop ? removed : kept).insert(mac);
  }
  return {std::move(kept), std::move(removed)};
}

std::pair<MacSet, MacSet> filter_rss(const SessionizedSightings& sessionized, int threshold) {
  MacSet kept, removed;
  for (const auto& [mac, rss] : best_rss_any_session(sessionized)) {
    (rss >= threshold ? kept : removed).insert(mac);
  }
  return {std::move(kept), std::move(removed)};
}

FilterReport run_filter(const Dataset& dataset, const OuiDatabase& oui_db,
                        const FilterConfig& config) {
  if (dataset.sessions.empty()) throw ContractError("filter requires at least one session");
  if (config.rss_threshold < -120 || config.rss_threshold > 0)
    throw ConfigError("rss threshold " + std::to_string(config.rss_threshold) +
                      " outside [-120, 0]");

  MacSet input;
  for (const auto& s : dataset.sightings) input.insert(s.mac);

  const auto sessionized = sessionize(dataset.sightings, dataset.sessions);
  const auto best = best_rss_any_session(sessionized);

  FilterReport report;
  report.input_distinct = input.size();
  for (const auto& mac : input) {
    bool dropped = false;
    if (config.drop_randomized && is_locally_administered(mac)) {
      ++report.removed_randomized;
      dropped = true;
    }
    const auto vendor = oui_db.vendor_of(mac);
    if (vendor && vendor_blacklisted(*vendor, config.vendor_blacklist)) {
      ++report.removed_vendor;
      dropped = true;
    }
    const auto it = best.find(mac);
    if (it == best.end() || it->second < config.rss_threshold) {
      ++report.removed_rss;
      dropped = true;
    }
    if (!dropped) report.survivors.push_back(mac);
  }
  return report;
}

std::map<MacAddress, ContextVector> device_context_vectors(
    const std::vector<MacAddress>& survivors, const SessionizedSightings& sessionized,
    int threshold) {
  const std::size_t g = sessionized.rss_by_session.size();
  std::map<MacAddress, ContextVector> out;
  for (const auto& mac : survivors) out.emplace(mac, ContextVector(g));
  for (std::size_t j = 0; j < g; ++j) {
    for (const auto& [mac, rss] : sessionized.rss_by_session[j]) {
      if (rss < threshold) continue;
      const auto it = out.find(mac);
      if (it != out.end()) it->second.set(j);
    }
  }
  return out;
}

}  // namespace idlink
