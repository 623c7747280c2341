#include "idlink/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <vector>

#include "idlink/errors.hpp"
#include "idlink/mac.hpp"
#include "idlink/rng.hpp"

namespace idlink {
namespace {

// Disjoint tag spaces for derived RNG sub-streams: existing subjects,
// sessions, and devices keep their draws when other knobs change.
enum StreamTag : std::uint64_t {
  kTagSubjectMean = 1,
  kTagSubjectRate = 2,
  kTagAttendance = 3,
  kTagSampleCount = 4,
  kTagEmbedding = 5,
  kTagDevice = 6,
  kTagRandomized = 8,
  kTagInfraMac = 9,
  kTagDistantMac = 10,
  kTagVictimMac = 11,
  kTagInfraRows = 13,
  kTagDistantRows = 14,
};

// Out-of-set subjects live far above any realistic victim index so the
// two groups never collide in the sub-stream keyspace.
constexpr std::uint64_t kOosKeyBase = 1u << 20;

struct OuiEntry {
  const char* prefix;
  const char* vendor;
};

// Bundled vendor table: infrastructure brands the default blacklist
// matches, plus benign handset makers for victim and distant devices.
constexpr OuiEntry kBlacklistedOuis[] = {
    {"04d4f2", "3Com Corp"},          {"0c8063", "TP-Link Technologies"},
    {"1062eb", "D-Link International"}, {"28c68e", "NetGear Inc"},
    {"3c5ab4", "Cisco Systems"},      {"48f8b3", "LinkSys LLC"},
    {"84d47e", "Juniper Networks"},
};
constexpr OuiEntry kBenignOuis[] = {
    {"40d2f6", "Pinewood Systems"},   {"5c5188", "Bluecrest Mobile"},
    {"786a89", "Quartz Communications"}, {"9013da", "Harborlight Electronics"},
    {"c83dd4", "Meridian Handsets"},  {"f0d5bf", "Aurora Devices"},
};

constexpr std::int64_t kEpochBaseMs = 1700000000000;
constexpr std::int64_t kSessionDurationMs = 3600000;
constexpr int kMaxAttendanceRerolls = 63;

std::string subject_name(bool victim, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%c%03zu", victim ? 'v' : 'o', index);
  return buf;
}

std::string session_name(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%04zu", index);
  return buf;
}

MacAddress mac_with_prefix(const char* prefix, RandomStream& rng) {
  MacAddress mac;
  const Oui oui = parse_oui_prefix(prefix);
  mac.octets[0] = oui[0];
  mac.octets[1] = oui[1];
  mac.octets[2] = oui[2];
  for (int i = 3; i < 6; ++i)
    mac.octets[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  return mac;
}

MacAddress fresh_mac(std::set<MacAddress>& used, RandomStream& rng, const OuiEntry* table,
                     std::size_t table_size) {
  for (;;) {
    const auto& entry = table[rng.uniform_int(0, static_cast<std::int64_t>(table_size) - 1)];
    const MacAddress mac = mac_with_prefix(entry.prefix, rng);
    if (used.insert(mac).second) return mac;
  }
}

MacAddress fresh_randomized_mac(std::set<MacAddress>& used, RandomStream& rng) {
  for (;;) {
    MacAddress mac;
    for (int i = 0; i < 6; ++i)
      mac.octets[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    mac.octets[0] = static_cast<std::uint8_t>((mac.octets[0] | 0x02) & ~0x01);  // LA set, unicast
    if (used.insert(mac).second) return mac;
  }
}

struct SightingRow {
  std::int64_t timestamp_ms;
  MacAddress mac;
  int rss_dbm;
};

void require_prob(double p, const char* name) {
  if (p < 0.0 || p > 1.0) throw ConfigError(std::string(name) + " must lie in [0, 1]");
}

void require_ordered(double lo, double hi, const char* name) {
  if (lo > hi) throw ConfigError(std::string(name) + " range is not ordered");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: LF endings everywhere
  if (!out) throw ConfigError("cannot write " + path);
  return out;
}

}  // namespace

void SimConfig::validate() const {
  if (victims < 1) throw ConfigError("victims must be >= 1");
  if (sessions < 1) throw ConfigError("sessions must be >= 1");
  if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
  if (embed_noise_sigma < 0.0) throw ConfigError("embed_noise_sigma must be >= 0");
  if (samples_per_attendee_mean < 1.0)
    throw ConfigError("samples_per_attendee_mean must be >= 1");
  require_prob(device_miss_prob, "device_miss_prob");
  require_prob(phantom_prob, "phantom_prob");
  require_prob(victim_attend_prob_range.first, "victim_attend_prob_range");
  require_prob(victim_attend_prob_range.second, "victim_attend_prob_range");
  require_prob(oos_attend_prob_range.first, "oos_attend_prob_range");
  require_prob(oos_attend_prob_range.second, "oos_attend_prob_range");
  require_ordered(victim_attend_prob_range.first, victim_attend_prob_range.second,
                  "victim_attend_prob_range");
  require_ordered(oos_attend_prob_range.first, oos_attend_prob_range.second,
                  "oos_attend_prob_range");
  require_ordered(rss_inside_range.first, rss_inside_range.second, "rss_inside_range");
  require_ordered(rss_outside_range.first, rss_outside_range.second, "rss_outside_range");
  for (const int v : {rss_inside_range.first, rss_inside_range.second, rss_outside_range.first,
                      rss_outside_range.second}) {
    if (v < -120 || v > 0) throw ConfigError("rss ranges must lie in [-120, 0] dBm");
  }
}

nlohmann::json SimConfig::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["victims"] = victims;
  j["oos_subjects"] = oos_subjects;
  j["sessions"] = sessions;
  j["embed_dim"] = embed_dim;
  j["embed_noise_sigma"] = embed_noise_sigma;
  j["samples_per_attendee_mean"] = samples_per_attendee_mean;
  j["victim_attend_prob_range"] = {victim_attend_prob_range.first,
                                   victim_attend_prob_range.second};
  j["oos_attend_prob_range"] = {oos_attend_prob_range.first, oos_attend_prob_range.second};
  j["device_miss_prob"] = device_miss_prob;
  j["phantom_prob"] = phantom_prob;
  j["randomized_macs_per_session"] = randomized_macs_per_session;
  j["infra_macs"] = infra_macs;
  j["distant_macs"] = distant_macs;
  j["rss_inside_range"] = {rss_inside_range.first, rss_inside_range.second};
  j["rss_outside_range"] = {rss_outside_range.first, rss_outside_range.second};
  return j;
}

GeneratedDataset dataset_paths(const std::string& dir) {
  GeneratedDataset d;
  d.dir = dir;
  d.sessions = dir + "/sessions.jsonl";
  d.sightings = dir + "/sightings.csv";
  d.embeddings = dir + "/embeddings.jsonl";
  d.registry = dir + "/registry.csv";
  d.oui = dir + "/oui.csv";
  d.truth = dir + "/truth.jsonl";
  d.config = dir + "/config.json";
  return d;
}

GeneratedDataset generate(const SimConfig& config, const std::string& dir) {
  config.validate();
  std::filesystem::create_directories(dir);
  const GeneratedDataset paths = dataset_paths(dir);

  const std::size_t n_subjects = config.victims + config.oos_subjects;
  const auto subject_key = [&](std::size_t s) -> std::uint64_t {
    return s < config.victims ? s : kOosKeyBase + (s - config.victims);
  };

  // Per-subject identity: mixture mean on the unit sphere and an
  // attendance rate drawn from the group's range.
  std::vector<std::vector<double>> means(n_subjects);
  std::vector<double> rates(n_subjects);
  std::vector<std::string> names(n_subjects);
  for (std::size_t s = 0; s < n_subjects; ++s) {
    const bool victim = s < config.victims;
    const std::uint64_t key = subject_key(s);
    names[s] = subject_name(victim, victim ? s : s - config.victims);
    RandomStream mean_rng(derive_seed(config.seed, kTagSubjectMean, key));
    means[s] = mean_rng.unit_vector(config.embed_dim);
    RandomStream rate_rng(derive_seed(config.seed, kTagSubjectRate, key));
    const auto& range = victim ? config.victim_attend_prob_range : config.oos_attend_prob_range;
    rates[s] = rate_rng.uniform(range.first, range.second);
  }

  // Attendance matrix with bounded re-rolls of empty sessions.
  std::vector<std::vector<bool>> attends(n_subjects, std::vector<bool>(config.sessions, false));
  for (std::size_t j = 0; j < config.sessions; ++j) {
    for (int retry = 0; retry <= kMaxAttendanceRerolls; ++retry) {
      std::size_t attendees = 0;
      for (std::size_t s = 0; s < n_subjects; ++s) {
        RandomStream rng(derive_seed(config.seed, kTagAttendance, subject_key(s),
                                     j * (kMaxAttendanceRerolls + 1) + retry));
        attends[s][j] = rng.bernoulli(rates[s]);
        if (attends[s][j]) ++attendees;
      }
      if (attendees > 0) break;
    }
  }

  // Device identities. Victim MACs come from benign handset vendors;
  // nuisance infrastructure/distant MACs are drawn up front so their
  // draws do not depend on the session loop.
  std::set<MacAddress> used_macs;
  std::map<MacAddress, std::string> registry;  // mac -> victim subject
  std::vector<MacAddress> victim_mac(config.victims);
  for (std::size_t v = 0; v < config.victims; ++v) {
    RandomStream rng(derive_seed(config.seed, kTagVictimMac, v));
    victim_mac[v] = fresh_mac(used_macs, rng, kBenignOuis, std::size(kBenignOuis));
    registry.emplace(victim_mac[v], names[v]);
  }
  std::vector<MacAddress> infra(config.infra_macs);
  {
    RandomStream rng(derive_seed(config.seed, kTagInfraMac));
    for (auto& mac : infra)
      mac = fresh_mac(used_macs, rng, kBlacklistedOuis, std::size(kBlacklistedOuis));
  }
  std::vector<MacAddress> distant(config.distant_macs);
  {
    RandomStream rng(derive_seed(config.seed, kTagDistantMac));
    for (auto& mac : distant) mac = fresh_mac(used_macs, rng, kBenignOuis, std::size(kBenignOuis));
  }

  // Session loop: biometric samples plus sighting rows per channel.
  struct SampleRow {
    std::string sample_id;
    std::string session_id;
    std::string subject;
    std::vector<double> vector;
  };
  std::vector<SampleRow> samples;
  std::vector<SightingRow> sightings;
  for (std::size_t j = 0; j < config.sessions; ++j) {
    const std::string sid = session_name(j);
    const std::int64_t start = kEpochBaseMs + static_cast<std::int64_t>(j) * kSessionDurationMs;
    const auto stamp = [&](RandomStream& rng) {
      return start + rng.uniform_int(0, kSessionDurationMs - 1);
    };

    for (std::size_t s = 0; s < n_subjects; ++s) {
      if (!attends[s][j]) continue;
      RandomStream count_rng(derive_seed(config.seed, kTagSampleCount, subject_key(s), j));
      const std::size_t count =
          1 + count_rng.poisson(config.samples_per_attendee_mean - 1.0);
      RandomStream emb_rng(derive_seed(config.seed, kTagEmbedding, subject_key(s), j));
      for (std::size_t k = 0; k < count; ++k) {
        std::vector<double> vec(config.embed_dim);
        double norm2 = 0.0;
        for (std::size_t d = 0; d < config.embed_dim; ++d) {
          vec[d] = means[s][d] + config.embed_noise_sigma * emb_rng.normal();
          norm2 += vec[d] * vec[d];
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& x : vec) x *= inv;
        SampleRow row;
        row.sample_id = names[s] + "_" + sid + "_" + std::to_string(k);
        row.session_id = sid;
        row.subject = names[s];
        row.vector = std::move(vec);
        samples.push_back(std::move(row));
      }
    }

    for (std::size_t v = 0; v < config.victims; ++v) {
      RandomStream rng(derive_seed(config.seed, kTagDevice, v, j));
      const bool present = attends[v][j] ? !rng.bernoulli(config.device_miss_prob)
                                         : rng.bernoulli(config.phantom_prob);
      if (!present) continue;
      const int rss = static_cast<int>(
          rng.uniform_int(config.rss_inside_range.first, config.rss_inside_range.second));
      sightings.push_back({stamp(rng), victim_mac[v], rss});
    }

    {
      RandomStream rng(derive_seed(config.seed, kTagRandomized, j));
      for (std::size_t r = 0; r < config.randomized_macs_per_session; ++r) {
        const MacAddress mac = fresh_randomized_mac(used_macs, rng);
        const int rss = static_cast<int>(
            rng.uniform_int(config.rss_inside_range.first, config.rss_inside_range.second));
        sightings.push_back({stamp(rng), mac, rss});
      }
    }
    {
      RandomStream rng(derive_seed(config.seed, kTagInfraRows, j));
      for (const auto& mac : infra) {
        const int rss = static_cast<int>(
            rng.uniform_int(config.rss_inside_range.first, config.rss_inside_range.second));
        sightings.push_back({stamp(rng), mac, rss});
      }
    }
    {
      RandomStream rng(derive_seed(config.seed, kTagDistantRows, j));
      for (const auto& mac : distant) {
        const int rss = static_cast<int>(
            rng.uniform_int(config.rss_outside_range.first, config.rss_outside_range.second));
        sightings.push_back({stamp(rng), mac, rss});
      }
    }
  }

  // --- serialization ---
  {
    auto out = open_out(paths.sessions);
    for (std::size_t j = 0; j < config.sessions; ++j) {
      nlohmann::json line;
      line["id"] = session_name(j);
      line["start_ms"] = kEpochBaseMs + static_cast<std::int64_t>(j) * kSessionDurationMs;
      line["end_ms"] = kEpochBaseMs + static_cast<std::int64_t>(j + 1) * kSessionDurationMs;
      line["location"] = "lab";
      out << line.dump() << "\n";
    }
  }
  {
    auto out = open_out(paths.sightings);
    out << "timestamp_ms,mac,rss_dbm\n";
    for (const auto& row : sightings)
      out << row.timestamp_ms << "," << row.mac.to_string() << "," << row.rss_dbm << "\n";
  }
  {
    auto out = open_out(paths.embeddings);
    for (const auto& row : samples) {
      nlohmann::json line;
      line["sample_id"] = row.sample_id;
      line["session_id"] = row.session_id;
      line["vector"] = row.vector;
      out << line.dump() << "\n";
    }
  }
  {
    auto out = open_out(paths.registry);
    out << "mac,owner\n";
    for (const auto& [mac, owner] : registry) out << mac.to_string() << "," << owner << "\n";
  }
  {
    auto out = open_out(paths.oui);
    out << "prefix,vendor\n";
    std::vector<std::pair<std::string, std::string>> rows;
    for (const auto& e : kBlacklistedOuis) rows.emplace_back(e.prefix, e.vendor);
    for (const auto& e : kBenignOuis) rows.emplace_back(e.prefix, e.vendor);
    std::sort(rows.begin(), rows.end());
    for (const auto& [prefix, vendor] : rows) out << prefix << "," << vendor << "\n";
  }
  {
    auto out = open_out(paths.truth);
    for (const auto& row : samples) {
      nlohmann::json line;
      line["sample_id"] = row.sample_id;
      line["subject"] = row.subject;
      out << line.dump() << "\n";
    }
    for (const auto& [mac, owner] : registry) {
      nlohmann::json line;
      line["mac"] = mac.to_string();
      line["subject"] = owner;
      out << line.dump() << "\n";
    }
  }
  {
    auto out = open_out(paths.config);
    out << config.to_json().dump(2) << "\n";
  }
  return paths;
}

}  // namespace idlink
