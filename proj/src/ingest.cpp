#include "idlink/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "idlink/errors.hpp"

namespace idlink {
namespace {

using nlohmann::json;

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return in;
}

// Reads one line, stripping a trailing CR so CRLF files parse too.
bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t") == std::string::npos;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

json parse_json_line(const std::string& path, std::size_t lineno, const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded()) throw ParseError(path, lineno, "invalid JSON");
  if (!j.is_object()) throw ParseError(path, lineno, "expected a JSON object");
  return j;
}

std::string get_string(const json& j, const char* key, const std::string& path,
                       std::size_t lineno) {
  if (!j.contains(key) || !j[key].is_string())
    throw ParseError(path, lineno, std::string("missing or non-string field \"") + key + "\"");
  return j[key].get<std::string>();
}

std::int64_t get_int(const json& j, const char* key, const std::string& path,
                     std::size_t lineno) {
  if (!j.contains(key) || !j[key].is_number_integer())
    throw ParseError(path, lineno, std::string("missing or non-integer field \"") + key + "\"");
  return j[key].get<std::int64_t>();
}

std::int64_t parse_int_field(const std::string& text, const char* what, const std::string& path,
                             std::size_t lineno) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(what);
    return v;
  } catch (const std::exception&) {
    throw ParseError(path, lineno, std::string("invalid ") + what + " \"" + text + "\"");
  }
}

void expect_header(const std::string& path, std::istream& in, const std::string& want) {
  std::string line;
  if (!next_line(in, line)) throw ParseError(path, 1, "missing header line");
  if (line != want)
    throw ParseError(path, 1, "expected header \"" + want + "\", got \"" + line + "\"");
}

// Drives per-line parsing with strict/lenient error handling.
template <typename Fn>
void for_each_line(std::istream& in, const LoadOptions& opts, LoadStats* stats,
                   std::size_t first_lineno, Fn&& fn) {
  std::string line;
  std::size_t lineno = first_lineno - 1;
  while (next_line(in, line)) {
    ++lineno;
    if (is_blank(line)) continue;
    try {
      fn(lineno, line);
    } catch (const ParseError&) {
      if (!opts.lenient) throw;
      if (stats) ++stats->skipped_rows;
    }
  }
}

}  // namespace

std::vector<Session> load_sessions(const std::string& path, const LoadOptions& opts,
                                   LoadStats* stats) {
  auto in = open_or_throw(path);
  std::vector<Session> out;
  std::set<std::string> seen;
  for_each_line(in, opts, stats, 1, [&](std::size_t lineno, const std::string& line) {
    const json j = parse_json_line(path, lineno, line);
    Session s;
    s.id = get_string(j, "id", path, lineno);
    if (s.id.empty()) throw ParseError(path, lineno, "empty session id");
    s.start_ms = get_int(j, "start_ms", path, lineno);
    s.end_ms = get_int(j, "end_ms", path, lineno);
    if (s.end_ms <= s.start_ms)
      throw ParseError(path, lineno, "session \"" + s.id + "\" has end_ms <= start_ms");
    s.location = get_string(j, "location", path, lineno);
    if (!seen.insert(s.id).second)
      throw ParseError(path, lineno, "duplicate session id \"" + s.id + "\"");
    out.push_back(std::move(s));
  });
  std::sort(out.begin(), out.end(), [](const Session& a, const Session& b) {
    return std::tie(a.start_ms, a.id) < std::tie(b.start_ms, b.id);
  });
  return out;
}

std::vector<Sighting> load_sightings(const std::string& path, const LoadOptions& opts,
                                     LoadStats* stats) {
  auto in = open_or_throw(path);
  expect_header(path, in, "timestamp_ms,mac,rss_dbm");
  std::vector<Sighting> out;
  for_each_line(in, opts, stats, 2, [&](std::size_t lineno, const std::string& line) {
    const auto fields = split_csv(line);
    if (fields.size() != 3)
      throw ParseError(path, lineno, "expected 3 fields, got " + std::to_string(fields.size()));
    Sighting s;
    s.timestamp_ms = parse_int_field(fields[0], "timestamp_ms", path, lineno);
    try {
      s.mac = MacAddress::parse(fields[1]);
    } catch (const ParseError& e) {
      throw ParseError(path, lineno, e.what());
    }
    const auto rss = parse_int_field(fields[2], "rss_dbm", path, lineno);
    if (rss < -120 || rss > 0)
      throw ParseError(path, lineno, "rss_dbm " + std::to_string(rss) + " outside [-120, 0]");
    s.rss_dbm = static_cast<int>(rss);
    out.push_back(s);
  });
  return out;
}

std::vector<BiometricSample> load_embeddings(const std::string& path, const LoadOptions& opts,
                                             LoadStats* stats) {
  auto in = open_or_throw(path);
  std::vector<BiometricSample> out;
  std::set<std::string> seen;
  std::size_t dim = 0;
  for_each_line(in, opts, stats, 1, [&](std::size_t lineno, const std::string& line) {
    const json j = parse_json_line(path, lineno, line);
    BiometricSample s;
    s.sample_id = get_string(j, "sample_id", path, lineno);
    if (s.sample_id.empty()) throw ParseError(path, lineno, "empty sample_id");
    s.session_id = get_string(j, "session_id", path, lineno);
    if (s.session_id.empty()) throw ParseError(path, lineno, "empty session_id");
    if (!j.contains("vector") || !j["vector"].is_array() || j["vector"].empty())
      throw ParseError(path, lineno, "missing or empty \"vector\" field");
    double norm2 = 0.0;
    for (const auto& v : j["vector"]) {
      if (!v.is_number()) throw ParseError(path, lineno, "non-numeric vector component");
      const double x = v.get<double>();
      if (!std::isfinite(x)) throw ParseError(path, lineno, "non-finite vector component");
      s.embedding.push_back(x);
      norm2 += x * x;
    }
    if (dim == 0) {
      dim = s.embedding.size();
    } else if (s.embedding.size() != dim) {
      throw ParseError(path, lineno,
                       "vector dimension " + std::to_string(s.embedding.size()) +
                           " does not match earlier dimension " + std::to_string(dim));
    }
    if (norm2 <= 0.0) throw ParseError(path, lineno, "zero-norm embedding");
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : s.embedding) x *= inv;
    if (j.contains("true_label")) {
      if (!j["true_label"].is_string())
        throw ParseError(path, lineno, "non-string \"true_label\"");
      s.true_label = j["true_label"].get<std::string>();
    }
    if (!seen.insert(s.sample_id).second)
      throw ParseError(path, lineno, "duplicate sample_id \"" + s.sample_id + "\"");
    out.push_back(std::move(s));
  });
  return out;
}

std::map<MacAddress, std::string> load_registry(const std::string& path, const LoadOptions& opts,
                                                LoadStats* stats) {
  auto in = open_or_throw(path);
  expect_header(path, in, "mac,owner");
  std::map<MacAddress, std::string> out;
  for_each_line(in, opts, stats, 2, [&](std::size_t lineno, const std::string& line) {
    const auto fields = split_csv(line);
    if (fields.size() != 2)
      throw ParseError(path, lineno, "expected 2 fields, got " + std::to_string(fields.size()));
    MacAddress mac;
    try {
      mac = MacAddress::parse(fields[0]);
    } catch (const ParseError& e) {
      throw ParseError(path, lineno, e.what());
    }
    if (fields[1].empty()) throw ParseError(path, lineno, "empty owner");
    if (!out.emplace(mac, fields[1]).second)
      throw ParseError(path, lineno, "duplicate registry mac " + mac.to_string());
  });
  return out;
}

OuiDatabase load_oui(const std::string& path, const LoadOptions& opts, LoadStats* stats) {
  auto in = open_or_throw(path);
  expect_header(path, in, "prefix,vendor");
  OuiDatabase db;
  for_each_line(in, opts, stats, 2, [&](std::size_t lineno, const std::string& line) {
    const auto fields = split_csv(line);
    if (fields.size() != 2)
      throw ParseError(path, lineno, "expected 2 fields, got " + std::to_string(fields.size()));
    Oui prefix;
    try {
      prefix = parse_oui_prefix(fields[0]);
    } catch (const ParseError& e) {
      throw ParseError(path, lineno, e.what());
    }
    if (fields[1].empty()) throw ParseError(path, lineno, "empty vendor");
    if (!db.entries.emplace(prefix, fields[1]).second)
      throw ParseError(path, lineno, "duplicate prefix " + fields[0]);
  });
  return db;
}

TruthManifest load_truth(const std::string& path, const LoadOptions& opts, LoadStats* stats) {
  auto in = open_or_throw(path);
  TruthManifest out;
  for_each_line(in, opts, stats, 1, [&](std::size_t lineno, const std::string& line) {
    const json j = parse_json_line(path, lineno, line);
    const std::string subject = get_string(j, "subject", path, lineno);
    if (subject.empty()) throw ParseError(path, lineno, "empty subject");
    const bool has_sample = j.contains("sample_id");
    const bool has_mac = j.contains("mac");
    if (has_sample == has_mac)
      throw ParseError(path, lineno, "expected exactly one of \"sample_id\" or \"mac\"");
    if (has_sample) {
      const std::string sid = get_string(j, "sample_id", path, lineno);
      if (!out.sample_subject.emplace(sid, subject).second)
        throw ParseError(path, lineno, "duplicate truth sample_id \"" + sid + "\"");
    } else {
      MacAddress mac;
      try {
        mac = MacAddress::parse(get_string(j, "mac", path, lineno));
      } catch (const ParseError& e) {
        throw ParseError(path, lineno, e.what());
      }
      if (!out.mac_subject.emplace(mac, subject).second)
        throw ParseError(path, lineno, "duplicate truth mac " + mac.to_string());
    }
  });
  return out;
}

SessionizedSightings sessionize(const std::vector<Sighting>& sightings,
                                const std::vector<Session>& sessions) {
  SessionizedSightings out;
  out.session_ids.reserve(sessions.size());
  for (const auto& s : sessions) out.session_ids.push_back(s.id);
  out.rss_by_session.resize(sessions.size());
  for (const auto& sight : sightings) {
    // Sessions arrive sorted by start time, so the first window hit is
    // the earliest-starting one.
    std::size_t matches = 0;
    std::size_t chosen = 0;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
      if (sight.timestamp_ms >= sessions[i].start_ms && sight.timestamp_ms < sessions[i].end_ms) {
        if (matches == 0) chosen = i;
        ++matches;
      }
    }
    if (matches == 0) {
      ++out.dropped;
      continue;
    }
    if (matches > 1) ++out.multi_window;
    auto& rss_map = out.rss_by_session[chosen];
    const auto it = rss_map.find(sight.mac);
    if (it == rss_map.end()) {
      rss_map.emplace(sight.mac, sight.rss_dbm);
    } else if (sight.rss_dbm > it->second) {
      it->second = sight.rss_dbm;
    }
  }
  return out;
}

Dataset load_dataset(const DatasetPaths& paths, const LoadOptions& opts) {
  Dataset ds;
  ds.sessions = load_sessions(paths.sessions, opts);
  ds.sightings = load_sightings(paths.sightings, opts);
  ds.samples = load_embeddings(paths.embeddings, opts);
  std::set<std::string> session_ids;
  for (const auto& s : ds.sessions) session_ids.insert(s.id);
  for (const auto& sample : ds.samples) {
    if (!session_ids.count(sample.session_id))
      throw ContractError("sample \"" + sample.sample_id + "\" references unknown session \"" +
                          sample.session_id + "\"");
  }
  if (paths.registry) ds.registry = load_registry(*paths.registry, opts);
  if (paths.truth) {
    const auto truth = load_truth(*paths.truth, opts);
    for (auto& sample : ds.samples) {
      const auto it = truth.sample_subject.find(sample.sample_id);
      if (it != truth.sample_subject.end()) sample.true_label = it->second;
    }
    if (!ds.registry) {
      // A truth manifest can stand in for the registry when it carries
      // mac -> subject rows.
      if (!truth.mac_subject.empty()) ds.registry = truth.mac_subject;
    }
  }
  return ds;
}

}  // namespace idlink
