#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "idlink/device_filter.hpp"
#include "idlink/errors.hpp"

using namespace idlink;

namespace {

MacAddress mac(const std::string& text) { return MacAddress::parse(text); }

OuiDatabase tiny_oui_db() {
  OuiDatabase db;
  db.entries[parse_oui_prefix("3c5ab4")] = "Cisco Systems";
  db.entries[parse_oui_prefix("f0d5bf")] = "Aurora Devices";
  return db;
}

// One session per (mac -> rss) map given.
Dataset dataset_with(const std::vector<std::vector<std::pair<std::string, int>>>& by_session) {
  Dataset ds;
  std::int64_t t = 0;
  int i = 0;
  for (const auto& rows : by_session) {
    ds.sessions.push_back({"s" + std::to_string(i++), t, t + 100, "lab"});
    for (const auto& [text, rss] : rows) ds.sightings.push_back({mac(text), t + 50, rss});
    t += 100;
  }
  return ds;
}

}  // namespace

TEST_CASE("filter_randomized splits on the LA bit") {
  const MacSet macs = {mac("02:aa:00:00:00:01"), mac("00:bb:00:00:00:01")};
  const auto [kept, removed] = filter_randomized(macs);
  CHECK(removed == MacSet{mac("02:aa:00:00:00:01")});
  CHECK(kept == MacSet{mac("00:bb:00:00:00:01")});

  const MacSet universal = {mac("00:11:22:33:44:55"), mac("a8:11:22:33:44:55")};
  CHECK(filter_randomized(universal).second.empty());
}

TEST_CASE("filter_vendors drops blacklisted brands, keeps unknown OUIs") {
  const OuiDatabase db = tiny_oui_db();
  const MacSet macs = {mac("3c:5a:b4:00:00:01"),   // Cisco Systems
                       mac("f0:d5:bf:00:00:01"),   // benign vendor
                       mac("99:99:99:00:00:01")};  // unknown OUI
  const auto [kept, removed] = filter_vendors(macs, db, {"cisco"});
  CHECK(removed == MacSet{mac("3c:5a:b4:00:00:01")});
  CHECK(kept.count(mac("99:99:99:00:00:01")) == 1);  // unknown kept

  // case-insensitive substring on the vendor name
  CHECK(filter_vendors(macs, db, {"CISCO SYS"}).second.size() == 1);
  CHECK(filter_vendors(macs, db, {"aurora"}).second == MacSet{mac("f0:d5:bf:00:00:01")});
  CHECK(filter_vendors(macs, db, {}).second.empty());
}

TEST_CASE("filter_rss keeps a mac iff some session max reaches the threshold") {
  const Dataset ds = dataset_with({
      {{"aa:aa:aa:00:00:01", -70}, {"bb:bb:bb:00:00:01", -80}},
      {{"aa:aa:aa:00:00:01", -50}, {"bb:bb:bb:00:00:01", -75}},
  });
  const auto sessionized = sessionize(ds.sightings, ds.sessions);
  const auto [kept, removed] = filter_rss(sessionized, -55);
  CHECK(kept == MacSet{mac("aa:aa:aa:00:00:01")});  // -50 >= -55 in session 1
  CHECK(removed == MacSet{mac("bb:bb:bb:00:00:01")});
}

TEST_CASE("rss monotonicity: raising the threshold never grows the kept set") {
  std::mt19937_64 rng(17);
  Dataset ds;
  for (int j = 0; j < 4; ++j) ds.sessions.push_back({"s" + std::to_string(j), j * 100, j * 100 + 100, "lab"});
  for (int i = 0; i < 120; ++i) {
    MacAddress m;
    m.octets[0] = 0x00;
    m.octets[5] = static_cast<std::uint8_t>(rng() % 30);
    ds.sightings.push_back({m, static_cast<std::int64_t>(rng() % 400),
                            -static_cast<int>(rng() % 101)});
  }
  const auto sessionized = sessionize(ds.sightings, ds.sessions);
  for (int round = 0; round < 20; ++round) {
    int t1 = -static_cast<int>(rng() % 121);
    int t2 = -static_cast<int>(rng() % 121);
    if (t1 > t2) std::swap(t1, t2);  // t1 <= t2
    const auto kept_low = filter_rss(sessionized, t1).first;
    const auto kept_high = filter_rss(sessionized, t2).first;
    for (const auto& m : kept_high) CHECK(kept_low.count(m) == 1);
  }
}

TEST_CASE("run_filter on a crafted six-mac corpus") {
  // 1 randomized, 1 blacklisted vendor, 1 all-low-rss, 3 clean.
  const Dataset ds = dataset_with({
      {{"02:00:00:00:00:01", -40},   // randomized
       {"3c:5a:b4:00:00:01", -40},   // Cisco (blacklisted)
       {"00:00:01:00:00:01", -90},   // too far in every session
       {"f0:d5:bf:00:00:01", -40},
       {"f0:d5:bf:00:00:02", -90}},
      {{"00:00:01:00:00:01", -70},
       {"f0:d5:bf:00:00:02", -50},
       {"f0:d5:bf:00:00:03", -45}},
  });
  const FilterReport report = run_filter(ds, tiny_oui_db(), FilterConfig{});
  CHECK(report.input_distinct == 6);
  CHECK(report.removed_randomized == 1);
  CHECK(report.removed_vendor == 1);
  CHECK(report.removed_rss == 1);
  CHECK(report.survivors == std::vector<MacAddress>{mac("f0:d5:bf:00:00:01"),
                                                    mac("f0:d5:bf:00:00:02"),
                                                    mac("f0:d5:bf:00:00:03")});
}

TEST_CASE("run_filter with empty sightings reports zeros") {
  Dataset ds;
  ds.sessions.push_back({"s0", 0, 100, "lab"});
  const FilterReport report = run_filter(ds, tiny_oui_db(), FilterConfig{});
  CHECK(report.input_distinct == 0);
  CHECK(report.removed_randomized == 0);
  CHECK(report.removed_vendor == 0);
  CHECK(report.removed_rss == 0);
  CHECK(report.survivors.empty());
}

TEST_CASE("run_filter stage counts overlap but survivors pass every stage") {
  // One mac is randomized AND blacklisted AND far away: counted thrice.
  OuiDatabase db = tiny_oui_db();
  db.entries[parse_oui_prefix("3e5ab4")] = "Cisco Systems";  // LA-bit prefix, still mapped
  const Dataset ds = dataset_with({{{"3e:5a:b4:00:00:01", -90}, {"f0:d5:bf:00:00:01", -40}}});
  const FilterReport report = run_filter(ds, db, FilterConfig{});
  CHECK(report.input_distinct == 2);
  CHECK(report.removed_randomized == 1);  // 0x3e has the LA bit
  CHECK(report.removed_vendor == 1);
  CHECK(report.removed_rss == 1);
  CHECK(report.survivors == std::vector<MacAddress>{mac("f0:d5:bf:00:00:01")});
}

TEST_CASE("disabling drop_randomized lets LA macs reach later stages") {
  const Dataset ds = dataset_with({{{"02:00:00:00:00:01", -40}}});
  FilterConfig config;
  config.drop_randomized = false;
  const FilterReport report = run_filter(ds, tiny_oui_db(), config);
  CHECK(report.removed_randomized == 0);
  CHECK(report.survivors == std::vector<MacAddress>{mac("02:00:00:00:00:01")});
}

TEST_CASE("run_filter preconditions") {
  Dataset no_sessions;
  CHECK_THROWS_AS(run_filter(no_sessions, tiny_oui_db(), FilterConfig{}), ContractError);

  Dataset ds = dataset_with({{{"f0:d5:bf:00:00:01", -40}}});
  FilterConfig bad;
  bad.rss_threshold = -130;
  CHECK_THROWS_AS(run_filter(ds, tiny_oui_db(), bad), ConfigError);
  bad.rss_threshold = 5;
  CHECK_THROWS_AS(run_filter(ds, tiny_oui_db(), bad), ConfigError);
}

TEST_CASE("default vendor blacklist carries the seven infrastructure brands") {
  const auto list = default_vendor_blacklist();
  CHECK(list == std::vector<std::string>{"tp-link", "cisco", "3com", "juniper", "linksys",
                                         "d-link", "netgear"});
  CHECK(FilterConfig{}.rss_threshold == -55);
}

TEST_CASE("device_context_vectors sets bits per session presence") {
  const Dataset ds = dataset_with({
      {{"f0:d5:bf:00:00:01", -40}},
      {{"f0:d5:bf:00:00:01", -70}},  // below threshold: bit stays 0
      {{"f0:d5:bf:00:00:01", -50}},
      {},
  });
  const auto sessionized = sessionize(ds.sightings, ds.sessions);
  const std::vector<MacAddress> survivors = {mac("f0:d5:bf:00:00:01"),
                                             mac("f0:d5:bf:00:00:02")};
  const auto vectors = device_context_vectors(survivors, sessionized, -55);
  CHECK(vectors.at(mac("f0:d5:bf:00:00:01")).to_string() == "1010");
  CHECK(vectors.at(mac("f0:d5:bf:00:00:02")).to_string() == "0000");  // never seen

  // lowering the threshold can only add bits
  const auto looser = device_context_vectors(survivors, sessionized, -80);
  CHECK(looser.at(mac("f0:d5:bf:00:00:01")).count() >=
        vectors.at(mac("f0:d5:bf:00:00:01")).count());
  CHECK(looser.at(mac("f0:d5:bf:00:00:01")).to_string() == "1110");
}

TEST_CASE("filter report json is stable and complete") {
  const Dataset ds = dataset_with({{{"f0:d5:bf:00:00:01", -40}, {"02:00:00:00:00:01", -40}}});
  const FilterReport a = run_filter(ds, tiny_oui_db(), FilterConfig{});
  const FilterReport b = run_filter(ds, tiny_oui_db(), FilterConfig{});
  CHECK(a.to_json().dump() == b.to_json().dump());
  CHECK(a.to_json()["survivors"][0] == "f0:d5:bf:00:00:01");
  CHECK(a.to_json()["input_distinct"] == 2);
}
