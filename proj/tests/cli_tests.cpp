#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "test_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args, const testutil::TempDir& dir) {
  const std::string out_f = dir.str() + "/__stdout";
  const std::string err_f = dir.str() + "/__stderr";
  const std::string cmd =
      std::string(IDLINK_CLI_PATH) + " " + args + " >" + out_f + " 2>" + err_f;
  const int raw = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = testutil::slurp(out_f);
  r.err = testutil::slurp(err_f);
  return r;
}

// Small, noise-free dataset: four victims every method gets right.
std::string make_dataset(const testutil::TempDir& dir, const std::string& name) {
  const std::string data = dir.str() + "/" + name;
  const CliResult r = run_cli(
      "simulate --seed 11 --victims 4 --oos-subjects 0 --sessions 10 --embed-dim 16 "
      "--embed-noise-sigma 0.08 --samples-per-attendee-mean 3 --victim-attend-min 0.4 "
      "--victim-attend-max 0.8 --device-miss-prob 0 --phantom-prob 0 "
      "--randomized-macs-per-session 5 --infra-macs 2 --distant-macs 3 --out " + data,
      dir);
  REQUIRE(r.code == 0);
  return data;
}

std::string input_flags(const std::string& data) {
  return " --sessions " + data + "/sessions.jsonl --sightings " + data +
         "/sightings.csv --embeddings " + data + "/embeddings.jsonl --oui " + data +
         "/oui.csv --registry " + data + "/registry.csv --truth " + data + "/truth.jsonl";
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (const char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("simulate writes a complete dataset") {
  testutil::TempDir dir("cli_sim");
  const std::string data = make_dataset(dir, "data");
  for (const auto* name : {"sessions.jsonl", "sightings.csv", "embeddings.jsonl",
                           "registry.csv", "oui.csv", "truth.jsonl", "config.json"}) {
    CHECK(fs::exists(data + "/" + std::string(name)));
  }
  CHECK(count_lines(testutil::slurp(data + "/registry.csv")) == 5);  // header + 4
}

TEST_CASE("filter reports per-stage counts and survivors") {
  testutil::TempDir dir("cli_filter");
  const std::string data = make_dataset(dir, "data");
  const CliResult r = run_cli("filter --sessions " + data + "/sessions.jsonl --sightings " +
                                  data + "/sightings.csv --oui " + data +
                                  "/oui.csv --out " + dir.str() + "/out",
                              dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("filter_report.json") != std::string::npos);
  const json report = json::parse(testutil::slurp(dir.str() + "/out/filter_report.json"));
  CHECK(report.at("survivors").size() == 4);
  CHECK(report.at("removed_randomized") == 50);  // 5 per session x 10
  CHECK(report.at("removed_vendor") == 2);       // infrastructure macs
  CHECK(report.at("removed_rss").get<int>() >= 3);
  CHECK(report.at("input_distinct").get<int>() > 50);
}

TEST_CASE("tree emits the full merge structure") {
  testutil::TempDir dir("cli_tree");
  const std::string data = make_dataset(dir, "data");
  const CliResult r = run_cli("tree --sessions " + data + "/sessions.jsonl --embeddings " +
                                  data + "/embeddings.jsonl --out " + dir.str() + "/out",
                              dir);
  CHECK(r.code == 0);
  const json tree = json::parse(testutil::slurp(dir.str() + "/out/tree.json"));
  const std::size_t leaves = tree.at("leaf_count");
  CHECK(leaves == count_lines(testutil::slurp(data + "/embeddings.jsonl")));
  CHECK(tree.at("nodes").size() == 2 * leaves - 1);
  CHECK(tree.at("root_id") == 2 * leaves - 2);
}

TEST_CASE("associate then evaluate recovers the planted identities") {
  testutil::TempDir dir("cli_assoc");
  const std::string data = make_dataset(dir, "data");
  const CliResult assoc = run_cli(
      "associate" + input_flags(data) + " --k 4 --out " + dir.str() + "/out", dir);
  CHECK(assoc.code == 0);
  const json assignment = json::parse(testutil::slurp(dir.str() + "/out/assignment.json"));
  CHECK(assignment.at("pairs").size() == 4);
  CHECK(assignment.at("k_requested") == 4);
  CHECK(assignment.at("clamped") == false);

  const CliResult eval = run_cli(
      "evaluate --sessions " + data + "/sessions.jsonl --embeddings " + data +
          "/embeddings.jsonl --registry " + data + "/registry.csv --truth " + data +
          "/truth.jsonl --assignment " + dir.str() + "/out/assignment.json --out " +
          dir.str() + "/out",
      dir);
  CHECK(eval.code == 0);
  const json report = json::parse(testutil::slurp(dir.str() + "/out/eval.json"));
  CHECK(report.at("accuracy") == 1.0);
  CHECK(report.at("mean_purity") == 1.0);
  CHECK(report.at("victims_total") == 4);
}

TEST_CASE("repeated runs produce byte-identical artifacts") {
  testutil::TempDir dir("cli_repeat");
  const std::string data = make_dataset(dir, "data");
  REQUIRE(run_cli("associate" + input_flags(data) + " --k 4 --out " + dir.str() + "/a", dir)
              .code == 0);
  REQUIRE(run_cli("associate" + input_flags(data) + " --k 4 --out " + dir.str() + "/b", dir)
              .code == 0);
  CHECK(testutil::slurp(dir.str() + "/a/assignment.json") ==
        testutil::slurp(dir.str() + "/b/assignment.json"));
  CHECK(testutil::slurp(dir.str() + "/a/tree.json") ==
        testutil::slurp(dir.str() + "/b/tree.json"));
}

TEST_CASE("euclidean metric and naive baseline are reachable from the command line") {
  testutil::TempDir dir("cli_alt");
  const std::string data = make_dataset(dir, "data");
  for (const std::string extra : {" --metric euclidean", " --baseline naive"}) {
    const std::string out = dir.str() + (extra.find("euclid") != std::string::npos ? "/e" : "/n");
    const CliResult assoc =
        run_cli("associate" + input_flags(data) + " --k 4" + extra + " --out " + out, dir);
    CHECK(assoc.code == 0);
    const CliResult eval = run_cli(
        "evaluate --sessions " + data + "/sessions.jsonl --embeddings " + data +
            "/embeddings.jsonl --registry " + data + "/registry.csv --truth " + data +
            "/truth.jsonl --assignment " + out + "/assignment.json --out " + out,
        dir);
    CHECK(eval.code == 0);
    CHECK(json::parse(testutil::slurp(out + "/eval.json")).at("accuracy") == 1.0);
  }
  CHECK(run_cli("associate" + input_flags(data) + " --k 4 --metric manhattan", dir).code == 2);
  CHECK(run_cli("associate" + input_flags(data) + " --k 4 --baseline best", dir).code == 2);
}

TEST_CASE("sweep averages methods over seeds into one csv") {
  testutil::TempDir dir("cli_sweep");
  const CliResult r = run_cli(
      "sweep --parameter omega --values 0.25,0.75 --seeds 1 --k 3 --victims 3 "
      "--oos-subjects 0 --sessions 6 --embed-dim 8 --embed-noise-sigma 0.1 "
      "--samples-per-attendee-mean 2 --device-miss-prob 0 --phantom-prob 0 "
      "--randomized-macs-per-session 3 --infra-macs 1 --distant-macs 2 --out " +
          dir.str() + "/out",
      dir);
  CHECK(r.code == 0);
  const std::string csv = testutil::slurp(dir.str() + "/out/sweep.csv");
  CHECK(csv.rfind("value,method,accuracy,mean_purity\n", 0) == 0);
  CHECK(count_lines(csv) == 7);  // header + 2 values x 3 methods
  CHECK(csv.find("0.25,naive,") != std::string::npos);
  CHECK(csv.find("0.75,ours,") != std::string::npos);
  CHECK(csv.find("0.75,ours-euclidean,") != std::string::npos);
  CHECK(fs::exists(dir.str() + "/out/datasets/seed_0/sightings.csv"));
}

TEST_CASE("feasibility writes the requested curves") {
  testutil::TempDir dir("cli_feas");
  const std::string data = make_dataset(dir, "data");
  const std::string common = "feasibility --sessions " + data + "/sessions.jsonl --sightings " +
                             data + "/sightings.csv --oui " + data + "/oui.csv --registry " +
                             data + "/registry.csv --trials 5 --g-min 1 --g-max 4";

  const CliResult both = run_cli(common + " --out " + dir.str() + "/both", dir);
  CHECK(both.code == 0);
  const std::string rand_csv = testutil::slurp(dir.str() + "/both/feasibility_rand.csv");
  const std::string cont_csv = testutil::slurp(dir.str() + "/both/feasibility_cont.csv");
  CHECK(rand_csv.rfind("g,mean_distinguishability\n", 0) == 0);
  CHECK(count_lines(rand_csv) == 5);  // header + g in 1..4
  CHECK(count_lines(cont_csv) == 5);

  const CliResult rand_only = run_cli(common + " --mode rand --out " + dir.str() + "/r", dir);
  CHECK(rand_only.code == 0);
  CHECK(fs::exists(dir.str() + "/r/feasibility_rand.csv"));
  CHECK_FALSE(fs::exists(dir.str() + "/r/feasibility_cont.csv"));

  CHECK(run_cli(common + " --mode weird --out " + dir.str() + "/w", dir).code == 2);
  CHECK(run_cli(common + " --g-step 0 --out " + dir.str() + "/w", dir).code == 2);
}

TEST_CASE("usage errors exit 2, data errors exit 1") {
  testutil::TempDir dir("cli_codes");

  CHECK(run_cli("", dir).code == 2);             // a subcommand is required
  CHECK(run_cli("conquer", dir).code == 2);      // unknown subcommand
  CHECK(run_cli("--help", dir).code == 0);       // help exits clean
  CHECK(run_cli("simulate --help", dir).code == 0);
  CHECK(run_cli("simulate --victims", dir).code == 2);   // missing value
  CHECK(run_cli("simulate --no-such-flag", dir).code == 2);
  CHECK(run_cli("tree --embeddings a.jsonl", dir).code == 2);  // missing --sessions
  CHECK(run_cli("simulate --victims 0 --out " + dir.str() + "/d", dir).code == 2);

  const std::string data = make_dataset(dir, "data");
  // --k must be a whole number
  CHECK(run_cli("associate" + input_flags(data) + " --k 1.5", dir).code == 2);
  CHECK(run_cli("associate" + input_flags(data) + " --k -3", dir).code == 2);
  CHECK(run_cli("associate" + input_flags(data) + " --k 0", dir).code == 2);
  // missing input file is a configuration problem
  CHECK(run_cli("tree --sessions " + dir.str() + "/nope.jsonl --embeddings " + data +
                    "/embeddings.jsonl",
                dir).code == 2);
  // evaluate insists on ground truth
  CHECK(run_cli("evaluate --sessions " + data + "/sessions.jsonl --embeddings " + data +
                    "/embeddings.jsonl --truth " + data + "/truth.jsonl --assignment x.json",
                dir).code == 2);

  // malformed data fails the pipeline with exit 1
  const std::string bad = dir.file("bad_sightings.csv",
                                   "timestamp_ms,mac,rss_dbm\n"
                                   "100,zz:zz:zz:zz:zz:zz,-40\n");
  const CliResult parse_fail = run_cli("filter --sessions " + data +
                                           "/sessions.jsonl --sightings " + bad + " --oui " +
                                           data + "/oui.csv --out " + dir.str() + "/out",
                                       dir);
  CHECK(parse_fail.code == 1);
  CHECK(parse_fail.err.find("error:") != std::string::npos);
  CHECK(parse_fail.err.find("bad_sightings.csv") != std::string::npos);
  CHECK(parse_fail.err.find(":2:") != std::string::npos);
}

TEST_CASE("lenient mode skips malformed rows instead of failing") {
  testutil::TempDir dir("cli_lenient");
  const std::string data = make_dataset(dir, "data");
  // one good row, one mangled row
  std::string csv = "timestamp_ms,mac,rss_dbm\n";
  csv += "1700000000100,aa:bb:cc:dd:ee:ff,-40\n";
  csv += "not-a-timestamp,aa:bb:cc:dd:ee:01,-40\n";
  const std::string mixed = dir.file("mixed.csv", csv);

  const std::string args = "filter --sessions " + data + "/sessions.jsonl --sightings " +
                           mixed + " --oui " + data + "/oui.csv --out " + dir.str() + "/out";
  CHECK(run_cli(args, dir).code == 1);
  const CliResult lenient = run_cli(args + " --lenient", dir);
  CHECK(lenient.code == 0);
  const json report = json::parse(testutil::slurp(dir.str() + "/out/filter_report.json"));
  CHECK(report.at("input_distinct") == 1);
}
