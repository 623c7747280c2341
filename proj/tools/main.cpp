// idlink: associate sniffed device identifiers with biometric identity
// clusters via session co-occurrence. Subcommands cover each pipeline
// stage plus synthetic data generation and feasibility analysis.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "idlink/association.hpp"
#include "idlink/device_filter.hpp"
#include "idlink/errors.hpp"
#include "idlink/evaluation.hpp"
#include "idlink/ingest.hpp"
#include "idlink/linkage_tree.hpp"
#include "idlink/pipeline.hpp"
#include "idlink/simulate.hpp"
#include "idlink/types.hpp"

namespace {

using namespace idlink;

void write_text(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);  // binary: LF endings everywhere
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
  std::cout << "wrote " << path << "\n";
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ParseError(path + ": not valid JSON");
  return j;
}

// Flags shared by the pipeline-stage subcommands; each stage requires
// the subset it consumes.
struct CommonArgs {
  RunConfig run;
  std::string out_dir = "out";
};

// CLI11 option callback parsing a strictly-decimal size_t; returning
// false makes CLI11 raise a usage error (exit 2).
CLI::callback_t size_setter(std::optional<std::size_t>& slot) {
  return [&slot](const std::vector<std::string>& v) {
    const std::string& text = v.front();
    if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) return false;
    try {
      slot = static_cast<std::size_t>(std::stoull(text));
    } catch (...) {
      return false;
    }
    return true;
  };
}

void add_input_flags(CLI::App& cmd, CommonArgs& args, bool sessions, bool sightings,
                     bool embeddings, bool oui) {
  auto* s = cmd.add_option("--sessions", args.run.paths.sessions, "Session manifest (JSONL)");
  if (sessions) s->required();
  auto* g = cmd.add_option("--sightings", args.run.paths.sightings, "Device sightings (CSV)");
  if (sightings) g->required();
  auto* e =
      cmd.add_option("--embeddings", args.run.paths.embeddings, "Biometric embeddings (JSONL)");
  if (embeddings) e->required();
  auto* o = cmd.add_option("--oui", args.run.oui_path, "OUI prefix/vendor table (CSV)");
  if (oui) o->required();
  cmd.add_option("--registry", [&args](const std::vector<std::string>& v) {
       args.run.paths.registry = v.front();
       return true;
     }, "Ground-truth device registry (CSV)");
  cmd.add_option("--truth", [&args](const std::vector<std::string>& v) {
       args.run.paths.truth = v.front();
       return true;
     }, "Truth manifest attaching sample labels (JSONL)");
  cmd.add_flag("--lenient", args.run.lenient, "Skip malformed input rows instead of failing");
  cmd.add_option("--out", args.out_dir, "Output directory")->capture_default_str();
}

void add_filter_flags(CLI::App& cmd, CommonArgs& args) {
  cmd.add_option("--rss-threshold", args.run.filter.rss_threshold,
                 "Geo-fence RSS threshold in dBm")
      ->capture_default_str();
  cmd.add_option("--vendor-blacklist", args.run.filter.vendor_blacklist,
                 "Infrastructure vendor substrings to drop")
      ->delimiter(',');
  cmd.add_flag("!--keep-randomized", args.run.filter.drop_randomized,
               "Keep locally-administered (randomized) addresses");
}

void add_assoc_flags(CLI::App& cmd, CommonArgs& args, std::optional<std::size_t>& k_flag,
                     std::string& metric, std::string& method) {
  cmd.add_option("--omega", args.run.omega, "Context weight in the composite score")
      ->capture_default_str();
  cmd.add_option("--k", size_setter(k_flag), "Number of pairs to select (absolute)");
  cmd.add_option("--k-ratio", args.run.k_ratio, "K as a multiple of the registry size")
      ->capture_default_str();
  cmd.add_option("--metric", metric, "Context similarity: dice or euclidean")
      ->capture_default_str();
  cmd.add_option("--baseline", method, "Selection method: ours or naive")
      ->capture_default_str();
  cmd.add_option("--min-cluster-size", args.run.min_cluster_size,
                 "Smallest candidate cluster considered")
      ->capture_default_str();
}

void add_sim_flags(CLI::App& cmd, SimConfig& sim) {
  cmd.add_option("--seed", sim.seed)->capture_default_str();
  cmd.add_option("--victims", sim.victims)->capture_default_str();
  cmd.add_option("--oos-subjects", sim.oos_subjects)->capture_default_str();
  cmd.add_option("--sessions", sim.sessions)->capture_default_str();
  cmd.add_option("--embed-dim", sim.embed_dim)->capture_default_str();
  cmd.add_option("--embed-noise-sigma", sim.embed_noise_sigma)->capture_default_str();
  cmd.add_option("--samples-per-attendee-mean", sim.samples_per_attendee_mean)
      ->capture_default_str();
  cmd.add_option("--victim-attend-min", sim.victim_attend_prob_range.first)
      ->capture_default_str();
  cmd.add_option("--victim-attend-max", sim.victim_attend_prob_range.second)
      ->capture_default_str();
  cmd.add_option("--oos-attend-min", sim.oos_attend_prob_range.first)->capture_default_str();
  cmd.add_option("--oos-attend-max", sim.oos_attend_prob_range.second)->capture_default_str();
  cmd.add_option("--device-miss-prob", sim.device_miss_prob)->capture_default_str();
  cmd.add_option("--phantom-prob", sim.phantom_prob)->capture_default_str();
  cmd.add_option("--randomized-macs-per-session", sim.randomized_macs_per_session)
      ->capture_default_str();
  cmd.add_option("--infra-macs", sim.infra_macs)->capture_default_str();
  cmd.add_option("--distant-macs", sim.distant_macs)->capture_default_str();
  cmd.add_option("--rss-inside-min", sim.rss_inside_range.first)->capture_default_str();
  cmd.add_option("--rss-inside-max", sim.rss_inside_range.second)->capture_default_str();
  cmd.add_option("--rss-outside-min", sim.rss_outside_range.first)->capture_default_str();
  cmd.add_option("--rss-outside-max", sim.rss_outside_range.second)->capture_default_str();
}

std::string csv_curve(const std::vector<std::pair<std::size_t, double>>& curve) {
  std::string out = "g,mean_distinguishability\n";
  char buf[64];
  for (const auto& [g, v] : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f\n", g, v);
    out += buf;
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Cross-modal identity association: device filtering, linkage trees, and "
               "constrained cluster-device assignment"};
  app.require_subcommand(1);

  // --- filter ---
  CommonArgs filter_args;
  auto* cmd_filter = app.add_subcommand("filter", "Filter sniffed MACs and report per stage");
  add_input_flags(*cmd_filter, filter_args, true, true, false, true);
  add_filter_flags(*cmd_filter, filter_args);
  cmd_filter->callback([&filter_args] {
    LoadOptions opts;
    opts.lenient = filter_args.run.lenient;
    Dataset dataset;
    dataset.sessions = load_sessions(filter_args.run.paths.sessions, opts);
    dataset.sightings = load_sightings(filter_args.run.paths.sightings, opts);
    const OuiDatabase oui_db = load_oui(filter_args.run.oui_path, opts);
    const FilterReport report = run_filter(dataset, oui_db, filter_args.run.filter);
    write_json(filter_args.out_dir + "/filter_report.json", report.to_json());
  });

  // --- tree ---
  CommonArgs tree_args;
  auto* cmd_tree = app.add_subcommand("tree", "Build the average-linkage tree over embeddings");
  add_input_flags(*cmd_tree, tree_args, true, false, true, false);
  cmd_tree->callback([&tree_args] {
    LoadOptions opts;
    opts.lenient = tree_args.run.lenient;
    const auto sessions = load_sessions(tree_args.run.paths.sessions, opts);
    const auto samples = load_embeddings(tree_args.run.paths.embeddings, opts);
    const LinkageTree tree = build_tree(samples, sessions);
    write_json(tree_args.out_dir + "/tree.json", tree.to_json());
  });

  // --- associate ---
  CommonArgs assoc_args;
  std::optional<std::size_t> assoc_k;
  std::string assoc_metric = "dice";
  std::string assoc_method = "ours";
  auto* cmd_assoc =
      app.add_subcommand("associate", "Run the full pipeline and emit the assignment");
  add_input_flags(*cmd_assoc, assoc_args, true, true, true, true);
  add_filter_flags(*cmd_assoc, assoc_args);
  add_assoc_flags(*cmd_assoc, assoc_args, assoc_k, assoc_metric, assoc_method);
  cmd_assoc->callback([&] {
    assoc_args.run.k = assoc_k;
    assoc_args.run.metric = metric_from_string(assoc_metric);
    assoc_args.run.method = method_from_string(assoc_method);
    const RunResult result = run_pipeline(assoc_args.run);
    write_json(assoc_args.out_dir + "/tree.json", result.tree.to_json());
    write_json(assoc_args.out_dir + "/assignment.json", result.assignment.to_json());
  });

  // --- evaluate ---
  CommonArgs eval_args;
  std::string assignment_path;
  auto* cmd_eval =
      app.add_subcommand("evaluate", "Score an assignment against the truth registry");
  add_input_flags(*cmd_eval, eval_args, true, false, true, false);
  cmd_eval->add_option("--assignment", assignment_path, "assignment.json from `associate`")
      ->required();
  cmd_eval->callback([&eval_args, &assignment_path] {
    if (!eval_args.run.paths.registry) throw ConfigError("evaluate needs --registry");
    if (!eval_args.run.paths.truth) throw ConfigError("evaluate needs --truth");
    LoadOptions opts;
    opts.lenient = eval_args.run.lenient;
    const auto sessions = load_sessions(eval_args.run.paths.sessions, opts);
    auto samples = load_embeddings(eval_args.run.paths.embeddings, opts);
    const TruthManifest truth = load_truth(*eval_args.run.paths.truth, opts);
    for (auto& sample : samples) {
      const auto it = truth.sample_subject.find(sample.sample_id);
      if (it != truth.sample_subject.end()) sample.true_label = it->second;
    }
    const auto registry = load_registry(*eval_args.run.paths.registry, opts);
    const LinkageTree tree = build_tree(samples, sessions);
    const Assignment assignment = assignment_from_json(read_json(assignment_path));
    const EvalReport report = evaluate(assignment, tree, samples, registry);
    write_json(eval_args.out_dir + "/eval.json", report.to_json());
  });

  // --- simulate ---
  SimConfig sim;
  std::string sim_out = "out/dataset";
  auto* cmd_sim = app.add_subcommand("simulate", "Generate a seeded synthetic dataset");
  add_sim_flags(*cmd_sim, sim);
  cmd_sim->add_option("--out", sim_out, "Dataset directory")->capture_default_str();
  cmd_sim->callback([&sim, &sim_out] {
    generate(sim, sim_out);
    std::cout << "wrote dataset under " << sim_out << "\n";
  });

  // --- sweep ---
  SweepConfig sweep;
  std::optional<std::size_t> sweep_k;
  std::string sweep_out = "out";
  auto* cmd_sweep =
      app.add_subcommand("sweep", "Sweep one parameter over simulated datasets");
  add_sim_flags(*cmd_sweep, sweep.base);
  cmd_sweep->add_option("--parameter", sweep.parameter,
                        "oos_subjects, sessions, rss_threshold, or omega")
      ->required();
  cmd_sweep->add_option("--values", sweep.values, "Parameter values to sweep")
      ->required()
      ->delimiter(',');
  cmd_sweep->add_option("--seeds", sweep.seeds, "Simulated datasets per value")
      ->capture_default_str();
  cmd_sweep->add_option("--k", size_setter(sweep_k), "Number of pairs to select (absolute)");
  cmd_sweep->add_option("--k-ratio", sweep.k_ratio, "K as a multiple of the victim count")
      ->capture_default_str();
  cmd_sweep->add_option("--omega", sweep.omega)->capture_default_str();
  cmd_sweep->add_option("--rss-threshold", sweep.rss_threshold)->capture_default_str();
  cmd_sweep->add_option("--out", sweep_out, "Output directory")->capture_default_str();
  cmd_sweep->callback([&sweep, &sweep_k, &sweep_out] {
    sweep.k = sweep_k;
    sweep.work_dir = sweep_out + "/datasets";
    const auto rows = run_sweep(sweep);
    write_text(sweep_out + "/sweep.csv", sweep_csv(rows));
    std::cout << "wrote " << sweep_out + "/sweep.csv\n";
  });

  // --- feasibility ---
  CommonArgs feas_args;
  std::size_t g_min = 1, g_max = 0, g_step = 1, trials = 20;
  std::uint64_t feas_seed = 1;
  std::string mode = "both";
  auto* cmd_feas = app.add_subcommand(
      "feasibility", "Attendance-uniqueness curves for registry devices");
  add_input_flags(*cmd_feas, feas_args, true, true, false, true);
  add_filter_flags(*cmd_feas, feas_args);
  cmd_feas->add_option("--g-min", g_min, "Smallest number of drawn sessions")
      ->capture_default_str();
  cmd_feas->add_option("--g-max", g_max, "Largest number of drawn sessions (0 = all)")
      ->capture_default_str();
  cmd_feas->add_option("--g-step", g_step)->capture_default_str();
  cmd_feas->add_option("--trials", trials)->capture_default_str();
  cmd_feas->add_option("--seed", feas_seed)->capture_default_str();
  cmd_feas->add_option("--mode", mode, "rand, cont, or both")->capture_default_str();
  cmd_feas->callback([&] {
    if (!feas_args.run.paths.registry) throw ConfigError("feasibility needs --registry");
    if (mode != "rand" && mode != "cont" && mode != "both")
      throw ConfigError("unknown mode '" + mode + "' (expected rand, cont, or both)");
    if (g_step == 0) throw ConfigError("g-step must be >= 1");
    LoadOptions opts;
    opts.lenient = feas_args.run.lenient;
    RunResult run;
    run.dataset.sessions = load_sessions(feas_args.run.paths.sessions, opts);
    run.dataset.sightings = load_sightings(feas_args.run.paths.sightings, opts);
    run.dataset.registry = load_registry(*feas_args.run.paths.registry, opts);
    const OuiDatabase oui_db = load_oui(feas_args.run.oui_path, opts);
    run.sessionized = sessionize(run.dataset.sightings, run.dataset.sessions);
    run.filter_report = run_filter(run.dataset, oui_db, feas_args.run.filter);
    run.device_vectors = device_context_vectors(run.filter_report.survivors, run.sessionized,
                                                feas_args.run.filter.rss_threshold);
    const std::vector<ContextVector> attendance = registry_attendance(run);
    const std::size_t sessions = run.sessionized.session_ids.size();
    const std::size_t hi = g_max == 0 ? sessions : g_max;
    if (g_min == 0 || g_min > hi) throw ConfigError("empty g range");
    const auto curve = [&](bool contiguous) {
      std::vector<std::pair<std::size_t, double>> rows;
      for (std::size_t g = g_min; g <= hi; g += g_step) {
        const double v = contiguous
                             ? cont_g_distinguishability(attendance, g, trials, feas_seed)
                             : rand_g_distinguishability(attendance, g, trials, feas_seed);
        rows.emplace_back(g, v);
      }
      return rows;
    };
    if (mode != "cont") {
      write_text(feas_args.out_dir + "/feasibility_rand.csv", csv_curve(curve(false)));
      std::cout << "wrote " << feas_args.out_dir + "/feasibility_rand.csv\n";
    }
    if (mode != "rand") {
      write_text(feas_args.out_dir + "/feasibility_cont.csv", csv_curve(curve(true)));
      std::cout << "wrote " << feas_args.out_dir + "/feasibility_cont.csv\n";
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exit clean; usage errors exit 2
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
