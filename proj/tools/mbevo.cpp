// mbevo: evolve Markov brain agents on the ramped signal/noise task and
// analyse the runs.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "mbevo/analysis.hpp"
#include "mbevo/harness.hpp"
#include "mbevo/run_store.hpp"
#include "mbevo/self_check.hpp"

namespace fs = std::filesystem;
using namespace mbevo;

namespace {

constexpr int kExitPopulationFailure = 1;
constexpr int kExitUsage = 2;

struct EvolveArgs {
  std::string config;
  std::vector<double> difficulty;
  std::vector<int> ndt;
  std::optional<int> generations, replicates, population, threads, seed_length, snapshot_interval,
      checkpoint_interval, trials, max_steps, segment_length, halt_after, probe_generation;
  std::optional<std::uint64_t> seed;
  std::optional<double> point_rate, dup_rate, del_rate;
  std::string out;
  bool common_trials = false;
  bool full_scale = false;
};

int cmd_evolve(const EvolveArgs& a) {
  ExperimentConfig c = a.full_scale ? full_scale_profile() : desk_scale_profile();
  if (!a.config.empty()) c = load_experiment_config(a.config, c);
  auto& p = c.population;
  const int old_generations = p.generations;
  if (!a.difficulty.empty()) c.difficulty_grid = a.difficulty;
  if (!a.ndt.empty()) c.nondecision_grid = a.ndt;
  if (a.generations) p.generations = *a.generations;
  if (a.replicates) c.replicates = *a.replicates;
  if (a.population) p.population_size = *a.population;
  if (a.threads) c.parallelism = *a.threads;
  if (a.seed_length) p.seed_genome_length = static_cast<std::size_t>(*a.seed_length);
  if (a.snapshot_interval) p.snapshot_interval = *a.snapshot_interval;
  if (a.checkpoint_interval) p.checkpoint_interval = *a.checkpoint_interval;
  if (a.trials) p.condition.trials_per_agent = *a.trials;
  if (a.max_steps) p.condition.max_steps = *a.max_steps;
  if (a.segment_length) p.rates.segment_length = static_cast<std::size_t>(*a.segment_length);
  if (a.point_rate) p.rates.point = *a.point_rate;
  if (a.dup_rate) p.rates.duplication = *a.dup_rate;
  if (a.del_rate) p.rates.deletion = *a.del_rate;
  if (a.seed) c.base_seed = *a.seed;
  if (a.common_trials) p.common_trials = true;
  if (!a.out.empty()) c.output_dir = a.out;
  if (a.probe_generation) {
    p.extra_snapshots = {*a.probe_generation};
  } else if (p.generations != old_generations) {
    p.extra_snapshots = {std::max(0, p.generations - 30)};
  }
  // With fewer populations than workers, spare workers go to agent evaluation.
  const int populations = static_cast<int>(c.difficulty_grid.size() * c.nondecision_grid.size()) * c.replicates;
  if (c.parallelism > populations) p.threads = std::max(1, c.parallelism / populations);
  ExperimentOptions opts;
  opts.halt_after = a.halt_after;
  return run_experiment(c, opts);
}

int cmd_probe(const std::string& run, int generation, const std::string& out) {
  const fs::path run_dir = resolve_output_path(run);
  const auto cfg = RunDirectory::read_config(run_dir);
  const auto genomes = RunDirectory::read_snapshot(run_dir, generation);
  const StreamKey key = StreamKey(cfg.run_seed).with(Purpose::Probe).with(static_cast<std::uint64_t>(generation));
  const auto probe = probe_generation(genomes, cfg.condition, key);
  std::optional<fs::path> out_dir;
  if (!out.empty()) out_dir = resolve_output_path(out);
  const auto dir = write_probe(run_dir, generation, probe, out_dir);
  const auto root = run_dir.parent_path();
  if (!out_dir) {
    const auto rel = fs::relative(dir, root).generic_string();
    append_manifest_files(root, {rel + "/records.jsonl", rel + "/summary.json"});
  }
  std::printf("generation %d  %s  pooled accuracy %.4f  decided %d  undecided %d\n", generation,
              condition_label(cfg.condition).c_str(), probe.pooled_accuracy, probe.decided, probe.undecided);
  std::printf("wrote %s\n", dir.string().c_str());
  return 0;
}

std::vector<fs::path> population_dirs(const std::vector<std::string>& runs) {
  std::vector<fs::path> out;
  for (const auto& r : runs) {
    const fs::path p = resolve_output_path(r);
    if (fs::exists(p / "population.json")) {
      out.push_back(p);
      continue;
    }
    if (!fs::is_directory(p)) throw NotFoundError("no run directory at " + p.string());
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(p)) {
      if (fs::exists(e.path() / "population.json")) found.push_back(e.path());
    }
    std::sort(found.begin(), found.end());
    out.insert(out.end(), found.begin(), found.end());
  }
  if (out.empty()) throw NotFoundError("no population directories found");
  return out;
}

std::ostream& open_out(const std::string& out, std::ofstream& file) {
  if (out.empty() || out == "-") return std::cout;
  const auto path = resolve_output_path(out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  file.open(path);
  if (!file) throw IoError("cannot write " + path.string());
  return file;
}

int cmd_lod(const std::vector<std::string>& runs, int index, const std::string& out) {
  std::map<std::string, std::vector<std::vector<LodEntry>>> by_condition;
  for (const auto& dir : population_dirs(runs)) {
    const auto cfg = RunDirectory::read_config(dir);
    const auto ancestry = RunDirectory::read_ancestry(dir);
    by_condition[condition_label(cfg.condition)].push_back(extract_lod(ancestry, index));
  }
  std::ofstream file;
  std::ostream& os = open_out(out, file);
  os << "condition,generation,mean_connections,sd_connections,mean_fitness\n";
  char buf[160];
  for (const auto& [label, lods] : by_condition) {
    const auto conn = average_lod_trajectories(lods, LodField::Connections);
    const auto fit = average_lod_trajectories(lods, LodField::Fitness);
    for (std::size_t g = 0; g < conn.size(); ++g) {
      std::snprintf(buf, sizeof buf, "%s,%zu,%.4f,%.4f,%.4f\n", label.c_str(), g, conn[g].mean, conn[g].sd,
                    fit[g].mean);
      os << buf;
    }
  }
  return 0;
}

int cmd_correlate(const std::vector<std::string>& probes, int max_offset, int n_min, bool per_agent,
                  const std::string& out) {
  std::map<std::string, std::vector<std::vector<TrialRecord>>> by_condition;
  for (const auto& p : probes) {
    const fs::path dir = resolve_output_path(p);
    std::string label = "unknown";
    std::ifstream summary(dir / "summary.json");
    if (summary) {
      const auto j = nlohmann::json::parse(summary);
      if (j.contains("target_freq")) {
        Condition c;
        c.target_freq = j.at("target_freq").get<double>();
        c.nondecision_time = j.at("nondecision_time").get<int>();
        label = condition_label(c);
      }
    }
    auto agents = read_probe_records(dir);
    auto& bucket = by_condition[label];
    bucket.insert(bucket.end(), std::make_move_iterator(agents.begin()), std::make_move_iterator(agents.end()));
  }
  std::ofstream file;
  std::ostream& os = open_out(out, file);
  os << "condition,offset,r,n\n";
  char buf[64];
  for (const auto& [label, agents] : by_condition) {
    CorrelationProfile profile;
    if (per_agent) {
      profile = trajectory_correlation_per_agent(agents, max_offset, n_min);
    } else {
      std::vector<TrialRecord> pooled;
      for (const auto& a : agents) pooled.insert(pooled.end(), a.begin(), a.end());
      profile = trajectory_correlation(pooled, max_offset, n_min);
    }
    for (std::size_t k = 0; k < profile.offsets.size(); ++k) {
      os << label << ',' << profile.offsets[k] << ',';
      if (profile.r[k]) {
        std::snprintf(buf, sizeof buf, "%.6f", *profile.r[k]);
        os << buf;
      }
      os << ',' << profile.n[k] << '\n';
    }
  }
  return 0;
}

int cmd_validate(const std::string& run) {
  int failed = 0;
  for (const auto& c : run_self_checks()) {
    std::printf("[%s] %s  %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    if (!c.passed) ++failed;
  }
  if (!run.empty()) {
    const auto issues = validate_run_files(resolve_output_path(run));
    for (const auto& i : issues) std::printf("[FAIL] %s: %s\n", i.problem.c_str(), i.path.c_str());
    if (issues.empty()) std::printf("[PASS] manifest matches files under %s\n", run.c_str());
    failed += static_cast<int>(issues.size());
  }
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Markov brain evolution on a ramped signal/noise decision task"};
  app.require_subcommand(1);

  EvolveArgs ev;
  auto* evolve = app.add_subcommand("evolve", "run a grid of populations (or a single condition)");
  evolve->add_option("--config", ev.config, "sectioned key=value config file")->check(CLI::ExistingFile);
  evolve->add_flag("--full-scale", ev.full_scale, "start from the full 63-condition x 100-replicate profile");
  evolve->add_option("--difficulty", ev.difficulty, "target frequencies, e.g. 0.6 0.9")->expected(1, -1);
  evolve->add_option("--ndt", ev.ndt, "non-decision times")->expected(1, -1);
  evolve->add_option("--generations", ev.generations);
  evolve->add_option("--replicates", ev.replicates);
  evolve->add_option("--population", ev.population, "agents per population");
  evolve->add_option("--seed", ev.seed, "base seed");
  evolve->add_option("--out", ev.out, "output directory");
  evolve->add_option("--threads", ev.threads, "worker cap");
  evolve->add_option("--seed-length", ev.seed_length, "seed genome length");
  evolve->add_option("--snapshot-interval", ev.snapshot_interval);
  evolve->add_option("--checkpoint-interval", ev.checkpoint_interval);
  evolve->add_option("--probe-generation", ev.probe_generation, "extra snapshot generation (default generations-30)");
  evolve->add_option("--trials", ev.trials, "trials per agent");
  evolve->add_option("--max-steps", ev.max_steps);
  evolve->add_option("--point-rate", ev.point_rate);
  evolve->add_option("--dup-rate", ev.dup_rate);
  evolve->add_option("--del-rate", ev.del_rate);
  evolve->add_option("--segment-length", ev.segment_length);
  evolve->add_flag("--common-trials", ev.common_trials, "all agents of a generation face the same trials");
  evolve->add_option("--halt-after", ev.halt_after, "stop after this generation's checkpoint (testing)")
      ->group("");

  std::string probe_run, probe_out;
  int probe_gen = 0;
  auto* probe = app.add_subcommand("probe", "re-evaluate a snapshot generation with full trial logs");
  probe->add_option("--run", probe_run, "population directory")->required();
  probe->add_option("--generation", probe_gen)->required();
  probe->add_option("--out", probe_out, "output directory (default <run>/probe_<generation>)");

  std::vector<std::string> lod_runs;
  int lod_index = 0;
  std::string lod_out;
  auto* lod = app.add_subcommand("lod", "extract lines of descent and average them per condition");
  lod->add_option("--run", lod_runs, "experiment or population directories")->required()->expected(1, -1);
  lod->add_option("--index", lod_index, "final-generation agent to trace");
  lod->add_option("--out", lod_out, "CSV path (default stdout)");

  std::vector<std::string> corr_probes;
  int max_offset = kDefaultMaxOffset, n_min = kDefaultMinSamples;
  bool per_agent = false;
  std::string corr_out;
  auto* correlate = app.add_subcommand("correlate", "input-to-decision correlation profiles");
  correlate->add_option("--probe", corr_probes, "probe directories")->required()->expected(1, -1);
  correlate->add_option("--max-offset", max_offset);
  correlate->add_option("--min-samples", n_min);
  correlate->add_flag("--per-agent", per_agent, "average per-agent profiles instead of pooling trials");
  correlate->add_option("--out", corr_out, "CSV path (default stdout)");

  std::string validate_run;
  auto* validate = app.add_subcommand("validate", "run built-in oracle checks and verify a run's manifest");
  validate->add_option("--run", validate_run, "experiment directory to check against its manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*evolve) return cmd_evolve(ev);
    if (*probe) return cmd_probe(probe_run, probe_gen, probe_out);
    if (*lod) return cmd_lod(lod_runs, lod_index, lod_out);
    if (*correlate) return cmd_correlate(corr_probes, max_offset, n_min, per_agent, corr_out);
    if (*validate) return cmd_validate(validate_run);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitPopulationFailure;
  }
  return kExitUsage;
}
