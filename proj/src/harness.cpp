#include "mbevo/harness.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "mbevo/run_store.hpp"
#include "parallel.hpp"

namespace mbevo {

namespace fs = std::filesystem;

void ExperimentConfig::validate() const {
  if (difficulty_grid.empty() || nondecision_grid.empty()) throw std::invalid_argument("experiment grid is empty");
  if (replicates < 1) throw std::invalid_argument("replicates must be at least 1");
  if (parallelism < 1) throw std::invalid_argument("parallelism must be at least 1");
  for (double f : difficulty_grid) {
    for (int t : nondecision_grid) {
      Condition c = population.condition;
      c.target_freq = f;
      c.nondecision_time = t;
      c.validate();
    }
  }
  PopulationConfig p = population;
  p.validate();
}

std::uint64_t ExperimentConfig::hash() const {
  std::ostringstream os;
  os.precision(17);
  os << "difficulty=";
  for (double f : difficulty_grid) os << f << ' ';
  os << ";nondecision=";
  for (int t : nondecision_grid) os << t << ' ';
  os << ";replicates=" << replicates << ";base_seed=" << base_seed << ";snapshot_interval="
     << population.snapshot_interval << ";";
  for (int g : population.extra_snapshots) os << g << ' ';
  PopulationConfig p = population;
  p.run_seed = 0;
  os << p.canonical();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : os.str()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

void add_probe_snapshot(PopulationConfig& p) {
  // Mirrors probing 30 generations before the end of the run.
  const int probe = std::max(0, p.generations - 30);
  if (std::find(p.extra_snapshots.begin(), p.extra_snapshots.end(), probe) == p.extra_snapshots.end()) {
    p.extra_snapshots.push_back(probe);
  }
}

}  // namespace

ExperimentConfig desk_scale_profile() {
  ExperimentConfig c;
  c.population.generations = 2000;
  add_probe_snapshot(c.population);
  return c;
}

ExperimentConfig full_scale_profile() {
  ExperimentConfig c;
  c.difficulty_grid = {0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90};
  c.nondecision_grid = {10, 15, 20, 25, 30, 35, 40, 45, 50};
  c.replicates = 100;
  c.population.generations = 10000;
  c.population.snapshot_interval = 1000;
  add_probe_snapshot(c.population);
  return c;
}

namespace {

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) {
    std::istringstream v(item);
    T value;
    if (!(v >> value)) throw std::invalid_argument("config: cannot parse list item '" + item + "'");
    out.push_back(value);
  }
  return out;
}

}  // namespace

ExperimentConfig load_experiment_config(const fs::path& path, ExperimentConfig c) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  static const std::set<std::string> known = {
      "experiment.difficulty", "experiment.nondecision", "experiment.replicates", "experiment.base_seed",
      "experiment.output_dir", "experiment.parallelism", "population.size", "population.generations",
      "population.seed_genome_length", "population.seed_connections_min",
      "population.seed_connections_max", "population.snapshot_interval", "population.checkpoint_interval",
      "population.common_trials", "population.threads", "population.probe_generation", "task.max_steps",
      "task.trials_per_agent", "mutation.point", "mutation.duplication", "mutation.deletion",
      "mutation.segment_length"};
  for (const auto& [section, body] : tree) {
    for (const auto& [key, _] : body) {
      if (!known.contains(section + "." + key)) throw std::invalid_argument("config: unknown key " + section + "." + key);
    }
  }
  auto& p = c.population;
  const int old_generations = p.generations;
  if (auto v = tree.get_optional<std::string>("experiment.difficulty")) c.difficulty_grid = parse_list<double>(*v);
  if (auto v = tree.get_optional<std::string>("experiment.nondecision")) c.nondecision_grid = parse_list<int>(*v);
  c.replicates = tree.get("experiment.replicates", c.replicates);
  c.base_seed = tree.get("experiment.base_seed", c.base_seed);
  if (auto v = tree.get_optional<std::string>("experiment.output_dir")) c.output_dir = *v;
  c.parallelism = tree.get("experiment.parallelism", c.parallelism);
  p.population_size = tree.get("population.size", p.population_size);
  p.generations = tree.get("population.generations", p.generations);
  p.seed_genome_length = tree.get("population.seed_genome_length", p.seed_genome_length);
  p.seed_connections_min = tree.get("population.seed_connections_min", p.seed_connections_min);
  p.seed_connections_max = tree.get("population.seed_connections_max", p.seed_connections_max);
  p.snapshot_interval = tree.get("population.snapshot_interval", p.snapshot_interval);
  p.checkpoint_interval = tree.get("population.checkpoint_interval", p.checkpoint_interval);
  p.common_trials = tree.get("population.common_trials", p.common_trials);
  p.threads = tree.get("population.threads", p.threads);
  p.condition.max_steps = tree.get("task.max_steps", p.condition.max_steps);
  p.condition.trials_per_agent = tree.get("task.trials_per_agent", p.condition.trials_per_agent);
  p.rates.point = tree.get("mutation.point", p.rates.point);
  p.rates.duplication = tree.get("mutation.duplication", p.rates.duplication);
  p.rates.deletion = tree.get("mutation.deletion", p.rates.deletion);
  p.rates.segment_length = tree.get("mutation.segment_length", p.rates.segment_length);
  if (auto v = tree.get_optional<int>("population.probe_generation")) {
    p.extra_snapshots = {*v};
  } else if (p.generations != old_generations) {
    p.extra_snapshots.clear();
    add_probe_snapshot(p);
  }
  return c;
}

std::uint64_t derive_population_seed(std::uint64_t base_seed, int condition_index, int replicate) {
  return StreamKey(base_seed)
      .with(Purpose::PopulationSeed)
      .with(static_cast<std::uint64_t>(condition_index))
      .with(static_cast<std::uint64_t>(replicate))
      .value();
}

std::vector<GridEntry> expand_grid(const ExperimentConfig& config) {
  if (config.difficulty_grid.empty() || config.nondecision_grid.empty()) {
    throw std::invalid_argument("expand_grid: empty grid");
  }
  if (config.replicates < 1) throw std::invalid_argument("expand_grid: replicates must be at least 1");
  std::vector<GridEntry> out;
  int condition_index = 0;
  for (double f : config.difficulty_grid) {
    for (int t : config.nondecision_grid) {
      for (int r = 0; r < config.replicates; ++r) {
        GridEntry e;
        e.population_id = static_cast<int>(out.size());
        e.condition_index = condition_index;
        e.replicate = r;
        e.condition = config.population.condition;
        e.condition.target_freq = f;
        e.condition.nondecision_time = t;
        e.seed = derive_population_seed(config.base_seed, condition_index, r);
        out.push_back(e);
      }
      ++condition_index;
    }
  }
  return out;
}

std::string population_dir_name(int population_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%03d", population_id);
  return buf;
}

std::string condition_label(const Condition& c) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "f%.2f_t%d", c.target_freq, c.nondecision_time);
  return buf;
}

PopulationConfig population_config_for(const ExperimentConfig& config, const GridEntry& entry) {
  PopulationConfig p = config.population;
  p.condition = entry.condition;
  p.run_seed = entry.seed;
  return p;
}

fs::path resolve_output_path(const fs::path& p) {
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv(kOutputRootEnv); root && *root) return fs::path(root) / p;
  return p;
}

namespace {

constexpr const char* kManifestName = "manifest.jsonl";

class ManifestLog {
public:
  explicit ManifestLog(const fs::path& root) : path_(root / kManifestName) {}

  void append(const nlohmann::ordered_json& event) {
    std::lock_guard lock(mutex_);
    std::ofstream out(path_, std::ios::app);
    out << event.dump() << '\n';
    out.flush();
    if (!out) throw IoError("cannot append to " + path_.string());
  }

private:
  fs::path path_;
  std::mutex mutex_;
};

}  // namespace

std::optional<Manifest> read_manifest(const fs::path& root) {
  std::ifstream in(root / kManifestName);
  if (!in) return std::nullopt;
  Manifest m;
  std::map<int, ManifestPopulation> pops;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      continue;  // a torn final line from a crash
    }
    const auto event = j.at("event").get<std::string>();
    if (event == "experiment") {
      m.config_hash = j.at("config_hash").get<std::uint64_t>();
      m.version = j.at("version").get<std::string>();
    } else if (event == "population") {
      auto& p = pops[j.at("id").get<int>()];
      p.population_id = j.at("id").get<int>();
      p.dir = j.at("dir").get<std::string>();
      p.seed = j.at("seed").get<std::uint64_t>();
      p.status = j.at("status").get<std::string>();
      if (j.contains("files")) p.files = j.at("files").get<std::vector<std::string>>();
    } else if (event == "files") {
      for (auto& f : j.at("files").get<std::vector<std::string>>()) m.extra_files.push_back(f);
    }
  }
  for (auto& [_, p] : pops) m.populations.push_back(std::move(p));
  return m;
}

void append_manifest_files(const fs::path& root, const std::vector<std::string>& files) {
  if (!fs::exists(root / kManifestName)) return;
  ManifestLog log(root);
  nlohmann::ordered_json e;
  e["event"] = "files";
  e["files"] = files;
  log.append(e);
}

int run_experiment(const ExperimentConfig& input, const ExperimentOptions& options) {
  ExperimentConfig config = input;
  config.output_dir = resolve_output_path(config.output_dir);
  config.validate();
  const auto entries = expand_grid(config);
  fs::create_directories(config.output_dir);

  auto manifest = read_manifest(config.output_dir);
  if (manifest && manifest->config_hash != config.hash()) {
    std::cerr << "error: " << config.output_dir.string() << " holds an experiment with a different configuration\n";
    return 1;
  }
  std::map<int, std::string> previous_status;
  if (manifest) {
    for (const auto& p : manifest->populations) previous_status[p.population_id] = p.status;
  }

  ManifestLog log(config.output_dir);
  if (!manifest) {
    nlohmann::ordered_json header;
    header["event"] = "experiment";
    header["config_hash"] = config.hash();
    header["version"] = kVersionTag;
    header["populations"] = entries.size();
    log.append(header);
    for (const auto& e : entries) {
      nlohmann::ordered_json ev;
      ev["event"] = "population";
      ev["id"] = e.population_id;
      ev["dir"] = population_dir_name(e.population_id);
      ev["seed"] = e.seed;
      ev["status"] = "pending";
      log.append(ev);
    }
  }

  std::atomic<int> failures{0};
  std::mutex print_mutex;
  detail::parallel_for(static_cast<int>(entries.size()), config.parallelism, [&](int i) {
    const auto& entry = entries[static_cast<std::size_t>(i)];
    const PopulationConfig pc = population_config_for(config, entry);
    const auto name = population_dir_name(entry.population_id);
    RunDirectory dir(config.output_dir / name, entry.population_id);
    auto status_event = [&](const char* status, const std::vector<std::string>* files) {
      nlohmann::ordered_json ev;
      ev["event"] = "population";
      ev["id"] = entry.population_id;
      ev["dir"] = name;
      ev["seed"] = entry.seed;
      ev["status"] = status;
      if (files) ev["files"] = *files;
      log.append(ev);
    };
    if (previous_status[entry.population_id] == "done" && dir.complete_for(pc)) return;
    try {
      status_event("running", nullptr);
      auto run_options = dir.open(pc);
      run_options.halt_after = options.halt_after;
      const auto result = run_evolution(pc, &dir, std::move(run_options));
      if (!result.complete) return;  // halted; stays "running" until resumed
      const auto files = dir.files();
      status_event("done", &files);
      if (!options.quiet) {
        std::lock_guard lock(print_mutex);
        std::cerr << name << " " << condition_label(pc.condition) << " done\n";
      }
    } catch (const std::exception& e) {
      ++failures;
      try {
        status_event("failed", nullptr);
      } catch (...) {
      }
      std::lock_guard lock(print_mutex);
      std::cerr << name << " failed: " << e.what() << '\n';
    }
  });
  return failures > 0 ? 1 : 0;
}

std::vector<ValidationIssue> validate_run_files(const fs::path& root) {
  std::vector<ValidationIssue> issues;
  const auto manifest = read_manifest(root);
  if (!manifest) {
    issues.push_back({(root / kManifestName).string(), "missing"});
    return issues;
  }
  std::set<std::string> listed(manifest->extra_files.begin(), manifest->extra_files.end());
  for (const auto& p : manifest->populations) {
    for (const auto& f : p.files) listed.insert(p.dir + "/" + f);
    if (p.status == "done") {
      for (const auto& f : p.files) {
        if (!fs::exists(root / p.dir / f)) issues.push_back({p.dir + "/" + f, "missing"});
      }
    }
  }
  for (const auto& p : manifest->populations) {
    if (p.status != "done" || !fs::exists(root / p.dir)) continue;
    for (auto it = fs::recursive_directory_iterator(root / p.dir); it != fs::recursive_directory_iterator(); ++it) {
      if (!it->is_regular_file()) continue;
      const auto rel = fs::relative(it->path(), root).generic_string();
      if (!listed.contains(rel)) issues.push_back({rel, "orphan"});
    }
  }
  return issues;
}

}  // namespace mbevo
