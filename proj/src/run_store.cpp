#include "mbevo/run_store.hpp"

#include <cstdio>
#include <sstream>

namespace mbevo {

namespace fs = std::filesystem;

nlohmann::ordered_json to_json(const PopulationConfig& c) {
  nlohmann::ordered_json j;
  j["population_size"] = c.population_size;
  j["generations"] = c.generations;
  j["target_freq"] = c.condition.target_freq;
  j["nondecision_time"] = c.condition.nondecision_time;
  j["max_steps"] = c.condition.max_steps;
  j["trials_per_agent"] = c.condition.trials_per_agent;
  j["point_rate"] = c.rates.point;
  j["duplication_rate"] = c.rates.duplication;
  j["deletion_rate"] = c.rates.deletion;
  j["segment_length"] = c.rates.segment_length;
  j["seed_genome_length"] = c.seed_genome_length;
  j["seed_connections_min"] = c.seed_connections_min;
  j["seed_connections_max"] = c.seed_connections_max;
  j["run_seed"] = c.run_seed;
  j["snapshot_interval"] = c.snapshot_interval;
  j["extra_snapshots"] = c.extra_snapshots;
  j["checkpoint_interval"] = c.checkpoint_interval;
  j["common_trials"] = c.common_trials;
  j["config_hash"] = c.hash();
  return j;
}

PopulationConfig population_config_from_json(const nlohmann::json& j) {
  PopulationConfig c;
  c.population_size = j.at("population_size").get<int>();
  c.generations = j.at("generations").get<int>();
  c.condition.target_freq = j.at("target_freq").get<double>();
  c.condition.nondecision_time = j.at("nondecision_time").get<int>();
  c.condition.max_steps = j.at("max_steps").get<int>();
  c.condition.trials_per_agent = j.at("trials_per_agent").get<int>();
  c.rates.point = j.at("point_rate").get<double>();
  c.rates.duplication = j.at("duplication_rate").get<double>();
  c.rates.deletion = j.at("deletion_rate").get<double>();
  c.rates.segment_length = j.at("segment_length").get<std::size_t>();
  c.seed_genome_length = j.at("seed_genome_length").get<std::size_t>();
  c.seed_connections_min = j.at("seed_connections_min").get<int>();
  c.seed_connections_max = j.at("seed_connections_max").get<int>();
  c.run_seed = j.at("run_seed").get<std::uint64_t>();
  c.snapshot_interval = j.at("snapshot_interval").get<int>();
  c.extra_snapshots = j.at("extra_snapshots").get<std::vector<int>>();
  c.checkpoint_interval = j.at("checkpoint_interval").get<int>();
  c.common_trials = j.at("common_trials").get<bool>();
  return c;
}

std::string format_stats_row(int population_id, const GenerationStats& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d,%d,%.4f,%d,%.4f,", population_id, s.generation, s.mean_fitness, s.max_fitness,
                s.mean_connections);
  std::string row = buf;
  if (s.mean_decision_step) {
    std::snprintf(buf, sizeof buf, "%.4f", *s.mean_decision_step);
    row += buf;
  }
  return row;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void expect_header(std::istream& in, const char* header) {
  std::string line;
  if (!std::getline(in, line) || line != header) throw IntegrityError(std::string("missing CSV header: ") + header);
}

}  // namespace

std::vector<GenerationStats> read_stats_csv(std::istream& in) {
  expect_header(in, kStatsHeader);
  std::vector<GenerationStats> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 6) throw IntegrityError("stats.csv: malformed row");
    GenerationStats s;
    s.generation = std::stoi(f[1]);
    s.mean_fitness = std::stod(f[2]);
    s.max_fitness = std::stoi(f[3]);
    s.mean_connections = std::stod(f[4]);
    if (!f[5].empty()) s.mean_decision_step = std::stod(f[5]);
    out.push_back(s);
  }
  return out;
}

AncestryTable read_ancestry_csv(std::istream& in) {
  expect_header(in, kAncestryHeader);
  AncestryTable table;
  std::vector<AncestryRow> current;
  int current_gen = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 5) throw IntegrityError("ancestry.csv: malformed row");
    const int g = std::stoi(f[0]);
    const int agent = std::stoi(f[1]);
    if (g != current_gen) {
      if (g != current_gen + 1) throw IntegrityError("ancestry.csv: generations out of order");
      table.push_generation(std::move(current));
      current.clear();
      current_gen = g;
    }
    if (agent != static_cast<int>(current.size())) throw IntegrityError("ancestry.csv: agent rows out of order");
    current.push_back({std::stoi(f[2]), std::stoi(f[3]), std::stoi(f[4])});
  }
  if (!current.empty()) table.push_generation(std::move(current));
  return table;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << contents;
    out.flush();
    if (!out) throw IoError("cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

RunDirectory::RunDirectory(fs::path dir, int population_id) : dir_(std::move(dir)), population_id_(population_id) {}

fs::path RunDirectory::snapshot_path(const fs::path& dir, int generation) {
  return dir / "snapshots" / ("gen_" + std::to_string(generation) + ".txt");
}

namespace {

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw NotFoundError("cannot open " + p.string());
  return nlohmann::json::parse(in);
}

std::uintmax_t size_of(const fs::path& p) {
  std::error_code ec;
  const auto s = fs::file_size(p, ec);
  if (ec) throw IoError("cannot stat " + p.string());
  return s;
}

}  // namespace

PopulationConfig RunDirectory::read_config(const fs::path& dir) {
  return population_config_from_json(read_json(dir / "population.json").at("config"));
}

AncestryTable RunDirectory::read_ancestry(const fs::path& dir) {
  std::ifstream in(dir / "ancestry.csv");
  if (!in) throw NotFoundError("no ancestry.csv in " + dir.string());
  return read_ancestry_csv(in);
}

std::vector<Genome> RunDirectory::read_snapshot(const fs::path& dir, int generation) {
  std::ifstream in(snapshot_path(dir, generation));
  if (!in) throw NotFoundError("no snapshot for generation " + std::to_string(generation) + " in " + dir.string());
  return read_genomes(in);
}

bool RunDirectory::complete_for(const PopulationConfig& config) const {
  std::error_code ec;
  if (!fs::exists(dir_ / "checkpoint" / "state.json", ec)) return false;
  try {
    const auto state = read_json(dir_ / "checkpoint" / "state.json");
    return state.at("complete").get<bool>() && state.at("config_hash").get<std::uint64_t>() == config.hash();
  } catch (const std::exception&) {
    return false;
  }
}

void RunDirectory::start_fresh(const PopulationConfig& config) {
  std::error_code ec;
  fs::remove_all(dir_ / "checkpoint", ec);
  fs::remove_all(dir_ / "snapshots", ec);
  fs::create_directories(dir_ / "checkpoint");
  fs::create_directories(dir_ / "snapshots");
  nlohmann::ordered_json meta;
  meta["population_id"] = population_id_;
  meta["config"] = to_json(config);
  write_file_atomic(dir_ / "population.json", meta.dump(2) + "\n");
  write_file_atomic(dir_ / "stats.csv", std::string(kStatsHeader) + "\n");
  write_file_atomic(dir_ / "ancestry.csv", std::string(kAncestryHeader) + "\n");
}

RunOptions RunDirectory::open(const PopulationConfig& config) {
  fs::create_directories(dir_);
  RunOptions options;
  const fs::path state_path = dir_ / "checkpoint" / "state.json";
  if (!fs::exists(state_path)) {
    start_fresh(config);
  } else {
    const auto state = read_json(state_path);
    if (state.at("config_hash").get<std::uint64_t>() != config.hash()) {
      throw IntegrityError("refusing to resume " + dir_.string() + ": checkpoint belongs to a different config");
    }
    const auto stats_bytes = state.at("stats_bytes").get<std::uintmax_t>();
    const auto ancestry_bytes = state.at("ancestry_bytes").get<std::uintmax_t>();
    if (size_of(dir_ / "stats.csv") < stats_bytes || size_of(dir_ / "ancestry.csv") < ancestry_bytes) {
      throw IntegrityError("output files shorter than the checkpoint records in " + dir_.string());
    }
    fs::resize_file(dir_ / "stats.csv", stats_bytes);
    fs::resize_file(dir_ / "ancestry.csv", ancestry_bytes);

    Checkpoint cp;
    cp.generation = state.at("generation").get<int>();
    cp.config_hash = config.hash();
    cp.complete = state.at("complete").get<bool>();
    cp.pending_parents = state.at("pending_parents").get<std::vector<int>>();
    {
      std::ifstream in(dir_ / "checkpoint" / state.at("genomes").get<std::string>());
      if (!in) throw IntegrityError("checkpoint genomes missing in " + dir_.string());
      cp.genomes = read_genomes(in);
    }
    {
      std::ifstream in(dir_ / "stats.csv");
      options.resume_stats = read_stats_csv(in);
    }
    options.resume_ancestry = read_ancestry(dir_);
    loaded_ = std::move(cp);
    options.resume = &*loaded_;
  }
  stats_.open(dir_ / "stats.csv", std::ios::app);
  ancestry_.open(dir_ / "ancestry.csv", std::ios::app);
  if (!stats_ || !ancestry_) throw IoError("cannot open output files in " + dir_.string());
  return options;
}

void RunDirectory::on_generation(int generation, std::span<const AncestryRow> rows, const GenerationStats* stats) {
  if (stats) stats_ << format_stats_row(population_id_, *stats) << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ancestry_ << generation << ',' << i << ',' << rows[i].parent << ',' << rows[i].fitness << ','
              << rows[i].connections << '\n';
  }
  if (!stats_ || !ancestry_) throw IoError("write failure in " + dir_.string());
}

void RunDirectory::on_snapshot(int generation, std::span<const Genome> genomes) {
  std::ostringstream os;
  write_genomes(os, genomes);
  fs::create_directories(dir_ / "snapshots");
  write_file_atomic(snapshot_path(dir_, generation), os.str());
}

void RunDirectory::flush() {
  stats_.flush();
  ancestry_.flush();
  if (!stats_ || !ancestry_) throw IoError("flush failure in " + dir_.string());
}

void RunDirectory::on_checkpoint(const Checkpoint& cp) {
  flush();
  const std::string genomes_name = "genomes_" + std::to_string(cp.generation) + ".txt";
  std::ostringstream os;
  write_genomes(os, cp.genomes);
  write_file_atomic(dir_ / "checkpoint" / genomes_name, os.str());

  nlohmann::ordered_json state;
  state["generation"] = cp.generation;
  state["complete"] = cp.complete;
  state["config_hash"] = cp.config_hash;
  state["stats_bytes"] = size_of(dir_ / "stats.csv");
  state["ancestry_bytes"] = size_of(dir_ / "ancestry.csv");
  state["genomes"] = genomes_name;
  state["pending_parents"] = cp.pending_parents;
  write_file_atomic(dir_ / "checkpoint" / "state.json", state.dump() + "\n");

  for (const auto& entry : fs::directory_iterator(dir_ / "checkpoint")) {
    const auto name = entry.path().filename().string();
    if (name.starts_with("genomes_") && name != genomes_name) fs::remove(entry.path());
  }
}

std::vector<std::string> RunDirectory::files() const {
  std::vector<std::string> out;
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator(dir_, ec); it != fs::recursive_directory_iterator(); ++it) {
    if (!it->is_regular_file()) continue;
    out.push_back(fs::relative(it->path(), dir_).generic_string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

fs::path write_probe(const fs::path& run_dir, int generation, const ProbeResult& probe,
                     const std::optional<fs::path>& out_dir) {
  const fs::path dir = out_dir ? *out_dir : run_dir / ("probe_" + std::to_string(generation));
  fs::create_directories(dir);
  std::ostringstream os;
  for (std::size_t a = 0; a < probe.records.size(); ++a) {
    for (const auto& r : probe.records[a]) os << to_json_line(r, static_cast<int>(a)) << '\n';
  }
  write_file_atomic(dir / "records.jsonl", os.str());

  nlohmann::ordered_json summary;
  summary["generation"] = generation;
  summary["pooled_accuracy"] = probe.pooled_accuracy;
  summary["decided"] = probe.decided;
  summary["undecided"] = probe.undecided;
  summary["agent_accuracy"] = probe.agent_accuracy;
  try {
    const auto cfg = RunDirectory::read_config(run_dir);
    summary["target_freq"] = cfg.condition.target_freq;
    summary["nondecision_time"] = cfg.condition.nondecision_time;
  } catch (const NotFoundError&) {
  }
  write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");
  return dir;
}

std::vector<std::vector<TrialRecord>> read_probe_records(const fs::path& probe_dir) {
  std::ifstream in(probe_dir / "records.jsonl");
  if (!in) throw NotFoundError("no records.jsonl in " + probe_dir.string());
  std::vector<std::vector<TrialRecord>> agents;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::optional<int> agent;
    auto rec = from_json_line(line, &agent);
    const auto idx = static_cast<std::size_t>(agent.value_or(0));
    if (agents.size() <= idx) agents.resize(idx + 1);
    agents[idx].push_back(std::move(rec));
  }
  return agents;
}

}  // namespace mbevo
