#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mbevo/analysis.hpp"
#include "mbevo/evolution.hpp"

namespace mbevo {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

nlohmann::ordered_json to_json(const PopulationConfig& c);
PopulationConfig population_config_from_json(const nlohmann::json& j);

inline constexpr const char* kStatsHeader =
    "population_id,generation,mean_fitness,max_fitness,mean_connections,mean_decision_step";
inline constexpr const char* kAncestryHeader = "generation,agent_index,parent_index,fitness,connections";

std::string format_stats_row(int population_id, const GenerationStats& s);
std::vector<GenerationStats> read_stats_csv(std::istream& in);
AncestryTable read_ancestry_csv(std::istream& in);

// One population's directory:
//   population.json  stats.csv  ancestry.csv  snapshots/gen_<g>.txt
//   checkpoint/state.json  checkpoint/genomes_<g>.txt
class RunDirectory final : public EvolutionSink {
public:
  RunDirectory(std::filesystem::path dir, int population_id);

  // Opens the directory for `config`. Resumes from the checkpoint if there is
  // one (truncating output written after it); otherwise starts fresh. Throws
  // IntegrityError when the checkpoint belongs to a different config.
  RunOptions open(const PopulationConfig& config);

  // True when a finished run for `config` is recorded here.
  [[nodiscard]] bool complete_for(const PopulationConfig& config) const;

  void on_generation(int generation, std::span<const AncestryRow> rows, const GenerationStats* stats) override;
  void on_snapshot(int generation, std::span<const Genome> genomes) override;
  void on_checkpoint(const Checkpoint& checkpoint) override;

  [[nodiscard]] const std::filesystem::path& path() const noexcept { return dir_; }
  // Files the run currently owns, relative to the directory.
  [[nodiscard]] std::vector<std::string> files() const;

  static std::filesystem::path snapshot_path(const std::filesystem::path& dir, int generation);
  static PopulationConfig read_config(const std::filesystem::path& dir);
  static AncestryTable read_ancestry(const std::filesystem::path& dir);
  static std::vector<Genome> read_snapshot(const std::filesystem::path& dir, int generation);

private:
  void start_fresh(const PopulationConfig& config);
  void flush();

  std::filesystem::path dir_;
  int population_id_;
  // Held by the struct so the checkpoint outlives open().
  std::optional<Checkpoint> loaded_;
  std::ofstream stats_;
  std::ofstream ancestry_;
};

// Probe output: <run>/probe_<g>/records.jsonl and summary.json.
std::filesystem::path write_probe(const std::filesystem::path& run_dir, int generation, const ProbeResult& probe,
                                  const std::optional<std::filesystem::path>& out_dir = std::nullopt);
std::vector<std::vector<TrialRecord>> read_probe_records(const std::filesystem::path& probe_dir);

// Writes via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace mbevo
