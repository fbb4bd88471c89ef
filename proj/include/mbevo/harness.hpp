#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mbevo/evolution.hpp"

namespace mbevo {

inline constexpr const char* kVersionTag = "mbevo 1.0.0";
inline constexpr const char* kOutputRootEnv = "MBEVO_OUTPUT_ROOT";

struct ExperimentConfig {
  std::vector<double> difficulty_grid{0.60, 0.75, 0.90};
  std::vector<int> nondecision_grid{40};
  int replicates = 20;
  // Template for every population; condition target/ndt and run_seed are
  // filled in per grid entry.
  PopulationConfig population;
  std::uint64_t base_seed = 1;
  std::filesystem::path output_dir = "runs";
  int parallelism = 1;

  void validate() const;
  [[nodiscard]] std::uint64_t hash() const;
};

// Seven difficulties x nine non-decision times x 100 replicates, 10000 generations.
ExperimentConfig full_scale_profile();
// Three difficulties at t=40, 20 replicates, 2000 generations.
ExperimentConfig desk_scale_profile();

// Sectioned key=value file; see config/desk.ini for the documented keys.
// Unset keys keep the values already in `base`.
ExperimentConfig load_experiment_config(const std::filesystem::path& path, ExperimentConfig base = desk_scale_profile());

std::uint64_t derive_population_seed(std::uint64_t base_seed, int condition_index, int replicate);

struct GridEntry {
  int population_id = 0;
  int condition_index = 0;
  int replicate = 0;
  Condition condition;
  std::uint64_t seed = 0;
};

// Difficulty-major, then non-decision time, then replicate.
std::vector<GridEntry> expand_grid(const ExperimentConfig& config);

std::string population_dir_name(int population_id);
std::string condition_label(const Condition& c);

PopulationConfig population_config_for(const ExperimentConfig& config, const GridEntry& entry);

struct ExperimentOptions {
  std::optional<int> halt_after;  // testing hook: stop each population after this generation
  bool quiet = false;
};

// Returns 0 when every population is done, 1 if any failed.
int run_experiment(const ExperimentConfig& config, const ExperimentOptions& options = {});

struct ManifestPopulation {
  int population_id = 0;
  std::string dir;
  std::string status;  // pending, running, done, failed
  std::uint64_t seed = 0;
  std::vector<std::string> files;
};

struct Manifest {
  std::uint64_t config_hash = 0;
  std::string version;
  std::vector<ManifestPopulation> populations;
  std::vector<std::string> extra_files;  // paths relative to the root, e.g. probe output
};

// Replays the append-only manifest log.
std::optional<Manifest> read_manifest(const std::filesystem::path& root);
void append_manifest_files(const std::filesystem::path& root, const std::vector<std::string>& files);

struct ValidationIssue {
  std::string path;
  std::string problem;  // "missing" or "orphan"
};
std::vector<ValidationIssue> validate_run_files(const std::filesystem::path& root);

// Resolves a user-supplied output path against $MBEVO_OUTPUT_ROOT when it is relative.
std::filesystem::path resolve_output_path(const std::filesystem::path& p);

}  // namespace mbevo
