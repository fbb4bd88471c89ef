#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mbevo/brain.hpp"
#include "mbevo/environment.hpp"
#include "mbevo/genome.hpp"
#include "mbevo/random.hpp"

namespace mbevo {

struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PopulationConfig {
  int population_size = 100;
  int generations = 2000;
  Condition condition;
  MutationRates rates;
  std::size_t seed_genome_length = 4096;
  // Seed genomes are redrawn until their brain falls in this connection band;
  // {0, 0} accepts the first draw.
  int seed_connections_min = 20;
  int seed_connections_max = 30;
  std::uint64_t run_seed = 1;
  int snapshot_interval = 500;
  // Generations snapshotted in addition to the interval (e.g. the probe generation).
  std::vector<int> extra_snapshots;
  int checkpoint_interval = 100;
  // All agents of a generation face the same trial streams.
  bool common_trials = false;
  // Worker threads for agent evaluation; does not affect results.
  int threads = 1;

  void validate() const;
  [[nodiscard]] bool snapshot_due(int generation) const;
  // Every result-affecting field, in a stable textual form.
  [[nodiscard]] std::string canonical() const;
  [[nodiscard]] std::uint64_t hash() const;
};

struct AncestryRow {
  int parent = -1;  // index in the previous generation; -1 in generation 0
  int fitness = 0;
  int connections = 0;
  friend bool operator==(const AncestryRow&, const AncestryRow&) = default;
};

class AncestryTable {
public:
  void push_generation(std::vector<AncestryRow> rows);
  [[nodiscard]] int generations() const noexcept { return static_cast<int>(rows_.size()); }
  [[nodiscard]] std::span<const AncestryRow> generation(int g) const { return rows_.at(static_cast<std::size_t>(g)); }
  [[nodiscard]] const AncestryRow& at(int g, int agent) const {
    return rows_.at(static_cast<std::size_t>(g)).at(static_cast<std::size_t>(agent));
  }
  void truncate(int generations) { rows_.resize(static_cast<std::size_t>(generations)); }

  friend bool operator==(const AncestryTable&, const AncestryTable&) = default;

private:
  std::vector<std::vector<AncestryRow>> rows_;
};

struct GenerationStats {
  int generation = 0;
  double mean_fitness = 0.0;
  int max_fitness = 0;
  double mean_connections = 0.0;
  std::optional<double> mean_decision_step;
  friend bool operator==(const GenerationStats&, const GenerationStats&) = default;
};

struct LodEntry {
  int generation = 0;
  int fitness = 0;
  int connections = 0;
  friend bool operator==(const LodEntry&, const LodEntry&) = default;
};

// Roulette wheel: index i with probability fitness_i / sum; uniform when the sum is 0.
std::vector<int> select_parents(std::span<const int> fitnesses, int count, Rng& rng);

struct PopulationEvaluation {
  std::vector<int> fitness;
  std::vector<int> connections;
  GenerationStats stats;
};

PopulationEvaluation evaluate_population(std::span<const Genome> genomes, const PopulationConfig& config,
                                         int generation);

struct GenerationResult {
  std::vector<Genome> children;
  PopulationEvaluation evaluation;
  std::vector<int> parents;  // parents[i] is the index of child i's parent
};

GenerationResult advance_generation(std::span<const Genome> genomes, const PopulationConfig& config, int generation);

Genome draw_seed_genome(const PopulationConfig& config);

// Generation 0: mutated variants of one random seed genome.
std::vector<Genome> initial_population(const PopulationConfig& config);

// State needed to continue a run from the start of `generation`.
struct Checkpoint {
  int generation = 0;
  std::vector<Genome> genomes;
  std::vector<int> pending_parents;  // parents of `genomes`; -1s in generation 0
  std::uint64_t config_hash = 0;
  bool complete = false;
};

class EvolutionSink {
public:
  virtual ~EvolutionSink() = default;
  // stats is null for the final (evaluated but not reproduced) generation.
  virtual void on_generation(int generation, std::span<const AncestryRow> rows, const GenerationStats* stats) = 0;
  virtual void on_snapshot(int generation, std::span<const Genome> genomes) = 0;
  virtual void on_checkpoint(const Checkpoint& checkpoint) = 0;
};

struct EvolutionResult {
  std::vector<Genome> final_genomes;
  AncestryTable ancestry;
  std::vector<GenerationStats> stats;
  bool complete = false;
};

struct RunOptions {
  // Stop (as if killed) once this many generations have been checkpointed.
  std::optional<int> halt_after;
  // Prior progress; ancestry and stats must cover generations [0, checkpoint.generation).
  const Checkpoint* resume = nullptr;
  AncestryTable resume_ancestry;
  std::vector<GenerationStats> resume_stats;
};

// Runs `config.generations` rounds of evaluate/select/mutate, then evaluates
// the final population so the ancestry table holds generations + 1 levels.
EvolutionResult run_evolution(const PopulationConfig& config, EvolutionSink* sink, RunOptions options = {});

// Ancestor chain of agent final_index in the last stored generation, generation 0 first.
std::vector<LodEntry> extract_lod(const AncestryTable& ancestry, int final_index);

}  // namespace mbevo
