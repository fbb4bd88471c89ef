#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mbevo/environment.hpp"
#include "mbevo/evolution.hpp"
#include "mbevo/genome.hpp"

namespace mbevo {

struct NotFoundError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class LodField { Fitness, Connections };

struct TrajectoryPoint {
  double mean = 0.0;
  double sd = 0.0;  // population standard deviation across replicates
};

// Per-generation mean and spread of one LOD field across replicate LODs of equal length.
std::vector<TrajectoryPoint> average_lod_trajectories(std::span<const std::vector<LodEntry>> lods, LodField field);

struct CodedTrial {
  std::vector<int> inputs;  // index 0 is the last input before the answer
  int answer = 0;           // S = +1, N = -1
};

// [01] -> +1, [10] -> -1, [00]/[11] -> 0. Throws std::invalid_argument for undecided trials.
CodedTrial code_trial(const TrialRecord& record);

struct CorrelationProfile {
  std::vector<int> offsets;
  std::vector<std::optional<double>> r;
  std::vector<int> n;

  [[nodiscard]] int count_at_least(double threshold) const;
};

inline constexpr int kDefaultMaxOffset = 50;
inline constexpr int kDefaultMinSamples = 10;

// Pearson correlation between the coded input at each offset and the coded
// answer, pooled over decided trials. Undecided trials are skipped.
CorrelationProfile trajectory_correlation(std::span<const TrialRecord> records, int max_offset = kDefaultMaxOffset,
                                          int n_min = kDefaultMinSamples);

// Mean of per-agent profiles; n is summed over agents contributing a defined r.
CorrelationProfile trajectory_correlation_per_agent(std::span<const std::vector<TrialRecord>> agents,
                                                    int max_offset = kDefaultMaxOffset,
                                                    int n_min = kDefaultMinSamples);

struct ProbeResult {
  std::vector<std::vector<TrialRecord>> records;  // per agent
  std::vector<double> agent_accuracy;
  double pooled_accuracy = 0.0;
  int decided = 0;
  int undecided = 0;

  [[nodiscard]] std::vector<TrialRecord> pooled() const;
};

// Re-evaluates every agent of a snapshot; agent i uses streams.with(i).
ProbeResult probe_generation(std::span<const Genome> genomes, const Condition& condition, StreamKey streams,
                             bool keep_records = true);

}  // namespace mbevo
