#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mbevo/brain.hpp"
#include "mbevo/random.hpp"

namespace mbevo {

struct Condition {
  double target_freq = 0.9;
  int nondecision_time = 40;
  int max_steps = 100;
  int trials_per_agent = 100;

  void validate() const;
  friend bool operator==(const Condition&, const Condition&) = default;
};

enum class Source : std::uint8_t { S, N };

// 2-bit input symbol, left bit high: 0=[00], 1=[01], 2=[10], 3=[11].
using Symbol = std::uint8_t;

struct TrialRecord {
  Source source = Source::S;
  std::vector<Symbol> inputs;
  std::optional<int> decision_step;
  Answer decision = Answer::None;
  bool correct = false;

  [[nodiscard]] int score() const noexcept { return correct ? 1 : 0; }
  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

double ramp_frequency(int step, double target) noexcept;

Symbol sample_input(Source source, double freq, Rng& rng) noexcept;

// Per-step sampling thresholds for one condition, precomputed for the hot loop.
class StimulusSchedule {
public:
  explicit StimulusSchedule(const Condition& c);
  [[nodiscard]] Symbol sample(Source source, int step, Rng& rng) const noexcept;

private:
  std::vector<std::uint64_t> threshold_;  // freq * 2^32 per step
};

TrialRecord run_trial(const Brain& brain, const Condition& condition, Source source, Rng& rng);

// Same rules as run_trial with a fixed input sequence; stops early when the
// sequence is shorter than max_steps.
TrialRecord replay_trial(const Brain& brain, const Condition& condition, Source source,
                         std::span<const Symbol> inputs);

struct AgentEvaluation {
  int fitness = 0;
  int decided = 0;
  long decision_step_sum = 0;
  std::vector<TrialRecord> records;  // filled only when retention is on
};

// Trial i draws its source and inputs from trial_streams.with(i), so two agents
// handed the same key face identical trial sequences.
AgentEvaluation evaluate_agent(const Brain& brain, const Condition& condition, StreamKey trial_streams,
                               bool keep_records = false);

// Newline-delimited JSON records.
std::string symbol_string(Symbol s);
std::string to_json_line(const TrialRecord& r, std::optional<int> agent = std::nullopt);
TrialRecord from_json_line(const std::string& line, std::optional<int>* agent = nullptr);

const char* to_string(Source s) noexcept;
const char* to_string(Answer a) noexcept;

}  // namespace mbevo
