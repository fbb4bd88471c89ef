#include "mbevo/environment.hpp"

#include <algorithm>
#include <stdexcept>

#include <json.hpp>

namespace mbevo {

void Condition::validate() const {
  if (!(target_freq > 0.5 && target_freq <= 1.0)) throw std::invalid_argument("condition: target_freq must be in (0.5, 1]");
  if (max_steps < 1) throw std::invalid_argument("condition: max_steps must be positive");
  if (nondecision_time < 0 || nondecision_time >= max_steps) {
    throw std::invalid_argument("condition: nondecision_time must be in [0, max_steps)");
  }
  if (trials_per_agent < 1) throw std::invalid_argument("condition: trials_per_agent must be positive");
}

double ramp_frequency(int step, double target) noexcept {
  return std::min(0.50 + 0.01 * step, target);
}

namespace {

constexpr double kTwo32 = 4294967296.0;

std::uint64_t threshold_for(double freq) noexcept {
  return static_cast<std::uint64_t>(freq * kTwo32);
}

// u < threshold happens with probability freq for each 32-bit half.
Symbol draw(Source source, std::uint64_t threshold, std::uint64_t bits) noexcept {
  const bool hit_left = (bits >> 32) < threshold;
  const bool hit_right = (bits & 0xffffffffULL) < threshold;
  // S: left 0 / right 1 when hit; N mirrors.
  const bool left = (source == Source::S) ? !hit_left : hit_left;
  const bool right = (source == Source::S) ? hit_right : !hit_right;
  return static_cast<Symbol>((left ? 2 : 0) | (right ? 1 : 0));
}

}  // namespace

Symbol sample_input(Source source, double freq, Rng& rng) noexcept {
  return draw(source, threshold_for(freq), rng());
}

StimulusSchedule::StimulusSchedule(const Condition& c) : threshold_(static_cast<std::size_t>(c.max_steps)) {
  for (int s = 0; s < c.max_steps; ++s) threshold_[static_cast<std::size_t>(s)] = threshold_for(ramp_frequency(s, c.target_freq));
}

Symbol StimulusSchedule::sample(Source source, int step, Rng& rng) const noexcept {
  return draw(source, threshold_[static_cast<std::size_t>(step)], rng());
}

namespace {

// Returns the decision step, or -1 if the agent never answered in time.
template <bool Record>
int play(const Brain& brain, const Condition& c, const StimulusSchedule& schedule, Source source, Rng& rng,
         Answer& answer, std::vector<Symbol>* inputs) {
  NodeState state;
  for (int s = 0; s < c.max_steps; ++s) {
    const Symbol sym = schedule.sample(source, s, rng);
    if constexpr (Record) inputs->push_back(sym);
    state = step(brain, state, InputBits::from_symbol(sym));
    if (s >= c.nondecision_time) {
      answer = read_answer(state);
      if (answer != Answer::None) return s;
    }
  }
  answer = Answer::None;
  return -1;
}

bool matches(Answer a, Source s) noexcept {
  return (a == Answer::S && s == Source::S) || (a == Answer::N && s == Source::N);
}

TrialRecord run_scheduled(const Brain& brain, const Condition& c, const StimulusSchedule& schedule, Source source,
                          Rng& rng) {
  TrialRecord r;
  r.source = source;
  r.inputs.reserve(static_cast<std::size_t>(c.max_steps));
  const int d = play<true>(brain, c, schedule, source, rng, r.decision, &r.inputs);
  if (d >= 0) r.decision_step = d;
  r.correct = matches(r.decision, source);
  return r;
}

}  // namespace

TrialRecord run_trial(const Brain& brain, const Condition& condition, Source source, Rng& rng) {
  const StimulusSchedule schedule(condition);
  return run_scheduled(brain, condition, schedule, source, rng);
}

TrialRecord replay_trial(const Brain& brain, const Condition& condition, Source source,
                         std::span<const Symbol> inputs) {
  TrialRecord r;
  r.source = source;
  NodeState state;
  const auto steps = std::min<std::size_t>(inputs.size(), static_cast<std::size_t>(condition.max_steps));
  for (std::size_t s = 0; s < steps; ++s) {
    r.inputs.push_back(inputs[s]);
    state = step(brain, state, InputBits::from_symbol(inputs[s]));
    if (static_cast<int>(s) >= condition.nondecision_time) {
      const Answer a = read_answer(state);
      if (a != Answer::None) {
        r.decision = a;
        r.decision_step = static_cast<int>(s);
        break;
      }
    }
  }
  r.correct = matches(r.decision, source);
  return r;
}

AgentEvaluation evaluate_agent(const Brain& brain, const Condition& condition, StreamKey trial_streams,
                               bool keep_records) {
  const StimulusSchedule schedule(condition);
  AgentEvaluation ev;
  if (keep_records) ev.records.reserve(static_cast<std::size_t>(condition.trials_per_agent));
  for (int t = 0; t < condition.trials_per_agent; ++t) {
    Rng rng(trial_streams.with(static_cast<std::uint64_t>(t)));
    const Source source = (rng() >> 63) ? Source::N : Source::S;
    int d;
    bool correct;
    if (keep_records) {
      auto& r = ev.records.emplace_back(run_scheduled(brain, condition, schedule, source, rng));
      d = r.decision_step.value_or(-1);
      correct = r.correct;
    } else {
      Answer a;
      d = play<false>(brain, condition, schedule, source, rng, a, nullptr);
      correct = matches(a, source);
    }
    if (d >= 0) {
      ++ev.decided;
      ev.decision_step_sum += d;
    }
    ev.fitness += correct ? 1 : 0;
  }
  return ev;
}

std::string symbol_string(Symbol s) {
  return {(s & 2) ? '1' : '0', (s & 1) ? '1' : '0'};
}

const char* to_string(Source s) noexcept { return s == Source::S ? "S" : "N"; }

const char* to_string(Answer a) noexcept {
  switch (a) {
    case Answer::S: return "S";
    case Answer::N: return "N";
    default: return "none";
  }
}

std::string to_json_line(const TrialRecord& r, std::optional<int> agent) {
  nlohmann::ordered_json j;
  if (agent) j["agent"] = *agent;
  j["source"] = to_string(r.source);
  std::string inputs;
  inputs.reserve(r.inputs.size() * 2);
  for (Symbol s : r.inputs) inputs += symbol_string(s);
  j["inputs"] = inputs;
  if (r.decision_step) {
    j["decision_step"] = *r.decision_step;
  } else {
    j["decision_step"] = nullptr;
  }
  j["decision"] = to_string(r.decision);
  j["correct"] = r.correct;
  return j.dump();
}

TrialRecord from_json_line(const std::string& line, std::optional<int>* agent) {
  const auto j = nlohmann::json::parse(line);
  TrialRecord r;
  const auto src = j.at("source").get<std::string>();
  if (src != "S" && src != "N") throw std::invalid_argument("trial record: bad source");
  r.source = src == "S" ? Source::S : Source::N;
  const auto inputs = j.at("inputs").get<std::string>();
  if (inputs.size() % 2 != 0) throw std::invalid_argument("trial record: odd-length inputs");
  for (std::size_t i = 0; i < inputs.size(); i += 2) {
    const char a = inputs[i], b = inputs[i + 1];
    if ((a != '0' && a != '1') || (b != '0' && b != '1')) throw std::invalid_argument("trial record: bad symbol");
    r.inputs.push_back(static_cast<Symbol>(((a == '1') ? 2 : 0) | ((b == '1') ? 1 : 0)));
  }
  if (!j.at("decision_step").is_null()) r.decision_step = j.at("decision_step").get<int>();
  const auto dec = j.at("decision").get<std::string>();
  r.decision = dec == "S" ? Answer::S : dec == "N" ? Answer::N : Answer::None;
  r.correct = j.at("correct").get<bool>();
  if (agent) {
    if (j.contains("agent")) {
      *agent = j.at("agent").get<int>();
    } else {
      agent->reset();
    }
  }
  return r;
}

}  // namespace mbevo
