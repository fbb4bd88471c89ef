#include "mbevo/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace mbevo {

std::vector<TrajectoryPoint> average_lod_trajectories(std::span<const std::vector<LodEntry>> lods, LodField field) {
  if (lods.empty()) throw std::invalid_argument("average_lod_trajectories: no LODs");
  const std::size_t len = lods.front().size();
  for (const auto& l : lods) {
    if (l.size() != len) throw std::invalid_argument("average_lod_trajectories: LOD length mismatch");
  }
  const auto value = [field](const LodEntry& e) {
    return static_cast<double>(field == LodField::Fitness ? e.fitness : e.connections);
  };
  const auto count = static_cast<double>(lods.size());
  std::vector<TrajectoryPoint> out(len);
  for (std::size_t g = 0; g < len; ++g) {
    double sum = 0.0;
    for (const auto& l : lods) sum += value(l[g]);
    const double mean = sum / count;
    double ss = 0.0;
    for (const auto& l : lods) ss += (value(l[g]) - mean) * (value(l[g]) - mean);
    out[g] = {mean, std::sqrt(ss / count)};
  }
  return out;
}

CodedTrial code_trial(const TrialRecord& record) {
  if (!record.decision_step || record.decision == Answer::None) {
    throw std::invalid_argument("code_trial: trial has no decision");
  }
  const auto used = std::min(record.inputs.size(), static_cast<std::size_t>(*record.decision_step) + 1);
  CodedTrial c;
  c.answer = record.decision == Answer::S ? 1 : -1;
  c.inputs.reserve(used);
  for (std::size_t i = used; i-- > 0;) {
    const Symbol s = record.inputs[i];
    c.inputs.push_back(s == 1 ? 1 : s == 2 ? -1 : 0);
  }
  return c;
}

int CorrelationProfile::count_at_least(double threshold) const {
  return static_cast<int>(std::count_if(r.begin(), r.end(), [threshold](const auto& v) { return v && *v >= threshold; }));
}

namespace {

struct Moments {
  double n = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  void add(double x, double y) {
    n += 1;
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
  [[nodiscard]] std::optional<double> pearson(int n_min) const {
    if (n < n_min) return std::nullopt;
    const double vx = n * sxx - sx * sx;
    const double vy = n * syy - sy * sy;
    if (vx <= 0.0 || vy <= 0.0) return std::nullopt;
    const double r = (n * sxy - sx * sy) / std::sqrt(vx * vy);
    return std::clamp(r, -1.0, 1.0);
  }
};

void check_profile_args(int max_offset, int n_min) {
  if (max_offset < 0) throw std::invalid_argument("trajectory_correlation: max_offset must be non-negative");
  if (n_min < 3) throw std::invalid_argument("trajectory_correlation: n_min must be at least 3");
}

}  // namespace

CorrelationProfile trajectory_correlation(std::span<const TrialRecord> records, int max_offset, int n_min) {
  if (records.empty()) throw std::invalid_argument("trajectory_correlation: empty record set");
  check_profile_args(max_offset, n_min);
  std::vector<Moments> m(static_cast<std::size_t>(max_offset) + 1);
  for (const auto& rec : records) {
    if (!rec.decision_step || rec.decision == Answer::None) continue;
    const auto coded = code_trial(rec);
    const auto upto = std::min(coded.inputs.size(), m.size());
    for (std::size_t k = 0; k < upto; ++k) m[k].add(coded.inputs[k], coded.answer);
  }
  CorrelationProfile p;
  for (std::size_t k = 0; k < m.size(); ++k) {
    p.offsets.push_back(static_cast<int>(k));
    p.r.push_back(m[k].pearson(n_min));
    p.n.push_back(static_cast<int>(m[k].n));
  }
  return p;
}

CorrelationProfile trajectory_correlation_per_agent(std::span<const std::vector<TrialRecord>> agents, int max_offset,
                                                    int n_min) {
  if (agents.empty()) throw std::invalid_argument("trajectory_correlation: empty record set");
  check_profile_args(max_offset, n_min);
  const auto len = static_cast<std::size_t>(max_offset) + 1;
  std::vector<double> sum(len, 0.0);
  std::vector<int> contributors(len, 0), samples(len, 0);
  for (const auto& recs : agents) {
    if (recs.empty()) continue;
    const auto p = trajectory_correlation(recs, max_offset, n_min);
    for (std::size_t k = 0; k < len; ++k) {
      if (!p.r[k]) continue;
      sum[k] += *p.r[k];
      ++contributors[k];
      samples[k] += p.n[k];
    }
  }
  CorrelationProfile out;
  for (std::size_t k = 0; k < len; ++k) {
    out.offsets.push_back(static_cast<int>(k));
    out.r.push_back(contributors[k] > 0 ? std::optional<double>(sum[k] / contributors[k]) : std::nullopt);
    out.n.push_back(samples[k]);
  }
  return out;
}

std::vector<TrialRecord> ProbeResult::pooled() const {
  std::vector<TrialRecord> all;
  for (const auto& a : records) all.insert(all.end(), a.begin(), a.end());
  return all;
}

ProbeResult probe_generation(std::span<const Genome> genomes, const Condition& condition, StreamKey streams,
                             bool keep_records) {
  if (genomes.empty()) throw NotFoundError("probe_generation: snapshot holds no genomes");
  ProbeResult out;
  long correct = 0, trials = 0;
  for (std::size_t i = 0; i < genomes.size(); ++i) {
    auto ev = evaluate_agent(decode(genomes[i]), condition, streams.with(static_cast<std::uint64_t>(i)), keep_records);
    out.agent_accuracy.push_back(static_cast<double>(ev.fitness) / condition.trials_per_agent);
    correct += ev.fitness;
    trials += condition.trials_per_agent;
    out.decided += ev.decided;
    out.undecided += condition.trials_per_agent - ev.decided;
    if (keep_records) out.records.push_back(std::move(ev.records));
  }
  out.pooled_accuracy = static_cast<double>(correct) / static_cast<double>(trials);
  return out;
}

}  // namespace mbevo
