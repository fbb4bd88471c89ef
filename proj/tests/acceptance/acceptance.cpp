// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "../stats_util.hpp"
#include "../test_util.hpp"
#include "mbevo/analysis.hpp"
#include "mbevo/harness.hpp"
#include "mbevo/run_store.hpp"

using namespace mbevo;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

int failures = 0;

void report(int id, const char* name, const Outcome& o, double elapsed) {
  std::printf("[%s] criterion %d: %s (%.1f s) %s\n", o.passed ? "PASS" : "FAIL", id, name, elapsed, o.detail.c_str());
  std::fflush(stdout);
  if (!o.passed) ++failures;
}

void run(int id, const char* name, const std::function<Outcome()>& fn) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  report(id, name, o, seconds_since(t0));
}

// ---------------------------------------------------------------------------

Outcome stimulus_distribution() {
  const auto t0 = Clock::now();
  struct Case {
    double freq;
    std::array<double, 4> expected;  // [00], [01], [10], [11]
  };
  const std::array<Case, 2> cases{{{0.9, {0.09, 0.81, 0.01, 0.09}}, {0.6, {0.24, 0.36, 0.16, 0.24}}}};
  double worst = 0.0;
  for (const auto& c : cases) {
    Rng rng(StreamKey(2024).with(static_cast<std::uint64_t>(c.freq * 100)));
    std::array<long, 4> counts{};
    for (int i = 0; i < 1000000; ++i) ++counts[sample_input(Source::S, c.freq, rng)];
    for (int s = 0; s < 4; ++s) worst = std::max(worst, std::abs(counts[s] / 1e6 - c.expected[s]));
  }
  const double t = seconds_since(t0);
  return {worst <= 0.003 && t < 5.0, format("max abs deviation %.5f (limit 0.003), runtime %.2f s", worst, t)};
}

// ---------------------------------------------------------------------------

int sh(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  testutil::TempDir tmp("acceptance_det");
  const std::string cli = MBEVO_CLI_PATH;
  const std::string common = " evolve --difficulty 0.9 --ndt 40 --replicates 1 --generations 2000 --seed 7";
  const std::string quiet = " >/dev/null 2>&1";
  double worst = 0.0;
  auto timed = [&](const std::string& cmd) {
    const auto t0 = Clock::now();
    const int rc = sh(cmd);
    worst = std::max(worst, seconds_since(t0));
    return rc;
  };

  if (timed(cli + common + " --threads 1 --out " + (tmp.path() / "a").string() + quiet) != 0) {
    return {false, "first run failed"};
  }
  if (timed(cli + common + " --threads 2 --out " + (tmp.path() / "b").string() + quiet) != 0) {
    return {false, "second run failed"};
  }
  // Third run is killed with SIGKILL partway through, then rerun to completion.
  const auto c_out = (tmp.path() / "c").string();
  const auto t_kill = Clock::now();
  sh("timeout -s KILL 6 " + cli + common + " --out " + c_out + quiet);
  const double killed_after = seconds_since(t_kill);
  bool interrupted = false;
  if (const auto m = read_manifest(c_out)) {
    interrupted = !m->populations.empty() && m->populations[0].status != "done";
  }
  if (timed(cli + common + " --out " + c_out + quiet) != 0) return {false, "resumed run failed"};

  for (const char* run : {"a", "b", "c"}) {
    const auto dir = tmp.path() / run / "p000";
    if (sh(cli + " probe --run " + dir.string() + " --generation 1970" + quiet) != 0) {
      return {false, std::string("probe failed for run ") + run};
    }
  }
  std::vector<std::string> mismatched;
  for (const char* f : {"stats.csv", "ancestry.csv", "probe_1970/records.jsonl", "probe_1970/summary.json"}) {
    const auto a = testutil::slurp(tmp.path() / "a" / "p000" / f);
    if (a.empty()) mismatched.push_back(std::string(f) + " (empty)");
    for (const char* other : {"b", "c"}) {
      if (testutil::slurp(tmp.path() / other / "p000" / f) != a) mismatched.push_back(std::string(other) + "/" + f);
    }
  }
  std::string detail = format("threads 1 vs 2 vs killed after %.1f s%s and resumed; slowest execution %.1f s",
                              killed_after, interrupted ? "" : " (finished before the kill)", worst);
  for (const auto& m : mismatched) detail += "; differs: " + m;
  return {mismatched.empty() && worst < 120.0, detail};
}

// ---------------------------------------------------------------------------

Outcome seed_calibration() {
  PopulationConfig c;
  double total = 0.0;
  const auto pop = initial_population(c);
  for (const auto& g : pop) total += connection_count(decode(g));
  const double mean = total / static_cast<double>(pop.size());
  return {mean >= 18.0 && mean <= 32.0,
          format("mean connections %.2f over %zu generation-0 agents (seed length %zu)", mean, pop.size(),
                 c.seed_genome_length)};
}

// ---------------------------------------------------------------------------
// Criteria 4-7 share one set of evolved populations.

constexpr int kReplicates = 10;
constexpr int kGenerations = 2000;
constexpr int kProbeGeneration = 1970;
constexpr int kDipHorizon = 600;
constexpr int kDipGeneration = 400;

struct ConditionRuns {
  Condition condition;
  std::vector<AncestryTable> ancestry;
  std::vector<ProbeResult> probes;
};

class ProbeSnapshot final : public EvolutionSink {
public:
  void on_generation(int, std::span<const AncestryRow>, const GenerationStats*) override {}
  void on_snapshot(int generation, std::span<const Genome> genomes) override {
    if (generation == kProbeGeneration) snapshot.assign(genomes.begin(), genomes.end());
  }
  void on_checkpoint(const Checkpoint&) override {}
  std::vector<Genome> snapshot;
};

std::vector<ConditionRuns> evolve_conditions() {
  const std::array<Condition, 3> conditions{{{0.90, 40, 100, 100}, {0.60, 40, 100, 100}, {0.60, 10, 100, 100}}};
  const std::uint64_t base_seed = 20240601;
  std::vector<ConditionRuns> out;
  for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
    ConditionRuns runs;
    runs.condition = conditions[ci];
    for (int r = 0; r < kReplicates; ++r) {
      const auto t0 = Clock::now();
      PopulationConfig pc;
      pc.condition = conditions[ci];
      pc.generations = kGenerations;
      pc.run_seed = derive_population_seed(base_seed, static_cast<int>(ci), r);
      pc.snapshot_interval = 0;
      pc.extra_snapshots = {kProbeGeneration};
      pc.checkpoint_interval = kGenerations;
      ProbeSnapshot sink;
      auto result = run_evolution(pc, &sink);
      const StreamKey probe_key =
          StreamKey(pc.run_seed).with(Purpose::Probe).with(static_cast<std::uint64_t>(kProbeGeneration));
      runs.probes.push_back(probe_generation(sink.snapshot, pc.condition, probe_key));
      runs.ancestry.push_back(std::move(result.ancestry));
      std::fprintf(stderr, "  evolved %s replicate %d in %.1f s (probe accuracy %.3f)\n",
                   condition_label(pc.condition).c_str(), r, seconds_since(t0), runs.probes.back().pooled_accuracy);
    }
    out.push_back(std::move(runs));
  }
  return out;
}

// Mean connection count over the lines of descent of every agent in the last level.
std::vector<double> lod_average(const AncestryTable& t) {
  const int last = t.generations() - 1;
  std::vector<double> sum(static_cast<std::size_t>(t.generations()), 0.0);
  const int n = static_cast<int>(t.generation(last).size());
  for (int i = 0; i < n; ++i) {
    const auto lod = extract_lod(t, i);
    for (std::size_t g = 0; g < lod.size(); ++g) sum[g] += lod[g].connections;
  }
  for (auto& s : sum) s /= n;
  return sum;
}

Outcome brain_size_dip(const std::vector<ConditionRuns>& runs) {
  bool ok = true;
  std::string detail;
  for (std::size_t ci = 0; ci < 2; ++ci) {
    int dips = 0;
    std::string values;
    for (const auto& full : runs[ci].ancestry) {
      AncestryTable t = full;
      t.truncate(kDipHorizon + 1);
      const auto avg = lod_average(t);
      dips += avg[kDipGeneration] < avg[0];
      values += format(" %.1f>%.1f", avg[0], avg[kDipGeneration]);
    }
    ok = ok && dips >= 8;
    detail += format("%s: %d/10 dipped [gen0>gen400:%s]; ", condition_label(runs[ci].condition).c_str(), dips,
                     values.c_str());
  }
  return {ok, detail};
}

double final_size(const AncestryTable& t) { return lod_average(t).back(); }

Outcome size_ordering(const std::vector<ConditionRuns>& runs) {
  std::array<double, 2> mean{};
  for (std::size_t ci = 0; ci < 2; ++ci) {
    for (const auto& t : runs[ci].ancestry) mean[ci] += final_size(t) / kReplicates;
  }
  return {mean[1] - mean[0] >= 2.0,
          format("mean connections at generation %d: easy %.2f, hard %.2f (gap %.2f, need >= 2)", kGenerations,
                 mean[0], mean[1], mean[1] - mean[0])};
}

Outcome accuracy(const std::vector<ConditionRuns>& runs) {
  int easy_ok = 0;
  double easy_mean = 0.0, hard_short_mean = 0.0;
  for (const auto& p : runs[0].probes) {
    easy_ok += p.pooled_accuracy >= 0.90;
    easy_mean += p.pooled_accuracy / kReplicates;
  }
  for (const auto& p : runs[2].probes) hard_short_mean += p.pooled_accuracy / kReplicates;
  return {easy_ok >= 8 && hard_short_mean < easy_mean,
          format("probe at generation %d: easy >= 0.90 in %d/10 (mean %.3f); hard/short mean %.3f", kProbeGeneration,
                 easy_ok, easy_mean, hard_short_mean)};
}

std::vector<TrialRecord> synthetic_trials(bool copier, int n, std::uint64_t seed) {
  Rng rng{StreamKey(seed)};
  std::vector<TrialRecord> out;
  for (int t = 0; t < n; ++t) {
    TrialRecord r;
    r.inputs.resize(60);
    for (auto& s : r.inputs) s = static_cast<Symbol>(rng.below(4));
    r.inputs.back() = static_cast<Symbol>(1 + rng.below(2));
    r.decision_step = static_cast<int>(r.inputs.size()) - 1;
    const bool says_s = copier ? r.inputs.back() == 1 : rng.bernoulli(0.5);
    r.decision = says_s ? Answer::S : Answer::N;
    r.correct = says_s;
    out.push_back(std::move(r));
  }
  return out;
}

double median(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome correlation_shape(const std::vector<ConditionRuns>& runs) {
  std::array<std::vector<int>, 2> counts;
  for (std::size_t ci = 0; ci < 2; ++ci) {
    for (const auto& p : runs[ci].probes) {
      const auto pooled = p.pooled();
      const bool any_decided = std::any_of(pooled.begin(), pooled.end(), [](const auto& r) { return r.decision_step; });
      counts[ci].push_back(any_decided ? trajectory_correlation(pooled).count_at_least(0.1) : 0);
    }
  }
  const double easy = median(counts[0]), hard = median(counts[1]);

  const auto copier = trajectory_correlation(synthetic_trials(true, 10000, 71), 50, 10);
  const auto coin = trajectory_correlation(synthetic_trials(false, 10000, 72), 50, 10);
  const bool copier_ok = copier.r[0] && std::abs(*copier.r[0] - 1.0) < 1e-9;
  double coin_max = 0.0;
  for (const auto& r : coin.r) {
    if (r) coin_max = std::max(coin_max, std::abs(*r));
  }
  const bool coin_ok = coin_max < 0.05;
  return {hard > easy && copier_ok && coin_ok,
          format("median offsets with r >= 0.1: easy %.1f, hard %.1f; copier r0 %.6f; coin max |r| %.4f", easy, hard,
                 copier.r[0].value_or(NAN), coin_max)};
}

// ---------------------------------------------------------------------------

Outcome mutation_statistics() {
  const auto t0 = Clock::now();
  const MutationRates rates;  // defaults
  constexpr std::size_t kLength = 20000;
  Rng seed(StreamKey(99));
  const Genome parent = random_seed_genome(kLength, seed);
  std::vector<std::size_t> points, dups, dels;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    Rng rng(StreamKey(100).with(i));
    MutationReport rep;
    (void)mutate(parent, rates, rng, &rep);
    points.push_back(rep.point);
    dups.push_back(rep.duplication + rep.skipped_duplication);
    dels.push_back(rep.deletion + rep.skipped_deletion);
  }
  const auto p = testutil::binomial_fit(points, kLength, rates.point);
  const auto d = testutil::binomial_fit(dups, kLength, rates.duplication);
  const auto x = testutil::binomial_fit(dels, kLength, rates.deletion);
  const double t = seconds_since(t0);
  const bool ok = p.p_value > 0.001 && d.p_value > 0.001 && x.p_value > 0.001 && t < 30.0;
  return {ok, format("chi-square p-values: point %.3f (df %d), duplication %.3f (df %d), deletion %.3f (df %d); "
                     "runtime %.1f s",
                     p.p_value, p.dof, d.p_value, d.dof, x.p_value, x.dof, t)};
}

Outcome decode_oracle() {
  const auto cases = testutil::load_decode_goldens(MBEVO_TEST_DATA_DIR "/decode_golden.txt");
  int matched = 0;
  std::string misses;
  for (const auto& c : cases) {
    if (dump(decode(c.genome)) == c.expected) {
      ++matched;
    } else {
      misses += " [" + c.name + "]";
    }
  }
  return {cases.size() == 20 && matched == 20,
          format("%d/%zu golden genomes decode gate for gate%s", matched, cases.size(), misses.c_str())};
}

}  // namespace

int main() {
  run(1, "stimulus distribution", stimulus_distribution);
  run(2, "determinism across threads and kill/resume", determinism);
  run(3, "seed calibration", seed_calibration);

  const auto t0 = Clock::now();
  std::vector<ConditionRuns> runs;
  std::string evolve_error;
  try {
    runs = evolve_conditions();
  } catch (const std::exception& e) {
    evolve_error = e.what();
  }
  std::fprintf(stderr, "  evolution for criteria 4-7 took %.1f s\n", seconds_since(t0));
  auto with_runs = [&](int id, const char* name, Outcome (*fn)(const std::vector<ConditionRuns>&)) {
    if (!evolve_error.empty()) {
      report(id, name, {false, "evolution failed: " + evolve_error}, 0.0);
      return;
    }
    run(id, name, [&] { return fn(runs); });
  };
  with_runs(4, "early brain-size dip", brain_size_dip);
  with_runs(5, "difficulty to size ordering", size_ordering);
  with_runs(6, "accuracy", accuracy);
  with_runs(7, "correlation profile shape", correlation_shape);

  run(8, "mutation statistics", mutation_statistics);
  run(9, "decode oracle", decode_oracle);

  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
