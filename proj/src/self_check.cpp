#include "mbevo/self_check.hpp"

#include <array>
#include <cmath>
#include <cstdio>

#include "mbevo/analysis.hpp"
#include "mbevo/evolution.hpp"

namespace mbevo {

namespace {

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

CheckResult stimulus_frequencies() {
  // S at freq f: [01] = f^2, [00] = [11] = f(1-f), [10] = (1-f)^2.
  constexpr int kDraws = 200000;
  double worst = 0.0;
  for (double f : {0.6, 0.9}) {
    Rng rng(StreamKey(11).with(static_cast<std::uint64_t>(f * 100)));
    std::array<int, 4> counts{};
    for (int i = 0; i < kDraws; ++i) ++counts[sample_input(Source::S, f, rng)];
    const std::array<double, 4> expected{f * (1 - f), f * f, (1 - f) * (1 - f), f * (1 - f)};
    for (int s = 0; s < 4; ++s) worst = std::max(worst, std::abs(counts[s] / double(kDraws) - expected[s]));
  }
  return {"stimulus symbol frequencies", worst < 0.005, fmt("max abs error %.4f", worst)};
}

CheckResult gene_scan() {
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    Rng rng(StreamKey(12).with(trial));
    std::vector<Nucleotide> v(200 + rng.below(300));
    for (auto& n : v) n = static_cast<Nucleotide>(1 + rng.below(4));
    if (trial % 2 == 0) {
      // force a codon across the wrap
      const std::size_t n = v.size();
      v[n - 2] = 4;
      v[n - 1] = 2;
      v[0] = 2;
      v[1] = 1;
      v[2] = 3;
    }
    const Genome g(v);
    std::vector<Nucleotide> doubled = v;
    doubled.insert(doubled.end(), v.begin(), v.begin() + 4);
    std::vector<std::size_t> naive;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (std::equal(kStartCodon.begin(), kStartCodon.end(), doubled.begin() + static_cast<std::ptrdiff_t>(i))) {
        naive.push_back(i);
      }
    }
    if (naive != find_gene_starts(g)) return {"start codon scan", false, "mismatch against naive scan"};
  }
  return {"start codon scan", true, "50 random genomes agree with the naive scan"};
}

CheckResult decode_golden() {
  const Genome g({4, 2, 2, 1, 3, 4, 4, 1, 1, 1, 2, 4, 3, 4, 4, 1, 1, 1, 1, 2, 2, 2, 2, 1, 1, 1, 1,
                  2, 2, 2, 2, 1, 1, 1, 1, 2, 2, 2, 2, 1, 1, 1, 1, 2, 2, 2, 2, 1, 1, 1, 1, 2, 2, 2, 2,
                  1, 1, 1, 1, 2, 2, 2, 2, 1, 1, 1, 1, 2, 2, 2, 2, 1, 1, 1, 1, 2, 2, 2, 2, 1, 1, 1, 1,
                  2, 2, 2, 2, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1});
  const Brain b = decode(g);
  // 4 inputs from (1,1)(1,2)(4,3)(4,4) -> nodes 1,2,15,16; outputs (1,1)(1,1)(2,2)(2,2) -> 3,3,6,6.
  bool ok = b.gates().size() == 1;
  if (ok) {
    const auto& gate = b.gates()[0];
    ok = gate.inputs() == std::vector<int>{1, 2, 15, 16} && gate.outputs() == std::vector<int>{3, 3, 6, 6} &&
         gate.table()[0] == std::vector<bool>{true, true, true, true} &&
         gate.table()[1] == std::vector<bool>{false, false, false, false};
  }
  return {"hand-decoded 4x4 gate", ok, ok ? "gate matches" : dump(b)};
}

CheckResult zero_rate_mutation() {
  Rng rng(StreamKey(13));
  const Genome g = random_seed_genome(3000, rng);
  MutationRates none{0.0, 0.0, 0.0, 256};
  const bool ok = mutate(g, none, rng) == g;
  return {"zero-rate mutation is the identity", ok, ""};
}

CheckResult determinism() {
  PopulationConfig c;
  c.population_size = 12;
  c.generations = 6;
  c.run_seed = 99;
  c.condition.trials_per_agent = 20;
  c.snapshot_interval = 0;
  const auto a = run_evolution(c, nullptr);
  c.threads = 3;
  const auto b = run_evolution(c, nullptr);
  const bool ok = a.ancestry == b.ancestry && a.stats == b.stats && a.final_genomes == b.final_genomes;
  return {"run is independent of thread count", ok, ""};
}

CheckResult correlation_oracles() {
  // Copier: answer is the sign of the final nonzero input.
  std::vector<TrialRecord> copier, coin;
  Rng rng(StreamKey(14));
  for (int t = 0; t < 4000; ++t) {
    TrialRecord r;
    r.source = Source::S;
    const int len = 5 + static_cast<int>(rng.below(20));
    for (int i = 0; i < len; ++i) r.inputs.push_back(static_cast<Symbol>(rng.below(4)));
    r.inputs.back() = static_cast<Symbol>(1 + rng.below(2));
    r.decision_step = len - 1;
    r.decision = r.inputs.back() == 1 ? Answer::S : Answer::N;
    r.correct = r.decision == Answer::S;
    copier.push_back(r);
    r.decision = (rng() >> 63) ? Answer::S : Answer::N;
    coin.push_back(r);
  }
  const auto pc = trajectory_correlation(copier, 10, 10);
  const auto pn = trajectory_correlation(coin, 10, 10);
  double worst_null = 0.0;
  for (const auto& r : pn.r) {
    if (r) worst_null = std::max(worst_null, std::abs(*r));
  }
  const bool ok = pc.r[0] && std::abs(*pc.r[0] - 1.0) < 1e-12 && worst_null < 0.07;
  return {"correlation oracles (copier, coin)", ok,
          fmt("copier r0 %.4f, coin max |r| %.4f", pc.r[0].value_or(0.0), worst_null)};
}

}  // namespace

std::vector<CheckResult> run_self_checks() {
  return {stimulus_frequencies(), gene_scan(), decode_golden(), zero_rate_mutation(), determinism(),
          correlation_oracles()};
}

}  // namespace mbevo
