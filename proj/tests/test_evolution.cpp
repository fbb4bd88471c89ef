#include <doctest.h>

#include <stdexcept>

#include <array>
#include <cmath>
#include <set>

#include "mbevo/evolution.hpp"
#include "test_util.hpp"

using namespace mbevo;

namespace {

// One identity gate (nodes 1,2 -> 15,16) padded to the minimum length.
Genome copier_genome() {
  auto v = testutil::digits("4221322111243442221121211");
  v.resize(kMinGenomeLength, 1);
  return Genome(v);
}

PopulationConfig small_config(std::uint64_t seed) {
  PopulationConfig c;
  c.population_size = 16;
  c.generations = 12;
  c.run_seed = seed;
  c.condition.trials_per_agent = 20;
  c.snapshot_interval = 0;
  c.checkpoint_interval = 4;
  c.seed_genome_length = 2500;
  return c;
}

class Recorder final : public EvolutionSink {
public:
  void on_generation(int, std::span<const AncestryRow>, const GenerationStats*) override {}
  void on_snapshot(int, std::span<const Genome>) override {}
  void on_checkpoint(const Checkpoint& cp) override { last = cp; }
  Checkpoint last;
};

}  // namespace

TEST_SUITE("evolution") {

TEST_CASE("copier genome scores perfectly on a noiseless task") {
  const Brain b = decode(copier_genome());
  REQUIRE(b.gates().size() == 1);
  CHECK(evaluate_agent(b, {1.0, 60, 100, 50}, StreamKey(1)).fitness == 50);
}

TEST_CASE("roulette proportions") {
  Rng rng(StreamKey(40));
  const std::array<int, 3> fit{2, 1, 1};
  const auto parents = select_parents(fit, 100000, rng);
  std::array<int, 3> counts{};
  for (int p : parents) ++counts[static_cast<std::size_t>(p)];
  CHECK(std::abs(counts[0] / 1e5 - 0.50) < 0.01);
  CHECK(std::abs(counts[1] / 1e5 - 0.25) < 0.01);
  CHECK(std::abs(counts[2] / 1e5 - 0.25) < 0.01);
}

TEST_CASE("roulette degenerate and empty cases") {
  Rng rng(StreamKey(41));
  const std::array<int, 3> one{5, 0, 0};
  for (int p : select_parents(one, 1000, rng)) CHECK(p == 0);
  const std::array<int, 2> none{0, 0};
  int zeros = 0;
  for (int p : select_parents(none, 100000, rng)) zeros += p == 0;
  CHECK(std::abs(zeros / 1e5 - 0.5) < 0.01);
  const std::array<int, 2> negative{-1, 3};
  CHECK_THROWS_AS(select_parents(negative, 1, rng), std::invalid_argument);
}

TEST_CASE("zero rates and equal fitness copy the parents") {
  auto c = small_config(42);
  c.rates = {0.0, 0.0, 0.0, 256};
  // Genomes without a 4 carry no start codon, so every agent scores 0.
  Rng rng(StreamKey(43));
  std::vector<Genome> silent;
  for (int i = 0; i < c.population_size; ++i) {
    std::vector<Nucleotide> v(2000);
    for (auto& n : v) n = static_cast<Nucleotide>(1 + rng.below(3));
    silent.emplace_back(v);
  }
  const auto step = advance_generation(silent, c, 0);
  REQUIRE(step.children.size() == silent.size());
  for (std::size_t i = 0; i < step.children.size(); ++i) {
    CHECK(step.children[i] == silent[static_cast<std::size_t>(step.parents[i])]);
  }
  CHECK(std::set<int>(step.parents.begin(), step.parents.end()).size() > 1);
}

TEST_CASE("a single fit agent is the parent of everyone") {
  auto c = small_config(44);
  c.condition = {1.0, 60, 100, 20};
  std::vector<Genome> pop(static_cast<std::size_t>(c.population_size), testutil::filler_genome(2000));
  pop[3] = copier_genome();
  const auto step = advance_generation(pop, c, 0);
  CHECK(step.evaluation.fitness[3] == 20);
  for (int p : step.parents) CHECK(p == 3);
  CHECK(step.evaluation.stats.max_fitness == 20);
  CHECK(step.evaluation.stats.mean_fitness == doctest::Approx(20.0 / c.population_size));
}

TEST_CASE("runs are reproducible and independent of thread count") {
  auto c = small_config(45);
  const auto a = run_evolution(c, nullptr);
  c.threads = 4;
  const auto b = run_evolution(c, nullptr);
  CHECK(a.ancestry == b.ancestry);
  CHECK(a.stats == b.stats);
  CHECK(a.final_genomes == b.final_genomes);
  c.threads = 1;
  c.run_seed = 46;
  CHECK_FALSE(run_evolution(c, nullptr).final_genomes == a.final_genomes);
}

TEST_CASE("population size is constant") {
  const auto r = run_evolution(small_config(47), nullptr);
  CHECK(r.final_genomes.size() == 16);
  for (int g = 0; g < r.ancestry.generations(); ++g) CHECK(r.ancestry.generation(g).size() == 16);
}

TEST_CASE("one generation") {
  auto c = small_config(48);
  c.generations = 1;
  const auto r = run_evolution(c, nullptr);
  CHECK(r.stats.size() == 1);
  CHECK(r.ancestry.generations() == 2);
  CHECK(extract_lod(r.ancestry, 5).size() == 2);
}

TEST_CASE("resume from a checkpoint reproduces the uninterrupted run") {
  const auto c = small_config(49);
  const auto full = run_evolution(c, nullptr);

  Recorder rec;
  RunOptions halt;
  halt.halt_after = 8;
  auto part = run_evolution(c, &rec, halt);
  REQUIRE_FALSE(part.complete);
  REQUIRE(rec.last.generation == 8);

  RunOptions resume;
  resume.resume = &rec.last;
  resume.resume_ancestry = part.ancestry;
  resume.resume_stats = part.stats;
  const auto rest = run_evolution(c, nullptr, resume);
  CHECK(rest.complete);
  CHECK(rest.ancestry == full.ancestry);
  CHECK(rest.stats == full.stats);
  CHECK(rest.final_genomes == full.final_genomes);
}

TEST_CASE("resume refuses a checkpoint from another config") {
  auto c = small_config(50);
  Recorder rec;
  RunOptions halt;
  halt.halt_after = 4;
  auto part = run_evolution(c, &rec, halt);
  c.run_seed = 51;
  RunOptions resume;
  resume.resume = &rec.last;
  resume.resume_ancestry = part.ancestry;
  resume.resume_stats = part.stats;
  CHECK_THROWS_AS(run_evolution(c, nullptr, resume), IntegrityError);
}

TEST_CASE("lines of descent are valid paths") {
  auto c = small_config(52);
  c.generations = 30;
  const auto r = run_evolution(c, nullptr);
  for (int i = 0; i < c.population_size; ++i) {
    const auto lod = extract_lod(r.ancestry, i);
    REQUIRE(lod.size() == 31);
    int agent = i;
    for (int g = 30; g >= 0; --g) {
      const auto& row = r.ancestry.at(g, agent);
      CHECK(lod[static_cast<std::size_t>(g)].generation == g);
      CHECK(lod[static_cast<std::size_t>(g)].fitness == row.fitness);
      CHECK(lod[static_cast<std::size_t>(g)].connections == row.connections);
      agent = row.parent;
    }
    CHECK(agent == -1);
  }
  CHECK_THROWS_AS(extract_lod(r.ancestry, 16), std::invalid_argument);
}

TEST_CASE("ancestry rejects broken links") {
  AncestryTable t;
  CHECK_THROWS_AS(t.push_generation({{0, 1, 1}}), IntegrityError);
  t.push_generation({{-1, 1, 1}, {-1, 2, 2}});
  CHECK_THROWS_AS(t.push_generation({{2, 1, 1}}), IntegrityError);
  CHECK_THROWS_AS(t.push_generation({{-1, 1, 1}}), IntegrityError);
  CHECK_NOTHROW(t.push_generation({{1, 1, 1}}));
}

TEST_CASE("seed genomes land in the connection band") {
  auto c = small_config(53);
  for (std::uint64_t s = 0; s < 20; ++s) {
    c.run_seed = s;
    const int n = connection_count(decode(draw_seed_genome(c)));
    CHECK(n >= c.seed_connections_min);
    CHECK(n <= c.seed_connections_max);
  }
}

TEST_CASE("config hash covers result-affecting fields only") {
  const auto a = small_config(54);
  auto b = a;
  b.threads = 8;
  CHECK(a.hash() == b.hash());
  b.rates.point = 0.01;
  CHECK(a.hash() != b.hash());
  b = a;
  b.condition.nondecision_time = 20;
  CHECK(a.hash() != b.hash());
}

TEST_CASE("config validation") {
  auto c = small_config(55);
  c.population_size = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config(55);
  c.seed_connections_min = 40;
  c.seed_connections_max = 30;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

}
