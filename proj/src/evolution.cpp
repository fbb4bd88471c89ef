#include "mbevo/evolution.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "parallel.hpp"

namespace mbevo {

void PopulationConfig::validate() const {
  if (population_size < 2) throw std::invalid_argument("population_size must be at least 2");
  if (generations < 1) throw std::invalid_argument("generations must be at least 1");
  if (seed_genome_length < kMinGenomeLength || seed_genome_length > kMaxGenomeLength) {
    throw std::invalid_argument("seed_genome_length outside [2000, 200000]");
  }
  if (snapshot_interval < 0) throw std::invalid_argument("snapshot_interval must be non-negative");
  if (seed_connections_min < 0 || seed_connections_max < seed_connections_min) {
    throw std::invalid_argument("seed connection band is empty");
  }
  if (checkpoint_interval < 1) throw std::invalid_argument("checkpoint_interval must be positive");
  condition.validate();
  rates.validate();
}

bool PopulationConfig::snapshot_due(int generation) const {
  if (snapshot_interval > 0 && generation % snapshot_interval == 0) return true;
  return std::find(extra_snapshots.begin(), extra_snapshots.end(), generation) != extra_snapshots.end();
}

std::string PopulationConfig::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "population_size=" << population_size << ";generations=" << generations
     << ";target_freq=" << condition.target_freq << ";nondecision_time=" << condition.nondecision_time
     << ";max_steps=" << condition.max_steps << ";trials_per_agent=" << condition.trials_per_agent
     << ";point=" << rates.point << ";duplication=" << rates.duplication << ";deletion=" << rates.deletion
     << ";segment_length=" << rates.segment_length << ";seed_genome_length=" << seed_genome_length
     << ";seed_connections=" << seed_connections_min << "-" << seed_connections_max
     << ";run_seed=" << run_seed << ";common_trials=" << common_trials;
  return os.str();
}

std::uint64_t PopulationConfig::hash() const {
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void AncestryTable::push_generation(std::vector<AncestryRow> rows) {
  if (rows_.empty()) {
    for (const auto& r : rows) {
      if (r.parent != -1) throw IntegrityError("ancestry: generation 0 rows cannot have parents");
    }
  } else {
    const auto prev = static_cast<int>(rows_.back().size());
    for (const auto& r : rows) {
      if (r.parent < 0 || r.parent >= prev) throw IntegrityError("ancestry: parent index out of range");
    }
  }
  rows_.push_back(std::move(rows));
}

std::vector<int> select_parents(std::span<const int> fitnesses, int count, Rng& rng) {
  if (fitnesses.empty()) throw std::invalid_argument("select_parents: empty fitness list");
  if (count < 1) throw std::invalid_argument("select_parents: count must be positive");
  std::vector<std::uint64_t> cumulative(fitnesses.size());
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < fitnesses.size(); ++i) {
    if (fitnesses[i] < 0) throw std::invalid_argument("select_parents: negative fitness");
    total += static_cast<std::uint64_t>(fitnesses[i]);
    cumulative[i] = total;
  }
  std::vector<int> parents(static_cast<std::size_t>(count));
  for (auto& p : parents) {
    if (total == 0) {
      p = static_cast<int>(rng.below(fitnesses.size()));
    } else {
      const std::uint64_t ticket = rng.below(total);
      p = static_cast<int>(std::upper_bound(cumulative.begin(), cumulative.end(), ticket) - cumulative.begin());
    }
  }
  return parents;
}

namespace {

StreamKey run_key(const PopulationConfig& c) { return StreamKey(c.run_seed); }

}  // namespace

PopulationEvaluation evaluate_population(std::span<const Genome> genomes, const PopulationConfig& config,
                                         int generation) {
  const int n = static_cast<int>(genomes.size());
  PopulationEvaluation out;
  out.fitness.assign(genomes.size(), 0);
  out.connections.assign(genomes.size(), 0);
  std::vector<int> decided(genomes.size(), 0);
  std::vector<long> step_sum(genomes.size(), 0);

  const StreamKey gen_key = run_key(config).with(Purpose::Evaluation).with(static_cast<std::uint64_t>(generation));
  detail::parallel_for(n, config.threads, [&](int i) {
    const auto idx = static_cast<std::size_t>(i);
    const Brain brain = decode(genomes[idx]);
    // Agent index n is never used by a real agent and serves as the shared stream.
    const StreamKey trials = gen_key.with(static_cast<std::uint64_t>(config.common_trials ? n : i));
    const auto ev = evaluate_agent(brain, config.condition, trials);
    out.fitness[idx] = ev.fitness;
    out.connections[idx] = connection_count(brain);
    decided[idx] = ev.decided;
    step_sum[idx] = ev.decision_step_sum;
  });

  auto& s = out.stats;
  s.generation = generation;
  const double denom = n > 0 ? n : 1;
  s.mean_fitness = std::accumulate(out.fitness.begin(), out.fitness.end(), 0.0) / denom;
  s.max_fitness = n > 0 ? *std::max_element(out.fitness.begin(), out.fitness.end()) : 0;
  s.mean_connections = std::accumulate(out.connections.begin(), out.connections.end(), 0.0) / denom;
  const long total_decided = std::accumulate(decided.begin(), decided.end(), 0L);
  if (total_decided > 0) {
    s.mean_decision_step =
        static_cast<double>(std::accumulate(step_sum.begin(), step_sum.end(), 0L)) / static_cast<double>(total_decided);
  }
  return out;
}

namespace {

std::vector<Genome> reproduce(std::span<const Genome> genomes, std::span<const int> parents,
                              const PopulationConfig& config, StreamKey key) {
  std::vector<Genome> children(parents.size());
  detail::parallel_for(static_cast<int>(parents.size()), config.threads, [&](int i) {
    Rng rng(key.with(static_cast<std::uint64_t>(i)));
    const auto idx = static_cast<std::size_t>(i);
    children[idx] = mutate(genomes[static_cast<std::size_t>(parents[idx])], config.rates, rng);
  });
  return children;
}

}  // namespace

GenerationResult advance_generation(std::span<const Genome> genomes, const PopulationConfig& config, int generation) {
  if (static_cast<int>(genomes.size()) != config.population_size) {
    throw std::invalid_argument("advance_generation: population size mismatch");
  }
  GenerationResult r;
  r.evaluation = evaluate_population(genomes, config, generation);
  const StreamKey key = run_key(config);
  Rng select_rng(key.with(Purpose::Selection).with(static_cast<std::uint64_t>(generation)));
  r.parents = select_parents(r.evaluation.fitness, config.population_size, select_rng);
  r.children = reproduce(genomes, r.parents, config, key.with(Purpose::Mutation).with(static_cast<std::uint64_t>(generation)));
  return r;
}

Genome draw_seed_genome(const PopulationConfig& config) {
  const StreamKey key = run_key(config).with(Purpose::SeedGenome);
  const bool banded = config.seed_connections_max > 0;
  constexpr std::uint64_t kMaxAttempts = 100000;
  for (std::uint64_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng(key.with(attempt));
    Genome g = random_seed_genome(config.seed_genome_length, rng);
    if (!banded) return g;
    const int c = connection_count(decode(g));
    if (c >= config.seed_connections_min && c <= config.seed_connections_max) return g;
  }
  throw std::invalid_argument("no seed genome within the connection band; adjust seed_genome_length");
}

std::vector<Genome> initial_population(const PopulationConfig& config) {
  const StreamKey key = run_key(config);
  const Genome seed = draw_seed_genome(config);
  const std::vector<Genome> single{seed};
  const std::vector<int> parents(static_cast<std::size_t>(config.population_size), 0);
  return reproduce(single, parents, config, key.with(Purpose::InitialMutation));
}

namespace {

std::vector<AncestryRow> make_rows(std::span<const int> parents, const PopulationEvaluation& ev) {
  std::vector<AncestryRow> rows(ev.fitness.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = {parents[i], ev.fitness[i], ev.connections[i]};
  return rows;
}

}  // namespace

EvolutionResult run_evolution(const PopulationConfig& config, EvolutionSink* sink, RunOptions options) {
  config.validate();
  EvolutionResult result;
  Checkpoint state;
  state.config_hash = config.hash();

  if (options.resume) {
    const Checkpoint& cp = *options.resume;
    if (cp.config_hash != state.config_hash) throw IntegrityError("checkpoint was written for a different config");
    if (options.resume_ancestry.generations() != cp.generation ||
        static_cast<int>(options.resume_stats.size()) != std::min(cp.generation, config.generations)) {
      throw IntegrityError("checkpoint does not match the recorded history");
    }
    state.generation = cp.generation;
    state.genomes = cp.genomes;
    state.pending_parents = cp.pending_parents;
    result.ancestry = std::move(options.resume_ancestry);
    result.stats = std::move(options.resume_stats);
    if (cp.complete) {
      result.final_genomes = std::move(state.genomes);
      result.complete = true;
      return result;
    }
  } else {
    state.generation = 0;
    state.genomes = initial_population(config);
    state.pending_parents.assign(static_cast<std::size_t>(config.population_size), -1);
  }

  for (int g = state.generation; g < config.generations; ++g) {
    if (sink && config.snapshot_due(g)) sink->on_snapshot(g, state.genomes);
    auto step = advance_generation(state.genomes, config, g);
    auto rows = make_rows(state.pending_parents, step.evaluation);
    if (sink) sink->on_generation(g, rows, &step.evaluation.stats);
    result.ancestry.push_generation(std::move(rows));
    result.stats.push_back(step.evaluation.stats);

    state.generation = g + 1;
    state.genomes = std::move(step.children);
    state.pending_parents = std::move(step.parents);

    const bool last = state.generation == config.generations;
    if (!last && state.generation % config.checkpoint_interval == 0) {
      if (sink) sink->on_checkpoint(state);
      if (options.halt_after && state.generation >= *options.halt_after) {
        result.final_genomes = std::move(state.genomes);
        return result;
      }
    }
  }

  // Final generation: evaluated for the ancestry record only.
  const int g = config.generations;
  if (sink && config.snapshot_due(g)) sink->on_snapshot(g, state.genomes);
  const auto ev = evaluate_population(state.genomes, config, g);
  auto rows = make_rows(state.pending_parents, ev);
  if (sink) sink->on_generation(g, rows, nullptr);
  result.ancestry.push_generation(std::move(rows));
  state.generation = g + 1;
  state.complete = true;
  if (sink) sink->on_checkpoint(state);
  result.final_genomes = std::move(state.genomes);
  result.complete = true;
  return result;
}

std::vector<LodEntry> extract_lod(const AncestryTable& ancestry, int final_index) {
  const int levels = ancestry.generations();
  if (levels == 0) throw std::invalid_argument("extract_lod: empty ancestry");
  const auto last = ancestry.generation(levels - 1);
  if (final_index < 0 || final_index >= static_cast<int>(last.size())) {
    throw std::invalid_argument("extract_lod: final index out of range");
  }
  std::vector<LodEntry> lod(static_cast<std::size_t>(levels));
  int agent = final_index;
  for (int g = levels - 1; g >= 0; --g) {
    const auto gen = ancestry.generation(g);
    if (agent < 0 || agent >= static_cast<int>(gen.size())) throw IntegrityError("extract_lod: broken parent link");
    const auto& row = gen[static_cast<std::size_t>(agent)];
    lod[static_cast<std::size_t>(g)] = {g, row.fitness, row.connections};
    agent = row.parent;
  }
  if (agent != -1) throw IntegrityError("extract_lod: generation 0 agent has a parent");
  return lod;
}

}  // namespace mbevo
