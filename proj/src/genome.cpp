#include "mbevo/genome.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace mbevo {

Genome::Genome(std::vector<Nucleotide> nucleotides) : data_(std::move(nucleotides)) {
  for (Nucleotide n : data_) {
    if (n < 1 || n > 4) throw std::invalid_argument("genome: nucleotide outside 1..4");
  }
}

void MutationRates::validate() const {
  auto check = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument(std::string("mutation rate '") + name + "' outside [0,1]");
    }
  };
  check(point, "point");
  check(duplication, "duplication");
  check(deletion, "deletion");
  if (segment_length == 0) throw std::invalid_argument("mutation segment length must be positive");
}

Genome random_seed_genome(std::size_t length, Rng& rng) {
  if (length < kMinGenomeLength || length > kMaxGenomeLength) {
    throw std::invalid_argument("seed genome length outside [2000, 200000]");
  }
  std::vector<Nucleotide> data(length);
  for (auto& n : data) n = static_cast<Nucleotide>(1 + rng.below(4));
  return Genome(std::move(data));
}

namespace {

// Ascending positions of a Bernoulli(p) event process over n sites.
std::vector<std::size_t> event_positions(std::size_t n, double p, Rng& rng) {
  std::vector<std::size_t> out;
  if (p <= 0.0) return out;
  std::uint64_t pos = 0;
  while (true) {
    const std::uint64_t gap = rng.geometric_gap(p);
    if (gap >= n - pos) break;
    pos += gap;
    out.push_back(pos);
    ++pos;
    if (pos >= n) break;
  }
  return out;
}

}  // namespace

Genome mutate(const Genome& parent, const MutationRates& rates, Rng& rng, MutationReport* report) {
  const std::size_t n = parent.size();
  std::vector<Nucleotide> work(parent.nucleotides().begin(), parent.nucleotides().end());

  // Draw all three processes up front, in a fixed order, so the stream layout
  // does not depend on which events end up applied.
  const auto points = event_positions(n, rates.point, rng);
  for (std::size_t p : points) work[p] = static_cast<Nucleotide>(1 + rng.below(4));
  const auto dups = event_positions(n, rates.duplication, rng);
  const auto dels = event_positions(n, rates.deletion, rng);

  MutationReport local;
  local.point = points.size();
  local.duplication = dups.size();
  local.deletion = dels.size();

  if (dups.empty() && dels.empty()) {
    if (report) *report = local;
    return Genome(std::move(work));
  }

  // Structural events are resolved in ascending parent position; at a shared
  // position the duplication is considered first.
  struct Insertion {
    std::size_t begin, end;
  };
  std::vector<Insertion> insertions;
  std::vector<std::uint8_t> deleted;
  std::size_t length = n;
  std::size_t deleted_until = 0;
  std::size_t di = 0, xi = 0;
  while (di < dups.size() || xi < dels.size()) {
    const bool take_dup = xi == dels.size() || (di < dups.size() && dups[di] <= dels[xi]);
    if (take_dup) {
      const std::size_t begin = dups[di++];
      const std::size_t end = std::min(begin + rates.segment_length, n);
      if (length + (end - begin) > kMaxGenomeLength) {
        ++local.skipped_duplication;
        continue;
      }
      length += end - begin;
      insertions.push_back({begin, end});
    } else {
      const std::size_t begin = dels[xi++];
      const std::size_t end = std::min(begin + rates.segment_length, n);
      const std::size_t from = std::max(begin, deleted_until);
      const std::size_t removed = end > from ? end - from : 0;
      if (length - removed < kMinGenomeLength) {
        ++local.skipped_deletion;
        continue;
      }
      if (deleted.empty()) deleted.assign(n, 0);
      std::fill(deleted.begin() + static_cast<std::ptrdiff_t>(from),
                deleted.begin() + static_cast<std::ptrdiff_t>(std::max(from, end)), 1);
      deleted_until = std::max(deleted_until, end);
      length -= removed;
    }
  }
  local.duplication -= local.skipped_duplication;
  local.deletion -= local.skipped_deletion;

  // Copies are inserted immediately after the end of their source segment.
  std::stable_sort(insertions.begin(), insertions.end(),
                   [](const Insertion& a, const Insertion& b) { return a.end < b.end; });
  std::vector<Nucleotide> child;
  child.reserve(length);
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (deleted.empty() || !deleted[i]) child.push_back(work[i]);
    while (next < insertions.size() && insertions[next].end == i + 1) {
      child.insert(child.end(), work.begin() + static_cast<std::ptrdiff_t>(insertions[next].begin),
                   work.begin() + static_cast<std::ptrdiff_t>(insertions[next].end));
      ++next;
    }
  }
  if (report) *report = local;
  return Genome(std::move(child));
}

std::vector<std::size_t> find_gene_starts(const Genome& genome) {
  std::vector<std::size_t> starts;
  const std::size_t n = genome.size();
  if (n == 0) return starts;
  const auto data = genome.nucleotides();
  for (std::size_t i = 0; i < n; ++i) {
    if (data[i] != kStartCodon[0]) continue;
    bool match = true;
    for (std::size_t k = 1; k < kStartCodon.size(); ++k) {
      if (genome.at_wrapped(i + k) != kStartCodon[k]) {
        match = false;
        break;
      }
    }
    if (match) starts.push_back(i);
  }
  return starts;
}

std::string to_dump_line(const Genome& genome) {
  std::string s;
  s.reserve(genome.size());
  for (Nucleotide n : genome.nucleotides()) s.push_back(static_cast<char>('0' + n));
  return s;
}

Genome from_dump_line(std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
  std::vector<Nucleotide> data;
  data.reserve(line.size());
  for (char c : line) {
    if (c < '1' || c > '4') throw std::invalid_argument("genome dump: unexpected character");
    data.push_back(static_cast<Nucleotide>(c - '0'));
  }
  return Genome(std::move(data));
}

void write_genomes(std::ostream& out, std::span<const Genome> genomes) {
  for (const auto& g : genomes) out << to_dump_line(g) << '\n';
}

std::vector<Genome> read_genomes(std::istream& in) {
  std::vector<Genome> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(from_dump_line(line));
  }
  return out;
}

}  // namespace mbevo
