#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mbevo/random.hpp"

namespace mbevo {

using Nucleotide = std::uint8_t;

inline constexpr std::size_t kMinGenomeLength = 2000;
inline constexpr std::size_t kMaxGenomeLength = 200000;
inline constexpr std::array<Nucleotide, 5> kStartCodon{4, 2, 2, 1, 3};

// Circular nucleotide sequence, every element in {1,2,3,4}. Length bounds are
// enforced by seeding and mutation, not by the type, so short hand-written
// genomes can be decoded in tests.
class Genome {
public:
  Genome() = default;
  // Throws std::invalid_argument if any value lies outside 1..4.
  explicit Genome(std::vector<Nucleotide> nucleotides);

  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }
  [[nodiscard]] std::span<const Nucleotide> nucleotides() const noexcept { return data_; }
  [[nodiscard]] Nucleotide operator[](std::size_t i) const noexcept { return data_[i]; }
  // Circular access.
  [[nodiscard]] Nucleotide at_wrapped(std::size_t i) const noexcept { return data_[i % data_.size()]; }

  friend bool operator==(const Genome&, const Genome&) = default;

private:
  std::vector<Nucleotide> data_;
};

// Per nucleotide, per replication. Duplication and deletion act on segments of
// segment_length starting at the event position.
struct MutationRates {
  double point = 0.003;
  double duplication = 0.00001;
  double deletion = 0.00001;
  std::size_t segment_length = 256;

  void validate() const;
  friend bool operator==(const MutationRates&, const MutationRates&) = default;
};

// Counts of events drawn during one replication. Skipped events were drawn
// but not applied because they would push the length out of bounds.
struct MutationReport {
  std::size_t point = 0;
  std::size_t duplication = 0;
  std::size_t deletion = 0;
  std::size_t skipped_duplication = 0;
  std::size_t skipped_deletion = 0;
};

Genome random_seed_genome(std::size_t length, Rng& rng);

Genome mutate(const Genome& parent, const MutationRates& rates, Rng& rng,
              MutationReport* report = nullptr);

// Every position where the start codon begins, scanning circularly.
std::vector<std::size_t> find_gene_starts(const Genome& genome);

// One genome per line as a string of digits 1-4.
std::string to_dump_line(const Genome& genome);
Genome from_dump_line(std::string_view line);
void write_genomes(std::ostream& out, std::span<const Genome> genomes);
std::vector<Genome> read_genomes(std::istream& in);

}  // namespace mbevo
