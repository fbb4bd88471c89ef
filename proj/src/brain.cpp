#include "mbevo/brain.hpp"

#include <sstream>
#include <stdexcept>

namespace mbevo {

Gate::Gate(std::vector<int> inputs, std::vector<int> outputs, std::vector<std::vector<bool>> table)
    : inputs_(std::move(inputs)), outputs_(std::move(outputs)), table_(std::move(table)) {
  const auto in = inputs_.size();
  const auto out = outputs_.size();
  if (in < 1 || in > kMaxGateArity || out < 1 || out > kMaxGateArity) {
    throw std::invalid_argument("gate: arity must be within 1..4");
  }
  if (table_.size() != (std::size_t{1} << in)) throw std::invalid_argument("gate: table needs 2^inputs rows");
  for (const auto& row : table_) {
    if (row.size() != out) throw std::invalid_argument("gate: table row width must equal output count");
  }
  for (int n : inputs_) {
    if (n < 1 || n > kNodeCount) throw std::invalid_argument("gate: input node outside 1..16");
  }
  for (int n : outputs_) {
    if (n < 3 || n > kNodeCount) throw std::invalid_argument("gate: output node outside 3..16");
  }

  input_count_ = static_cast<int>(in);
  for (std::size_t i = 0; i < in; ++i) input_bit_[i] = static_cast<std::uint8_t>(inputs_[i] - 1);
  for (std::size_t r = 0; r < table_.size(); ++r) {
    std::uint16_t mask = 0;
    for (std::size_t j = 0; j < out; ++j) {
      if (table_[r][j]) mask = static_cast<std::uint16_t>(mask | (1U << (outputs_[j] - 1)));
    }
    row_mask_[r] = mask;
  }
}

namespace {

// Sequential circular reader positioned after a start codon.
class GeneReader {
public:
  GeneReader(const Genome& g, std::size_t pos) : genome_(g), pos_(pos) {}
  int next() { return genome_.at_wrapped(pos_++); }
  int node() {
    const int u = next();
    const int v = next();
    return (((u - 1) * 4 + (v - 1)) % kNodeCount) + 1;
  }

private:
  const Genome& genome_;
  std::size_t pos_;
};

}  // namespace

Brain decode(const Genome& genome) {
  std::vector<Gate> gates;
  for (std::size_t start : find_gene_starts(genome)) {
    GeneReader r(genome, start + kStartCodon.size());
    const int in = ((r.next() - 1) % 4) + 1;
    const int out = ((r.next() - 1) % 4) + 1;
    std::vector<int> inputs(static_cast<std::size_t>(in));
    std::vector<int> outputs(static_cast<std::size_t>(out));
    for (auto& n : inputs) n = r.node();
    for (auto& n : outputs) n = remap_output_node(r.node());
    std::vector<std::vector<bool>> table(std::size_t{1} << in, std::vector<bool>(static_cast<std::size_t>(out)));
    for (auto& row : table) {
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = (r.next() % 2) != 0;
    }
    gates.emplace_back(std::move(inputs), std::move(outputs), std::move(table));
  }
  return Brain(std::move(gates));
}

NodeState step(const Brain& brain, NodeState state, InputBits input) noexcept {
  const auto in_bits = static_cast<std::uint16_t>((input.left ? 1U : 0U) | (input.right ? 2U : 0U));
  const auto current = static_cast<std::uint16_t>((state.bits() & ~3U) | in_bits);
  std::uint16_t next = in_bits;
  for (const auto& g : brain.gates()) next = static_cast<std::uint16_t>(next | g.fire(current));
  return NodeState(next);
}

Answer read_answer(NodeState state) noexcept {
  const bool o15 = state.node(15);
  const bool o16 = state.node(16);
  if (!o15 && o16) return Answer::S;
  if (o15 && !o16) return Answer::N;
  return Answer::None;
}

int connection_count(const Brain& brain) noexcept {
  int total = 0;
  for (const auto& g : brain.gates()) total += g.connections();
  return total;
}

std::string dump(const Brain& brain) {
  std::ostringstream os;
  auto list = [&os](const std::vector<int>& v) {
    os << '[';
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    os << ']';
  };
  for (const auto& g : brain.gates()) {
    os << "in=";
    list(g.inputs());
    os << " out=";
    list(g.outputs());
    os << " table=[";
    for (std::size_t r = 0; r < g.table().size(); ++r) {
      if (r) os << ';';
      for (bool b : g.table()[r]) os << (b ? '1' : '0');
    }
    os << "]\n";
  }
  return os.str();
}

}  // namespace mbevo
