#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mbevo/genome.hpp"

namespace mbevo {

inline constexpr int kNodeCount = 16;
inline constexpr int kMaxGateArity = 4;

// Two environment bits: left feeds node 1, right feeds node 2.
struct InputBits {
  bool left = false;
  bool right = false;

  // Symbol value with the left bit as the high bit: [01] -> 1, [10] -> 2.
  [[nodiscard]] constexpr std::uint8_t symbol() const noexcept {
    return static_cast<std::uint8_t>((left ? 2 : 0) | (right ? 1 : 0));
  }
  static constexpr InputBits from_symbol(std::uint8_t s) noexcept { return {(s & 2) != 0, (s & 1) != 0}; }
};

// State of the 16 binary nodes; node k (1-based) is bit k-1.
class NodeState {
public:
  constexpr NodeState() = default;
  constexpr explicit NodeState(std::uint16_t bits) : bits_(bits) {}

  [[nodiscard]] constexpr bool node(int k) const noexcept { return (bits_ >> (k - 1)) & 1U; }
  constexpr void set(int k, bool v) noexcept {
    const auto mask = static_cast<std::uint16_t>(1U << (k - 1));
    bits_ = v ? static_cast<std::uint16_t>(bits_ | mask) : static_cast<std::uint16_t>(bits_ & ~mask);
  }
  [[nodiscard]] constexpr std::uint16_t bits() const noexcept { return bits_; }

  friend constexpr bool operator==(NodeState, NodeState) = default;

private:
  std::uint16_t bits_ = 0;
};

// A deterministic logic gate: reads 1-4 nodes, writes 1-4 nodes.
class Gate {
public:
  // table[row] holds one bit per output; row index takes inputs[0] as its
  // most significant bit. Throws std::invalid_argument on shape violations or
  // node indices outside 1..16 (including outputs on input nodes 1 and 2).
  Gate(std::vector<int> inputs, std::vector<int> outputs, std::vector<std::vector<bool>> table);

  [[nodiscard]] const std::vector<int>& inputs() const noexcept { return inputs_; }
  [[nodiscard]] const std::vector<int>& outputs() const noexcept { return outputs_; }
  [[nodiscard]] const std::vector<std::vector<bool>>& table() const noexcept { return table_; }
  [[nodiscard]] int connections() const noexcept {
    return static_cast<int>(inputs_.size() * outputs_.size());
  }

  [[nodiscard]] std::uint16_t fire(std::uint16_t state) const noexcept {
    unsigned row = 0;
    for (int i = 0; i < input_count_; ++i) row = (row << 1) | ((state >> input_bit_[i]) & 1U);
    return row_mask_[row];
  }

  friend bool operator==(const Gate& a, const Gate& b) {
    return a.inputs_ == b.inputs_ && a.outputs_ == b.outputs_ && a.table_ == b.table_;
  }

private:
  std::vector<int> inputs_;
  std::vector<int> outputs_;
  std::vector<std::vector<bool>> table_;
  // Hot-path form of the above.
  int input_count_ = 0;
  std::array<std::uint8_t, kMaxGateArity> input_bit_{};
  std::array<std::uint16_t, 1 << kMaxGateArity> row_mask_{};
};

class Brain {
public:
  Brain() = default;
  explicit Brain(std::vector<Gate> gates) : gates_(std::move(gates)) {}

  [[nodiscard]] const std::vector<Gate>& gates() const noexcept { return gates_; }

  friend bool operator==(const Brain&, const Brain&) = default;

private:
  std::vector<Gate> gates_;
};

enum class Answer : std::uint8_t { None, S, N };

// Output node index for a raw address; input nodes are remapped onto 3..16.
constexpr int remap_output_node(int node) noexcept {
  return (node == 1 || node == 2) ? ((node - 1) % 14) + 3 : node;
}

Brain decode(const Genome& genome);

NodeState step(const Brain& brain, NodeState state, InputBits input) noexcept;

Answer read_answer(NodeState state) noexcept;

int connection_count(const Brain& brain) noexcept;

// `in=[..] out=[..] table=[rowbits;rowbits;...]`, one line per gate.
std::string dump(const Brain& brain);

}  // namespace mbevo
