#pragma once

#include "bcolor/engine.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace bcolor {

// A color list any neighbor can rebuild from a few bits: [x], [Delta+1], or [Delta+1] \ [x].
struct ColorList {
  enum class Kind : uint8_t { Prefix, Full, Suffix };
  Kind kind = Kind::Full;
  int x = 0;

  static ColorList prefix(int x) { return {Kind::Prefix, x}; }
  static ColorList full() { return {Kind::Full, 0}; }
  static ColorList suffix(int x) { return {Kind::Suffix, x}; }

  int size(int delta) const;
  bool contains(Color c, int delta) const;
  Color at(int i, int delta) const;  // i-th color, 0-based, ascending
  void encode(BitWriter& w, int color_bits) const;
  static ColorList decode(BitReader& r, int color_bits);
  bool operator==(const ColorList&) const = default;
};

// Counter-mode expansion of a seed into t colors of the list. Throws FaultError on an empty list.
std::vector<Color> expand_seed(uint64_t seed, const ColorList& list, int t, int delta);

struct MultitrialOptions {
  int budget_rounds = 0;
  int t_max = 1;
  int seed_bits = 24;
  int ell = 1;                     // palette margin required on top of the uncolored degree
  bool check_reconstruction = true;
  std::string tag = "multitrial";
};

struct MultitrialResult {
  int iterations = 0;
  int64_t colored = 0;
  int64_t entry_violations = 0;        // active nodes failing the list-size precondition at entry
  std::vector<NodeId> leftover;        // still uncolored after the budget
  std::vector<int> colored_iteration;  // per node, 1-based, 0 when not colored here
};

// Active nodes meeting the list-size precondition try seed-expanded batches; the others try a
// single color from L(v) ∩ Psi(v). Rounds where no node is active are not spent.
MultitrialResult multitrial(Engine& eng, std::vector<NodeId> active, const std::vector<ColorList>& lists,
                            const MultitrialOptions& opt);

// |L(v) ∩ Psi(v)| as v knows it.
int free_in_list(const Engine& eng, NodeId v, const ColorList& list);

}  // namespace bcolor
