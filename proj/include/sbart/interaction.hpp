#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sbart/matrix.hpp"
#include "sbart/tree.hpp"

namespace sbart {

// Pooled co-occurrence of split variables on immediate parent -> child
// internal-node pairs, over every tree of every draw. Counts are unordered,
// so the matrix is symmetric. Normalisation divides by the total pair count
// (self-pairs included), so the upper triangle plus the diagonal sums to 1.
// Per-tree normalisation followed by averaging would be the alternative
// reading; it is not implemented.
struct InteractionMatrix {
  std::size_t num_vars = 0;
  std::vector<std::uint64_t> counts;  // p x p, symmetric
  Matrix weights;                     // counts / total_pairs
  std::uint64_t total_pairs = 0;
  std::uint64_t self_pairs = 0;

  bool empty() const noexcept { return total_pairs == 0; }
  std::uint64_t count(std::size_t a, std::size_t b) const { return counts[a * num_vars + b]; }
};

InteractionMatrix co_occurrence(std::span<const Ensemble> draws, const CutpointGrid& grid);

namespace kernels {
// Raw symmetric pair counts; the OpenMP version accumulates per draw and
// merges in draw order.
std::vector<std::uint64_t> pair_counts_serial(std::span<const Ensemble> draws, std::size_t num_vars);
std::vector<std::uint64_t> pair_counts_omp(std::span<const Ensemble> draws, std::size_t num_vars);
}  // namespace kernels

struct InteractionEdge {
  std::size_t a = 0;  // a < b
  std::size_t b = 0;
  double weight = 0.0;
  friend bool operator==(const InteractionEdge&, const InteractionEdge&) = default;
};

struct InteractionNetwork {
  std::vector<std::size_t> nodes;     // variable indices, ascending
  std::vector<std::string> names;     // parallel to nodes
  std::vector<InteractionEdge> edges; // sorted by (a, b)
  double threshold = 0.0;

  std::size_t degree(std::size_t var) const;
  friend bool operator==(const InteractionNetwork&, const InteractionNetwork&) = default;
};

inline constexpr double kDefaultEdgeThreshold = 0.01;

// Off-diagonal entries with weight >= threshold (and > 0) become edges.
// `names` labels variables by index; empty means x1..xp.
InteractionNetwork build_network(const InteractionMatrix& m, double threshold = kDefaultEdgeThreshold,
                                 std::span<const std::string> names = {});

// Graphviz undirected graph with `weight` and `penwidth` edge attributes.
void write_network_dot(std::ostream& os, const InteractionNetwork& net);
// Node-link JSON (nodes carry degree).
void write_network_json(std::ostream& os, const InteractionNetwork& net);
InteractionNetwork read_network_json(std::istream& is);
// Full weight matrix with variable-name header row and column.
void write_matrix_csv(std::ostream& os, const InteractionMatrix& m, std::span<const std::string> names = {});

// Rounds to 6 significant digits, the precision used by every export.
double round_sig6(double v);

}  // namespace sbart
