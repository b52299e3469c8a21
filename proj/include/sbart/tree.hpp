#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "sbart/matrix.hpp"

namespace sbart {

inline constexpr std::size_t kDefaultGridSize = 100;

// Candidate split values per predictor. Trees store cut *indices* into this
// grid; routing resolves an index to its value here.
class CutpointGrid {
 public:
  CutpointGrid() = default;
  // Takes explicit per-predictor cut lists. Each list must be non-empty and
  // strictly increasing. A predictor flagged unsplittable keeps its list
  // (normally a single point) but is never offered to the sampler.
  CutpointGrid(std::vector<std::vector<double>> cuts, std::vector<bool> splittable);

  // Equally spaced interior points: cut_k = min + (k+1)(max-min)/(C+1).
  // Constant columns get the one-point grid {min} marked unsplittable.
  static CutpointGrid build(const Matrix& X, std::size_t grid_size = kDefaultGridSize);

  std::size_t num_vars() const noexcept { return cuts_.size(); }
  std::span<const double> cuts(std::size_t var) const { return cuts_[var]; }
  std::size_t num_cuts(std::size_t var) const { return cuts_[var].size(); }
  double cut(std::size_t var, std::size_t index) const { return cuts_[var][index]; }
  bool splittable(std::size_t var) const { return splittable_[var]; }

  friend bool operator==(const CutpointGrid&, const CutpointGrid&) = default;

 private:
  std::vector<std::vector<double>> cuts_;
  std::vector<bool> splittable_;
};

using NodeId = std::uint64_t;

// In-memory leaf marker for var/cut. On disk leaves carry 0/0.
inline constexpr int kLeaf = -1;

struct TreeNode {
  NodeId id = 1;      // heap index: root 1, children 2i and 2i+1
  int var = kLeaf;    // predictor index, or kLeaf
  int cut = kLeaf;    // index into the grid of `var`, or kLeaf
  double value = 0.0; // leaf output; internal nodes may carry a value too, it is never read

  bool is_leaf() const noexcept { return var == kLeaf; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

inline constexpr NodeId parent_of(NodeId id) { return id / 2; }
inline constexpr NodeId left_of(NodeId id) { return 2 * id; }
inline constexpr NodeId right_of(NodeId id) { return 2 * id + 1; }
int depth_of(NodeId id);

// Immutable binary decision tree. Construction validates the heap structure
// and throws StructureError naming the first offending node.
class Tree {
 public:
  // Single leaf.
  explicit Tree(double leaf_value = 0.0);
  explicit Tree(std::vector<TreeNode> nodes);

  std::span<const TreeNode> nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t num_leaves() const noexcept { return (nodes_.size() + 1) / 2; }
  int depth() const noexcept { return depth_; }

  // Position of node `id` in nodes(), or -1.
  int find(NodeId id) const;
  // Child positions for internal node at position k (-1 for leaves).
  int left(std::size_t k) const { return left_[k]; }
  int right(std::size_t k) const { return right_[k]; }

  // Position of the leaf reached by x. Left iff x[var] <= cut value.
  std::size_t route(const CutpointGrid& grid, std::span<const double> x) const;
  // Checks var/cut indices against a grid; throws StructureError.
  void check_against(const CutpointGrid& grid) const;

  friend bool operator==(const Tree& a, const Tree& b) { return a.nodes_ == b.nodes_; }

 private:
  void index();

  std::vector<TreeNode> nodes_;  // sorted by id
  std::vector<int> left_, right_;
  int depth_ = 0;
};

double evaluate_tree(const Tree& t, const CutpointGrid& grid, std::span<const double> x);

// Sum-of-trees model.
struct Ensemble {
  std::vector<Tree> trees;
  std::size_t size() const noexcept { return trees.size(); }
  friend bool operator==(const Ensemble&, const Ensemble&) = default;
};

double evaluate_ensemble(const Ensemble& e, const CutpointGrid& grid, std::span<const double> x);

// Flat record layout of a single tree: one header row carrying the node
// count, then one (node, var, cut, leaf) row per node in id order. Leaf rows
// carry var = cut = 0. Whether a row is a leaf is decided by the absence of
// its children, since var 0 / cut 0 is also a legal split.
struct TreeRecord {
  NodeId node = 0;
  int var = 0;
  int cut = 0;
  double leaf = 0.0;
  friend bool operator==(const TreeRecord&, const TreeRecord&) = default;
};

struct TreeRecords {
  std::size_t node_count = 0;
  std::vector<TreeRecord> rows;
  friend bool operator==(const TreeRecords&, const TreeRecords&) = default;
};

TreeRecords serialize_tree(const Tree& t);
Tree parse_tree(const TreeRecords& records);

// Plain-text dump, one block per tree:
//   <count> NA NA NA
//   <node> <var> <cut> <leaf>
//   ...
// Blocks are separated by a blank line. Leaf values use 17 significant digits.
void write_tree_text(std::ostream& os, const TreeRecords& records);
void write_trees_text(std::ostream& os, std::span<const Tree> trees);
std::vector<Tree> read_trees_text(std::istream& is);

}  // namespace sbart
