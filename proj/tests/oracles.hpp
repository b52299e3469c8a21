#pragma once

// Reference implementations used only by tests. They share no code with the
// library beyond the data types.

#include <cmath>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "sbart/rng.hpp"
#include "sbart/tree.hpp"

namespace oracle {

using sbart::CutpointGrid;
using sbart::NodeId;
using sbart::Tree;
using sbart::TreeNode;

// Random valid tree: each node at depth d splits with probability
// split_prob(d) until max_depth. Values are random normals.
inline Tree random_tree(sbart::Rng& rng, const CutpointGrid& grid, int max_depth, double split_prob = 0.6) {
  std::vector<TreeNode> nodes;
  std::function<void(NodeId, int)> grow = [&](NodeId id, int depth) {
    TreeNode n;
    n.id = id;
    n.value = rng.normal();
    if (depth < max_depth && rng.uniform() < split_prob) {
      n.var = static_cast<int>(rng.below(grid.num_vars()));
      n.cut = static_cast<int>(rng.below(grid.num_cuts(static_cast<std::size_t>(n.var))));
      nodes.push_back(n);
      grow(2 * id, depth + 1);
      grow(2 * id + 1, depth + 1);
    } else {
      nodes.push_back(n);
    }
  };
  grow(1, 0);
  return Tree(nodes);
}

// Axis-aligned leaf regions: for every leaf, the open/closed interval bounds
// implied by its ancestors. x is in the region iff lo < x[j] <= hi for all j.
struct Region {
  std::vector<double> lo, hi;
  double value = 0.0;
};

inline std::vector<Region> leaf_regions(const Tree& t, const CutpointGrid& grid) {
  std::map<NodeId, const TreeNode*> by_id;
  for (const auto& n : t.nodes()) by_id[n.id] = &n;
  const std::size_t p = grid.num_vars();
  std::vector<Region> out;
  std::function<void(NodeId, Region)> walk = [&](NodeId id, Region r) {
    const TreeNode& n = *by_id.at(id);
    if (n.is_leaf()) {
      r.value = n.value;
      out.push_back(r);
      return;
    }
    const double c = grid.cut(static_cast<std::size_t>(n.var), static_cast<std::size_t>(n.cut));
    Region left = r, right = r;
    left.hi[n.var] = std::min(left.hi[n.var], c);
    right.lo[n.var] = std::max(right.lo[n.var], c);
    walk(2 * id, left);
    walk(2 * id + 1, right);
  };
  walk(1, Region{std::vector<double>(p, -INFINITY), std::vector<double>(p, INFINITY), 0.0});
  return out;
}

inline bool in_region(const Region& r, const std::vector<double>& x) {
  for (std::size_t j = 0; j < x.size(); ++j)
    if (!(r.lo[j] < x[j] && x[j] <= r.hi[j])) return false;
  return true;
}

// Unordered parent-child split-variable pairs, found by walking every
// root-to-leaf path and looking at consecutive internal nodes.
inline std::map<std::pair<int, int>, std::uint64_t> path_pairs(const Tree& t) {
  std::map<NodeId, const TreeNode*> by_id;
  for (const auto& n : t.nodes()) by_id[n.id] = &n;
  std::map<std::pair<int, int>, std::uint64_t> pairs;
  std::function<void(NodeId, int)> walk = [&](NodeId id, int parent_var) {
    const TreeNode& n = *by_id.at(id);
    if (n.is_leaf()) return;
    if (parent_var >= 0) ++pairs[{std::min(parent_var, n.var), std::max(parent_var, n.var)}];
    walk(2 * id, n.var);
    walk(2 * id + 1, n.var);
  };
  walk(1, -1);
  return pairs;
}

}  // namespace oracle
