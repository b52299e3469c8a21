#include "sbart/tree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_set>

namespace sbart {

CutpointGrid::CutpointGrid(std::vector<std::vector<double>> cuts, std::vector<bool> splittable)
    : cuts_(std::move(cuts)), splittable_(std::move(splittable)) {
  if (splittable_.size() != cuts_.size())
    throw UsageError("cutpoint grid: splittable flags do not match predictor count");
  for (std::size_t j = 0; j < cuts_.size(); ++j) {
    const auto& c = cuts_[j];
    if (c.empty()) throw DataError("cutpoint grid: predictor " + std::to_string(j) + " has no cuts");
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (!std::isfinite(c[k]))
        throw DataError("cutpoint grid: non-finite cut for predictor " + std::to_string(j));
      if (k > 0 && !(c[k] > c[k - 1]))
        throw DataError("cutpoint grid: cuts not strictly increasing for predictor " +
                        std::to_string(j));
    }
  }
}

CutpointGrid CutpointGrid::build(const Matrix& X, std::size_t grid_size) {
  if (X.rows() < 2) throw DataError("cutpoint grid needs at least 2 rows");
  if (grid_size < 1) throw UsageError("cutpoint grid size must be >= 1");
  std::vector<std::vector<double>> cuts(X.cols());
  std::vector<bool> ok(X.cols(), true);
  for (std::size_t j = 0; j < X.cols(); ++j) {
    double lo = X(0, j), hi = X(0, j);
    for (std::size_t i = 0; i < X.rows(); ++i) {
      const double v = X(i, j);
      if (!std::isfinite(v))
        throw DataError("non-finite value in column " + std::to_string(j) + " (row " +
                        std::to_string(i) + ")");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!(hi > lo)) {
      cuts[j] = {lo};
      ok[j] = false;
      continue;
    }
    auto& c = cuts[j];
    c.reserve(grid_size);
    const double step = (hi - lo) / static_cast<double>(grid_size + 1);
    for (std::size_t k = 0; k < grid_size; ++k) {
      const double v = lo + static_cast<double>(k + 1) * step;
      // Extremely narrow ranges can collapse adjacent points.
      if (c.empty() || v > c.back()) c.push_back(v);
    }
  }
  return CutpointGrid(std::move(cuts), std::move(ok));
}

int depth_of(NodeId id) { return static_cast<int>(std::bit_width(id)) - 1; }

Tree::Tree(double leaf_value) : nodes_{TreeNode{1, kLeaf, kLeaf, leaf_value}} {
  if (!std::isfinite(leaf_value)) throw StructureError(1, "non-finite leaf value");
  index();
}

Tree::Tree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  std::sort(nodes_.begin(), nodes_.end(),
            [](const TreeNode& a, const TreeNode& b) { return a.id < b.id; });
  if (nodes_.empty() || nodes_.front().id != 1) throw StructureError(1, "missing root");
  for (std::size_t k = 1; k < nodes_.size(); ++k)
    if (nodes_[k].id == nodes_[k - 1].id) throw StructureError(nodes_[k].id, "duplicate node id");
  index();
}

int Tree::find(NodeId id) const {
  auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id,
                             [](const TreeNode& n, NodeId v) { return n.id < v; });
  if (it == nodes_.end() || it->id != id) return -1;
  return static_cast<int>(it - nodes_.begin());
}

void Tree::index() {
  const std::size_t n = nodes_.size();
  left_.assign(n, -1);
  right_.assign(n, -1);
  depth_ = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const TreeNode& node = nodes_[k];
    if (node.id == 0) throw StructureError(0, "node ids start at 1");
    if (node.id > (NodeId{1} << 62)) throw StructureError(node.id, "node id too deep");
    depth_ = std::max(depth_, depth_of(node.id));
    if (node.id != 1) {
      const int parent = find(parent_of(node.id));
      if (parent < 0) throw StructureError(node.id, "parent missing");
      if (nodes_[parent].is_leaf()) throw StructureError(node.id, "parent is a leaf");
    }
    if (node.is_leaf()) {
      if (node.cut != kLeaf) throw StructureError(node.id, "leaf with a cut index");
      if (!std::isfinite(node.value)) throw StructureError(node.id, "non-finite leaf value");
      continue;
    }
    if (node.var < 0 || node.cut < 0) throw StructureError(node.id, "negative split index");
    left_[k] = find(left_of(node.id));
    right_[k] = find(right_of(node.id));
    if (left_[k] < 0 || right_[k] < 0) throw StructureError(node.id, "internal node missing a child");
  }
}

std::size_t Tree::route(const CutpointGrid& grid, std::span<const double> x) const {
  std::size_t k = 0;
  while (!nodes_[k].is_leaf()) {
    const TreeNode& node = nodes_[k];
    k = x[node.var] <= grid.cut(node.var, node.cut) ? left_[k] : right_[k];
  }
  return k;
}

void Tree::check_against(const CutpointGrid& grid) const {
  for (const TreeNode& node : nodes_) {
    if (node.is_leaf()) continue;
    if (static_cast<std::size_t>(node.var) >= grid.num_vars())
      throw StructureError(node.id, "split variable " + std::to_string(node.var) +
                                        " out of range");
    if (static_cast<std::size_t>(node.cut) >= grid.num_cuts(node.var))
      throw StructureError(node.id, "cut index " + std::to_string(node.cut) + " out of range");
  }
}

double evaluate_tree(const Tree& t, const CutpointGrid& grid, std::span<const double> x) {
  t.check_against(grid);
  if (x.size() != grid.num_vars()) throw UsageError("input length does not match predictor count");
  return t.nodes()[t.route(grid, x)].value;
}

double evaluate_ensemble(const Ensemble& e, const CutpointGrid& grid, std::span<const double> x) {
  double sum = 0.0;
  for (const Tree& t : e.trees) sum += evaluate_tree(t, grid, x);
  return sum;
}

TreeRecords serialize_tree(const Tree& t) {
  TreeRecords out;
  out.node_count = t.size();
  out.rows.reserve(t.size());
  for (const TreeNode& n : t.nodes()) {
    if (n.is_leaf())
      out.rows.push_back({n.id, 0, 0, n.value});
    else
      out.rows.push_back({n.id, n.var, n.cut, n.value});
  }
  return out;
}

Tree parse_tree(const TreeRecords& records) {
  if (records.node_count != records.rows.size())
    throw DataError("tree header declares " + std::to_string(records.node_count) +
                    " nodes but block has " + std::to_string(records.rows.size()));
  std::unordered_set<NodeId> ids;
  for (const TreeRecord& r : records.rows) {
    if (!ids.insert(r.node).second) throw StructureError(r.node, "duplicate node id");
  }
  std::vector<TreeNode> nodes;
  nodes.reserve(records.rows.size());
  for (const TreeRecord& r : records.rows) {
    if (!std::isfinite(r.leaf)) throw StructureError(r.node, "non-finite leaf value");
    const bool has_left = ids.count(left_of(r.node)) > 0;
    const bool has_right = ids.count(right_of(r.node)) > 0;
    if (has_left != has_right) throw StructureError(r.node, "internal node missing a child");
    if (has_left) {
      nodes.push_back({r.node, r.var, r.cut, r.leaf});
    } else {
      if (r.var != 0 || r.cut != 0) throw StructureError(r.node, "leaf row must carry var = cut = 0");
      nodes.push_back({r.node, kLeaf, kLeaf, r.leaf});
    }
  }
  return Tree(std::move(nodes));
}

void write_tree_text(std::ostream& os, const TreeRecords& records) {
  char buf[64];
  os << records.node_count << " NA NA NA\n";
  for (const TreeRecord& r : records.rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.leaf);
    os << r.node << ' ' << r.var << ' ' << r.cut << ' ' << buf << '\n';
  }
}

void write_trees_text(std::ostream& os, std::span<const Tree> trees) {
  for (std::size_t t = 0; t < trees.size(); ++t) {
    if (t > 0) os << '\n';
    write_tree_text(os, serialize_tree(trees[t]));
  }
}

std::vector<Tree> read_trees_text(std::istream& is) {
  std::vector<Tree> out;
  std::string line;
  std::size_t line_no = 0;
  auto next_nonblank = [&](std::string& l) {
    while (std::getline(is, l)) {
      ++line_no;
      if (l.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  while (next_nonblank(line)) {
    std::istringstream hs(line);
    std::size_t count = 0;
    std::string na1, na2, na3;
    if (!(hs >> count >> na1 >> na2 >> na3) || na1 != "NA" || na2 != "NA" || na3 != "NA")
      throw DataError("tree dump line " + std::to_string(line_no) + ": expected header row");
    TreeRecords rec;
    rec.node_count = count;
    for (std::size_t k = 0; k < count; ++k) {
      if (!std::getline(is, line))
        throw DataError("tree dump: block truncated after line " + std::to_string(line_no));
      ++line_no;
      std::istringstream rs(line);
      TreeRecord r;
      std::string leaf;
      if (!(rs >> r.node >> r.var >> r.cut >> leaf))
        throw DataError("tree dump line " + std::to_string(line_no) + ": malformed row");
      try {
        std::size_t used = 0;
        r.leaf = std::stod(leaf, &used);
        if (used != leaf.size()) throw std::invalid_argument(leaf);
      } catch (const std::exception&) {
        throw DataError("tree dump line " + std::to_string(line_no) + ": bad leaf value");
      }
      rec.rows.push_back(r);
    }
    out.push_back(parse_tree(rec));
  }
  return out;
}

}  // namespace sbart
