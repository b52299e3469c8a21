#include "sbart/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sbart/varselect.hpp"

namespace sbart {

namespace {

// Leaves deeper than this cannot grow; heap ids stay below 2^62.
constexpr int kMaxDepth = 60;

struct Touch {
  int var;
  int lo;
  int hi;
};

}  // namespace

MoveProbs move_probs(bool has_growable_leaf, bool has_internal) {
  if (has_internal && has_growable_leaf) return {0.5, 0.25, 0.25};
  if (has_internal) return {0.0, 0.5, 0.5};
  if (has_growable_leaf) return {1.0, 0.0, 0.0};
  return {};
}

double split_prior(double base, double power, int depth) {
  return base * std::pow(1.0 + depth, -power);
}

double leaf_log_marginal(std::size_t count, double sum, double tau2, double sigma2) {
  const double n = static_cast<double>(count);
  const double denom = sigma2 + n * tau2;
  return 0.5 * std::log(sigma2 / denom) + tau2 * sum * sum / (2.0 * sigma2 * denom);
}

int Chain::WorkTree::alloc(const Node& n) {
  if (!free.empty()) {
    const int k = free.back();
    free.pop_back();
    nodes[k] = n;
    return k;
  }
  nodes.push_back(n);
  return static_cast<int>(nodes.size() - 1);
}

Chain::Chain(const Matrix& X, std::span<const double> target, const CutpointGrid& grid,
             const ChainSettings& settings, std::uint64_t seed)
    : s_(settings), grid_(grid), n_(X.rows()), p_(X.cols()), rng_(seed) {
  if (grid_.num_vars() != p_) throw UsageError("grid predictor count does not match X");
  if (target.size() != n_) throw UsageError("target length does not match X rows");
  if (s_.num_trees == 0) throw UsageError("num_trees must be >= 1");
  if (!(s_.leaf_sd > 0.0)) throw UsageError("leaf prior sd must be positive");

  rank_.resize(n_ * p_);
  splittable_.resize(p_);
  for (std::size_t v = 0; v < p_; ++v) {
    const auto cuts = grid_.cuts(v);
    if (cuts.size() > std::numeric_limits<std::uint16_t>::max() - 1)
      throw UsageError("cutpoint grid too large");
    splittable_[v] = grid_.splittable(v);
    if (splittable_[v]) ++num_splittable_;
    for (std::size_t i = 0; i < n_; ++i) {
      const double x = X(i, v);
      rank_[v * n_ + i] =
          static_cast<std::uint16_t>(std::lower_bound(cuts.begin(), cuts.end(), x) - cuts.begin());
    }
  }

  target_.assign(target.begin(), target.end());
  response_.assign(n_, 0.0);
  double init_mu = 0.0;
  if (s_.response == Response::continuous) {
    response_ = target_;
    double mean = 0.0;
    for (double y : target_) mean += y;
    mean /= static_cast<double>(n_);
    init_mu = mean / static_cast<double>(s_.num_trees);
    sigma_ = s_.sigma_init;
  } else {
    sigma_ = 1.0;
  }

  trees_.resize(s_.num_trees);
  for (auto& t : trees_) t.nodes.push_back(Node{1, kLeaf, kLeaf, init_mu, -1, -1, -1});
  assign_.assign(s_.num_trees * n_, 0);
  allfit_.assign(n_, init_mu * static_cast<double>(s_.num_trees));
  resid_.assign(n_, 0.0);
  varcount_.assign(p_, 0);
  varprob_.assign(p_, 1.0 / static_cast<double>(p_));
  log_varprob_.assign(p_, -std::log(static_cast<double>(p_)));
  theta_ = s_.sparse_rho > 0.0 ? s_.sparse_rho : static_cast<double>(p_);
}

std::pair<int, int> Chain::cut_range(const WorkTree& t, int k, int var) const {
  int lo = 0;
  int hi = static_cast<int>(grid_.num_cuts(var)) - 1;
  int child = k;
  int parent = t.nodes[k].parent;
  while (parent >= 0) {
    const Node& a = t.nodes[parent];
    if (a.var == var) {
      if (a.left == child)
        hi = std::min(hi, a.cut - 1);
      else
        lo = std::max(lo, a.cut + 1);
    }
    child = parent;
    parent = a.parent;
  }
  return {lo, hi};
}

bool Chain::has_available_split(const WorkTree& t, int k) const {
  if (depth_of(t.nodes[k].id) >= kMaxDepth) return false;
  if (num_splittable_ == 0) return false;
  // Predictors not used by any ancestor keep their full (non-empty) range.
  Touch touched[kMaxDepth];
  int ntouched = 0;
  int child = k;
  int parent = t.nodes[k].parent;
  while (parent >= 0) {
    const Node& a = t.nodes[parent];
    int slot = -1;
    for (int q = 0; q < ntouched; ++q)
      if (touched[q].var == a.var) slot = q;
    if (slot < 0) {
      slot = ntouched++;
      touched[slot] = {a.var, 0, static_cast<int>(grid_.num_cuts(a.var)) - 1};
    }
    if (a.left == child)
      touched[slot].hi = std::min(touched[slot].hi, a.cut - 1);
    else
      touched[slot].lo = std::max(touched[slot].lo, a.cut + 1);
    child = parent;
    parent = a.parent;
  }
  if (num_splittable_ > static_cast<std::size_t>(ntouched)) return true;
  for (int q = 0; q < ntouched; ++q)
    if (touched[q].lo <= touched[q].hi) return true;
  return false;
}

void Chain::available_vars(const WorkTree& t, int k, std::vector<int>& vars,
                           std::vector<double>& weights) const {
  vars.clear();
  weights.clear();
  if (depth_of(t.nodes[k].id) >= kMaxDepth) return;
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v < p_; ++v) {
    if (!splittable_[v]) continue;
    const auto [lo, hi] = cut_range(t, k, static_cast<int>(v));
    if (lo > hi) continue;
    vars.push_back(static_cast<int>(v));
    if (sparse_on_) max_log = std::max(max_log, log_varprob_[v]);
  }
  for (int v : vars) weights.push_back(sparse_on_ ? std::exp(log_varprob_[v] - max_log) : 1.0);
}

double Chain::node_split_prob(const WorkTree& t, int k) const {
  if (!has_available_split(t, k)) return 0.0;
  return split_prior(s_.base, s_.power, depth_of(t.nodes[k].id));
}

void Chain::sweep() {
  if (s_.response == Response::probit) draw_latent();
  for (std::size_t j = 0; j < trees_.size(); ++j) update_tree(j);
  if (s_.response == Response::continuous) draw_sigma();
  if (sparse_on_) draw_sparse();
}

void Chain::update_tree(std::size_t j) {
  WorkTree& t = trees_[j];
  const std::int32_t* a = assign_.data() + j * n_;
  for (std::size_t i = 0; i < n_; ++i) {
    allfit_[i] -= t.nodes[a[i]].mu;
    resid_[i] = response_[i] - allfit_[i];
  }

  std::vector<int> leaves, nogs;
  std::size_t n_growable = 0;
  for (int k = 0; k < static_cast<int>(t.nodes.size()); ++k) {
    const Node& node = t.nodes[k];
    if (node.id == 0) continue;  // released slot
    if (node.is_leaf()) {
      leaves.push_back(k);
      if (has_available_split(t, k)) ++n_growable;
    } else if (t.nodes[node.left].is_leaf() && t.nodes[node.right].is_leaf()) {
      nogs.push_back(k);
    }
  }
  const MoveProbs mp = move_probs(n_growable > 0, !nogs.empty());
  const double u = rng_.uniform();
  if (u < mp.grow)
    grow(j, leaves, nogs, n_growable);
  else if (u < mp.grow + mp.prune)
    prune(j, leaves, nogs, n_growable);
  else if (mp.change > 0.0)
    change(j, leaves, nogs, n_growable);

  draw_leaves(j);
}

void Chain::grow(std::size_t j, std::vector<int>& leaves, std::vector<int>& nogs,
                 std::size_t n_growable) {
  WorkTree& t = trees_[j];
  std::int32_t* a = assign_.data() + j * n_;

  std::vector<int> growable;
  growable.reserve(n_growable);
  for (int k : leaves)
    if (has_available_split(t, k)) growable.push_back(k);
  const int leaf = growable[rng_.below(growable.size())];

  available_vars(t, leaf, vars_scratch_, weights_scratch_);
  const int var = vars_scratch_[rng_.discrete(weights_scratch_)];
  const auto [lo, hi] = cut_range(t, leaf, var);
  const int cut = lo + static_cast<int>(rng_.below(static_cast<std::size_t>(hi - lo + 1)));

  Stats left, right;
  for (std::size_t i = 0; i < n_; ++i) {
    if (a[i] != leaf) continue;
    Stats& s = goes_left(i, var, cut) ? left : right;
    ++s.n;
    s.sum += resid_[i];
  }
  if (left.n < s_.min_leaf || right.n < s_.min_leaf) return;

  const double pg_node = node_split_prob(t, leaf);
  const NodeId id = t.nodes[leaf].id;
  const double mu = t.nodes[leaf].mu;
  const int lk = t.alloc(Node{left_of(id), kLeaf, kLeaf, mu, leaf, -1, -1});
  const int rk = t.alloc(Node{right_of(id), kLeaf, kLeaf, mu, leaf, -1, -1});
  t.nodes[leaf].var = var;
  t.nodes[leaf].cut = cut;
  t.nodes[leaf].left = lk;
  t.nodes[leaf].right = rk;

  const bool left_growable = has_available_split(t, lk);
  const bool right_growable = has_available_split(t, rk);
  const double pg_left = left_growable ? split_prior(s_.base, s_.power, depth_of(left_of(id))) : 0.0;
  const double pg_right = right_growable ? split_prior(s_.base, s_.power, depth_of(right_of(id))) : 0.0;

  std::size_t nog_after = nogs.size() + 1;
  const int parent = t.nodes[leaf].parent;
  if (parent >= 0) {
    const Node& pn = t.nodes[parent];
    const int sibling = pn.left == leaf ? pn.right : pn.left;
    if (t.nodes[sibling].is_leaf()) --nog_after;
  }
  const std::size_t growable_after =
      n_growable - 1 + (left_growable ? 1 : 0) + (right_growable ? 1 : 0);
  const MoveProbs before = move_probs(true, !nogs.empty());
  const MoveProbs after = move_probs(growable_after > 0, true);

  const double tau2 = s_.leaf_sd * s_.leaf_sd;
  const double sigma2 = sigma_ * sigma_;
  const double log_lik = leaf_log_marginal(left.n, left.sum, tau2, sigma2) +
                         leaf_log_marginal(right.n, right.sum, tau2, sigma2) -
                         leaf_log_marginal(left.n + right.n, left.sum + right.sum, tau2, sigma2);
  const double log_alpha = std::log(pg_node) + std::log1p(-pg_left) + std::log1p(-pg_right) -
                           std::log1p(-pg_node) +
                           std::log(after.prune / static_cast<double>(nog_after)) -
                           std::log(before.grow / static_cast<double>(n_growable)) + log_lik;

  if (log_alpha >= 0.0 || std::log(rng_.uniform()) < log_alpha) {
    for (std::size_t i = 0; i < n_; ++i)
      if (a[i] == leaf) a[i] = goes_left(i, var, cut) ? lk : rk;
    ++varcount_[var];
    ++accepted_[0];
  } else {
    t.nodes[leaf].var = kLeaf;
    t.nodes[leaf].cut = kLeaf;
    t.nodes[leaf].left = -1;
    t.nodes[leaf].right = -1;
    t.nodes[rk].id = 0;
    t.nodes[lk].id = 0;
    t.release(rk);
    t.release(lk);
  }
}

void Chain::prune(std::size_t j, std::vector<int>& /*leaves*/, std::vector<int>& nogs,
                  std::size_t n_growable) {
  WorkTree& t = trees_[j];
  std::int32_t* a = assign_.data() + j * n_;

  const int node = nogs[rng_.below(nogs.size())];
  const int lk = t.nodes[node].left;
  const int rk = t.nodes[node].right;

  Stats left, right;
  for (std::size_t i = 0; i < n_; ++i) {
    if (a[i] == lk) {
      ++left.n;
      left.sum += resid_[i];
    } else if (a[i] == rk) {
      ++right.n;
      right.sum += resid_[i];
    }
  }

  const bool left_growable = has_available_split(t, lk);
  const bool right_growable = has_available_split(t, rk);
  const double pg_node = node_split_prob(t, node);
  const double pg_left = left_growable ? split_prior(s_.base, s_.power, depth_of(t.nodes[lk].id)) : 0.0;
  const double pg_right = right_growable ? split_prior(s_.base, s_.power, depth_of(t.nodes[rk].id)) : 0.0;

  const std::size_t growable_after =
      n_growable - (left_growable ? 1 : 0) - (right_growable ? 1 : 0) + 1;
  const MoveProbs before = move_probs(n_growable > 0, true);
  const MoveProbs after = move_probs(true, t.nodes[node].parent >= 0);

  const double tau2 = s_.leaf_sd * s_.leaf_sd;
  const double sigma2 = sigma_ * sigma_;
  const double log_lik = leaf_log_marginal(left.n + right.n, left.sum + right.sum, tau2, sigma2) -
                         leaf_log_marginal(left.n, left.sum, tau2, sigma2) -
                         leaf_log_marginal(right.n, right.sum, tau2, sigma2);
  const double log_alpha = std::log1p(-pg_node) +
                           std::log(after.grow / static_cast<double>(growable_after)) -
                           std::log(pg_node) - std::log1p(-pg_left) - std::log1p(-pg_right) -
                           std::log(before.prune / static_cast<double>(nogs.size())) + log_lik;

  if (log_alpha >= 0.0 || std::log(rng_.uniform()) < log_alpha) {
    for (std::size_t i = 0; i < n_; ++i)
      if (a[i] == lk || a[i] == rk) a[i] = node;
    --varcount_[t.nodes[node].var];
    t.nodes[node].var = kLeaf;
    t.nodes[node].cut = kLeaf;
    t.nodes[node].left = -1;
    t.nodes[node].right = -1;
    t.nodes[lk].id = 0;
    t.nodes[rk].id = 0;
    t.release(rk);
    t.release(lk);
    ++accepted_[1];
  }
}

void Chain::change(std::size_t j, std::vector<int>& /*leaves*/, std::vector<int>& nogs,
                   std::size_t n_growable) {
  WorkTree& t = trees_[j];
  std::int32_t* a = assign_.data() + j * n_;

  const int node = nogs[rng_.below(nogs.size())];
  const int lk = t.nodes[node].left;
  const int rk = t.nodes[node].right;
  const int old_var = t.nodes[node].var;
  const int old_cut = t.nodes[node].cut;

  available_vars(t, node, vars_scratch_, weights_scratch_);
  const int var = vars_scratch_[rng_.discrete(weights_scratch_)];
  const auto [lo, hi] = cut_range(t, node, var);
  const int cut = lo + static_cast<int>(rng_.below(static_cast<std::size_t>(hi - lo + 1)));

  Stats left, right, new_left, new_right;
  for (std::size_t i = 0; i < n_; ++i) {
    if (a[i] != lk && a[i] != rk) continue;
    Stats& old_side = a[i] == lk ? left : right;
    ++old_side.n;
    old_side.sum += resid_[i];
    Stats& new_side = goes_left(i, var, cut) ? new_left : new_right;
    ++new_side.n;
    new_side.sum += resid_[i];
  }
  if (new_left.n < s_.min_leaf || new_right.n < s_.min_leaf) return;

  const int child_depth = depth_of(t.nodes[lk].id);
  const double pg_child = split_prior(s_.base, s_.power, child_depth);
  const bool lg = has_available_split(t, lk);
  const bool rg = has_available_split(t, rk);
  t.nodes[node].var = var;
  t.nodes[node].cut = cut;
  const bool lg_new = has_available_split(t, lk);
  const bool rg_new = has_available_split(t, rk);

  const std::size_t growable_after = n_growable - (lg ? 1 : 0) - (rg ? 1 : 0) +
                                     (lg_new ? 1 : 0) + (rg_new ? 1 : 0);
  const MoveProbs before = move_probs(n_growable > 0, true);
  const MoveProbs after = move_probs(growable_after > 0, true);

  const double tau2 = s_.leaf_sd * s_.leaf_sd;
  const double sigma2 = sigma_ * sigma_;
  const double log_lik = leaf_log_marginal(new_left.n, new_left.sum, tau2, sigma2) +
                         leaf_log_marginal(new_right.n, new_right.sum, tau2, sigma2) -
                         leaf_log_marginal(left.n, left.sum, tau2, sigma2) -
                         leaf_log_marginal(right.n, right.sum, tau2, sigma2);
  const double log_prior = (lg_new ? std::log1p(-pg_child) : 0.0) +
                           (rg_new ? std::log1p(-pg_child) : 0.0) -
                           (lg ? std::log1p(-pg_child) : 0.0) - (rg ? std::log1p(-pg_child) : 0.0);
  const double log_alpha = log_prior + std::log(after.change) - std::log(before.change) + log_lik;

  if (log_alpha >= 0.0 || std::log(rng_.uniform()) < log_alpha) {
    for (std::size_t i = 0; i < n_; ++i)
      if (a[i] == lk || a[i] == rk) a[i] = goes_left(i, var, cut) ? lk : rk;
    --varcount_[old_var];
    ++varcount_[var];
    ++accepted_[2];
  } else {
    t.nodes[node].var = old_var;
    t.nodes[node].cut = old_cut;
  }
}

void Chain::draw_leaves(std::size_t j) {
  WorkTree& t = trees_[j];
  const std::int32_t* a = assign_.data() + j * n_;
  std::vector<Stats> stats(t.nodes.size());
  for (std::size_t i = 0; i < n_; ++i) {
    Stats& s = stats[a[i]];
    ++s.n;
    s.sum += resid_[i];
  }
  const double tau2 = s_.leaf_sd * s_.leaf_sd;
  const double sigma2 = sigma_ * sigma_;
  for (std::size_t k = 0; k < t.nodes.size(); ++k) {
    Node& node = t.nodes[k];
    if (node.id == 0 || !node.is_leaf()) continue;
    const double denom = sigma2 + static_cast<double>(stats[k].n) * tau2;
    const double mean = tau2 * stats[k].sum / denom;
    const double sd = std::sqrt(sigma2 * tau2 / denom);
    node.mu = rng_.normal(mean, sd);
  }
  for (std::size_t i = 0; i < n_; ++i) allfit_[i] += t.nodes[a[i]].mu;
}

void Chain::draw_latent() {
  for (std::size_t i = 0; i < n_; ++i) {
    const double mean = s_.offset + allfit_[i];
    const double z = truncated_normal(rng_, mean, target_[i] > 0.5);
    response_[i] = z - s_.offset;
  }
}

void Chain::draw_sigma() {
  double ssr = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    const double e = response_[i] - allfit_[i];
    ssr += e * e;
  }
  const double chi = rng_.chi_square(s_.nu + static_cast<double>(n_));
  sigma_ = std::sqrt((s_.nu * s_.lambda + ssr) / chi);
}

void Chain::draw_sparse() {
  std::vector<double> counts(varcount_.begin(), varcount_.end());
  log_varprob_ = dirichlet_update_log(counts, theta_, rng_);
  for (std::size_t v = 0; v < p_; ++v) varprob_[v] = std::exp(log_varprob_[v]);
  const double rho = s_.sparse_rho > 0.0 ? s_.sparse_rho : static_cast<double>(p_);
  theta_ = theta_update_log(log_varprob_, rng_, s_.sparse_a, s_.sparse_b, rho);
}

Ensemble Chain::snapshot() const {
  Ensemble e;
  e.trees.reserve(trees_.size());
  std::vector<TreeNode> nodes;
  for (const WorkTree& t : trees_) {
    nodes.clear();
    for (const Node& n : t.nodes) {
      if (n.id == 0) continue;
      nodes.push_back(TreeNode{n.id, n.var, n.cut, n.mu});
    }
    e.trees.emplace_back(nodes);
  }
  return e;
}

double Chain::max_fit_drift() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < trees_.size(); ++j) sum += trees_[j].nodes[assign_[j * n_ + i]].mu;
    worst = std::max(worst, std::abs(sum - allfit_[i]));
  }
  return worst;
}

}  // namespace sbart
