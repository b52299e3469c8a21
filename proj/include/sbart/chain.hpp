#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "sbart/matrix.hpp"
#include "sbart/rng.hpp"
#include "sbart/tree.hpp"

namespace sbart {

enum class Response { continuous, probit };

struct ChainSettings {
  Response response = Response::continuous;
  std::size_t num_trees = 200;
  double leaf_sd = 0.0;     // tau: prior sd of each leaf value
  double power = 2.0;
  double base = 0.95;
  std::size_t min_leaf = 5;
  // continuous only: sigma^2 ~ nu * lambda / chi^2_nu, started at sigma_init
  double nu = 3.0;
  double lambda = 1.0;
  double sigma_init = 1.0;
  // probit only: latent z ~ N(offset + fit, 1), truncated by the label
  double offset = 0.0;
  // sparse Dirichlet prior on split-variable probabilities
  double sparse_a = 0.5;
  double sparse_b = 1.0;
  double sparse_rho = 0.0;  // 0 means p
};

// Move probabilities, renormalised over the moves available in a tree.
struct MoveProbs {
  double grow = 0.0;
  double prune = 0.0;
  double change = 0.0;
};
MoveProbs move_probs(bool has_growable_leaf, bool has_internal);

// P(node at `depth` splits) = base * (1 + depth)^(-power).
double split_prior(double base, double power, int depth);

// Log marginal likelihood (up to terms that cancel in MH ratios) of a leaf
// holding `count` residuals with sum `sum`, leaf prior N(0, tau^2), noise sigma^2.
double leaf_log_marginal(std::size_t count, double sum, double tau2, double sigma2);

// One Markov chain of the backfitting sampler. Owns its working trees and
// the per-observation leaf assignments; strictly sequential.
class Chain {
 public:
  // `target` is the rescaled response (continuous) or 0/1 labels (probit).
  Chain(const Matrix& X, std::span<const double> target, const CutpointGrid& grid,
        const ChainSettings& settings, std::uint64_t seed);

  // One full pass: latent update (probit), every tree in turn, then sigma
  // (continuous) and the sparse prior (when enabled).
  void sweep();
  void enable_sparse() { sparse_on_ = true; }
  bool sparse_enabled() const { return sparse_on_; }

  std::size_t num_trees() const { return trees_.size(); }
  std::size_t num_vars() const { return p_; }
  Ensemble snapshot() const;
  std::span<const double> fit() const { return allfit_; }
  double sigma() const { return sigma_; }
  const std::vector<std::uint32_t>& varcount() const { return varcount_; }
  std::span<const double> varprob() const { return varprob_; }
  double theta() const { return theta_; }
  // Largest |stored total fit - sum of per-tree fits| over observations.
  double max_fit_drift() const;
  // Counts of accepted moves, for diagnostics.
  const std::array<std::size_t, 3>& accepted() const { return accepted_; }

 private:
  struct Node {
    NodeId id = 1;
    int var = kLeaf;
    int cut = kLeaf;
    double mu = 0.0;
    int parent = -1;
    int left = -1;
    int right = -1;
    bool is_leaf() const { return var == kLeaf; }
  };
  struct WorkTree {
    std::vector<Node> nodes;
    std::vector<int> free;
    int alloc(const Node& n);
    void release(int k) { free.push_back(k); }
  };
  struct Stats {
    std::size_t n = 0;
    double sum = 0.0;
  };

  // Available cut-index range for `var` at node k; empty when lo > hi.
  std::pair<int, int> cut_range(const WorkTree& t, int k, int var) const;
  bool has_available_split(const WorkTree& t, int k) const;
  // Predictors with at least one available cut at node k, and their weights.
  void available_vars(const WorkTree& t, int k, std::vector<int>& vars, std::vector<double>& weights) const;
  double node_split_prob(const WorkTree& t, int k) const;

  void update_tree(std::size_t j);
  void grow(std::size_t j, std::vector<int>& leaves, std::vector<int>& nogs, std::size_t n_growable);
  void prune(std::size_t j, std::vector<int>& leaves, std::vector<int>& nogs, std::size_t n_growable);
  void change(std::size_t j, std::vector<int>& leaves, std::vector<int>& nogs, std::size_t n_growable);
  void draw_leaves(std::size_t j);
  void draw_latent();
  void draw_sigma();
  void draw_sparse();

  bool goes_left(std::size_t i, int var, int cut) const {
    return cut >= static_cast<int>(rank_[static_cast<std::size_t>(var) * n_ + i]);
  }

  ChainSettings s_;
  CutpointGrid grid_;
  std::size_t n_ = 0, p_ = 0;
  std::vector<std::uint16_t> rank_;  // column-major: first cut index with cut >= x
  std::vector<double> target_;       // y (continuous) or labels (probit)
  std::vector<double> response_;     // what the trees fit: y or latent z - offset
  std::vector<double> allfit_;
  std::vector<double> resid_;
  std::vector<WorkTree> trees_;
  std::vector<std::int32_t> assign_;  // tree-major: leaf node index per observation
  std::vector<std::uint32_t> varcount_;
  std::vector<double> varprob_;
  std::vector<double> log_varprob_;
  std::vector<bool> splittable_;
  std::size_t num_splittable_ = 0;
  double theta_ = 1.0;
  double sigma_ = 1.0;
  bool sparse_on_ = false;
  Rng rng_;
  std::array<std::size_t, 3> accepted_{};
  // scratch
  std::vector<int> vars_scratch_;
  std::vector<double> weights_scratch_;
};

}  // namespace sbart
