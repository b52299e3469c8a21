#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sbart/matrix.hpp"
#include "sbart/tree.hpp"

namespace sbart {

// All trees of all draws packed into one node array with resolved split
// thresholds. Children of an internal node are adjacent (right = left + 1).
class FlatForest {
 public:
  struct Node {
    std::int32_t var;    // -1 for leaves
    std::int32_t left;   // absolute index of the left child
    double value;        // threshold (internal) or leaf output
  };

  FlatForest(std::span<const Ensemble> draws, const CutpointGrid& grid);

  std::size_t num_draws() const noexcept { return draw_begin_.size() - 1; }
  std::size_t num_vars() const noexcept { return num_vars_; }

  // Sum of tree outputs of draw d at x.
  double eval(std::size_t d, std::span<const double> x) const {
    double sum = 0.0;
    for (std::uint32_t t = draw_begin_[d]; t < draw_begin_[d + 1]; ++t) {
      std::int64_t k = tree_root_[t];
      while (nodes_[k].var >= 0) {
        const Node& n = nodes_[k];
        k = x[n.var] <= n.value ? n.left : n.left + 1;
      }
      sum += nodes_[k].value;
    }
    return sum;
  }

 private:
  std::vector<Node> nodes_;
  std::vector<std::int64_t> tree_root_;
  std::vector<std::uint32_t> draw_begin_;
  std::size_t num_vars_ = 0;
};

namespace kernels {

// Latent sums for every (draw, row): result is draws x rows.
Matrix latent_serial(const FlatForest& forest, const Matrix& X);
Matrix latent_omp(const FlatForest& forest, const Matrix& X);

// Column means of a draws x rows matrix, accumulated in draw order.
std::vector<double> draw_mean_serial(const Matrix& per_draw);
std::vector<double> draw_mean_omp(const Matrix& per_draw);

// Number of OpenMP threads in use, 1 when built without OpenMP.
int max_threads();

}  // namespace kernels

// Dispatches to the OpenMP kernel when available.
Matrix latent_predictions(std::span<const Ensemble> draws, const CutpointGrid& grid, const Matrix& X);

}  // namespace sbart
