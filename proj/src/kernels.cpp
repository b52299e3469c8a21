#include "sbart/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <deque>

namespace sbart {

FlatForest::FlatForest(std::span<const Ensemble> draws, const CutpointGrid& grid)
    : num_vars_(grid.num_vars()) {
  draw_begin_.reserve(draws.size() + 1);
  draw_begin_.push_back(0);
  std::deque<std::pair<std::size_t, std::int64_t>> queue;  // (tree position, flat slot)
  for (const Ensemble& e : draws) {
    for (const Tree& t : e.trees) {
      t.check_against(grid);
      const auto base = static_cast<std::int64_t>(nodes_.size());
      tree_root_.push_back(base);
      nodes_.push_back({});
      queue.emplace_back(0, base);
      while (!queue.empty()) {
        auto [k, slot] = queue.front();
        queue.pop_front();
        const TreeNode& src = t.nodes()[k];
        if (src.is_leaf()) {
          nodes_[slot] = {-1, -1, src.value};
          continue;
        }
        const auto child = static_cast<std::int64_t>(nodes_.size());
        nodes_.push_back({});
        nodes_.push_back({});
        nodes_[slot] = {src.var, static_cast<std::int32_t>(child), grid.cut(src.var, src.cut)};
        queue.emplace_back(t.left(k), child);
        queue.emplace_back(t.right(k), child + 1);
      }
    }
    draw_begin_.push_back(static_cast<std::uint32_t>(tree_root_.size()));
  }
  if (nodes_.size() > static_cast<std::size_t>(INT32_MAX))
    throw UsageError("forest too large for flat packing");
}

namespace kernels {

Matrix latent_serial(const FlatForest& forest, const Matrix& X) {
  if (X.cols() != forest.num_vars()) throw UsageError("column count does not match model predictors");
  const std::size_t nd = forest.num_draws();
  Matrix out(nd, X.rows());
  for (std::size_t d = 0; d < nd; ++d)
    for (std::size_t i = 0; i < X.rows(); ++i) out(d, i) = forest.eval(d, X.row(i));
  return out;
}

Matrix latent_omp(const FlatForest& forest, const Matrix& X) {
  if (X.cols() != forest.num_vars()) throw UsageError("column count does not match model predictors");
  const auto nd = static_cast<std::int64_t>(forest.num_draws());
  const auto n = static_cast<std::int64_t>(X.rows());
  Matrix out(forest.num_draws(), X.rows());
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t d = 0; d < nd; ++d)
    for (std::int64_t i = 0; i < n; ++i) out(d, i) = forest.eval(d, X.row(i));
  return out;
}

std::vector<double> draw_mean_serial(const Matrix& per_draw) {
  std::vector<double> mean(per_draw.cols(), 0.0);
  for (std::size_t d = 0; d < per_draw.rows(); ++d)
    for (std::size_t i = 0; i < per_draw.cols(); ++i) mean[i] += per_draw(d, i);
  for (double& m : mean) m /= static_cast<double>(per_draw.rows());
  return mean;
}

std::vector<double> draw_mean_omp(const Matrix& per_draw) {
  const auto n = static_cast<std::int64_t>(per_draw.cols());
  std::vector<double> mean(per_draw.cols(), 0.0);
  // Each column is summed by one thread in draw order, so results match the serial kernel.
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t d = 0; d < per_draw.rows(); ++d) s += per_draw(d, i);
    mean[i] = s / static_cast<double>(per_draw.rows());
  }
  return mean;
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace kernels

Matrix latent_predictions(std::span<const Ensemble> draws, const CutpointGrid& grid, const Matrix& X) {
  FlatForest forest(draws, grid);
#ifdef _OPENMP
  return kernels::latent_omp(forest, X);
#else
  return kernels::latent_serial(forest, X);
#endif
}

}  // namespace sbart
