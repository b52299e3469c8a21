#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "sbart/config.hpp"
#include "sbart/matrix.hpp"
#include "sbart/preprocess.hpp"

namespace sbart {

// Candidate values for the four tuned hyperparameters. Every other field of
// `base_config` is shared by all cells.
struct Grid {
  std::vector<std::size_t> num_trees{50, 100, 200};
  std::vector<double> k{1.0, 2.0, 3.0};
  std::vector<double> power{1.5, 2.0};
  std::vector<double> base{0.75, 0.95};
  int folds = 5;
  std::uint64_t seed = 1;
  BartConfig base_config;

  std::size_t num_cells() const;
  // Cells in list order: num_trees slowest, base fastest.
  std::vector<BartConfig> cells() const;
  void validate() const;
};

// Held-out log-loss of each fold of `plan`. Fold f is fitted on
// plan.fold_train(f) with seed derived from (cfg.seed, f).
std::vector<double> cross_validate(const Matrix& X, std::span<const int> y, const BartConfig& cfg,
                                   const SplitPlan& plan);

struct CellResult {
  BartConfig config;
  std::vector<double> fold_loss;
  double mean_loss = 0.0;
  double seconds = 0.0;
};

struct TuneResult {
  std::vector<CellResult> cells;  // in Grid::cells() order
  std::size_t winner = 0;
  const CellResult& best() const { return cells.at(winner); }
};

// Seed of a grid cell. It depends on the cell's hyperparameters rather than
// its position so that reordering candidate lists leaves every loss unchanged.
std::uint64_t cell_seed(std::uint64_t seed, const BartConfig& cell);

// Folds come from stratified_split(y, 0, grid.folds, grid.seed), shared by
// all cells. Winner: lowest mean loss, then smaller m, larger k, list order.
TuneResult grid_search(const Matrix& X, std::span<const int> y, const Grid& grid);
std::size_t pick_winner(std::span<const CellResult> cells);

void write_tune_csv(std::ostream& os, const TuneResult& r);
void write_tune_json(std::ostream& os, const TuneResult& r);

}  // namespace sbart
