#include "sbart/cvtune.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <ostream>

#include <json.hpp>

#include "sbart/error.hpp"
#include "sbart/metrics.hpp"
#include "sbart/rng.hpp"
#include "sbart/sampler.hpp"

namespace sbart {

std::size_t Grid::num_cells() const { return num_trees.size() * k.size() * power.size() * base.size(); }

std::vector<BartConfig> Grid::cells() const {
  std::vector<BartConfig> out;
  out.reserve(num_cells());
  for (std::size_t m : num_trees)
    for (double kk : k)
      for (double pw : power)
        for (double b : base) {
          BartConfig c = base_config;
          c.num_trees = m;
          c.k = kk;
          c.power = pw;
          c.base = b;
          out.push_back(c);
        }
  return out;
}

void Grid::validate() const {
  if (num_trees.empty()) throw UsageError("grid.num_trees: candidate list is empty");
  if (k.empty()) throw UsageError("grid.k: candidate list is empty");
  if (power.empty()) throw UsageError("grid.power: candidate list is empty");
  if (base.empty()) throw UsageError("grid.base: candidate list is empty");
  if (folds < 2) throw UsageError("grid.folds: need at least 2 folds");
  for (const BartConfig& c : cells()) c.validate();
}

std::vector<double> cross_validate(const Matrix& X, std::span<const int> y, const BartConfig& cfg,
                                   const SplitPlan& plan) {
  if (y.size() != X.rows()) throw UsageError("cross_validate: label count does not match rows");
  int K = 0;
  for (int v : y) K = std::max(K, v);
  std::vector<double> losses(static_cast<std::size_t>(plan.k_folds));
  for (int f = 0; f < plan.k_folds; ++f) {
    const auto train = plan.fold_train(f);
    const auto test = plan.fold_test(f);
    if (test.empty()) throw DataError("fold " + std::to_string(f) + " has no held-out rows");
    BartConfig c = cfg;
    c.seed = Rng::derive(cfg.seed, "cv-fold", static_cast<std::uint64_t>(f));
    const TrainingFold tr = training_fold(X, y, train);
    const ClassifierDraws model = fit_multinomial(tr.X, tr.y, c, K);
    std::vector<int> y_test;
    for (std::size_t r : test) y_test.push_back(y[r]);
    losses[static_cast<std::size_t>(f)] = log_loss(predict_class_probs(model, X.select_rows(test)), y_test);
  }
  return losses;
}

std::uint64_t cell_seed(std::uint64_t seed, const BartConfig& cell) {
  std::uint64_t h = Rng::derive(seed, "grid-cell", cell.num_trees);
  for (double v : {cell.k, cell.power, cell.base}) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    h = Rng::derive(h, "grid-cell", bits);
  }
  return h;
}

std::size_t pick_winner(std::span<const CellResult> cells) {
  if (cells.empty()) throw UsageError("no grid cells to choose from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < cells.size(); ++i) {
    const CellResult& a = cells[i];
    const CellResult& b = cells[best];
    bool better = a.mean_loss < b.mean_loss;
    if (a.mean_loss == b.mean_loss) {
      if (a.config.num_trees != b.config.num_trees)
        better = a.config.num_trees < b.config.num_trees;
      else if (a.config.k != b.config.k)
        better = a.config.k > b.config.k;
    }
    if (better) best = i;
  }
  return best;
}

TuneResult grid_search(const Matrix& X, std::span<const int> y, const Grid& grid) {
  grid.validate();
  const SplitPlan plan = stratified_split(y, 0.0, grid.folds, grid.seed);
  TuneResult result;
  for (const BartConfig& c : grid.cells()) {
    CellResult cell;
    cell.config = c;
    cell.config.seed = cell_seed(grid.seed, c);
    result.cells.push_back(cell);
  }
  std::exception_ptr error;
  const auto n = static_cast<std::int64_t>(result.cells.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    CellResult& cell = result.cells[static_cast<std::size_t>(i)];
    try {
      const auto t0 = std::chrono::steady_clock::now();
      cell.fold_loss = cross_validate(X, y, cell.config, plan);
      cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      double s = 0.0;
      for (double l : cell.fold_loss) s += l;
      cell.mean_loss = s / static_cast<double>(cell.fold_loss.size());
    } catch (...) {
#pragma omp critical(sbart_grid_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  result.winner = pick_winner(result.cells);
  return result;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void write_tune_csv(std::ostream& os, const TuneResult& r) {
  os << "num_trees,k,power,base,mean_log_loss,winner\n";
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    const BartConfig& c = r.cells[i].config;
    os << c.num_trees << ',' << num(c.k) << ',' << num(c.power) << ',' << num(c.base) << ','
       << num(r.cells[i].mean_loss) << ',' << (i == r.winner ? 1 : 0) << '\n';
  }
}

void write_tune_json(std::ostream& os, const TuneResult& r) {
  nlohmann::ordered_json j;
  j["winner"] = r.winner;
  j["cells"] = nlohmann::ordered_json::array();
  for (const CellResult& cell : r.cells) {
    const BartConfig& c = cell.config;
    j["cells"].push_back({{"num_trees", c.num_trees},
                          {"k", c.k},
                          {"power", c.power},
                          {"base", c.base},
                          {"seed", c.seed},
                          {"fold_log_loss", cell.fold_loss},
                          {"mean_log_loss", cell.mean_loss},
                          {"seconds", cell.seconds}});
  }
  os << j.dump(2) << '\n';
}

}  // namespace sbart
