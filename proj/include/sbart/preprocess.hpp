#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "sbart/matrix.hpp"

namespace sbart {

// Principal components of the sample covariance (or correlation, with
// `standardize`). Components are ordered by variance, descending; each
// loading vector's largest-magnitude entry is positive.
struct PcaModel {
  std::vector<double> means;
  std::vector<double> scales;      // 1 unless standardized
  Matrix loadings;                 // p x p, one component per column
  std::vector<double> variances;   // eigenvalues, descending
  std::vector<double> explained;   // variance fractions
  bool standardized = false;

  std::size_t num_vars() const { return means.size(); }
};

PcaModel fit_pca(const Matrix& X, bool standardize = false);
// Scores on the first q components (n x q).
Matrix transform_pca(const PcaModel& model, const Matrix& X, std::size_t q);
// Back-projection of scores on the first scores.cols() components.
Matrix reconstruct_pca(const PcaModel& model, const Matrix& scores);

// Standard normal variate: (x - mean) / sd with the n - 1 sample sd.
std::vector<double> snv(std::span<const double> row);
Matrix snv_rows(const Matrix& X);

// Adulteration percentage to purity class: 0 -> 1; 1, 5, 10, 20, 40 -> 2; 100 -> 3.
int aggregate_classes(double adulteration_pct);

// Calibration / test partition plus stratified folds over the calibration
// rows. All indices refer to rows of the original data.
struct SplitPlan {
  std::vector<std::size_t> calibration;
  std::vector<std::size_t> test;
  std::vector<int> fold;  // parallel to calibration, values 0..k-1
  int k_folds = 0;
  std::uint64_t seed = 0;

  std::vector<std::size_t> fold_train(int f) const;
  std::vector<std::size_t> fold_test(int f) const;
};

// Per class, round(test_frac * n_c) rows go to the test side (largest
// remainder so the total is round(test_frac * n)); the rest are dealt
// round-robin into k folds. Deterministic for a given seed.
SplitPlan stratified_split(std::span<const int> labels, double test_frac, int k_folds, std::uint64_t seed);

// Training rows of one fold. SMOTE only accepts this type, so held-out rows
// can never be oversampled.
struct TrainingFold {
  Matrix X;
  std::vector<int> y;
};

TrainingFold training_fold(const Matrix& X, std::span<const int> y, std::span<const std::size_t> rows);

// Appends synthetic rows x + u (x_nn - x), u ~ U(0, 1), with x_nn drawn from
// the k nearest same-class neighbours, until every class reaches its target
// count. Empty targets mean "up to the majority count".
TrainingFold smote(const TrainingFold& fold, std::size_t k_neighbors = 5,
                   const std::map<int, std::size_t>& target_counts = {}, std::uint64_t seed = 1);

}  // namespace sbart
