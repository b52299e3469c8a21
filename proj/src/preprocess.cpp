#include "sbart/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "sbart/rng.hpp"

namespace sbart {

PcaModel fit_pca(const Matrix& X, bool standardize) {
  const std::size_t n = X.rows(), p = X.cols();
  if (n < 2) throw DataError("PCA needs at least 2 rows");
  if (p == 0) throw DataError("PCA needs at least one column");
  PcaModel m;
  m.standardized = standardize;
  m.means.assign(p, 0.0);
  m.scales.assign(p, 1.0);
  Eigen::MatrixXd C(n, p);
  for (std::size_t j = 0; j < p; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(X(i, j))) throw DataError("non-finite value in column " + std::to_string(j));
      mean += X(i, j);
    }
    mean /= static_cast<double>(n);
    m.means[j] = mean;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (X(i, j) - mean) * (X(i, j) - mean);
    if (standardize) {
      const double sd = std::sqrt(ss / static_cast<double>(n - 1));
      m.scales[j] = sd > 0.0 ? sd : 1.0;
    }
    for (std::size_t i = 0; i < n; ++i) C(i, j) = (X(i, j) - mean) / m.scales[j];
  }
  const Eigen::MatrixXd cov = (C.transpose() * C) / static_cast<double>(n - 1);
  const double trace = cov.trace();
  if (!(trace > 0.0)) throw NumericError("PCA input has rank 0 (no variance)");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("PCA eigendecomposition failed");
  // Eigen returns ascending eigenvalues.
  m.loadings = Matrix(p, p);
  m.variances.resize(p);
  m.explained.resize(p);
  double total = 0.0;
  for (std::size_t c = 0; c < p; ++c) total += std::max(0.0, solver.eigenvalues()(c));
  for (std::size_t c = 0; c < p; ++c) {
    const std::size_t src = p - 1 - c;
    Eigen::VectorXd v = solver.eigenvectors().col(static_cast<Eigen::Index>(src));
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    for (std::size_t j = 0; j < p; ++j) m.loadings(j, c) = v(static_cast<Eigen::Index>(j));
    const double lambda = std::max(0.0, solver.eigenvalues()(static_cast<Eigen::Index>(src)));
    m.variances[c] = lambda;
    m.explained[c] = lambda / total;
  }
  return m;
}

Matrix transform_pca(const PcaModel& model, const Matrix& X, std::size_t q) {
  const std::size_t p = model.num_vars();
  if (X.cols() != p) throw UsageError("PCA transform: column count mismatch");
  if (q > p) throw UsageError("PCA transform: q exceeds the number of components");
  Matrix out(X.rows(), q);
  for (std::size_t i = 0; i < X.rows(); ++i)
    for (std::size_t c = 0; c < q; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < p; ++j) s += (X(i, j) - model.means[j]) / model.scales[j] * model.loadings(j, c);
      out(i, c) = s;
    }
  return out;
}

Matrix reconstruct_pca(const PcaModel& model, const Matrix& scores) {
  const std::size_t p = model.num_vars(), q = scores.cols();
  if (q > p) throw UsageError("PCA reconstruct: too many score columns");
  Matrix out(scores.rows(), p);
  for (std::size_t i = 0; i < scores.rows(); ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < q; ++c) s += scores(i, c) * model.loadings(j, c);
      out(i, j) = s * model.scales[j] + model.means[j];
    }
  return out;
}

std::vector<double> snv(std::span<const double> row) {
  if (row.size() < 2) throw NumericError("SNV needs at least two values per row");
  double mean = 0.0;
  for (double v : row) mean += v;
  mean /= static_cast<double>(row.size());
  double ss = 0.0;
  for (double v : row) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(row.size() - 1));
  if (!(sd > 0.0)) throw NumericError("SNV of a constant row (zero variance)");
  std::vector<double> out(row.size());
  for (std::size_t k = 0; k < row.size(); ++k) out[k] = (row[k] - mean) / sd;
  return out;
}

Matrix snv_rows(const Matrix& X) {
  Matrix out(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const auto r = snv(X.row(i));
    std::copy(r.begin(), r.end(), out.row(i).begin());
  }
  return out;
}

int aggregate_classes(double pct) {
  if (pct == 0.0) return 1;
  for (double level : {1.0, 5.0, 10.0, 20.0, 40.0})
    if (pct == level) return 2;
  if (pct == 100.0) return 3;
  throw DataError("unknown adulteration level " + std::to_string(pct));
}

std::vector<std::size_t> SplitPlan::fold_train(int f) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < calibration.size(); ++k)
    if (fold[k] != f) out.push_back(calibration[k]);
  return out;
}

std::vector<std::size_t> SplitPlan::fold_test(int f) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < calibration.size(); ++k)
    if (fold[k] == f) out.push_back(calibration[k]);
  return out;
}

SplitPlan stratified_split(std::span<const int> labels, double test_frac, int k_folds, std::uint64_t seed) {
  if (!(test_frac >= 0.0 && test_frac < 1.0)) throw UsageError("test fraction must lie in [0, 1)");
  if (k_folds < 1) throw UsageError("fold count must be >= 1");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  if (by_class.size() < 2) throw DegenerateLabels("stratified split needs at least two classes");

  Rng rng(Rng::derive(seed, "stratified-split"));
  for (auto& [label, rows] : by_class)
    for (std::size_t k = rows.size(); k > 1; --k) std::swap(rows[k - 1], rows[rng.below(k)]);

  // Largest-remainder apportionment of the test rows.
  const auto n_test = static_cast<std::size_t>(std::llround(test_frac * static_cast<double>(labels.size())));
  std::vector<std::size_t> take;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  std::size_t c = 0;
  for (const auto& [label, rows] : by_class) {
    const double ideal = test_frac * static_cast<double>(rows.size());
    take.push_back(static_cast<std::size_t>(std::floor(ideal)));
    assigned += take.back();
    remainders.emplace_back(ideal - std::floor(ideal), c++);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < n_test && r < remainders.size(); ++r, ++assigned) ++take[remainders[r].second];

  SplitPlan plan;
  plan.k_folds = k_folds;
  plan.seed = seed;
  c = 0;
  std::size_t deal = 0;
  for (const auto& [label, rows] : by_class) {
    const std::size_t t = take[c++];
    plan.test.insert(plan.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(t));
    for (std::size_t k = t; k < rows.size(); ++k) {
      plan.calibration.push_back(rows[k]);
      plan.fold.push_back(static_cast<int>(deal++ % static_cast<std::size_t>(k_folds)));
    }
  }
  std::sort(plan.test.begin(), plan.test.end());
  return plan;
}

TrainingFold training_fold(const Matrix& X, std::span<const int> y, std::span<const std::size_t> rows) {
  TrainingFold f;
  f.X = X.select_rows(rows);
  f.y.reserve(rows.size());
  for (std::size_t r : rows) f.y.push_back(y[r]);
  return f;
}

TrainingFold smote(const TrainingFold& fold, std::size_t k_neighbors,
                   const std::map<int, std::size_t>& target_counts, std::uint64_t seed) {
  if (k_neighbors < 1) throw UsageError("SMOTE needs k >= 1");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < fold.y.size(); ++i) by_class[fold.y[i]].push_back(i);
  std::map<int, std::size_t> targets = target_counts;
  if (targets.empty()) {
    std::size_t majority = 0;
    for (const auto& [label, rows] : by_class) majority = std::max(majority, rows.size());
    for (const auto& [label, rows] : by_class) targets[label] = majority;
  }

  const std::size_t p = fold.X.cols();
  std::vector<double> synth;
  std::vector<int> synth_y;
  Rng rng(Rng::derive(seed, "smote"));
  for (const auto& [label, rows] : by_class) {
    const auto it = targets.find(label);
    if (it == targets.end() || it->second <= rows.size()) continue;
    if (rows.size() < 2)
      throw DataError("SMOTE: class " + std::to_string(label) + " has a single sample");
    const std::size_t k = std::min(k_neighbors, rows.size() - 1);
    // Brute-force neighbour lists, ties by row order.
    std::vector<std::vector<std::size_t>> nn(rows.size());
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t a = 0; a < rows.size(); ++a) {
      dist.clear();
      for (std::size_t b = 0; b < rows.size(); ++b) {
        if (a == b) continue;
        double d2 = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
          const double d = fold.X(rows[a], j) - fold.X(rows[b], j);
          d2 += d * d;
        }
        dist.emplace_back(d2, b);
      }
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
      for (std::size_t q = 0; q < k; ++q) nn[a].push_back(dist[q].second);
    }
    for (std::size_t s = rows.size(); s < it->second; ++s) {
      const std::size_t a = rng.below(rows.size());
      const std::size_t b = nn[a][rng.below(k)];
      const double u = rng.uniform();
      for (std::size_t j = 0; j < p; ++j) {
        const double x = fold.X(rows[a], j);
        synth.push_back(x + u * (fold.X(rows[b], j) - x));
      }
      synth_y.push_back(label);
    }
  }

  TrainingFold out;
  std::vector<double> data = fold.X.data();
  data.insert(data.end(), synth.begin(), synth.end());
  out.X = Matrix(fold.X.rows() + synth_y.size(), p, std::move(data));
  out.y = fold.y;
  out.y.insert(out.y.end(), synth_y.begin(), synth_y.end());
  return out;
}

}  // namespace sbart
