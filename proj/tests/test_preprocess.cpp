#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "sbart/error.hpp"
#include "sbart/preprocess.hpp"
#include "sbart/rng.hpp"

using namespace sbart;

namespace {

Matrix random_matrix(std::size_t n, std::size_t p, Rng& rng) {
  Matrix X(n, p);
  // correlated columns so the spectrum is not flat
  for (std::size_t i = 0; i < n; ++i) {
    const double z = rng.normal();
    for (std::size_t j = 0; j < p; ++j) X(i, j) = z * (j + 1) * 0.3 + rng.normal() + 5.0 * j;
  }
  return X;
}

}  // namespace

TEST_CASE("collinear columns load entirely on the first component") {
  Matrix X(20, 2);
  for (std::size_t i = 0; i < 20; ++i) {
    X(i, 0) = static_cast<double>(i) * 0.7 - 3.0;
    X(i, 1) = 2.0 * X(i, 0);
  }
  const auto m = fit_pca(X);
  CHECK(m.explained[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(m.explained[1]) <= 1e-12);
  CHECK(m.loadings(0, 0) == doctest::Approx(1.0 / std::sqrt(5.0)).epsilon(1e-12));
  CHECK(m.loadings(1, 0) == doctest::Approx(2.0 / std::sqrt(5.0)).epsilon(1e-12));
}

TEST_CASE("full-rank reconstruction and score properties") {
  Rng rng(31);
  const std::size_t n = 50, p = 8;
  for (bool standardize : {false, true}) {
    const Matrix X = random_matrix(n, p, rng);
    const auto m = fit_pca(X, standardize);
    const Matrix S = transform_pca(m, X, p);
    const Matrix R = reconstruct_pca(m, S);
    for (std::size_t k = 0; k < X.data().size(); ++k) CHECK(std::abs(R.data()[k] - X.data()[k]) < 1e-8);

    double explained = 0;
    for (std::size_t c = 0; c < p; ++c) {
      explained += m.explained[c];
      if (c > 0) CHECK(m.variances[c] <= m.variances[c - 1]);
    }
    CHECK(explained == doctest::Approx(1.0).epsilon(1e-12));

    for (std::size_t a = 0; a < p; ++a) {
      double mean = 0;
      for (std::size_t i = 0; i < n; ++i) mean += S(i, a);
      CHECK(std::abs(mean / n) < 1e-9);
      for (std::size_t b = 0; b < p; ++b) {
        double cov = 0, dot = 0;
        for (std::size_t i = 0; i < n; ++i) cov += S(i, a) * S(i, b);
        for (std::size_t j = 0; j < p; ++j) dot += m.loadings(j, a) * m.loadings(j, b);
        cov /= static_cast<double>(n - 1);
        if (a == b) {
          CHECK(cov == doctest::Approx(m.variances[a]).epsilon(1e-9));
          CHECK(dot == doctest::Approx(1.0).epsilon(1e-12));
        } else {
          CHECK(std::abs(cov) < 1e-8 * (1.0 + m.variances[0]));
          CHECK(std::abs(dot) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("PCA input errors") {
  CHECK_THROWS_AS(fit_pca(Matrix(1, 3)), DataError);
  CHECK_THROWS_AS(fit_pca(Matrix(5, 3, 2.0)), NumericError);
  Matrix X(4, 2, 1.0);
  X(1, 0) = NAN;
  CHECK_THROWS_AS(fit_pca(X), DataError);
  Rng rng(1);
  const auto m = fit_pca(random_matrix(10, 3, rng));
  CHECK_THROWS_AS(transform_pca(m, Matrix(2, 4), 2), UsageError);
  CHECK_THROWS_AS(transform_pca(m, Matrix(2, 3), 4), UsageError);
}

TEST_CASE("standard normal variate") {
  const auto r = snv(std::vector<double>{1, 2, 3});
  CHECK(r == std::vector<double>{-1.0, 0.0, 1.0});
  CHECK_THROWS_AS(snv(std::vector<double>{4, 4, 4}), NumericError);
  CHECK_THROWS_AS(snv(std::vector<double>{4}), NumericError);

  Rng rng(32);
  Matrix X(30, 40);
  for (double& v : X.data()) v = 3.0 + 10.0 * rng.uniform();
  const Matrix Z = snv_rows(X);
  for (std::size_t i = 0; i < Z.rows(); ++i) {
    double mean = 0, ss = 0;
    for (double v : Z.row(i)) mean += v;
    mean /= 40;
    for (double v : Z.row(i)) ss += (v - mean) * (v - mean);
    CHECK(std::abs(mean) < 1e-12);
    CHECK(std::sqrt(ss / 39) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("adulteration levels to purity classes") {
  CHECK(aggregate_classes(0) == 1);
  for (double v : {1.0, 5.0, 10.0, 20.0, 40.0}) CHECK(aggregate_classes(v) == 2);
  CHECK(aggregate_classes(100) == 3);
  CHECK_THROWS_AS(aggregate_classes(7), DataError);
}

TEST_CASE("stratified split of 1995 rows") {
  std::vector<int> y;
  for (int k = 0; k < 100; ++k) y.push_back(1);
  for (int k = 0; k < 1500; ++k) y.push_back(2);
  for (int k = 0; k < 395; ++k) y.push_back(3);
  const auto plan = stratified_split(y, 0.3, 5, 9);
  CHECK(plan.test.size() >= 598);
  CHECK(plan.test.size() <= 600);
  CHECK(plan.test.size() + plan.calibration.size() == 1995);

  std::set<std::size_t> all(plan.test.begin(), plan.test.end());
  all.insert(plan.calibration.begin(), plan.calibration.end());
  CHECK(all.size() == 1995);

  std::map<int, int> in_test;
  for (auto r : plan.test) ++in_test[y[r]];
  CHECK(std::abs(in_test[1] - 30) <= 1);
  CHECK(std::abs(in_test[2] - 450) <= 1);
  CHECK(std::abs(in_test[3] - 118.5) <= 1);

  std::map<int, int> cal_count;
  for (auto r : plan.calibration) ++cal_count[y[r]];
  for (int f = 0; f < 5; ++f) {
    std::map<int, int> fc;
    for (auto r : plan.fold_test(f)) ++fc[y[r]];
    for (const auto& [c, n] : cal_count) CHECK(std::abs(fc[c] - n / 5.0) <= 1.0);
    const auto tr = plan.fold_train(f);
    const auto te = plan.fold_test(f);
    CHECK(tr.size() + te.size() == plan.calibration.size());
    for (auto r : tr) CHECK(std::find(te.begin(), te.end(), r) == te.end());
  }

  const auto again = stratified_split(y, 0.3, 5, 9);
  CHECK(again.test == plan.test);
  CHECK(again.fold == plan.fold);
  CHECK(stratified_split(y, 0.3, 5, 10).test != plan.test);
}

TEST_CASE("split argument errors") {
  const std::vector<int> one(10, 1);
  CHECK_THROWS_AS(stratified_split(one, 0.3, 5, 1), DegenerateLabels);
  const std::vector<int> two{1, 2, 1, 2};
  CHECK_THROWS_AS(stratified_split(two, 1.0, 2, 1), UsageError);
  CHECK_THROWS_AS(stratified_split(two, 0.3, 0, 1), UsageError);
}

TEST_CASE("SMOTE balances classes inside the training hull") {
  Rng rng(33);
  TrainingFold f;
  f.X = Matrix(26, 2);
  for (std::size_t i = 0; i < 20; ++i) {
    f.X(i, 0) = rng.uniform();
    f.X(i, 1) = rng.uniform();
    f.y.push_back(1);
  }
  for (std::size_t i = 20; i < 26; ++i) {
    f.X(i, 0) = 5.0 + rng.uniform();
    f.X(i, 1) = 5.0 + rng.uniform();
    f.y.push_back(2);
  }
  const auto out = smote(f, 3, {}, 4);
  CHECK(std::count(out.y.begin(), out.y.end(), 1) == 20);
  CHECK(std::count(out.y.begin(), out.y.end(), 2) == 20);
  for (std::size_t i = 0; i < 26; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(out.X(i, j) == f.X(i, j));
  for (std::size_t i = 26; i < out.X.rows(); ++i) {
    CHECK(out.y[i] == 2);
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(out.X(i, j) >= 5.0);
      CHECK(out.X(i, j) <= 6.0);
    }
  }
  const auto again = smote(f, 3, {}, 4);
  CHECK(again.X == out.X);
}

TEST_CASE("SMOTE on coincident points and a segment") {
  TrainingFold same;
  same.X = Matrix(5, 2, 1.5);
  same.y = {1, 1, 1, 2, 2};
  same.X(3, 0) = same.X(4, 0) = 0.0;
  const auto a = smote(same, 5, {{1, 10}}, 1);
  CHECK(a.X.rows() == 12);
  for (std::size_t i = 5; i < 12; ++i) {
    CHECK(a.y[i] == 1);
    CHECK(a.X(i, 0) == 1.5);
    CHECK(a.X(i, 1) == 1.5);
  }

  // Two minority points: every synthetic point lies on the segment between them.
  TrainingFold seg;
  seg.X = Matrix(6, 2);
  seg.y = {1, 1, 1, 1, 2, 2};
  seg.X(4, 0) = 1.0;
  seg.X(4, 1) = 2.0;
  seg.X(5, 0) = 3.0;
  seg.X(5, 1) = 6.0;
  const auto b = smote(seg, 5, {}, 2);
  CHECK(b.X.rows() == 8);
  for (std::size_t i = 6; i < 8; ++i) {
    const double t = (b.X(i, 0) - 1.0) / 2.0;
    CHECK(t >= 0.0);
    CHECK(t <= 1.0);
    CHECK(b.X(i, 1) == doctest::Approx(2.0 + 4.0 * t).epsilon(1e-12));
  }

  TrainingFold lone;
  lone.X = Matrix(3, 1);
  lone.y = {1, 1, 2};
  CHECK_THROWS_AS(smote(lone), DataError);
  CHECK_THROWS_AS(smote(seg, 0), UsageError);
}
