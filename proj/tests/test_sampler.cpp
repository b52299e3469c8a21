#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sbart/chain.hpp"
#include "sbart/error.hpp"
#include "sbart/sampler.hpp"
#include "synthetic.hpp"

using namespace sbart;

namespace {

BartConfig quick(std::size_t m = 50, std::size_t ndpost = 200, std::uint64_t seed = 1) {
  BartConfig c;
  c.num_trees = m;
  c.ndpost = ndpost;
  c.nskip = 100;
  c.seed = seed;
  return c;
}

double rmse(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t k = 0; k < idx.size(); ++k) r[idx[k]] = static_cast<double>(k);
  return r;
}

double correlation(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n, mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("config validation names the field") {
  BartConfig c;
  c.base = 1.0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("base"), UsageError);
  c = {};
  c.k = 0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("config.k"), UsageError);
  c = {};
  c.num_trees = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
}

TEST_CASE("move probabilities") {
  const auto leaf = move_probs(true, false);
  CHECK(leaf.grow == 1.0);
  CHECK(leaf.prune + leaf.change == 0.0);
  const auto full = move_probs(true, true);
  CHECK(full.grow == 0.5);
  CHECK(full.prune == 0.25);
  CHECK(full.change == 0.25);
  const auto capped = move_probs(false, true);
  CHECK(capped.grow == 0.0);
  CHECK(capped.prune + capped.change == doctest::Approx(1.0));
  CHECK(split_prior(0.95, 2.0, 0) == 0.95);
  CHECK(split_prior(0.95, 2.0, 2) == doctest::Approx(0.95 / 9.0));
}

TEST_CASE("regression rejects bad input") {
  Rng rng(1);
  auto d = synth::friedman(9, 3, rng);
  CHECK_THROWS_AS(fit_regression(d.X, d.y, quick()), DataError);
  d = synth::friedman(20, 3, rng);
  d.y[4] = NAN;
  CHECK_THROWS_AS(fit_regression(d.X, d.y, quick()), DataError);
}

TEST_CASE("constant response is reproduced") {
  Rng rng(2);
  auto d = synth::friedman(50, 3, rng);
  std::fill(d.y.begin(), d.y.end(), 4.25);
  const auto fit = fit_regression(d.X, d.y, quick(20, 100));
  for (double v : predict_regression(fit, d.X)) CHECK(std::abs(v - 4.25) <= 1e-6);
  for (double s : fit.sigma) CHECK(s > 0.0);
}

TEST_CASE("Friedman #1 beats the mean predictor by half") {
  Rng rng(3);
  const auto train = synth::friedman(200, 10, rng);
  const auto test = synth::friedman(1000, 10, rng);
  const auto fit = fit_regression(train.X, train.y, quick(50, 500));
  CHECK(fit.chain.size() == 500);
  CHECK(fit.sigma.size() == 500);
  const double mean = std::accumulate(train.y.begin(), train.y.end(), 0.0) / 200.0;
  const std::vector<double> base(test.y.size(), mean);
  const double model = rmse(predict_regression(fit, test.X), test.y);
  CHECK(model < 0.5 * rmse(base, test.y));
}

TEST_CASE("retained sigma draws show no trend after burn-in") {
  Rng rng(31);
  const auto train = synth::friedman(200, 10, rng);
  for (std::uint64_t seed : {1, 2, 3}) {
    BartConfig c = quick(50, 1000, seed);
    c.nskip = 500;
    const auto fit = fit_regression(train.X, train.y, c);
    std::vector<double> index(fit.sigma.size());
    std::iota(index.begin(), index.end(), 0.0);
    CHECK(std::abs(correlation(ranks(index), ranks(fit.sigma))) < 0.5);
  }
}

TEST_CASE("base near zero leaves single-leaf trees and the pooled mean") {
  Rng rng(4);
  const auto d = synth::friedman(100, 4, rng);
  BartConfig c = quick(1, 300);
  c.base = 1e-12;
  const auto fit = fit_regression(d.X, d.y, c);
  for (const auto& e : fit.chain.ensembles)
    for (const auto& t : e.trees) REQUIRE(t.size() == 1);
  const double mean = std::accumulate(d.y.begin(), d.y.end(), 0.0) / 100.0;
  double sd = 0;
  for (double v : d.y) sd += (v - mean) * (v - mean);
  sd = std::sqrt(sd / 99.0);
  const auto pred = predict_regression(fit, d.X);
  for (double v : pred) CHECK(v == pred[0]);
  CHECK(std::abs(pred[0] - mean) < 0.1 * sd);
}

TEST_CASE("backfitting keeps the stored fit equal to the sum of trees") {
  Rng rng(5);
  const auto d = synth::friedman(150, 5, rng);
  const auto grid = CutpointGrid::build(d.X);
  std::vector<double> y(d.y);
  const double lo = *std::min_element(y.begin(), y.end()), hi = *std::max_element(y.begin(), y.end());
  for (double& v : y) v = (v - (lo + hi) / 2) / (hi - lo);
  ChainSettings s;
  s.num_trees = 30;
  s.leaf_sd = 0.5 / (2.0 * std::sqrt(30.0));
  s.lambda = 0.01;
  s.sigma_init = 0.1;
  Chain chain(d.X, y, grid, s, 9);
  for (int sweep = 0; sweep < 300; ++sweep) {
    chain.sweep();
    REQUIRE(chain.max_fit_drift() <= 1e-8);
  }
  CHECK(chain.accepted()[0] > 0);
  CHECK(chain.accepted()[1] > 0);
  CHECK(chain.accepted()[2] > 0);
  // the snapshot evaluates to the stored fit
  const Ensemble e = chain.snapshot();
  for (std::size_t i = 0; i < 150; i += 7) CHECK(evaluate_ensemble(e, grid, d.X.row(i)) == doctest::Approx(chain.fit()[i]).epsilon(1e-10));
}

TEST_CASE("identical seeds give identical draws") {
  Rng rng(6);
  const auto d = synth::friedman(60, 4, rng);
  const auto a = fit_regression(d.X, d.y, quick(20, 50, 77));
  const auto b = fit_regression(d.X, d.y, quick(20, 50, 77));
  CHECK(a == b);
  const auto c = fit_regression(d.X, d.y, quick(20, 50, 78));
  CHECK_FALSE(a == c);
}

TEST_CASE("probit with no usable split is centred at one half") {
  Matrix X(200, 1, 0.0);
  std::vector<int> y(200);
  for (std::size_t i = 0; i < 200; ++i) y[i] = static_cast<int>(i % 2);
  const auto fit = fit_probit_binary(X, y, quick(20, 500));
  const auto p = predict_binary(fit, X);
  CHECK(std::abs(p[0] - 0.5) <= 0.05);
}

TEST_CASE("probit separates two Gaussian clusters") {
  Rng rng(7);
  const auto train = synth::gaussian_pair(300, rng);
  const auto test = synth::gaussian_pair(2000, rng);
  const auto fit = fit_probit_binary(train.X, train.y, quick(50, 300));
  const auto p = predict_binary(fit, test.X);
  int ok = 0;
  for (std::size_t i = 0; i < p.size(); ++i) ok += (p[i] > 0.5) == (test.y[i] == 1);
  CHECK(ok / 2000.0 >= 0.95);
}

TEST_CASE("probit link: zero ensemble output is probability one half") {
  BinaryDraws d;
  d.config = quick(2, 1);
  Matrix X(3, 1, {0.0, 0.5, 1.0});
  d.grid = CutpointGrid::build(X);
  d.chain.ensembles.push_back(Ensemble{{Tree(0.0), Tree(0.0)}});
  for (double v : predict_binary(d, X)) CHECK(v == 0.5);
}

TEST_CASE("probit monotonicity in the latent value") {
  BinaryDraws d;
  d.config = quick(1, 1);
  Matrix X(2, 1, {0.0, 1.0});
  d.grid = CutpointGrid::build(X);
  d.offset = 0.3;
  double last = -1.0;
  for (double mu = -9.0; mu <= 9.0; mu += 0.25) {
    d.chain.ensembles = {Ensemble{{Tree(mu)}}};
    const double p = predict_binary(d, X)[0];
    CHECK(p >= last);
    last = p;
  }
}

TEST_CASE("binary label errors") {
  Matrix X(20, 1, 0.0);
  std::vector<int> ones(20, 1);
  CHECK_THROWS_AS(fit_probit_binary(X, ones, quick()), DegenerateLabels);
  ones[3] = 2;
  CHECK_THROWS_AS(fit_probit_binary(X, ones, quick()), DataError);
}

TEST_CASE("two-class multinomial equals the binary fit") {
  Rng rng(8);
  auto d = synth::gaussian_pair(120, rng);
  std::vector<int> labels, y01;
  for (int v : d.y) {
    labels.push_back(v == 1 ? 1 : 2);
    y01.push_back(v == 1 ? 1 : 0);
  }
  const auto multi = fit_multinomial(d.X, labels, quick(20, 100));
  const auto bin = fit_probit_binary(d.X, y01, quick(20, 100));
  REQUIRE(multi.stages.size() == 1);
  CHECK(multi.stages[0] == bin);
  const auto probs = predict_class_probs(multi, d.X);
  const auto p1 = predict_binary(bin, d.X);
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(probs.probs(i, 0) == doctest::Approx(p1[i]).epsilon(1e-14));
}

TEST_CASE("stage h is fitted on the rows with label >= h") {
  Rng rng(9);
  auto d = synth::blobs(30, 3, 2, rng);
  // unbalanced: drop some class-1 rows
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < d.y.size(); ++i)
    if (!(d.y[i] == 1 && i % 2 == 0)) keep.push_back(i);
  Matrix X = d.X.select_rows(keep);
  std::vector<int> y;
  for (auto i : keep) y.push_back(d.y[i]);
  const std::size_t n = y.size(), n1 = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  const auto fit = fit_multinomial(X, y, quick(20, 50));
  REQUIRE(fit.num_classes == 3);
  REQUIRE(fit.stages.size() == 2);
  CHECK(fit.stages[0].train_size == n);
  CHECK(fit.stages[1].train_size == n - n1);
}

TEST_CASE("missing class in a stage names the stage") {
  Rng rng(10);
  auto d = synth::blobs(10, 3, 2, rng);
  for (int& v : d.y)
    if (v == 2) v = 3;
  CHECK_THROWS_WITH_AS(fit_multinomial(d.X, d.y, quick(10, 10), 3), doctest::Contains("stage 2"), DegenerateLabels);
  std::vector<int> one(d.y.size(), 1);
  CHECK_THROWS_AS(fit_multinomial(d.X, one, quick(10, 10)), DegenerateLabels);
}

TEST_CASE("224 predictors and three classes give three probability columns") {
  Rng rng(11);
  const auto d = synth::blobs(20, 3, 224, rng);
  const auto fit = fit_multinomial(d.X, d.y, quick(10, 20));
  const auto probs = predict_class_probs(fit, d.X);
  CHECK(probs.classes() == 3);
  CHECK(probs.rows() == 60);
  Matrix wrong(2, 223);
  CHECK_THROWS_AS(predict_class_probs(fit, wrong), UsageError);
}

TEST_CASE("stage probabilities to class probabilities") {
  auto pi = stage_to_class_probs(std::vector<double>{0.5, 0.5});
  CHECK(pi == std::vector<double>{0.5, 0.25, 0.25});
  pi = stage_to_class_probs(std::vector<double>{1.0, 0.3});
  CHECK(pi == std::vector<double>{1.0, 0.0, 0.0});
  CHECK_THROWS_AS(stage_to_class_probs(std::vector<double>{1.2}), UsageError);

  Rng rng(12);
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> p(1 + rng.below(5));
    for (double& v : p) v = rng.uniform();
    const auto c = stage_to_class_probs(p);
    double s = 0;
    for (double v : c) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("class probabilities average over draws and stay on the simplex") {
  Rng rng(13);
  std::vector<Matrix> stages(2, Matrix(4, 3));
  for (auto& m : stages)
    for (double& v : m.data()) v = rng.uniform();
  const auto cp = class_probs_from_stage_draws(stages);
  for (std::size_t i = 0; i < 3; ++i) {
    double expect1 = 0, s = 0;
    for (std::size_t d = 0; d < 4; ++d) expect1 += stages[0](d, i) / 4.0;
    for (std::size_t c = 0; c < 3; ++c) s += cp.probs(i, c);
    CHECK(cp.probs(i, 0) == doctest::Approx(expect1).epsilon(1e-14));
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("labels by argmax with ties to the lowest class") {
  ClassProbs p{Matrix(2, 3, {0.2, 0.5, 0.3, 0.4, 0.4, 0.2})};
  CHECK(predict_labels(p) == std::vector<int>{2, 1});

  Rng rng(14);
  ClassProbs r{Matrix(500, 4)};
  for (std::size_t i = 0; i < 500; ++i) {
    double s = 0;
    for (std::size_t c = 0; c < 4; ++c) s += r.probs(i, c) = rng.gamma(1.0);
    for (std::size_t c = 0; c < 4; ++c) r.probs(i, c) /= s;
  }
  const auto labels = predict_labels(r);
  for (std::size_t i = 0; i < 500; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < 4; ++c)
      if (r.probs(i, c) > r.probs(i, best)) best = c;
    CHECK(labels[i] == static_cast<int>(best) + 1);
  }
}
