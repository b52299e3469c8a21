#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>

#include "sbart/error.hpp"
#include "sbart/sampler.hpp"
#include "sbart/varselect.hpp"
#include "synthetic.hpp"

using namespace sbart;

TEST_CASE("single draw usage proportions") {
  VarcountMatrix vc;
  vc.append_row({2, 1, 1});
  const auto us = usage_frequencies(vc);
  CHECK(us.mean == std::vector<double>{0.5, 0.25, 0.25});
  CHECK(us.ranking == std::vector<std::size_t>{0, 1, 2});
  CHECK(us.draws_used == 1);
}

TEST_CASE("usage frequencies match a two-pass oracle") {
  Rng rng(1);
  const std::size_t N = 500, p = 12;
  VarcountMatrix vc;
  std::size_t zero_rows = 0;
  for (std::size_t i = 0; i < N; ++i) {
    std::vector<std::uint32_t> row(p);
    if (i % 50 == 7) {
      ++zero_rows;
    } else {
      for (auto& v : row) v = static_cast<std::uint32_t>(rng.below(6));
      row[i % p] += 1;
    }
    vc.append_row(row);
  }
  const auto us = usage_frequencies(vc);
  CHECK(us.draws_skipped == zero_rows);
  CHECK(us.draws_used == N - zero_rows);

  std::vector<double> oracle(p, 0.0);
  std::size_t used = 0;
  for (std::size_t i = 0; i < N; ++i) {
    double total = 0;
    for (std::size_t j = 0; j < p; ++j) total += vc(i, j);
    if (total == 0) continue;
    ++used;
    for (std::size_t j = 0; j < p; ++j) oracle[j] += vc(i, j) / total;
  }
  double sum = 0;
  for (std::size_t j = 0; j < p; ++j) {
    oracle[j] /= static_cast<double>(used);
    CHECK(std::abs(us.mean[j] - oracle[j]) <= 1e-12);
    CHECK(us.lower[j] <= us.upper[j]);
    CHECK(us.lower[j] >= 0.0);
    CHECK(us.upper[j] <= 1.0);
    sum += us.mean[j];
  }
  CHECK(std::abs(sum - 1.0) <= 1e-9);
  for (std::size_t r = 1; r < p; ++r) {
    const auto a = us.ranking[r - 1], b = us.ranking[r];
    CHECK((us.mean[a] > us.mean[b] || (us.mean[a] == us.mean[b] && a < b)));
  }
}

TEST_CASE("percentile bounds of a known distribution") {
  VarcountMatrix vc;
  // f_0 takes the values 0.01, 0.02, ..., 1.00 across 100 draws
  for (int i = 1; i <= 100; ++i) vc.append_row({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(100 - i)});
  const auto us = usage_frequencies(vc);
  // linear interpolation at positions 0.025 * 99 and 0.975 * 99
  CHECK(us.lower[0] == doctest::Approx(0.01 + 0.025 * 99 * 0.01).epsilon(1e-12));
  CHECK(us.upper[0] == doctest::Approx(0.01 + 0.975 * 99 * 0.01).epsilon(1e-12));
}

TEST_CASE("all-leaf posterior is an error") {
  VarcountMatrix vc;
  vc.append_row({0, 0, 0});
  vc.append_row({0, 0, 0});
  CHECK_THROWS_AS(usage_frequencies(vc), NumericError);
}

TEST_CASE("select_top on a known top-five profile") {
  UsageSummary us;
  us.mean = {0.4704, 0.2645, 0.1302, 0.0108, 0.0061};
  double rest = 1.0;
  for (double v : us.mean) rest -= v;
  us.mean.push_back(rest);
  us.ranking = {0, 1, 2, 5, 3, 4};
  const auto top3 = select_top(us, 3);
  CHECK(top3.vars == std::vector<std::size_t>{0, 1, 2});
  CHECK(top3.cumulative == doctest::Approx(0.8651).epsilon(1e-12));
  const auto all = select_top(us, 6);
  CHECK(all.vars.size() == 6);
  CHECK(all.cumulative == doctest::Approx(1.0).epsilon(1e-12));
  const auto none = select_top(us, 0);
  CHECK(none.vars.empty());
  CHECK(none.cumulative == 0.0);
}

TEST_CASE("Dirichlet draws: symmetric case, mean formula, simplex") {
  Rng rng(2);
  const std::size_t p = 10;
  const int draws = 100000;
  {
    std::vector<double> zero(p, 0.0), mean(p, 0.0);
    for (int d = 0; d < draws; ++d) {
      const auto s = dirichlet_update(zero, static_cast<double>(p), rng);
      double sum = 0;
      for (std::size_t j = 0; j < p; ++j) {
        REQUIRE(s[j] > 0.0);
        sum += s[j];
        mean[j] += s[j] / draws;
      }
      REQUIRE(std::abs(sum - 1.0) <= 1e-12);
    }
    // Dirichlet(1,...,1): var s_j = (p - 1) / (p^2 (p + 1))
    const double se = std::sqrt((p - 1.0) / (p * p * (p + 1.0)) / draws);
    for (double m : mean) CHECK(std::abs(m - 1.0 / p) < 4 * se);
  }
  {
    const double theta = 0.5;
    std::vector<double> counts(p, 0.0);
    counts[0] = 1000;
    double m1 = 0, m2 = 0;
    for (int d = 0; d < draws; ++d) {
      const auto s = dirichlet_update(counts, theta, rng);
      m1 += s[0];
      m2 += s[0] * s[0];
    }
    m1 /= draws;
    const double sd = std::sqrt(m2 / draws - m1 * m1);
    const double expected = (theta / p + 1000) / (theta + 1000);
    CHECK(std::abs(m1 - expected) < 3 * sd / std::sqrt(draws));
  }
  CHECK_THROWS_AS(dirichlet_update(std::vector<double>(3, 0.0), 0.0, rng), UsageError);
}

TEST_CASE("log-scale Dirichlet stays finite for tiny concentrations") {
  Rng rng(3);
  std::vector<double> counts(200, 0.0);
  counts[5] = 40;
  for (int d = 0; d < 1000; ++d) {
    const auto ls = dirichlet_update_log(counts, 1e-3, rng);
    double lse = -INFINITY;
    for (double v : ls) {
      REQUIRE(std::isfinite(v));
      lse = std::max(lse, v) + std::log1p(std::exp(-std::abs(lse - v)));
    }
    CHECK(std::abs(lse) < 1e-9);
  }
}

TEST_CASE("theta grid posterior") {
  const std::size_t p = 50;
  std::vector<double> uniform(p, -std::log(static_cast<double>(p)));
  std::vector<double> concentrated(p, std::log(1e-6));
  concentrated[0] = std::log(1.0 - 49e-6);
  const auto gu = theta_posterior(uniform, 0.5, 1.0, 0.0);
  const auto gc = theta_posterior(concentrated, 0.5, 1.0, 0.0);
  CHECK(gu.theta.size() == 1000);
  CHECK(std::abs(std::accumulate(gu.weight.begin(), gu.weight.end(), 0.0) - 1.0) <= 1e-12);
  CHECK(std::abs(std::accumulate(gc.weight.begin(), gc.weight.end(), 0.0) - 1.0) <= 1e-12);
  CHECK(gu.theta[gu.mode()] > gc.theta[gc.mode()]);
  // lambda_k = k / 1001, theta = lambda rho / (1 - lambda)
  CHECK(gu.theta[0] == doctest::Approx((1.0 / 1001) * p / (1 - 1.0 / 1001)).epsilon(1e-12));

  Rng rng(4);
  double theta = 1.0;
  std::vector<double> s(p, 1.0 / p);
  for (int it = 0; it < 10000; ++it) {
    theta = theta_update(theta, s, rng);
    REQUIRE(theta > 0.0);
    REQUIRE(std::isfinite(theta));
    s = dirichlet_update(std::vector<double>(p, 1.0), theta, rng);
    for (double& v : s) v = std::max(v, 1e-300);
  }
  CHECK_THROWS_AS(theta_update(-1.0, s, rng), UsageError);
}

TEST_CASE("stage selection uses the strict 1/p rule") {
  Matrix vp(2, 4, {0.25, 0.5, 0.15, 0.10, 0.25, 0.3, 0.25, 0.20});
  const auto sel = stage_selection(vp, 1);
  CHECK(sel.threshold == 0.25);
  CHECK(sel.mean[0] == 0.25);
  CHECK(sel.selected == std::vector<std::size_t>{1});
  CHECK_FALSE(sel.conditional_small_support);
  CHECK(stage_selection(vp, 3).conditional_small_support);

  Matrix wide(1, 224, 1.0 / 224);
  CHECK(stage_selection(wide, 1).threshold == doctest::Approx(0.0044643).epsilon(1e-4));
  CHECK(stage_selection(wide, 1).selected.empty());
}

TEST_CASE("sparse multinomial summary rows sum to one") {
  Rng rng(5);
  const auto d = synth::blobs(30, 3, 20, rng);
  BartConfig c;
  c.num_trees = 20;
  c.ndpost = 100;
  c.nskip = 100;
  c.sparse = true;
  const auto fit = fit_multinomial(d.X, d.y, c);
  const auto s = sparse_selection(fit);
  REQUIRE(s.stages.size() == 2);
  for (const auto& st : s.stages) {
    CHECK(std::abs(std::accumulate(st.mean.begin(), st.mean.end(), 0.0) - 1.0) <= 1e-9);
    for (std::size_t j = 0; j < st.mean.size(); ++j) {
      const bool in = std::find(st.selected.begin(), st.selected.end(), j) != st.selected.end();
      CHECK(in == (st.mean[j] > 1.0 / 20));
    }
  }
  CHECK(s.stages[0].stage == 1);
  // the informative predictor is picked up
  CHECK(std::find(s.stages[0].selected.begin(), s.stages[0].selected.end(), 0) != s.stages[0].selected.end());

  const auto total = combined_varcount(fit);
  for (std::size_t i = 0; i < total.draws(); ++i)
    for (std::size_t j = 0; j < total.vars(); ++j)
      CHECK(total(i, j) == fit.stages[0].chain.varcount(i, j) + fit.stages[1].chain.varcount(i, j));

  c.sparse = false;
  CHECK_THROWS_AS(sparse_selection(fit_multinomial(d.X, d.y, c)), UsageError);
}

namespace {

// Largest SSE reduction of a single split on predictor j.
double best_split_gain(const Matrix& X, std::span<const double> y, std::size_t j) {
  std::vector<std::size_t> idx(y.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return X(a, j) < X(b, j); });
  const double n = static_cast<double>(y.size());
  double total = 0;
  for (double v : y) total += v;
  double left = 0, best = 0;
  for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
    left += y[idx[k]];
    const double nl = static_cast<double>(k + 1), nr = n - nl;
    const double right = total - left;
    best = std::max(best, left * left / nl + right * right / nr - total * total / n);
  }
  return best;
}

}  // namespace

TEST_CASE("sparse prior recovers three active predictors out of 100") {
  Rng rng(6);
  const auto d = synth::sparse_linear(300, 100, rng);
  std::vector<double> gain(100);
  for (std::size_t j = 0; j < 100; ++j) gain[j] = best_split_gain(d.X, d.y, j);
  std::vector<std::size_t> order(100);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return gain[a] > gain[b]; });
  std::sort(order.begin(), order.begin() + 3);
  REQUIRE(std::vector<std::size_t>(order.begin(), order.begin() + 3) == std::vector<std::size_t>{0, 1, 2});

  BartConfig c;
  c.num_trees = 50;
  c.ndpost = 500;
  c.sparse = true;
  c.seed = 3;
  const auto fit = fit_regression(d.X, d.y, c);
  const auto sel = stage_selection(fit.chain.varprob, 1);
  for (std::size_t j : {0, 1, 2}) CHECK(std::find(sel.selected.begin(), sel.selected.end(), j) != sel.selected.end());
  CHECK(sel.selected.size() <= 10);
}

TEST_CASE("without the sparse prior, split variables are uniform on null data") {
  // Independent short chains on fresh pure-noise data, so counts are
  // independent and predictors exchangeable.
  const std::size_t p = 5;
  std::vector<double> counts(p, 0.0);
  Rng rng(7);
  BartConfig c;
  c.num_trees = 1;
  c.ndpost = 1;
  c.nskip = 10;
  c.min_leaf = 1;
  for (int chain = 0; chain < 2000; ++chain) {
    Matrix X(30, p);
    std::vector<double> y(30);
    for (double& v : X.data()) v = rng.uniform();
    for (double& v : y) v = rng.normal();
    c.seed = static_cast<std::uint64_t>(chain) + 1;
    const auto fit = fit_regression(X, y, c);
    for (std::size_t j = 0; j < p; ++j) counts[j] += fit.chain.varcount(0, j);
  }
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  REQUIRE(total > 200);
  double chi2 = 0;
  for (double v : counts) chi2 += (v - total / p) * (v - total / p) / (total / p);
  const double pval = 1.0 - boost::math::cdf(boost::math::chi_squared(p - 1.0), chi2);
  CHECK(pval > 0.001);
}
