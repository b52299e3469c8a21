#include "sbart/varselect.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>

namespace sbart {

namespace {

// Linear-interpolation percentile of sorted values, q in [0, 1].
double percentile(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted[0];
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

UsageSummary usage_frequencies(const VarcountMatrix& vc) {
  if (vc.draws() == 0) throw UsageError("usage frequencies need at least one draw");
  const std::size_t p = vc.vars();
  UsageSummary out;
  out.mean.assign(p, 0.0);
  std::vector<std::vector<double>> per_var(p);
  for (std::size_t i = 0; i < vc.draws(); ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < p; ++j) total += vc(i, j);
    if (total == 0.0) {
      ++out.draws_skipped;
      continue;
    }
    ++out.draws_used;
    for (std::size_t j = 0; j < p; ++j) {
      const double f = vc(i, j) / total;
      out.mean[j] += f;
      per_var[j].push_back(f);
    }
  }
  if (out.draws_used == 0) throw NumericError("empty model: no draw contains any split");
  out.lower.resize(p);
  out.upper.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    out.mean[j] /= static_cast<double>(out.draws_used);
    std::sort(per_var[j].begin(), per_var[j].end());
    out.lower[j] = percentile(per_var[j], 0.025);
    out.upper[j] = percentile(per_var[j], 0.975);
  }
  out.ranking.resize(p);
  std::iota(out.ranking.begin(), out.ranking.end(), 0);
  std::stable_sort(out.ranking.begin(), out.ranking.end(),
                   [&](std::size_t a, std::size_t b) { return out.mean[a] > out.mean[b]; });
  return out;
}

TopSelection select_top(const UsageSummary& us, std::size_t n_top) {
  TopSelection out;
  n_top = std::min(n_top, us.ranking.size());
  out.vars.assign(us.ranking.begin(), us.ranking.begin() + static_cast<std::ptrdiff_t>(n_top));
  for (std::size_t v : out.vars) out.cumulative += us.mean[v];
  return out;
}

std::vector<double> dirichlet_update_log(std::span<const double> counts, double theta, Rng& rng) {
  if (!(theta > 0.0)) throw UsageError("Dirichlet concentration theta must be > 0");
  if (counts.empty()) throw UsageError("Dirichlet update needs at least one variable");
  const double alpha0 = theta / static_cast<double>(counts.size());
  std::vector<double> log_s(counts.size());
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (!(counts[j] >= 0.0)) throw UsageError("Dirichlet counts must be nonnegative");
    log_s[j] = rng.log_gamma(alpha0 + counts[j]);
  }
  const double lse = log_sum_exp(log_s);
  for (double& v : log_s) v -= lse;
  return log_s;
}

std::vector<double> dirichlet_update(std::span<const double> counts, double theta, Rng& rng) {
  std::vector<double> s = dirichlet_update_log(counts, theta, rng);
  for (double& v : s) v = std::exp(v);
  return s;
}

std::size_t ThetaGrid::mode() const {
  return static_cast<std::size_t>(std::max_element(weight.begin(), weight.end()) - weight.begin());
}

ThetaGrid theta_posterior(std::span<const double> log_s, double a, double b, double rho) {
  if (log_s.empty()) throw UsageError("theta update needs at least one variable");
  const double p = static_cast<double>(log_s.size());
  if (rho <= 0.0) rho = p;
  double sum_log = 0.0;
  for (double v : log_s) sum_log += v;
  constexpr std::size_t kGrid = 1000;
  ThetaGrid g;
  g.theta.resize(kGrid);
  g.weight.resize(kGrid);
  for (std::size_t k = 0; k < kGrid; ++k) {
    const double lambda = static_cast<double>(k + 1) / static_cast<double>(kGrid + 1);
    const double theta = lambda * rho / (1.0 - lambda);
    const double log_lik = std::lgamma(theta) - p * std::lgamma(theta / p) + (theta / p) * sum_log;
    const double log_prior = (a - 1.0) * std::log(lambda) + (b - 1.0) * std::log1p(-lambda);
    g.theta[k] = theta;
    g.weight[k] = log_lik + log_prior;
  }
  const double lse = log_sum_exp(g.weight);
  double total = 0.0;
  for (double& w : g.weight) {
    w = std::exp(w - lse);
    total += w;
  }
  for (double& w : g.weight) w /= total;
  return g;
}

double theta_update_log(std::span<const double> log_s, Rng& rng, double a, double b, double rho) {
  const ThetaGrid g = theta_posterior(log_s, a, b, rho);
  return g.theta[rng.discrete(g.weight)];
}

double theta_update(double theta, std::span<const double> s, Rng& rng, double a, double b, double rho) {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw UsageError("theta must be positive and finite");
  std::vector<double> log_s(s.size());
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (!(s[j] > 0.0)) throw UsageError("selection probabilities must be positive");
    log_s[j] = std::log(s[j]);
  }
  return theta_update_log(log_s, rng, a, b, rho);
}

StageSelection stage_selection(const Matrix& varprob, int stage) {
  if (varprob.rows() == 0) throw UsageError("sparse selection needs sparse draws (fit with sparse = true)");
  StageSelection out;
  out.stage = stage;
  const std::size_t p = varprob.cols();
  out.mean.assign(p, 0.0);
  for (std::size_t i = 0; i < varprob.rows(); ++i)
    for (std::size_t j = 0; j < p; ++j) out.mean[j] += varprob(i, j);
  for (double& m : out.mean) m /= static_cast<double>(varprob.rows());
  out.threshold = 1.0 / static_cast<double>(p);
  for (std::size_t j = 0; j < p; ++j)
    if (out.mean[j] > out.threshold) out.selected.push_back(j);
  out.conditional_small_support = stage >= 3;
  return out;
}

SparseSummary sparse_selection(const ClassifierDraws& draws) {
  SparseSummary out;
  for (std::size_t h = 0; h < draws.stages.size(); ++h)
    out.stages.push_back(stage_selection(draws.stages[h].chain.varprob, static_cast<int>(h) + 1));
  return out;
}

VarcountMatrix combined_varcount(const ClassifierDraws& draws) {
  if (draws.stages.empty()) throw UsageError("classifier has no stages");
  VarcountMatrix out = draws.stages[0].chain.varcount;
  for (std::size_t h = 1; h < draws.stages.size(); ++h) {
    const VarcountMatrix& vc = draws.stages[h].chain.varcount;
    if (vc.draws() != out.draws() || vc.vars() != out.vars())
      throw UsageError("stage varcount shapes differ");
    for (std::size_t i = 0; i < vc.draws(); ++i)
      for (std::size_t j = 0; j < vc.vars(); ++j) out(i, j) += vc(i, j);
  }
  return out;
}

namespace kernels {

namespace {
void count_draw(const Ensemble& e, std::size_t num_vars, std::uint32_t* row) {
  for (const Tree& t : e.trees)
    for (const TreeNode& n : t.nodes()) {
      if (n.is_leaf()) continue;
      if (static_cast<std::size_t>(n.var) >= num_vars) throw StructureError(n.id, "split variable out of range");
      ++row[n.var];
    }
}
}  // namespace

VarcountMatrix varcount_serial(std::span<const Ensemble> draws, std::size_t num_vars) {
  VarcountMatrix out(draws.size(), num_vars);
  for (std::size_t d = 0; d < draws.size(); ++d) count_draw(draws[d], num_vars, &out(d, 0));
  return out;
}

VarcountMatrix varcount_omp(std::span<const Ensemble> draws, std::size_t num_vars) {
  VarcountMatrix out(draws.size(), num_vars);
  const auto nd = static_cast<std::int64_t>(draws.size());
  std::vector<std::exception_ptr> errors(draws.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t d = 0; d < nd; ++d) {
    try {
      count_draw(draws[d], num_vars, &out(d, 0));
    } catch (...) {
      errors[d] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace kernels

}  // namespace sbart
