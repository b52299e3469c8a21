#include "sbart/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include "sbart/chain.hpp"
#include "sbart/kernels.hpp"
#include "sbart/rng.hpp"

namespace sbart {

void BartConfig::validate() const {
  if (num_trees < 1) throw UsageError("config.num_trees: must be >= 1");
  if (!(k > 0.0)) throw UsageError("config.k: must be > 0");
  if (!(base > 0.0 && base < 1.0)) throw UsageError("config.base: must lie in (0, 1)");
  if (!(power >= 0.0)) throw UsageError("config.power: must be >= 0");
  if (ndpost < 1) throw UsageError("config.ndpost: must be >= 1");
  if (!(sigma_df > 0.0)) throw UsageError("config.sigma_df: must be > 0");
  if (!(sigma_quant > 0.0 && sigma_quant < 1.0)) throw UsageError("config.sigma_quant: must lie in (0, 1)");
  if (grid_size < 1) throw UsageError("config.grid_size: must be >= 1");
  if (min_leaf < 1) throw UsageError("config.min_leaf: must be >= 1");
  if (!(sparse_a > 0.0)) throw UsageError("config.sparse_a: must be > 0");
  if (!(sparse_b > 0.0)) throw UsageError("config.sparse_b: must be > 0");
  if (!(sparse_rho >= 0.0)) throw UsageError("config.sparse_rho: must be >= 0");
}

std::uint64_t stage_seed(std::uint64_t seed, int stage) {
  return Rng::derive(seed, "probit-stage", static_cast<std::uint64_t>(stage));
}

namespace {

constexpr double kSigmaFloor = 1e-8;

void run_chain(Chain& chain, const BartConfig& cfg, ChainDraws& out, std::vector<double>* sigma,
               double sigma_scale) {
  const std::size_t sparse_start = cfg.nskip / 2;
  const std::size_t total = cfg.nskip + cfg.ndpost;
  out.ensembles.reserve(cfg.ndpost);
  if (sigma) sigma->reserve(cfg.ndpost);
  if (cfg.sparse) out.varprob = Matrix(cfg.ndpost, chain.num_vars());
  for (std::size_t it = 0; it < total; ++it) {
    if (cfg.sparse && it == sparse_start) chain.enable_sparse();
    chain.sweep();
    if (it < cfg.nskip) continue;
    const std::size_t d = it - cfg.nskip;
    out.ensembles.push_back(chain.snapshot());
    out.varcount.append_row(chain.varcount());
    if (sigma) sigma->push_back(chain.sigma() * sigma_scale);
    if (cfg.sparse) {
      const auto vp = chain.varprob();
      std::copy(vp.begin(), vp.end(), out.varprob.row(d).begin());
      out.theta.push_back(chain.theta());
    }
  }
}

// Residual sd of a least-squares fit with intercept when n > p + 1, else
// the sample sd of y.
double sigma_guess(const Matrix& X, std::span<const double> y) {
  const std::size_t n = X.rows(), p = X.cols();
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(n);
  if (n > p + 1) {
    Eigen::MatrixXd A(n, p + 1);
    Eigen::VectorXd b(n);
    for (std::size_t i = 0; i < n; ++i) {
      A(i, 0) = 1.0;
      for (std::size_t j = 0; j < p; ++j) A(i, j + 1) = X(i, j);
      b(i) = y[i];
    }
    const Eigen::VectorXd coef = A.colPivHouseholderQr().solve(b);
    const double rss = (A * coef - b).squaredNorm();
    return std::sqrt(rss / static_cast<double>(n - p - 1));
  }
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(n - 1));
}

BinaryDraws fit_stage(const Matrix& X, std::span<const double> y01, const CutpointGrid& grid,
                      const BartConfig& cfg, std::uint64_t seed) {
  double mean = 0.0;
  for (double v : y01) mean += v;
  mean /= static_cast<double>(y01.size());

  ChainSettings s;
  s.response = Response::probit;
  s.num_trees = cfg.num_trees;
  s.leaf_sd = 3.0 / (cfg.k * std::sqrt(static_cast<double>(cfg.num_trees)));
  s.power = cfg.power;
  s.base = cfg.base;
  s.min_leaf = cfg.min_leaf;
  s.offset = norm_quantile(mean);
  s.sparse_a = cfg.sparse_a;
  s.sparse_b = cfg.sparse_b;
  s.sparse_rho = cfg.sparse_rho;

  BinaryDraws out;
  out.config = cfg;
  out.grid = grid;
  out.offset = s.offset;
  out.train_size = X.rows();
  Chain chain(X, y01, grid, s, seed);
  run_chain(chain, cfg, out.chain, nullptr, 1.0);
  return out;
}

std::vector<double> binary_target(std::span<const int> y01) {
  std::vector<double> y(y01.size());
  bool seen0 = false, seen1 = false;
  for (std::size_t i = 0; i < y01.size(); ++i) {
    if (y01[i] != 0 && y01[i] != 1)
      throw DataError("binary label at row " + std::to_string(i) + " is not 0/1");
    y[i] = y01[i];
    (y01[i] ? seen1 : seen0) = true;
  }
  if (!seen0 || !seen1) throw DegenerateLabels("binary fit needs both classes present");
  return y;
}

}  // namespace

RegressionDraws fit_regression(const Matrix& X, std::span<const double> y, const BartConfig& cfg) {
  cfg.validate();
  if (X.rows() < 10)
    throw DataError("insufficient data: regression needs at least 10 rows, got " + std::to_string(X.rows()));
  if (y.size() != X.rows()) throw UsageError("response length does not match X rows");
  double lo = y[0], hi = y[0];
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) throw DataError("non-finite response at row " + std::to_string(i));
    lo = std::min(lo, y[i]);
    hi = std::max(hi, y[i]);
  }

  RegressionDraws out;
  out.config = cfg;
  out.grid = CutpointGrid::build(X, cfg.grid_size);
  out.rescale.center = 0.5 * (lo + hi);
  out.rescale.scale = hi > lo ? hi - lo : 1.0;
  std::vector<double> ys(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) ys[i] = (y[i] - out.rescale.center) / out.rescale.scale;

  const double sigma_hat = std::max(sigma_guess(X, ys), kSigmaFloor);
  const boost::math::chi_squared chi(cfg.sigma_df);
  const double q = boost::math::quantile(chi, 1.0 - cfg.sigma_quant);

  ChainSettings s;
  s.response = Response::continuous;
  s.num_trees = cfg.num_trees;
  s.leaf_sd = 0.5 / (cfg.k * std::sqrt(static_cast<double>(cfg.num_trees)));
  s.power = cfg.power;
  s.base = cfg.base;
  s.min_leaf = cfg.min_leaf;
  s.nu = cfg.sigma_df;
  s.lambda = sigma_hat * sigma_hat * q / cfg.sigma_df;
  s.sigma_init = sigma_hat;
  s.sparse_a = cfg.sparse_a;
  s.sparse_b = cfg.sparse_b;
  s.sparse_rho = cfg.sparse_rho;

  Chain chain(X, ys, out.grid, s, Rng::derive(cfg.seed, "regression"));
  run_chain(chain, cfg, out.chain, &out.sigma, out.rescale.scale);
  return out;
}

BinaryDraws fit_probit_binary(const Matrix& X, std::span<const int> y01, const BartConfig& cfg) {
  cfg.validate();
  if (y01.size() != X.rows()) throw UsageError("label length does not match X rows");
  const std::vector<double> y = binary_target(y01);
  const CutpointGrid grid = CutpointGrid::build(X, cfg.grid_size);
  return fit_stage(X, y, grid, cfg, stage_seed(cfg.seed, 1));
}

ClassifierDraws fit_multinomial(const Matrix& X, std::span<const int> labels, const BartConfig& cfg,
                                int num_classes) {
  cfg.validate();
  if (labels.size() != X.rows()) throw UsageError("label length does not match X rows");
  int K = num_classes;
  if (K == 0)
    for (int l : labels) K = std::max(K, l);
  if (K < 2) throw DegenerateLabels("multinomial fit needs at least 2 classes");
  std::vector<std::size_t> counts(K + 1, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1 || labels[i] > K)
      throw DataError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                      " outside 1.." + std::to_string(K));
    ++counts[labels[i]];
  }
  for (int h = 1; h < K; ++h) {
    std::size_t rest = 0;
    for (int g = h + 1; g <= K; ++g) rest += counts[g];
    if (counts[h] == 0 || rest == 0)
      throw DegenerateLabels("stage " + std::to_string(h) + ": class " +
                             std::to_string(counts[h] == 0 ? h : K) +
                             " absent from its conditional subset");
  }

  ClassifierDraws out;
  out.config = cfg;
  out.grid = CutpointGrid::build(X, cfg.grid_size);
  out.num_classes = K;
  out.stages.resize(K - 1);

  std::vector<std::exception_ptr> errors(K - 1);
#pragma omp parallel for schedule(dynamic, 1)
  for (int h = 1; h < K; ++h) {
    try {
      std::vector<std::size_t> rows;
      std::vector<double> y;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < h) continue;
        rows.push_back(i);
        y.push_back(labels[i] == h ? 1.0 : 0.0);
      }
      const Matrix Xh = rows.size() == X.rows() ? X : X.select_rows(rows);
      out.stages[h - 1] = fit_stage(Xh, y, out.grid, cfg, stage_seed(cfg.seed, h));
    } catch (...) {
      errors[h - 1] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

Matrix predict_regression_draws(const RegressionDraws& d, const Matrix& X) {
  Matrix out = latent_predictions(d.chain.ensembles, d.grid, X);
  for (double& v : out.data()) v = d.rescale.center + d.rescale.scale * v;
  return out;
}

std::vector<double> predict_regression(const RegressionDraws& d, const Matrix& X) {
  return kernels::draw_mean_omp(predict_regression_draws(d, X));
}

Matrix predict_binary_draws(const BinaryDraws& d, const Matrix& X) {
  Matrix out = latent_predictions(d.chain.ensembles, d.grid, X);
  for (double& v : out.data()) v = norm_cdf(d.offset + v);
  return out;
}

std::vector<double> predict_binary(const BinaryDraws& d, const Matrix& X) {
  return kernels::draw_mean_omp(predict_binary_draws(d, X));
}

std::vector<double> stage_to_class_probs(std::span<const double> stage_probs) {
  std::vector<double> pi(stage_probs.size() + 1);
  double remaining = 1.0;
  for (std::size_t h = 0; h < stage_probs.size(); ++h) {
    const double p = stage_probs[h];
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("stage probability outside [0, 1]");
    pi[h] = p * remaining;
    remaining *= 1.0 - p;
  }
  pi.back() = remaining;
  return pi;
}

ClassProbs class_probs_from_stage_draws(std::span<const Matrix> stage_probs) {
  if (stage_probs.empty()) throw UsageError("need at least one stage");
  const std::size_t nd = stage_probs[0].rows(), n = stage_probs[0].cols();
  for (const Matrix& m : stage_probs)
    if (m.rows() != nd || m.cols() != n) throw UsageError("stage probability shapes differ");
  const std::size_t K = stage_probs.size() + 1;
  ClassProbs out{Matrix(n, K)};
  const auto rows = static_cast<std::int64_t>(n);
  bool drift = false;
#pragma omp parallel for schedule(static) reduction(|| : drift)
  for (std::int64_t i = 0; i < rows; ++i) {
    std::vector<double> p(K - 1);
    auto acc = out.probs.row(i);
    for (std::size_t d = 0; d < nd; ++d) {
      for (std::size_t h = 0; h + 1 < K; ++h) p[h] = stage_probs[h](d, i);
      const auto pi = stage_to_class_probs(p);
      for (std::size_t c = 0; c < K; ++c) acc[c] += pi[c];
    }
    double sum = 0.0;
    for (double& v : acc) {
      v /= static_cast<double>(nd);
      sum += v;
    }
    if (std::abs(sum - 1.0) > kSimplexTolerance) {
      drift = true;
      continue;
    }
    for (double& v : acc) v /= sum;
  }
  if (drift) throw NumericError("class probabilities drifted from the simplex beyond tolerance");
  return out;
}

ClassProbs predict_class_probs(const ClassifierDraws& d, const Matrix& Xnew) {
  if (Xnew.cols() != d.grid.num_vars())
    throw UsageError("prediction matrix has " + std::to_string(Xnew.cols()) + " columns, model expects " +
                     std::to_string(d.grid.num_vars()));
  std::vector<Matrix> stages;
  stages.reserve(d.stages.size());
  for (const BinaryDraws& s : d.stages) stages.push_back(predict_binary_draws(s, Xnew));
  return class_probs_from_stage_draws(stages);
}

std::vector<int> predict_labels(const ClassProbs& probs) {
  std::vector<int> out(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const auto row = probs.probs.row(i);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
      if (row[c] > row[best]) best = c;
    out[i] = static_cast<int>(best) + 1;
  }
  return out;
}

}  // namespace sbart
