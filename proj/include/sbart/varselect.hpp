#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sbart/draws.hpp"
#include "sbart/rng.hpp"

namespace sbart {

// Split-usage importance: f_ij = v_ij / sum_k v_ik per draw, averaged over
// draws. Draws without any split are skipped and counted.
struct UsageSummary {
  std::vector<double> mean;           // per variable
  std::vector<double> lower, upper;   // 2.5% / 97.5% empirical percentiles over draws
  std::vector<std::size_t> ranking;   // variables by mean descending, ties by index
  std::size_t draws_used = 0;
  std::size_t draws_skipped = 0;
};

UsageSummary usage_frequencies(const VarcountMatrix& vc);

struct TopSelection {
  std::vector<std::size_t> vars;
  double cumulative = 0.0;  // summed mean proportion of the selected variables
};

TopSelection select_top(const UsageSummary& us, std::size_t n_top);

// s ~ Dirichlet(theta/p + counts_1, ..., theta/p + counts_p).
std::vector<double> dirichlet_update(std::span<const double> counts, double theta, Rng& rng);
// Same draw, returned on the log scale; entries never underflow to -inf.
std::vector<double> dirichlet_update_log(std::span<const double> counts, double theta, Rng& rng);

// Full conditional of theta given s on the grid lambda_k = k/1001,
// theta_k = lambda_k rho / (1 - lambda_k), k = 1..1000, with
// lambda ~ Beta(a, b). Weights are normalised.
struct ThetaGrid {
  std::vector<double> theta;
  std::vector<double> weight;
  std::size_t mode() const;
};
ThetaGrid theta_posterior(std::span<const double> log_s, double a, double b, double rho);

// Draws theta from the grid conditional. The current value does not enter a
// Gibbs step; it is accepted for call-site symmetry and validated.
double theta_update(double theta, std::span<const double> s, Rng& rng, double a = 0.5,
                    double b = 1.0, double rho = 0.0);
double theta_update_log(std::span<const double> log_s, Rng& rng, double a, double b, double rho);

// Posterior mean selection probabilities of one chain and the 1/p rule:
// selected = { j : mean_j > 1/p } (strict).
struct StageSelection {
  int stage = 1;
  std::vector<double> mean;
  double threshold = 0.0;
  std::vector<std::size_t> selected;
  // Stages beyond the second fit a conditional subset that can be small.
  bool conditional_small_support = false;
};

StageSelection stage_selection(const Matrix& varprob, int stage);

struct SparseSummary {
  std::vector<StageSelection> stages;  // one per probit stage, stage 1 first
};

SparseSummary sparse_selection(const ClassifierDraws& draws);

// Varcount of a stacked classifier summed over stages, draw by draw.
VarcountMatrix combined_varcount(const ClassifierDraws& draws);

// Recount splits per variable from stored ensembles.
namespace kernels {
VarcountMatrix varcount_serial(std::span<const Ensemble> draws, std::size_t num_vars);
VarcountMatrix varcount_omp(std::span<const Ensemble> draws, std::size_t num_vars);
}  // namespace kernels

}  // namespace sbart
