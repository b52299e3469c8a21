#pragma once

#include <span>
#include <vector>

#include "sbart/config.hpp"
#include "sbart/draws.hpp"
#include "sbart/matrix.hpp"

namespace sbart {

// Continuous response. y is mapped to [-0.5, 0.5] internally; predictions
// are returned in response units.
RegressionDraws fit_regression(const Matrix& X, std::span<const double> y, const BartConfig& cfg);

// Binary probit via latent-variable augmentation. Labels must be 0 or 1 and
// both must occur.
BinaryDraws fit_probit_binary(const Matrix& X, std::span<const int> y01, const BartConfig& cfg);

// Stacked conditional probit over labels 1..K. Stage h is fitted on the
// observations with label >= h, against the indicator label == h.
// num_classes = 0 takes K from the largest label.
ClassifierDraws fit_multinomial(const Matrix& X, std::span<const int> labels, const BartConfig& cfg,
                                int num_classes = 0);

// Seed of probit stage h (1-based). A binary fit uses stage 1.
std::uint64_t stage_seed(std::uint64_t seed, int stage);

// Per-draw predictions (draws x rows) and their posterior mean.
Matrix predict_regression_draws(const RegressionDraws& d, const Matrix& X);
std::vector<double> predict_regression(const RegressionDraws& d, const Matrix& X);
// Per-draw P(y = 1 | x) (draws x rows) and its posterior mean.
Matrix predict_binary_draws(const BinaryDraws& d, const Matrix& X);
std::vector<double> predict_binary(const BinaryDraws& d, const Matrix& X);

// Row-stochastic class probabilities, one row per observation, K columns.
struct ClassProbs {
  Matrix probs;
  std::size_t rows() const { return probs.rows(); }
  std::size_t classes() const { return probs.cols(); }
};

// Conditional stage probabilities p_1..p_{K-1} to class probabilities:
// pi_1 = p_1, pi_h = p_h * prod_{g<h} (1 - p_g), pi_K = prod_{g<K} (1 - p_g).
std::vector<double> stage_to_class_probs(std::span<const double> stage_probs);

// Rows whose sum drifts from 1 by at most this much are renormalised;
// larger drift throws NumericError.
inline constexpr double kSimplexTolerance = 1e-9;

// Posterior mean over draws of the per-draw class probabilities.
ClassProbs predict_class_probs(const ClassifierDraws& d, const Matrix& Xnew);
// Same, from per-stage per-draw probabilities (each draws x rows).
ClassProbs class_probs_from_stage_draws(std::span<const Matrix> stage_probs);

// Argmax per row, labels 1..K; ties go to the lowest class.
std::vector<int> predict_labels(const ClassProbs& probs);

}  // namespace sbart
