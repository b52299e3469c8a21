#pragma once

#include <cstddef>
#include <cstdint>

namespace sbart {

// Hyperparameters of one BART fit. Defaults follow the usual BART software
// conventions: m = 200, k = 2, power = 2, base = 0.95.
struct BartConfig {
  std::size_t num_trees = 200;  // m
  double k = 2.0;               // leaf-prior shrinkage
  double power = 2.0;           // depth penalty exponent
  double base = 0.95;           // split probability at the root
  std::size_t ndpost = 1000;    // retained draws
  std::size_t nskip = 100;      // burn-in sweeps
  bool sparse = false;          // Dirichlet prior on split-variable probabilities
  std::uint64_t seed = 1;
  double sigma_df = 3.0;        // nu of the scaled-inverse-chi^2 prior (regression)
  double sigma_quant = 0.9;     // P(sigma < sigma_hat) under the prior
  std::size_t grid_size = 100;  // cutpoints per predictor
  std::size_t min_leaf = 5;     // proposals leaving fewer observations in a leaf are rejected
  // Sparse prior: theta/(theta+rho) ~ Beta(a, b); rho = 0 means rho = p.
  double sparse_a = 0.5;
  double sparse_b = 1.0;
  double sparse_rho = 0.0;

  // Throws UsageError naming the offending field.
  void validate() const;

  friend bool operator==(const BartConfig&, const BartConfig&) = default;
};

}  // namespace sbart
