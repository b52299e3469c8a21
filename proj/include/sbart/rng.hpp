#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace sbart {

// Random stream used by every stochastic stage. The engine is mt19937_64,
// whose output sequence is fixed by the standard; the variate transforms are
// written out here instead of using <random> distributions, whose algorithms
// differ between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Seed for an independent named sub-stream of a master seed.
  static std::uint64_t derive(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

  std::uint64_t bits() { return engine_(); }
  // Uniform on the open interval (0, 1).
  double uniform();
  // Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  // log of a Gamma(shape, 1) variate; stays finite for very small shapes.
  double log_gamma(double shape);
  double gamma(double shape);
  double chi_square(double df) { return 2.0 * gamma(0.5 * df); }
  // Index drawn with probability proportional to weights (nonnegative, not all zero).
  std::size_t discrete(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Standard normal CDF and its inverse.
double norm_cdf(double x);
double norm_quantile(double p);

// N(mean, 1) truncated to (0, inf) when positive is true, else to (-inf, 0].
// Inverse-CDF sampling, with an exponential-proposal rejection sampler in
// the far tail (truncation point more than six standard deviations into it).
double truncated_normal(Rng& rng, double mean, bool positive);

}  // namespace sbart
