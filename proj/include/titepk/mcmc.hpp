#pragma once

// Adaptive random-walk Metropolis with split R-hat diagnostics.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace titepk::inference {

inline constexpr double kRhatWarn = 1.01;
inline constexpr double kRhatFail = 1.05;

struct MCMCConfig {
  int chains = 4;
  int warmup = 1000;
  int iterations = 1000;
  std::uint64_t seed = 1;
  double target_acceptance = 0.4;
  // Spread of the initial points around the supplied start, in scale units.
  double init_spread = 1.0;
  // Run chains on separate threads. Output is identical either way.
  bool parallel = false;

  void validate() const;
};

struct McmcDiagnostics {
  std::vector<double> rhat;        // split R-hat per dimension
  std::vector<double> acceptance;  // post-warmup acceptance rate per chain
  double max_rhat = 1.0;
  bool warn = false;  // max_rhat >= 1.01
  bool fail = false;  // max_rhat >= 1.05
};

class McmcResult {
 public:
  McmcResult(int dim, int chains, int iterations);

  int dim() const { return dim_; }
  int chains() const { return chains_; }
  int iterations() const { return iterations_; }
  double& at(int chain, int iter, int d) { return draws_[index(chain, iter, d)]; }
  double at(int chain, int iter, int d) const { return draws_[index(chain, iter, d)]; }
  // All draws of one coordinate, chain-major.
  std::vector<double> pooled(int d) const;
  std::size_t size() const { return static_cast<std::size_t>(chains_) * iterations_; }
  const std::vector<double>& raw() const { return draws_; }

  McmcDiagnostics diagnostics;

 private:
  std::size_t index(int chain, int iter, int d) const {
    return (static_cast<std::size_t>(chain) * iterations_ + iter) * dim_ + d;
  }
  int dim_, chains_, iterations_;
  std::vector<double> draws_;
};

using LogDensityN = std::function<double(std::span<const double>)>;

// Samples `log_density` starting near `initial`; `scale` gives a rough
// posterior scale per coordinate for the first proposals. Throws
// InitializationError if the start is not finite or a chain never accepts
// during warmup.
McmcResult sample(const LogDensityN& log_density, std::span<const double> initial, std::span<const double> scale,
                  const MCMCConfig& config);

// Split R-hat for one coordinate, chains given as equal-length vectors.
double split_rhat(const std::vector<std::vector<double>>& chains);

// Sample quantile with linear interpolation (type 7).
double empirical_quantile(std::vector<double> values, double p);

}  // namespace titepk::inference
