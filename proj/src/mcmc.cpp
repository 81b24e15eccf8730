#include "titepk/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>

#include "titepk/errors.hpp"
#include "titepk/rng.hpp"

namespace titepk::inference {
namespace {

// Lower Cholesky factor of a symmetric matrix (row-major, dim x dim).
// Returns false if the matrix is not positive definite.
bool cholesky(std::vector<double>& a, int dim) {
  for (int j = 0; j < dim; ++j) {
    double s = a[j * dim + j];
    for (int k = 0; k < j; ++k) s -= a[j * dim + k] * a[j * dim + k];
    if (!(s > 0.0)) return false;
    const double d = std::sqrt(s);
    a[j * dim + j] = d;
    for (int i = j + 1; i < dim; ++i) {
      double t = a[i * dim + j];
      for (int k = 0; k < j; ++k) t -= a[i * dim + k] * a[j * dim + k];
      a[i * dim + j] = t / d;
    }
    for (int k = j + 1; k < dim; ++k) a[j * dim + k] = 0.0;
  }
  return true;
}

struct ChainOutput {
  double warmup_acceptance = 0.0;
  double acceptance = 0.0;
};

ChainOutput run_chain(const LogDensityN& f, std::span<const double> initial, std::span<const double> scale,
                      const MCMCConfig& config, int chain, McmcResult& out) {
  const int dim = static_cast<int>(initial.size());
  Rng rng(config.seed, {static_cast<std::uint64_t>(chain)});

  std::vector<double> x(initial.begin(), initial.end());
  double lp = f(x);
  if (!std::isfinite(lp)) throw InitializationError("log density is not finite at the initial point");
  {
    std::vector<double> trial(dim);
    for (int attempt = 0; attempt < 50; ++attempt) {
      for (int d = 0; d < dim; ++d) trial[d] = initial[d] + config.init_spread * scale[d] * rng.normal();
      const double v = f(trial);
      if (std::isfinite(v)) {
        x = trial;
        lp = v;
        break;
      }
    }
  }

  // Proposal: x + lambda * L z.
  std::vector<double> chol(static_cast<std::size_t>(dim) * dim, 0.0);
  for (int d = 0; d < dim; ++d) chol[d * dim + d] = scale[d];
  double log_lambda = std::log(2.38 / std::sqrt(static_cast<double>(dim)));

  // Covariance windows at 25%, 50% and 75% of warmup.
  const int w1 = config.warmup / 4, w2 = config.warmup / 2, w3 = 3 * config.warmup / 4;
  std::vector<double> mean(dim, 0.0), m2(static_cast<std::size_t>(dim) * dim, 0.0);
  int window_count = 0;
  auto reset_window = [&] {
    std::fill(mean.begin(), mean.end(), 0.0);
    std::fill(m2.begin(), m2.end(), 0.0);
    window_count = 0;
  };
  auto update_proposal = [&] {
    if (window_count < 2 * dim + 10) return;
    std::vector<double> cov(m2.size());
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) {
        cov[i * dim + j] = m2[i * dim + j] / (window_count - 1);
        if (i == j) cov[i * dim + j] += 1e-10 * scale[i] * scale[i];
      }
    if (cholesky(cov, dim)) {
      chol = std::move(cov);
      log_lambda = std::log(2.38 / std::sqrt(static_cast<double>(dim)));
    }
  };

  std::vector<double> z(dim), prop(dim), delta(dim);
  long warm_accept = 0, accept = 0;
  const int total = config.warmup + config.iterations;
  for (int t = 0; t < total; ++t) {
    for (int d = 0; d < dim; ++d) z[d] = rng.normal();
    const double lambda = std::exp(log_lambda);
    for (int i = 0; i < dim; ++i) {
      double s = 0.0;
      for (int k = 0; k <= i; ++k) s += chol[i * dim + k] * z[k];
      prop[i] = x[i] + lambda * s;
    }
    const double lp_prop = f(prop);
    double alpha = 0.0;
    if (std::isfinite(lp_prop)) alpha = lp_prop >= lp ? 1.0 : std::exp(lp_prop - lp);
    const bool accepted = rng.uniform() < alpha;
    if (accepted) {
      x.swap(prop);
      lp = lp_prop;
    }
    if (t < config.warmup) {
      warm_accept += accepted;
      log_lambda += (alpha - config.target_acceptance) / std::pow(t + 1.0, 0.6);
      if (t >= w1) {
        ++window_count;
        for (int d = 0; d < dim; ++d) delta[d] = x[d] - mean[d];
        for (int d = 0; d < dim; ++d) mean[d] += delta[d] / window_count;
        for (int i = 0; i < dim; ++i)
          for (int j = 0; j < dim; ++j) m2[i * dim + j] += delta[i] * (x[j] - mean[j]);
      }
      if (t + 1 == w2 || t + 1 == w3) {
        update_proposal();
        reset_window();
      }
    } else {
      accept += accepted;
      const int iter = t - config.warmup;
      for (int d = 0; d < dim; ++d) out.at(chain, iter, d) = x[d];
    }
  }
  if (config.warmup > 0 && warm_accept == 0)
    throw InitializationError("no proposal was accepted during adaptation");
  return {config.warmup > 0 ? static_cast<double>(warm_accept) / config.warmup : 0.0,
          static_cast<double>(accept) / config.iterations};
}

}  // namespace

void MCMCConfig::validate() const {
  if (chains < 1 || warmup < 0 || iterations < 1) throw InvalidInput("MCMC counts must be positive");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) throw InvalidInput("target acceptance must be in (0,1)");
}

McmcResult::McmcResult(int dim, int chains, int iterations)
    : dim_(dim), chains_(chains), iterations_(iterations),
      draws_(static_cast<std::size_t>(dim) * chains * iterations, 0.0) {}

std::vector<double> McmcResult::pooled(int d) const {
  std::vector<double> v;
  v.reserve(size());
  for (int c = 0; c < chains_; ++c)
    for (int i = 0; i < iterations_; ++i) v.push_back(at(c, i, d));
  return v;
}

McmcResult sample(const LogDensityN& log_density, std::span<const double> initial, std::span<const double> scale,
                  const MCMCConfig& config) {
  config.validate();
  if (initial.empty() || initial.size() != scale.size()) throw InvalidInput("initial point and scale must match");
  const int dim = static_cast<int>(initial.size());
  McmcResult result(dim, config.chains, config.iterations);
  std::vector<ChainOutput> outputs(config.chains);

  if (config.parallel && config.chains > 1) {
    std::vector<std::exception_ptr> errors(config.chains);
    std::vector<std::thread> threads;
    for (int c = 0; c < config.chains; ++c)
      threads.emplace_back([&, c] {
        try {
          outputs[c] = run_chain(log_density, initial, scale, config, c, result);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    for (auto& t : threads) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  } else {
    for (int c = 0; c < config.chains; ++c) outputs[c] = run_chain(log_density, initial, scale, config, c, result);
  }

  auto& diag = result.diagnostics;
  for (const auto& o : outputs) diag.acceptance.push_back(o.acceptance);
  for (int d = 0; d < dim; ++d) {
    std::vector<std::vector<double>> chains(config.chains);
    for (int c = 0; c < config.chains; ++c) {
      chains[c].reserve(config.iterations);
      for (int i = 0; i < config.iterations; ++i) chains[c].push_back(result.at(c, i, d));
    }
    diag.rhat.push_back(split_rhat(chains));
  }
  diag.max_rhat = *std::max_element(diag.rhat.begin(), diag.rhat.end());
  diag.warn = !(diag.max_rhat < kRhatWarn);
  diag.fail = !(diag.max_rhat < kRhatFail);
  return result;
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  if (chains.empty()) throw InvalidInput("split R-hat needs at least one chain");
  const std::size_t n = chains.front().size() / 2;
  if (n < 2) throw InvalidInput("split R-hat needs at least 4 draws per chain");
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    if (c.size() != chains.front().size()) throw InvalidInput("chains must have equal length");
    for (int half = 0; half < 2; ++half) {
      const auto begin = c.begin() + (half == 0 ? 0 : static_cast<std::ptrdiff_t>(c.size() - n));
      const double m = std::accumulate(begin, begin + static_cast<std::ptrdiff_t>(n), 0.0) / n;
      double v = 0.0;
      for (auto it = begin; it != begin + static_cast<std::ptrdiff_t>(n); ++it) v += (*it - m) * (*it - m);
      means.push_back(m);
      vars.push_back(v / (n - 1));
    }
  }
  const double m = static_cast<double>(means.size());
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= static_cast<double>(n) / (m - 1.0);
  const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
  if (w == 0.0) return b == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

double empirical_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw InvalidInput("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (values.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - lo) * (values[hi] - values[lo]);
}

}  // namespace titepk::inference
