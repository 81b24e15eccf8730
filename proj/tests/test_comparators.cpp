#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "titepk/comparators.hpp"
#include "titepk/errors.hpp"

using namespace titepk;
using namespace titepk::comparators;

namespace {

double ks(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

CrmConfig everolimus_crm() {
  CrmConfig c;
  c.skeleton = lee_cheung_skeleton(4, 0.30, 0.10, 2);
  c.doses = {2.5, 5.0, 7.5, 10.0};
  return c;
}

BinaryDoseData daily_counts() {
  auto all = fixture::everolimus("daily");
  return aggregate(all);
}

}  // namespace

TEST_CASE("lee-cheung skeletons") {
  const auto six = lee_cheung_skeleton(6, 0.30, 0.10, 3);
  CHECK(six.rounded() == std::vector<double>{0.02, 0.12, 0.30, 0.50, 0.68, 0.80});
  const auto four = lee_cheung_skeleton(4, 0.30, 0.10, 2);
  CHECK(four.rounded() == std::vector<double>{0.12, 0.30, 0.50, 0.68});

  for (int levels = 1; levels <= 8; ++levels)
    for (int nu = 1; nu <= levels; ++nu) {
      const auto s = lee_cheung_skeleton(levels, 0.25, 0.05, nu);
      CHECK(s.probs[nu - 1] == 0.25);
      for (int k = 1; k < levels; ++k) {
        CHECK(s.probs[k] > s.probs[k - 1]);
        // the power that lifts level k to the upper edge puts k-1 on the lower one
        const double e = std::log(0.30) / std::log(s.probs[k]);
        CHECK(std::pow(s.probs[k - 1], e) == doctest::Approx(0.20).epsilon(1e-12));
      }
    }
  CHECK_THROWS_AS(lee_cheung_skeleton(4, 0.3, 0.3, 2), CalibrationError);
  CHECK_THROWS_AS(lee_cheung_skeleton(4, 0.3, 0.1, 5), InvalidInput);
}

TEST_CASE("crm posterior against brute force and a sampler") {
  Rng rng(13, {0});
  for (int k = 0; k < 5; ++k) {
    CrmConfig c;
    c.skeleton = lee_cheung_skeleton(5, 0.30, 0.08, 3);
    c.doses = {1, 2, 3, 4, 5};
    c.scaling = k % 2 ? CrmScaling::skeleton : CrmScaling::prior_mean;
    BinaryDoseData data;
    for (double d : c.doses) {
      const int n = static_cast<int>(rng.uniform() * 6);
      int y = 0;
      for (int i = 0; i < n; ++i) y += rng.bernoulli(0.06 * d);
      if (n) data.push_back({d, "s", n, y});
    }
    const auto post = crm_fit(c, data);

    // pi_i = w_i^exp(a), w from the skeleton (standardised by E[exp(a)] = e^{sd^2/2})
    const double power = c.scaling == CrmScaling::prior_mean ? std::exp(-0.5 * c.prior_sd * c.prior_sd) : 1.0;
    auto logpost = [&](double a) {
      double lp = -0.5 * a * a / (c.prior_sd * c.prior_sd);
      for (const auto& dc : data) {
        const double w = std::pow(c.skeleton.probs[static_cast<std::size_t>(dc.dose) - 1], power);
        const double p = std::pow(w, std::exp(a));
        if (dc.dlts) lp += dc.dlts * std::log(p);
        if (dc.treated > dc.dlts) lp += (dc.treated - dc.dlts) * std::log1p(-p);
      }
      return lp;
    };
    const int n = 200000;
    const double lo = -16.0, hi = 16.0, h = (hi - lo) / n;
    std::vector<double> wts(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += wts[i] = std::exp(logpost(lo + (i + 0.5) * h));

    inference::MCMCConfig mc;
    mc.iterations = 50000;
    mc.seed = 30 + k;
    const double init[] = {0.0}, scale[] = {c.prior_sd};
    const auto draws = inference::sample([&](std::span<const double> x) { return logpost(x[0]); }, init, scale, mc);
    const auto alpha = draws.pooled(0);

    for (std::size_t i = 0; i < c.doses.size(); ++i) {
      const double w = std::pow(c.skeleton.probs[i], power);
      auto mass_above = [&](double t) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += std::pow(w, std::exp(lo + (j + 0.5) * h)) > t ? wts[j] : 0.0;
        return s / total;
      };
      auto mc_above = [&](double t) {
        double s = 0.0;
        for (double a : alpha) s += std::pow(w, std::exp(a)) > t;
        return s / alpha.size();
      };
      CAPTURE(k);
      CAPTURE(i);
      CHECK(post.prob_above(i, 0.40) == doctest::Approx(mass_above(0.40)).epsilon(1e-4).scale(1.0));
      CHECK(post.prob_below(i, 0.20) == doctest::Approx(1.0 - mass_above(0.20)).epsilon(1e-4).scale(1.0));
      CHECK(std::abs(post.prob_above(i, 0.40) - mc_above(0.40)) < 0.005);
      CHECK(std::abs(post.prob_below(i, 0.20) - (1.0 - mc_above(0.20))) < 0.005);
    }
  }
}

TEST_CASE("crm everolimus daily-only") {
  const auto post = crm_fit(everolimus_crm(), daily_counts());
  CHECK(post.prob_above(0, 0.30) == doctest::Approx(0.80).epsilon(0.05 / 0.80));
  CHECK(crm_safety_stop(0.95));
  CHECK_FALSE(crm_safety_stop(0.90));
  CHECK_FALSE(crm_safety_stop(0.80));

  // borrowing from the weekly stratum pulls the estimate down
  auto all = fixture::everolimus("full");
  std::vector<model::PatientOutcome> weekly;
  for (const auto& p : all)
    if (p.regimen.label == "weekly") weekly.push_back(p);
  CrmConfig w;
  w.skeleton = lee_cheung_skeleton(4, 0.30, 0.10, 2);
  w.doses = {20, 30, 40, 50};
  const auto lite = bcrm_lite_fit(w, aggregate(weekly), everolimus_crm(), daily_counts());
  CHECK(lite.prob_above(0, 0.30) < post.prob_above(0, 0.30));
}

TEST_CASE("crm recommendation") {
  const std::vector<double> med{0.1, 0.2, 0.4, 0.6};
  CHECK(crm_recommend(med, 0.30) == 1);  // tie goes low
  CHECK(crm_recommend(med, 0.55) == 3);
  CHECK(crm_recommend(med, 0.55, 1) == 2);  // no skipping
  CHECK(crm_recommend(med, 0.05, 3) == 0);  // de-escalation is free
  CrmConfig c = everolimus_crm();
  CHECK(c.index_of(7.5) == 2);
  CHECK_THROWS_AS(c.index_of(6.0), ConfigurationError);
  c.doses.pop_back();
  CHECK_THROWS_AS(crm_fit(c, {}), ConfigurationError);
}

TEST_CASE("blrm prior anchoring and everolimus") {
  BlrmPrior prior;  // logit(0.3), s1 2, ref 7.5
  const auto fresh = blrm_fit({}, prior);
  CHECK(fresh.quantile(7.5, 0.5) == doctest::Approx(0.30).epsilon(1e-3));
  prior.s1 = 1.25;
  prior.ref_dose = 5.0;
  CHECK(blrm_fit({}, prior).quantile(5.0, 0.5) == doctest::Approx(0.30).epsilon(1e-3));

  const auto post = blrm_fit(daily_counts(), prior);
  CHECK(post.prob_above(2.5, 0.40) == doctest::Approx(0.40).epsilon(0.05 / 0.40));
  // medians increase with dose
  double last = 0.0;
  for (double d : {2.5, 5.0, 7.5, 10.0}) {
    const double m = post.quantile(d, 0.5);
    CHECK(m > last);
    last = m;
  }
}

TEST_CASE("blrm grid against mcmc") {
  Rng rng(17, {0});
  BlrmPrior prior;
  inference::MCMCConfig mc;
  mc.iterations = 25000;
  mc.target_acceptance = 0.3;
  for (int k = 0; k < 5; ++k) {
    BinaryDoseData data;
    for (double d : {2.5, 5.0, 7.5, 10.0, 15.0}) {
      const int n = static_cast<int>(rng.uniform() * 7);
      int y = 0;
      for (int i = 0; i < n; ++i) y += rng.bernoulli(d / 30.0);
      if (n) data.push_back({d, "s", n, y});
    }
    mc.seed = 40 + k;
    const auto grid = blrm_fit(data, prior);
    const auto draws = blrm_fit(data, prior, Engine::mcmc, {}, mc);
    REQUIRE(draws.diagnostics().has_value());
    CHECK(draws.diagnostics()->max_rhat < inference::kRhatFail);
    for (double d : {2.5, 7.5, 15.0}) {
      CAPTURE(k);
      CAPTURE(d);
      CHECK(std::abs(grid.prob_above(d, 0.40) - draws.prob_above(d, 0.40)) < 0.01);
      CHECK(std::abs(grid.prob_below(d, 0.20) - draws.prob_below(d, 0.20)) < 0.01);
    }
    // every draw is increasing in dose, since alpha2 = exp(log alpha2) > 0
    for (const auto& [a, b] : draws.draws())
      CHECK(a + std::exp(b) * std::log(10.0 / 7.5) > a + std::exp(b) * std::log(5.0 / 7.5));
  }
}

TEST_CASE("blrm-map collapse limits") {
  // tau -> 0: one shared parameter, i.e. the pooled fit with the historical
  // doses rescaled to the current reference.
  // mu pinned (tiny prior sd): strata are independent and the current one
  // sees only its own data under a N(m, s^2 + tau^2) prior.
  Rng rng(1, {0});
  const double panel[] = {2.5, 5, 7.5, 10, 15};
  for (int k = 0; k < 10; ++k) {
    Stratum s1{{}, 7.5}, s2{{}, 5.0};
    for (double d : panel) {
      const int n = static_cast<int>(rng.uniform() * 7);
      int x = 0;
      for (int i = 0; i < n; ++i) x += rng.bernoulli(d / 25.0);
      if (n) s1.data.push_back({d, "a", n, x});
    }
    for (double d : {2.5, 5.0, 7.5}) {
      const int n = 1 + static_cast<int>(rng.uniform() * 5);
      int x = 0;
      for (int i = 0; i < n; ++i) x += rng.bernoulli(d / 15.0);
      s2.data.push_back({d, "b", n, x});
    }
    BlrmPrior prior;
    prior.ref_dose = 5.0;
    inference::MCMCConfig mc{4, 5000, 60000, static_cast<std::uint64_t>(10 + k), 0.25};

    Heterogeneity none;
    none.fixed_tau = std::array<double, 2>{0.01, 0.01};
    const auto map0 = blrm_map_fit(s1, s2, prior, none, mc);
    BinaryDoseData pooled = s2.data;
    for (auto c : s1.data) {
      c.dose *= 5.0 / 7.5;
      c.schedule = "a";
      pooled.push_back(c);
    }
    const auto grid0 = blrm_fit(pooled, prior);

    BlrmPrior pinned = prior;
    pinned.s1 = pinned.s2 = 0.02;
    Heterogeneity apart;
    apart.fixed_tau = std::array<double, 2>{2.0, 1.0};
    const auto map_inf = blrm_map_fit(s1, s2, pinned, apart, mc);
    BlrmPrior wide = prior;
    wide.s1 = std::hypot(0.02, 2.0);
    wide.s2 = std::hypot(0.02, 1.0);
    const auto grid_inf = blrm_fit(s2.data, wide);

    for (double d : {2.5, 5.0, 10.0}) {
      CAPTURE(k);
      CAPTURE(d);
      CHECK(ks(map0.sample_probability(d, 80000, 1), grid0.sample_probability(d, 200000, 2)) < 0.02);
      CHECK(ks(map_inf.sample_probability(d, 80000, 1), grid_inf.sample_probability(d, 200000, 2)) < 0.02);
    }
  }
}

TEST_CASE("blrm-map without history falls back") {
  Stratum empty{{}, 7.5}, cur{{{5.0, "b", 3, 1}}, 5.0};
  BlrmPrior prior;
  inference::MCMCConfig mc;
  mc.iterations = 2000;
  const auto post = blrm_map_fit(empty, cur, prior, {}, mc);
  CHECK(post.ref_dose() == 5.0);
  CHECK_FALSE(post.from_grid());
}

TEST_CASE("count data") {
  auto data = fixture::everolimus("full");
  const auto c = aggregate(data);
  REQUIRE(c.size() == 4);
  CHECK(c[0].schedule == "weekly");
  CHECK(c[0].treated == 5);
  CHECK(c[1].dlts == 4);
  CHECK(c[3].treated == 6);
  CHECK(c[3].dlts == 3);
  CHECK_THROWS_AS(validate({{5.0, "x", 2, 3}}), InvalidInput);
  CHECK_THROWS_AS(validate({{0.0, "x", 2, 1}}), InvalidInput);
}
