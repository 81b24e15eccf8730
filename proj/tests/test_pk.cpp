#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "titepk/errors.hpp"
#include "titepk/pk.hpp"
#include "titepk/rng.hpp"

using namespace titepk;
using namespace titepk::pk;

namespace {

const PKParams kPk = PKParams::from_log_keff(30.0, 0.37);

DosingRegimen daily(double dose) { return {dose, 24.0, kDefaultCycleLength, "daily"}; }

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("single dose effect concentration") {
  DosingRegimen once{7.5, kDefaultCycleLength, kDefaultCycleLength, "once"};
  const double c = effect_concentration(once, kPk, 24.0);
  CHECK(c == doctest::Approx(4.377).epsilon(1e-3));
  const auto ode = oracle::integrate_pk(7.5, kDefaultCycleLength, kPk.k_e(), kPk.k_eff, 24.0);
  CHECK(rel(c, ode.effect) < 1e-6);
}

TEST_CASE("reference AUC against trapezoid") {
  const auto ref = daily(7.5);
  const double closed = auc_effect(ref, kPk, kDefaultCycleLength);
  const double trap = oracle::trapezoid([&](double t) { return effect_concentration(ref, kPk, t); }, 0.0,
                                        kDefaultCycleLength, 10000);
  CHECK(closed > 0.0);
  CHECK(rel(closed, trap) < 1e-5);
  ReferenceScale scale(ref, kPk);
  CHECK(scale.scale() == doctest::Approx(closed).epsilon(1e-14));
}

TEST_CASE("closed forms against the ODE on random draws") {
  Rng rng(7, {0});
  const double intervals[] = {12.0, 24.0, 48.0, 72.0, 168.0};
  for (int i = 0; i < 100; ++i) {
    const double half_life = 2.0 + 80.0 * rng.uniform();
    const double log_keff = -3.0 + 4.0 * rng.uniform();
    const PKParams pk = PKParams::from_log_keff(half_life, log_keff);
    const DosingRegimen r{0.5 + 20.0 * rng.uniform(), intervals[i % 5], kDefaultCycleLength, ""};
    // keep clear of dosing instants, where C jumps
    double t = 1.0 + 500.0 * rng.uniform();
    if (std::fmod(t, r.interval) < 1e-3) t += 0.01;
    const auto ode = oracle::integrate_pk(r.dose, r.interval, pk.k_e(), pk.k_eff, t);
    CAPTURE(i);
    CHECK(rel(central_concentration(r, pk, t), ode.central) < 1e-6);
    CHECK(rel(effect_concentration(r, pk, t), ode.effect) < 1e-6);
    CHECK(rel(auc_effect(r, pk, t), ode.auc) < 1e-6);
  }
}

TEST_CASE("normalised exposure") {
  const ReferenceScale ref(daily(7.5), kPk);
  CHECK(std::abs(cycle_exposure(daily(7.5), kPk, ref) - 1.0) < 1e-10);
  CHECK(cycle_exposure(daily(3.75), kPk, ref) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cycle_exposure(daily(2.5), kPk, ref) / cycle_exposure(daily(7.5), kPk, ref) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  // the scale is only valid for its own pk
  PKParams other = kPk;
  other.half_life = 20.0;
  CHECK_THROWS_AS(exposure(daily(5.0), other, ref, 100.0), ConfigurationError);
  CHECK_THROWS_AS(cycle_exposure(daily(5.0), other, ref), ConfigurationError);
}

TEST_CASE("exposure is monotone in dose and frequency") {
  const ReferenceScale ref(daily(7.5), kPk);
  Rng rng(11, {0});
  for (int i = 0; i < 50; ++i) {
    const double d = 0.5 + 20.0 * rng.uniform();
    const double interval = 6.0 + 160.0 * rng.uniform();
    const DosingRegimen r{d, interval, kDefaultCycleLength, ""};
    CHECK(cycle_exposure(r.with_dose(d * 1.01), kPk, ref) > cycle_exposure(r, kPk, ref));
    DosingRegimen denser = r;
    denser.interval = interval * 0.9;
    CHECK(cycle_exposure(denser, kPk, ref) > cycle_exposure(r, kPk, ref));
  }
}

TEST_CASE("equal rates use the limit without a jump") {
  PKParams same{30.0, std::log(2.0) / 30.0};
  const double k = same.k_e();
  same.k_eff = k;
  const auto r = daily(5.0);
  for (double t : {3.0, 50.0, 300.0, 504.0}) {
    const double lim_c = effect_concentration(r, same, t);
    const double lim_a = auc_effect(r, same, t);
    for (double f : {1.0 - 1e-9, 1.0 + 1e-9, 1.0 - 1e-7, 1.0 + 1e-7}) {
      PKParams near{30.0, k * f};
      CHECK(rel(effect_concentration(r, near, t), lim_c) < 1e-6);
      CHECK(rel(auc_effect(r, near, t), lim_a) < 1e-6);
    }
  }
  // and the limit branch is itself right
  const auto ode = oracle::integrate_pk(5.0, 24.0, k, k, 300.0);
  CHECK(rel(effect_concentration(r, same, 300.0), ode.effect) < 1e-6);
}

TEST_CASE("shifting by one interval") {
  // C_eff(t) = C_eff(t - I) + contribution of the dose at 0
  const auto r = daily(5.0);
  const DosingRegimen once{5.0, kDefaultCycleLength, kDefaultCycleLength, ""};
  for (double t : {30.0, 100.5, 250.0, 480.0}) {
    CHECK(effect_concentration(r, kPk, t) ==
          doctest::Approx(effect_concentration(r, kPk, t - 24.0) + effect_concentration(once, kPk, t)).epsilon(1e-12));
  }
}

TEST_CASE("dosing times are half-open") {
  CHECK(dosing_times(daily(1.0), 504.0).size() == 21);
  CHECK(dosing_times({1.0, 168.0, 504.0, ""}, 504.0).size() == 3);
  CHECK(dosing_times({1.0, 48.0, 504.0, ""}, 504.0).size() == 11);
  // a dose exactly at t counts for C but has no area yet
  const auto r = daily(2.0);
  CHECK(central_concentration(r, kPk, 24.0) > central_concentration(r, kPk, 23.999));
  CHECK(auc_effect(r, kPk, 24.0) == doctest::Approx(auc_effect(r, kPk, 24.0 - 1e-9)).epsilon(1e-8));
  CHECK(effect_concentration(r, kPk, 0.0) == 0.0);
}

TEST_CASE("invalid inputs") {
  CHECK_THROWS_AS(PKParams::from_log_keff(-1.0, 0.0), InvalidInput);
  CHECK_THROWS_AS((DosingRegimen{0.0, 24.0, 504.0, ""}.validate()), InvalidInput);
  CHECK_THROWS_AS((DosingRegimen{1.0, 600.0, 504.0, ""}.validate()), InvalidInput);
  CHECK_THROWS_AS(effect_concentration(daily(1.0), kPk, -1.0), InvalidInput);
}
