#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <optional>

#include "pann/fixtures.hpp"
#include "pann/loading.hpp"
#include "pann/models.hpp"

using namespace pann;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

OgdenParams one_term(double mu, double alpha) {
  OgdenParams p;
  p.mu = {mu};
  p.alpha = {alpha};
  return p;
}

// Bisection on the transverse residual, independent of the Newton path.
double bisect_transverse(const EnergyModel& m, Mode mode, double lambda) {
  double lo = 0.05, hi = 20.0;
  auto res = [&](double t) {
    return transverse_residual(m, mode, lambda, t).first;
  };
  double flo = res(lo);
  REQUIRE(flo * res(hi) < 0.0);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = res(mid);
    if ((flo < 0.0) == (fm < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("mode deformation gradients", "[loading]") {
  const DefGrad ut = mode_defgrad({Mode::UT, 4.0});
  CHECK(ut[0][0] == 4.0);
  CHECK(ut[1][1] == 0.5);
  CHECK(ut[2][2] == 0.5);
  const DefGrad et = mode_defgrad({Mode::ET, 2.0});
  CHECK(et[0][0] == 2.0);
  CHECK(et[1][1] == 2.0);
  CHECK(et[2][2] == 0.25);
  const DefGrad ps = mode_defgrad({Mode::PS, 2.0});
  CHECK(ps[0][0] == 2.0);
  CHECK(ps[1][1] == 1.0);
  CHECK(ps[2][2] == 0.5);
  CHECK(det3(ut) == 1.0);
  CHECK(det3(et) == 1.0);
  CHECK(det3(ps) == 1.0);
  CHECK(ut[0][1] == 0.0);
  CHECK_THROWS_AS(mode_defgrad({Mode::UT, 0.0}), DomainError);
  CHECK_THROWS_AS(mode_defgrad({Mode::UT, -1.2}), DomainError);

  const Vec3 ls = mode_stretches({Mode::ET, 2.0});
  CHECK(ls[0] == 2.0);
  CHECK(ls[2] == 0.25);
}

TEST_CASE("mode strings round-trip", "[loading]") {
  CHECK(to_string(Mode::UT) == "UT");
  CHECK(to_string(Mode::ET) == "ET");
  CHECK(to_string(Mode::PS) == "PS");
  CHECK(mode_from_string("PS") == Mode::PS);
  CHECK_THROWS_AS(mode_from_string("biaxial"), UnknownMode);
}

TEST_CASE("incompressible mode stresses, dyadic spot values", "[loading]") {
  const OgdenIncompressibleModel m(one_term(1.0, 2.0));
  // sigma(UT) = l^2 - 1/l at l = 4: all quantities dyadic, so exact.
  const Vec3 ut = incompressible_mode_stress(m, {Mode::UT, 4.0});
  CHECK(ut[0] == 15.75);
  CHECK(ut[1] == 0.0);
  CHECK(ut[2] == 0.0);
  const Vec3 et = incompressible_mode_stress(m, {Mode::ET, 2.0});
  CHECK(et[0] == 3.9375);  // l^2 - l^-4
  CHECK(et[1] == 3.9375);
  CHECK(et[2] == 0.0);
  const Vec3 ps = incompressible_mode_stress(m, {Mode::PS, 2.0});
  CHECK(ps[0] == 3.75);  // l^2 - l^-2
  CHECK(ps[1] == 0.75);  // 1 - l^-2
  CHECK(ps[2] == 0.0);
}

TEST_CASE("incompressible stresses match the closed forms", "[loading]") {
  const double mu = 1.3, alpha = 1.7;
  const OgdenIncompressibleModel m(one_term(mu, alpha));
  for (double l : {0.6, 0.85, 1.1, 1.45, 1.8}) {
    const double ut_ref =
        2.0 * mu / alpha * (std::pow(l, alpha) - std::pow(l, -alpha / 2.0));
    const double et_ref =
        2.0 * mu / alpha * (std::pow(l, alpha) - std::pow(l, -2.0 * alpha));
    CHECK_THAT(incompressible_mode_stress(m, {Mode::UT, l})[0],
               WithinRel(ut_ref, 1e-10) || WithinAbs(ut_ref, 1e-12));
    CHECK_THAT(incompressible_mode_stress(m, {Mode::ET, l})[0],
               WithinRel(et_ref, 1e-10) || WithinAbs(et_ref, 1e-12));
  }
}

TEST_CASE("compressible transverse solve, reference root", "[loading]") {
  const OgdenCompressibleModel m(ogden_fixture(1));
  const ModeStressResult r = compressible_mode_stress(m, {Mode::UT, 1.2});
  // Root of sigma_t = 0 for diag(1.2, t, t); the solver stops at
  // |sigma_t| < 1e-10 (1 + |sigma_1|), which bounds t to ~1e-12 here.
  CHECK_THAT(r.transverse, WithinAbs(0.92139301268845012477, 1e-11));
  CHECK_THAT(r.sigma[0], WithinAbs(2.5576053476788472176, 1e-9));
  CHECK_THAT(r.sigma[1], WithinAbs(0.0, 1e-9));
  CHECK_THAT(r.sigma[2], WithinAbs(0.0, 1e-9));
  CHECK(r.iterations > 0);
}

TEST_CASE("Newton root agrees with bisection", "[loading][property]") {
  const OgdenCompressibleModel m(ogden_fixture(1));
  for (Mode mode : {Mode::UT, Mode::ET, Mode::PS}) {
    for (double l : {0.85, 1.3}) {
      const ModeStressResult r = compressible_mode_stress(m, {mode, l});
      const double tb = bisect_transverse(m, mode, l);
      CHECK_THAT(r.transverse, WithinAbs(tb, 1e-8));
    }
  }
}

TEST_CASE("solution is independent of the initial guess", "[loading]") {
  const OgdenCompressibleModel m(ogden_fixture(1));
  const ModeSpec spec{Mode::ET, 1.35};
  const double t0 = compressible_mode_stress(m, spec).transverse;
  const double t1 = compressible_mode_stress(m, spec, 0.5).transverse;
  const double t2 = compressible_mode_stress(m, spec, 2.0).transverse;
  CHECK_THAT(t1, WithinAbs(t0, 1e-10));
  CHECK_THAT(t2, WithinAbs(t0, 1e-10));
}

TEST_CASE("identity stretch is a fixed point", "[loading]") {
  const OgdenCompressibleModel m(ogden_fixture(1));
  const ModeStressResult r = compressible_mode_stress(m, {Mode::UT, 1.0});
  CHECK_THAT(r.transverse, WithinAbs(1.0, 1e-12));
  CHECK_THAT(r.sigma[0], WithinAbs(0.0, 1e-10));
}

TEST_CASE("stiff volumetric response approaches incompressibility",
          "[loading]") {
  OgdenParams p = one_term(1.0, 2.0);
  p.kappa = 1e4;
  p.beta = 2.0;
  const OgdenCompressibleModel m(p);
  const ModeStressResult r = compressible_mode_stress(m, {Mode::UT, 1.2});
  CHECK_THAT(r.transverse, WithinAbs(0.91287092917527685576, 1e-2));
  // Volume change is small even though the model is compressible.
  const double j = 1.2 * r.transverse * r.transverse;
  CHECK_THAT(j, WithinAbs(1.0, 1e-2));
}

TEST_CASE("neural model passes through the mode solver", "[loading]") {
  const auto m = make_pann(ModelKind::LambdaPann, 3.0, 1, 5, 31);
  const ModeStressResult r = compressible_mode_stress(*m, {Mode::UT, 1.15});
  const auto [st, s1] =
      transverse_residual(*m, Mode::UT, 1.15, r.transverse);
  CHECK(std::abs(st) < 1e-10 * (1.0 + std::abs(s1)));
}

TEST_CASE("loading error paths", "[loading]") {
  const OgdenIncompressibleModel inc(one_term(1.0, 2.0));
  CHECK_THROWS_AS(compressible_mode_stress(inc, {Mode::UT, 1.2}),
                  IncompressibleUnsupported);
  const OgdenCompressibleModel m(ogden_fixture(1));
  CHECK_THROWS_AS(compressible_mode_stress(m, {Mode::UT, -2.0}), DomainError);
}
