#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <memory>
#include <vector>

#include "pann/datagen.hpp"
#include "pann/fixtures.hpp"
#include "pann/models.hpp"

using namespace pann;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Rotation about a unit axis by angle (Rodrigues).
Mat3 rotation(const Vec3& axis, double angle) {
  const Vec3 u = normalized(axis);
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r[i][j] = (1.0 - c) * u[i] * u[j];
  r[0][0] += c;
  r[1][1] += c;
  r[2][2] += c;
  r[0][1] -= s * u[2];
  r[1][0] += s * u[2];
  r[0][2] += s * u[1];
  r[2][0] -= s * u[1];
  r[1][2] -= s * u[0];
  r[2][1] += s * u[0];
  return r;
}

const SpectralState kState = spectral_from_stretches(1.3, 0.9, 1.05);

double fd_energy(const EnergyModel& m, const Vec3& l, int axis, double h) {
  Vec3 lp = l, lm = l;
  lp[axis] += h;
  lm[axis] -= h;
  const double ep =
      m.energy(spectral_from_stretches(lp[0], lp[1], lp[2]));
  const double em =
      m.energy(spectral_from_stretches(lm[0], lm[1], lm[2]));
  return (ep - em) / (2.0 * h);
}

void check_gradient(const EnergyModel& m, rng::Stream& rs, int trials) {
  for (int i = 0; i < trials; ++i) {
    Vec3 l{};
    for (auto& x : l) x = rs.next_uniform(0.7, 1.6);
    const SpectralState s = spectral_from_stretches(l[0], l[1], l[2]);
    const Vec3 g = m.stretch_derivatives(s);
    const Vec3 sorted = s.stretches;
    for (int a = 0; a < 3; ++a) {
      const double fd = fd_energy(m, sorted, a, 1e-6 * sorted[a]);
      CHECK_THAT(g[a], WithinRel(fd, 2e-6) || WithinAbs(fd, 1e-8));
    }
  }
}

}  // namespace

TEST_CASE("compressible Ogden reference values", "[models]") {
  const OgdenCompressibleModel m(ogden_fixture(1));
  // Stretches sorted descending: (1.3, 1.05, 0.9).
  CHECK_THAT(m.energy(kState), WithinRel(1.2072061139785255979, 5e-13));
  const Vec3 g = m.stretch_derivatives(kState);
  CHECK_THAT(g[0], WithinRel(7.6679797799999135437, 5e-13));
  CHECK_THAT(g[1], WithinRel(7.3805627005091298804, 5e-13));
  CHECK_THAT(g[2], WithinRel(7.1713068258476887542, 5e-13));
  const Mat3 sig = cauchy_stress(m, diag3(1.3, 1.05, 0.9));
  CHECK_THAT(sig[0][0], WithinRel(8.1142643174602259721, 5e-13));
  CHECK_THAT(sig[1][1], WithinRel(6.3081732482984016072, 5e-13));
  CHECK_THAT(sig[2][2], WithinRel(5.2537046343206511020, 5e-13));
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      if (r != c) CHECK_THAT(sig[r][c], WithinAbs(0.0, 1e-12));
}

TEST_CASE("generalized invariant Ogden reference values", "[models]") {
  const GenOgdenModel m(genogden_fixture(1));
  CHECK_THAT(m.energy(kState), WithinRel(1.4600590475308456193, 5e-13));
  const Mat3 sig = cauchy_stress(m, diag3(1.3, 1.05, 0.9));
  CHECK_THAT(sig[0][0], WithinRel(7.4559958302308629112, 5e-13));
  CHECK_THAT(sig[1][1], WithinRel(1.0425198668674445947, 5e-13));
  CHECK_THAT(sig[2][2], WithinRel(-4.8887729407825631408, 5e-13));
}

TEST_CASE("general Ogden expansion reference values", "[models]") {
  const LedretModel m(LedretParams{{2.0, 1.5}, {1.2}, 0.7});
  CHECK_THAT(m.stress_free_slope(), WithinRel(9.13, 1e-14));
  CHECK_THAT(m.energy(kState), WithinRel(14.670222011300313274, 5e-13));
  const Mat3 sig = cauchy_stress(m, diag3(1.3, 1.05, 0.9));
  CHECK_THAT(sig[0][0], WithinRel(3.1700607804944999334, 5e-12));
  CHECK_THAT(sig[1][1], WithinRel(0.19307765001660989064, 5e-12));
  CHECK_THAT(sig[2][2], WithinRel(-1.4536642133967678148, 5e-12));

  // Dyadic single-term case evaluates exactly.
  const LedretModel simple(LedretParams{{2.0}, {}, 1.0});
  CHECK(simple.energy(spectral_from_stretches(2.0, 1.0, 1.0)) == 10.25);
  // The linear correction makes the reference state stress-free.
  const Mat3 s0 = cauchy_stress(simple, identity3());
  CHECK_THAT(max_abs_entry(s0), WithinAbs(0.0, 1e-14));
}

TEST_CASE("incompressible Ogden deviatoric energy", "[models]") {
  OgdenParams p;
  p.mu = {1.0};
  p.alpha = {2.0};
  const OgdenIncompressibleModel m(p);
  CHECK(m.incompressible());
  CHECK_THAT(m.energy(kState), WithinRel(0.30125, 1e-14));
  CHECK_THROWS_AS(cauchy_stress(m, diag3(1.3, 1.05, 0.9)),
                  IncompressibleUnsupported);
}

TEST_CASE("baseline energies vanish at the identity", "[models]") {
  const SpectralState id = spectral_from_stretches(1.0, 1.0, 1.0);
  CHECK(OgdenCompressibleModel(ogden_fixture(1)).energy(id) == 0.0);
  // The I2 branch pairs pow(i2b, 1.5) against 3 sqrt 3; the two roundings
  // may differ by an ulp, so the reference energy is only zero to rounding.
  CHECK_THAT(GenOgdenModel(genogden_fixture(1)).energy(id),
             WithinAbs(0.0, 1e-13));
  OgdenParams p;
  p.mu = {1.0};
  p.alpha = {2.0};
  CHECK(OgdenIncompressibleModel(p).energy(id) == 0.0);
  // The general expansion has a nonzero reference energy by construction,
  // but a zero reference stress.
  const LedretModel le(LedretParams{{2.0, 1.5}, {1.2}, 0.7});
  const Mat3 s0 = cauchy_stress(le, identity3());
  CHECK_THAT(max_abs_entry(s0), WithinAbs(0.0, 1e-12));
}

TEST_CASE("stretch derivatives match finite differences", "[models][property]") {
  rng::Stream rs(21);
  check_gradient(OgdenCompressibleModel(ogden_fixture(1)), rs, 30);
  check_gradient(GenOgdenModel(genogden_fixture(1)), rs, 30);
  check_gradient(LedretModel(LedretParams{{2.0, 1.5}, {1.2}, 0.7}), rs, 30);
  const auto nn = make_pann(ModelKind::LambdaPann, 3.0, 1, 4, 5);
  check_gradient(*nn, rs, 10);
}

TEST_CASE("neural models are stress-free with reference energy 2 eps",
          "[models]") {
  const SpectralState id = spectral_from_stretches(1.0, 1.0, 1.0);
  for (ModelKind kind :
       {ModelKind::LambdaPann, ModelKind::LambdaPannNoPhi,
        ModelKind::LambdaPannAdditive, ModelKind::IPann}) {
    const auto m = make_pann(kind, 3.0, 2, 6, 77);
    CHECK(m->energy(id) == 0.02);  // growth term eps (1/J + J^2) at J = 1
    // Calibration makes the offsets kill the identity stress; by isotropy
    // the three offsets coincide bitwise.
    CHECK(m->offsets[0] == m->offsets[1]);
    CHECK(m->offsets[1] == m->offsets[2]);
    const Mat3 s0 = cauchy_stress(*m, identity3());
    CHECK_THAT(max_abs_entry(s0), WithinAbs(0.0, 1e-10));
  }
}

TEST_CASE("zeroed network leaves only the growth offsets", "[models]") {
  auto m = make_pann(ModelKind::LambdaPann, 3.0, 2, 6, 3);
  m->visit_stacks([](const std::string&, LayerStack& st) {
    visit_params(st, [](double& v, ParamKind, bool, std::ptrdiff_t) {
      v = 0.0;
    });
  });
  m->calibrate();
  // d/dl_a of eps (1/J + J^2) at the identity is exactly eps.
  CHECK(m->offsets[0] == 0.01);
  CHECK(m->offsets[1] == 0.01);
  CHECK(m->offsets[2] == 0.01);
}

TEST_CASE("parameter counts for the reference architecture", "[models]") {
  const auto m = make_pann(ModelKind::LambdaPann, 3.0, 2, 10, 1);
  CHECK(m->total_params() == 823);
  CHECK(m->active_params() == m->total_params());
  CHECK_FALSE(m->has_gates());
  std::size_t weights = 0;
  m->visit_stacks([&](const std::string&, const LayerStack& st) {
    weights += weight_count(st);
  });
  CHECK(m->total_weights() == weights);
}

TEST_CASE("objectivity of the Cauchy stress", "[models][property]") {
  rng::Stream rs(rng::mix(9, detail::kDatagenLabel));
  const OgdenCompressibleModel ogden(ogden_fixture(1));
  const auto nn = make_pann(ModelKind::LambdaPann, 3.0, 1, 5, 9);
  for (int i = 0; i < 20; ++i) {
    const DefGrad f = sample_defgrad(rs, 0.25);
    Vec3 axis{rs.next_uniform(-1.0, 1.0), rs.next_uniform(-1.0, 1.0),
              rs.next_uniform(-1.0, 1.0)};
    const Mat3 q = rotation(axis, rs.next_uniform(0.0, 3.0));
    for (const EnergyModel* m :
         {static_cast<const EnergyModel*>(&ogden),
          static_cast<const EnergyModel*>(nn.get())}) {
      const Mat3 sig = cauchy_stress(*m, f);
      const Mat3 rot = cauchy_stress(*m, matmul(q, f));
      const Mat3 expect = matmul(q, matmul(sig, transpose(q)));
      double err = 0.0;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          err = std::max(err, std::abs(rot[r][c] - expect[r][c]));
      CHECK_THAT(err, WithinAbs(0.0, 1e-8 * (1.0 + max_abs_entry(sig))));
    }
  }
}

TEST_CASE("stress is continuous across repeated stretches", "[models]") {
  const GenOgdenModel m(genogden_fixture(1));
  const Mat3 exact = cauchy_stress(m, diag3(2.0, 1.0, 1.0));
  const Mat3 near = cauchy_stress(m, diag3(2.0, 1.0 + 1e-7, 1.0 - 1e-7));
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      CHECK_THAT(near[r][c], WithinAbs(exact[r][c], 1e-5));
}

TEST_CASE("parameter validation", "[models]") {
  OgdenParams bad;
  bad.mu = {1.0};
  bad.alpha = {-2.0};  // mu*alpha < 0
  CHECK_THROWS_AS(OgdenIncompressibleModel(bad), DomainError);
  bad.alpha = {0.5};  // |alpha| <= 1
  bad.mu = {0.5};
  CHECK_THROWS_AS(OgdenIncompressibleModel(bad), DomainError);
  OgdenParams nokappa = ogden_fixture(1);
  nokappa.kappa = 0.0;
  CHECK_THROWS_AS(OgdenCompressibleModel(nokappa), DomainError);
  OgdenParams nobeta = ogden_fixture(1);
  nobeta.beta = -1.0;
  CHECK_THROWS_AS(OgdenCompressibleModel(nobeta), DomainError);

  CHECK_THROWS_AS(GenOgdenModel(GenOgdenParams{{-0.1}, {}, 1.0}), DomainError);
  CHECK_THROWS_AS(GenOgdenModel(GenOgdenParams{{0.1}, {1.0}, -1.0}),
                  DomainError);
  CHECK_THROWS_AS(LedretModel(LedretParams{{0.5}, {}, 1.0}), DomainError);
  CHECK_THROWS_AS(LedretModel(LedretParams{{2.0}, {0.2}, 1.0}), DomainError);

  CHECK_THROWS_AS(make_pann(ModelKind::OgdenCompressible, 3.0, 2, 10, 1),
                  FormatError);
  CHECK_THROWS_AS(make_pann(ModelKind::LambdaPann, 0.5, 2, 10, 1),
                  DomainError);  // reduction power must be >= 1
}

TEST_CASE("model kind strings round-trip", "[models]") {
  for (ModelKind k :
       {ModelKind::LambdaPann, ModelKind::LambdaPannNoPhi,
        ModelKind::LambdaPannAdditive, ModelKind::IPann,
        ModelKind::OgdenIncompressible, ModelKind::OgdenCompressible,
        ModelKind::GenOgdenInvariant, ModelKind::LedretOgden}) {
    CHECK(model_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(model_kind_from_string("nope"), FormatError);
}

TEST_CASE("polyconvex slot map rejects the invariant architecture",
          "[models]") {
  const auto m = make_pann(ModelKind::IPann, 3.0, 1, 4, 2);
  const std::array<double, 7> x{1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -2.0};
  CHECK_THROWS_AS(m->psi_nn_forward(x), FormatError);
  const auto lp = make_pann(ModelKind::LambdaPann, 3.0, 1, 4, 2);
  CHECK(std::isfinite(lp->psi_nn_forward(x)));
}

TEST_CASE("identical seeds give identical models", "[models]") {
  const auto a = make_pann(ModelKind::LambdaPann, 3.0, 2, 8, 123);
  const auto b = make_pann(ModelKind::LambdaPann, 3.0, 2, 8, 123);
  CHECK(a->offsets[0] == b->offsets[0]);
  const SpectralState s = spectral_from_stretches(1.2, 1.1, 0.85);
  CHECK(a->energy(s) == b->energy(s));
  const auto c = make_pann(ModelKind::LambdaPann, 3.0, 2, 8, 124);
  CHECK(a->energy(s) != c->energy(s));
}
