#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <vector>

#include "pann/rng.hpp"
#include "pann/tape.hpp"

using namespace pann;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("primitive values", "[tape]") {
  Tape t;
  const Expr x = wrap(t, t.input(0.0));
  CHECK_THAT(softplus(x).val(), WithinRel(0.6931471805599453, 1e-15));

  const Expr two = wrap(t, t.input(2.0));
  CHECK_THAT(pow(two, 3.711).val(), WithinRel(13.095506905452863, 1e-15));

  const std::array<Expr, 3> ones{wrap(t, t.one()), wrap(t, t.one()),
                                 wrap(t, t.one())};
  CHECK_THAT(p_root(ones, 3.0).val(), WithinRel(1.4422495703074083, 1e-15));

  CHECK(exp(wrap(t, t.input(0.0))).val() == 1.0);
  CHECK(log(wrap(t, t.input(1.0))).val() == 0.0);
  CHECK(sigmoid(wrap(t, t.input(0.0))).val() == 0.5);
}

TEST_CASE("simple gradients", "[tape]") {
  Tape t;
  const Expr x = wrap(t, t.input(0.0));
  const Expr sp = softplus(x);
  t.backward(sp.id);
  CHECK(t.adjoint(x.id) == 0.5);

  const Expr y = wrap(t, t.input(3.0));
  const Expr y2 = y * y;
  t.backward(y2.id);
  CHECK(t.adjoint(y.id) == 6.0);
}

TEST_CASE("hand-differentiated polynomial", "[tape]") {
  // f(x, y) = x^3 + x y at (2, 5): df/dx = 3 x^2 + y = 17, df/dy = x = 2.
  Tape t;
  const Expr x = wrap(t, t.input(2.0));
  const Expr y = wrap(t, t.input(5.0));
  const Expr f = pow(x, 3.0) + x * y;
  CHECK(f.val() == 18.0);
  t.backward(f.id);
  CHECK(t.adjoint(x.id) == 17.0);
  CHECK(t.adjoint(y.id) == 2.0);
}

TEST_CASE("backward resets adjoints between sweeps", "[tape]") {
  Tape t;
  const Expr x = wrap(t, t.input(1.5));
  const Expr y = wrap(t, t.input(2.5));
  const Expr f = x * y + softplus(x);
  const Expr g = x / y;
  t.backward(f.id);
  const double fx = t.adjoint(x.id);
  t.backward(g.id);
  const double gx = t.adjoint(x.id);
  CHECK(gx == 1.0 / 2.5);
  t.backward(f.id);
  CHECK(t.adjoint(x.id) == fx);  // no accumulation across sweeps
}

TEST_CASE("linearity with dyadic coefficients is exact", "[tape]") {
  // Scaling by powers of two is error-free, so the combined sweep must
  // agree bitwise with the scaled individual sweeps.
  Tape t;
  const Expr x = wrap(t, t.input(1.3));
  const Expr y = wrap(t, t.input(0.8));
  const Expr f = x * x + y;
  const Expr g = softplus(x) * y;
  const Expr h = 2.0 * f + (-0.5) * g;
  t.backward(f.id);
  const double fx = t.adjoint(x.id), fy = t.adjoint(y.id);
  t.backward(g.id);
  const double gx = t.adjoint(x.id), gy = t.adjoint(y.id);
  t.backward(h.id);
  CHECK(t.adjoint(x.id) == 2.0 * fx - 0.5 * gx);
  CHECK(t.adjoint(y.id) == 2.0 * fy - 0.5 * gy);
}

TEST_CASE("set_input and forward recompute values", "[tape]") {
  Tape t;
  const Expr x = wrap(t, t.input(3.0));
  const Expr f = x * x + 1.0;
  CHECK(f.val() == 10.0);
  t.set_input(x.id, 4.0);
  t.forward();
  CHECK(t.value(f.id) == 17.0);
  CHECK_THROWS_AS(t.set_input(f.id, 0.0), std::logic_error);
}

TEST_CASE("domain errors", "[tape]") {
  Tape t;
  CHECK_THROWS_AS(log(wrap(t, t.input(-1.0))), DomainError);
  CHECK_THROWS_AS(pow(wrap(t, t.input(-2.0)), 1.5), DomainError);
  const Expr num = wrap(t, t.input(1.0));
  const Expr den = wrap(t, t.input(0.0));
  CHECK_THROWS_AS(num / den, DomainError);
  const std::vector<Expr> bad{wrap(t, t.input(-1.0))};
  CHECK_THROWS_AS(p_root(bad, 2.0), DomainError);
}

namespace {

// Deterministic random straight-line programs over the primitive set;
// depth stays small so values remain well-conditioned for differencing.
double random_program(rng::Stream plan, const std::array<double, 3>& in,
                      Tape& t, std::array<Tape::Id, 3>& leaves) {
  std::vector<Expr> pool;
  for (int i = 0; i < 3; ++i) {
    leaves[i] = t.input(in[i]);
    pool.push_back(wrap(t, leaves[i]));
  }
  for (int step = 0; step < 10; ++step) {
    const Expr a = pool[plan.next_u64() % pool.size()];
    const Expr b = pool[plan.next_u64() % pool.size()];
    Expr r;
    switch (plan.next_u64() % 8) {
      case 0: r = a + b; break;
      case 1: r = a - b; break;
      case 2: r = a * b; break;
      case 3: r = a / (softplus(b) + 0.5); break;
      case 4: r = pow(softplus(a) + 0.1, plan.next_uniform(-1.5, 2.5)); break;
      case 5: r = exp(a * 0.25); break;
      case 6: r = log(softplus(a) + 0.1); break;
      default: r = softplus(a); break;
    }
    pool.push_back(r);
  }
  Expr out = pool[3];
  for (std::size_t i = 4; i < pool.size(); ++i) out = out + pool[i];
  return out.val();
}

double eval_program(std::uint64_t seed, const std::array<double, 3>& in) {
  Tape t;
  std::array<Tape::Id, 3> leaves{};
  return random_program(rng::Stream(seed), in, t, leaves);
}

}  // namespace

TEST_CASE("random composite expressions match central differences",
          "[tape][property]") {
  rng::Stream rs(rng::mix(2024, 0x7A9E));
  for (int trial = 0; trial < 100; ++trial) {
    const std::uint64_t seed = rs.next_u64();
    std::array<double, 3> in{rs.next_uniform(0.5, 2.0),
                             rs.next_uniform(0.5, 2.0),
                             rs.next_uniform(0.5, 2.0)};
    Tape t;
    std::array<Tape::Id, 3> leaves{};
    random_program(rng::Stream(seed), in, t, leaves);
    t.backward(Tape::Id(t.size() - 1));
    for (int k = 0; k < 3; ++k) {
      const double h = 1e-5;
      std::array<double, 3> up = in, dn = in;
      up[k] += h;
      dn[k] -= h;
      const double fd = (eval_program(seed, up) - eval_program(seed, dn)) /
                        (2.0 * h);
      const double ad = t.adjoint(leaves[k]);
      CHECK_THAT(ad, WithinRel(fd, 1e-6) || WithinAbs(fd, 1e-8));
    }
  }
}

TEST_CASE("forward jets agree with reverse sweeps", "[tape]") {
  Tape t;
  const Expr l1 = wrap(t, t.input(1.3));
  const Expr l2 = wrap(t, t.input(0.9));
  const Expr l3 = wrap(t, t.input(1.05));
  const Jet j1 = jet_seed(l1, 0);
  const Jet j2 = jet_seed(l2, 1);
  const Jet j3 = jet_seed(l3, 2);
  const Jet f = j1 * j2 * j3 + pow(j1, 2.0) + softplus(j2 * j3);
  t.backward(f.v.id);
  for (int a = 0; a < 3; ++a) {
    const Tape::Id leaf = a == 0 ? l1.id : a == 1 ? l2.id : l3.id;
    CHECK_THAT(t.value(f.d[a].id), WithinRel(t.adjoint(leaf), 1e-14));
  }
}
