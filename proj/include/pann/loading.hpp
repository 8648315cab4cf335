#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include "pann/errors.hpp"
#include "pann/kinematics.hpp"
#include "pann/models.hpp"

namespace pann {

enum class Mode { UT, ET, PS };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::UT: return "UT";
    case Mode::ET: return "ET";
    case Mode::PS: return "PS";
  }
  throw UnknownMode("to_string: invalid mode");
}

inline Mode mode_from_string(const std::string& s) {
  if (s == "UT" || s == "ut") return Mode::UT;
  if (s == "ET" || s == "et") return Mode::ET;
  if (s == "PS" || s == "ps") return Mode::PS;
  throw UnknownMode("unknown deformation mode '" + s + "'");
}

struct ModeSpec {
  Mode mode = Mode::UT;
  double lambda = 1.0;  // applied stretch, > 0
};

// Isochoric deformation gradient of the mode (det = 1 by construction):
//   UT: diag(l, l^-1/2, l^-1/2); ET: diag(l, l, l^-2); PS: diag(l, 1, 1/l)
inline DefGrad mode_defgrad(const ModeSpec& m) {
  if (!(m.lambda > 0.0))
    throw DomainError("mode_defgrad: applied stretch must be > 0");
  const double l = m.lambda;
  switch (m.mode) {
    case Mode::UT: {
      const double t = 1.0 / std::sqrt(l);
      return diag3(l, t, t);
    }
    case Mode::ET:
      return diag3(l, l, 1.0 / (l * l));
    case Mode::PS:
      return diag3(l, 1.0, 1.0 / l);
  }
  throw UnknownMode("mode_defgrad: invalid mode");
}

inline Vec3 mode_stretches(const ModeSpec& m) {
  const DefGrad f = mode_defgrad(m);
  return {f[0][0], f[1][1], f[2][2]};
}

namespace detail {

// Energy stretch-derivatives re-indexed to the mode axes.  SpectralState
// orders stretches descending; the stored principal directions are exact
// unit axes for diagonal F, so the original axis of each entry is where its
// direction component is (+-)1.
inline void mode_derivatives(const EnergyModel& model, const Vec3& lam,
                             Vec3& l_axis, Vec3& g_axis) {
  const SpectralState s = spectral_from_stretches(lam[0], lam[1], lam[2]);
  const Vec3 g = model.stretch_derivatives(s);
  for (int k = 0; k < 3; ++k) {
    int axis = 0;
    for (int a = 1; a < 3; ++a)
      if (std::abs(s.directions[k][a]) > std::abs(s.directions[k][axis]))
        axis = a;
    l_axis[axis] = s.stretches[k];
    g_axis[axis] = g[k];
  }
}

}  // namespace detail

// Incompressible principal Cauchy stresses with the indeterminate pressure
// eliminated through the stress-free transverse direction:
//   UT: s1 = l1 w1 - l2 w2            (s2 = s3 = 0)
//   ET: s1 = s2 = l1 w1 - l3 w3       (s3 = 0)
//   PS: s1 = l1 w1 - l3 w3, s2 = l2 w2 - l3 w3  (s3 = 0)
// where w_a is the energy derivative along mode axis a.
inline Vec3 incompressible_mode_stress(const EnergyModel& model,
                                       const ModeSpec& m) {
  Vec3 lam = mode_stretches(m);
  Vec3 l{}, g{};
  detail::mode_derivatives(model, lam, l, g);
  switch (m.mode) {
    case Mode::UT:
      return {l[0] * g[0] - l[1] * g[1], 0.0, 0.0};
    case Mode::ET: {
      const double s1 = l[0] * g[0] - l[2] * g[2];
      return {s1, s1, 0.0};
    }
    case Mode::PS:
      return {l[0] * g[0] - l[2] * g[2], l[1] * g[1] - l[2] * g[2], 0.0};
  }
  throw UnknownMode("incompressible_mode_stress: invalid mode");
}

struct ModeStressResult {
  Vec3 sigma{};              // principal Cauchy stresses on the mode axes
  double transverse = 1.0;   // solved free stretch (lambda_t or lambda_3)
  int iterations = 0;
};

// Deformation gradient of the compressible mode family with free transverse
// stretch t: UT diag(l, t, t); ET diag(l, l, t); PS diag(l, 1, t).
inline DefGrad compressible_mode_defgrad(Mode mode, double lambda, double t) {
  switch (mode) {
    case Mode::UT: return diag3(lambda, t, t);
    case Mode::ET: return diag3(lambda, lambda, t);
    case Mode::PS: return diag3(lambda, 1.0, t);
  }
  throw UnknownMode("compressible_mode_defgrad: invalid mode");
}

// Transverse (first) and axial (second) Cauchy stress at transverse stretch t.
inline std::pair<double, double> transverse_residual(const EnergyModel& model,
                                                     Mode mode, double lambda,
                                                     double t) {
  const Mat3 sig = cauchy_stress(model, compressible_mode_defgrad(mode, lambda, t));
  const int tr_axis = mode == Mode::UT ? 1 : 2;
  return {sig[tr_axis][tr_axis], sig[0][0]};
}

// Zero-transverse-stress solve for compressible models: safeguarded Newton
// on sigma_t(lambda, t) = 0 with finite-difference slope and a bisection
// fallback on [0.05, 20].  Converged when |sigma_t| < 1e-10 (1 + |sigma_1|).
inline ModeStressResult compressible_mode_stress(
    const EnergyModel& model, const ModeSpec& m,
    std::optional<double> initial_guess = std::nullopt) {
  if (model.incompressible())
    throw IncompressibleUnsupported(
        "compressible_mode_stress: model is incompressible");
  if (!(m.lambda > 0.0))
    throw DomainError("compressible_mode_stress: applied stretch must be > 0");
  const double l = m.lambda;
  double x;
  if (initial_guess) {
    x = *initial_guess;
  } else {
    // Incompressible solution as the natural seed.
    switch (m.mode) {
      case Mode::UT: x = 1.0 / std::sqrt(l); break;
      case Mode::ET: x = 1.0 / (l * l); break;
      default: x = 1.0 / l; break;
    }
  }
  constexpr double kLo = 0.05, kHi = 20.0;
  x = std::min(std::max(x, kLo), kHi);

  double blo = 0.0, bhi = 0.0, f_blo = 0.0;
  bool bracketed = false;
  double ft = 0.0;
  for (int it = 1; it <= 100; ++it) {
    double fa;
    std::tie(ft, fa) = transverse_residual(model, m.mode, l, x);
    if (std::abs(ft) < 1e-10 * (1.0 + std::abs(fa))) {
      ModeStressResult r;
      const Mat3 sig =
          cauchy_stress(model, compressible_mode_defgrad(m.mode, l, x));
      r.sigma = {sig[0][0], sig[1][1], sig[2][2]};
      r.transverse = x;
      r.iterations = it;
      return r;
    }
    if (bracketed) {
      if ((ft < 0.0) == (f_blo < 0.0)) {
        blo = x;
        f_blo = ft;
      } else {
        bhi = x;
      }
    }
    const double h = 1e-7 * std::max(1.0, x);
    const double ft2 = transverse_residual(model, m.mode, l, x + h).first;
    const double slope = (ft2 - ft) / h;
    double cand = x - ft / slope;
    bool ok = std::isfinite(cand);
    if (ok)
      ok = bracketed ? (cand > blo && cand < bhi)
                     : (cand >= kLo && cand <= kHi);
    if (!ok) {
      if (!bracketed) {
        // Establish a sign-change bracket around the current iterate.
        const double f_lo = transverse_residual(model, m.mode, l, kLo).first;
        const double f_hi = transverse_residual(model, m.mode, l, kHi).first;
        if ((f_lo < 0.0) != (ft < 0.0)) {
          blo = kLo;
          f_blo = f_lo;
          bhi = x;
        } else if ((ft < 0.0) != (f_hi < 0.0)) {
          blo = x;
          f_blo = ft;
          bhi = kHi;
        } else {
          throw NonPositiveBracket(
              "compressible_mode_stress: no sign change of the transverse "
              "stress for lambda_t in [0.05, 20]");
        }
        bracketed = true;
      }
      cand = 0.5 * (blo + bhi);
    }
    x = cand;
  }
  throw NoConvergence(
      "compressible_mode_stress: no convergence after 100 iterations "
      "(last residual " +
      std::to_string(ft) + ")");
}

}  // namespace pann
