#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pann/errors.hpp"
#include "pann/linalg.hpp"

namespace pann {

// Principal decomposition of a deformation state.  Stretches are sorted in
// descending order; directions[i] is the unit eigenvector of b = F F^T
// paired with stretches[i] (the Eulerian principal direction).
struct SpectralState {
  Vec3 stretches{};
  std::array<Vec3, 3> directions{};
  double j = 1.0;          // stretches[0] * stretches[1] * stretches[2]
  Vec3 cof_stretches{};    // principal stretches of cof U:
                           // (l2*l3, l1*l3, l1*l2)
};

namespace detail {

// Eigenvector of a (near-)simple eigenvalue via cross products of the rows
// of A - eig*I.  Returns false if every candidate is degenerate.
inline bool eigvec_from_rows(const Mat3& a, double eig, Vec3& out) {
  const Vec3 r0{a[0][0] - eig, a[0][1], a[0][2]};
  const Vec3 r1{a[1][0], a[1][1] - eig, a[1][2]};
  const Vec3 r2{a[2][0], a[2][1], a[2][2] - eig};
  const Vec3 c01 = cross(r0, r1);
  const Vec3 c02 = cross(r0, r2);
  const Vec3 c12 = cross(r1, r2);
  const double n01 = dot(c01, c01);
  const double n02 = dot(c02, c02);
  const double n12 = dot(c12, c12);
  const Vec3* best = &c01;
  double best_n = n01;
  if (n02 > best_n) {
    best = &c02;
    best_n = n02;
  }
  if (n12 > best_n) {
    best = &c12;
    best_n = n12;
  }
  if (!(best_n > 0.0) || !std::isfinite(best_n)) return false;
  out = scale(*best, 1.0 / std::sqrt(best_n));
  return true;
}

// Orthonormal basis of the plane orthogonal to unit vector n.
inline void complement_basis(const Vec3& n, Vec3& u, Vec3& w) {
  int k = 0;
  if (std::abs(n[1]) < std::abs(n[k])) k = 1;
  if (std::abs(n[2]) < std::abs(n[k])) k = 2;
  Vec3 e{};
  e[k] = 1.0;
  u = normalized(sub(e, scale(n, n[k])));
  w = cross(n, u);
}

// Cyclic Jacobi sweep fallback; always converges for symmetric input.
inline void jacobi_eigen(Mat3 a, Vec3& w, Mat3& v) {
  v = identity3();
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    if (off == 0.0) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) +
                          std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < 3; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < 3; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (int k = 0; k < 3; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  w = {a[0][0], a[1][1], a[2][2]};
}

inline void sort_eigen_desc(Vec3& w, Mat3& v) {
  // Selection sort on three entries, swapping eigenvector columns along.
  for (int i = 0; i < 2; ++i) {
    int m = i;
    for (int k = i + 1; k < 3; ++k)
      if (w[k] > w[m]) m = k;
    if (m != i) {
      std::swap(w[i], w[m]);
      for (int r = 0; r < 3; ++r) std::swap(v[r][i], v[r][m]);
    }
  }
}

inline double eigen_residual(const Mat3& a, double eig, const Vec3& vec) {
  const Vec3 av = matvec(a, vec);
  return norm(sub(av, scale(vec, eig)));
}

}  // namespace detail

// Symmetric 3x3 eigendecomposition.  Eigenvalues returned in descending
// order in w; the columns of v are the matching orthonormal eigenvectors.
// Analytic (trigonometric) eigenvalues with cross-product / deflation
// eigenvectors; falls back to Jacobi sweeps if the analytic path loses
// accuracy.  Throws EigenFailure for non-finite input or if no path
// produces a valid decomposition.
inline void sym_eigen(const Mat3& a, Vec3& w, Mat3& v) {
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      if (!std::isfinite(a[r][c]))
        throw EigenFailure("sym_eigen: non-finite matrix entry");

  const double scale_a = std::max(max_abs_entry(a), 1e-300);

  const double p1 =
      a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];

  if (p1 <= scale_a * scale_a * 1e-30) {
    // Effectively diagonal: exact for the identity and pure-stretch states.
    w = {a[0][0], a[1][1], a[2][2]};
    v = identity3();
    detail::sort_eigen_desc(w, v);
    return;
  }

  const double q = trace(a) / 3.0;
  const double p2 = (a[0][0] - q) * (a[0][0] - q) +
                    (a[1][1] - q) * (a[1][1] - q) +
                    (a[2][2] - q) * (a[2][2] - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  Mat3 b;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      b[r][c] = (a[r][c] - (r == c ? q : 0.0)) / p;
  const double rdet = std::clamp(det3(b) / 2.0, -1.0, 1.0);
  const double phi = std::acos(rdet) / 3.0;

  w[0] = q + 2.0 * p * std::cos(phi);
  w[2] = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  w[1] = 3.0 * q - w[0] - w[2];

  bool ok = true;
  if (w[0] - w[2] <= 1e-12 * scale_a) {
    // Numerically spherical; any orthonormal triad is an eigenbasis.
    v = identity3();
  } else {
    // Extract the best-separated extreme eigenvector first, then solve the
    // deflated 2x2 problem in its orthogonal complement.  The complement of
    // a simple eigenvalue's eigenvector is an invariant plane, so this stays
    // well-conditioned when the remaining two eigenvalues are close or equal.
    const bool top_first = (w[0] - w[1]) >= (w[1] - w[2]);
    const double eig_first = top_first ? w[0] : w[2];
    Vec3 n;
    ok = detail::eigvec_from_rows(a, eig_first, n);
    if (ok) {
      Vec3 u, t;
      detail::complement_basis(n, u, t);
      const Vec3 au = matvec(a, u);
      const Vec3 at = matvec(a, t);
      const double m00 = dot(u, au);
      const double m01 = dot(u, at);
      const double m11 = dot(t, at);
      const double half_diff = 0.5 * (m00 - m11);
      const double avg = 0.5 * (m00 + m11);
      const double rad = std::sqrt(half_diff * half_diff + m01 * m01);
      const double theta = 0.5 * std::atan2(2.0 * m01, m00 - m11);
      const double c = std::cos(theta), s = std::sin(theta);
      const Vec3 vplus{c * u[0] + s * t[0], c * u[1] + s * t[1],
                       c * u[2] + s * t[2]};
      const Vec3 vminus{-s * u[0] + c * t[0], -s * u[1] + c * t[1],
                        -s * u[2] + c * t[2]};
      if (top_first) {
        w[0] = eig_first;
        w[1] = avg + rad;
        w[2] = avg - rad;
        for (int r = 0; r < 3; ++r) {
          v[r][0] = n[r];
          v[r][1] = vplus[r];
          v[r][2] = vminus[r];
        }
      } else {
        w[2] = eig_first;
        w[0] = avg + rad;
        w[1] = avg - rad;
        for (int r = 0; r < 3; ++r) {
          v[r][0] = vplus[r];
          v[r][1] = vminus[r];
          v[r][2] = n[r];
        }
      }
      detail::sort_eigen_desc(w, v);
    }
  }

  const double tol = 1e-7 * std::max(scale_a, 1.0);
  if (ok) {
    for (int i = 0; i < 3; ++i) {
      const Vec3 col{v[0][i], v[1][i], v[2][i]};
      if (detail::eigen_residual(a, w[i], col) > tol) {
        ok = false;
        break;
      }
    }
  }
  if (!ok) {
    detail::jacobi_eigen(a, w, v);
    detail::sort_eigen_desc(w, v);
    for (int i = 0; i < 3; ++i) {
      const Vec3 col{v[0][i], v[1][i], v[2][i]};
      if (detail::eigen_residual(a, w[i], col) > tol)
        throw EigenFailure("sym_eigen: residual check failed");
    }
  }
}

// Spectral decomposition of F via b = F F^T.  Throws NonPositiveJacobian
// when det F <= 0 and EigenFailure if b is numerically indefinite.
inline SpectralState spectral(const DefGrad& f) {
  const double det_f = det3(f);
  if (!(det_f > 0.0))
    throw NonPositiveJacobian("spectral: det F = " + std::to_string(det_f) +
                              " is not positive");
  const Mat3 b = matmul(f, transpose(f));
  Vec3 eig;
  Mat3 vec;
  sym_eigen(b, eig, vec);
  if (!(eig[2] > 0.0))
    throw EigenFailure("spectral: b = F F^T has a non-positive eigenvalue");
  SpectralState s;
  for (int i = 0; i < 3; ++i) {
    s.stretches[i] = std::sqrt(eig[i]);
    s.directions[i] = {vec[0][i], vec[1][i], vec[2][i]};
  }
  s.j = s.stretches[0] * s.stretches[1] * s.stretches[2];
  s.cof_stretches = {s.stretches[1] * s.stretches[2],
                     s.stretches[0] * s.stretches[2],
                     s.stretches[0] * s.stretches[1]};
  return s;
}

// Axis-aligned state from given principal stretches (descending sort with
// the coordinate axes carried along).  Bypasses the eigensolver so identity
// and pure-stretch states are represented exactly.
inline SpectralState spectral_from_stretches(double l1, double l2,
                                             double l3) {
  if (!(l1 > 0.0) || !(l2 > 0.0) || !(l3 > 0.0))
    throw NonPositiveJacobian(
        "spectral_from_stretches: stretches must be positive");
  std::array<std::pair<double, int>, 3> order{
      {{l1, 0}, {l2, 1}, {l3, 2}}};
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) {
                     return a.first > b.first;
                   });
  SpectralState s;
  for (int i = 0; i < 3; ++i) {
    s.stretches[i] = order[i].first;
    Vec3 axis{};
    axis[order[i].second] = 1.0;
    s.directions[i] = axis;
  }
  s.j = s.stretches[0] * s.stretches[1] * s.stretches[2];
  s.cof_stretches = {s.stretches[1] * s.stretches[2],
                     s.stretches[0] * s.stretches[2],
                     s.stretches[0] * s.stretches[1]};
  return s;
}

// Principal invariants of the right stretch tensor U:
//   i1 = tr U, i2 = tr cof U, i3 = det U.
inline std::array<double, 3> invariants_u(const SpectralState& s) {
  const auto& l = s.stretches;
  return {l[0] + l[1] + l[2],
          l[0] * l[1] + l[0] * l[2] + l[1] * l[2],
          s.j};
}

// Discriminant of x^3 - i1 x^2 + i2 x - i3.  Equals the squared product of
// root differences, so it is nonnegative exactly when all roots are real.
inline double admissibility_discriminant(double i1, double i2, double i3) {
  return -4.0 * i1 * i1 * i1 * i3 + i1 * i1 * i2 * i2 +
         18.0 * i1 * i2 * i3 - 4.0 * i2 * i2 * i2 - 27.0 * i3 * i3;
}

// A triple (i1, i2, i3) is admissible as the invariants of a stretch tensor
// when all three are positive and the characteristic polynomial has three
// real (hence positive) roots.
inline bool admissible(double i1, double i2, double i3) {
  return i1 > 0.0 && i2 > 0.0 && i3 > 0.0 &&
         admissibility_discriminant(i1, i2, i3) >= 0.0;
}

}  // namespace pann
