#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pann/errors.hpp"
#include "pann/kinematics.hpp"
#include "pann/networks.hpp"
#include "pann/rng.hpp"
#include "pann/tape.hpp"

namespace pann {

enum class ModelKind {
  LambdaPann,
  LambdaPannNoPhi,
  LambdaPannAdditive,
  IPann,
  OgdenIncompressible,
  OgdenCompressible,
  GenOgdenInvariant,
  LedretOgden,
};

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::LambdaPann: return "lambda-pann";
    case ModelKind::LambdaPannNoPhi: return "lambda-pann-nophi";
    case ModelKind::LambdaPannAdditive: return "lambda-pann-additive";
    case ModelKind::IPann: return "i-pann";
    case ModelKind::OgdenIncompressible: return "ogden-incompressible";
    case ModelKind::OgdenCompressible: return "ogden-compressible";
    case ModelKind::GenOgdenInvariant: return "ogden-generalized-invariant";
    case ModelKind::LedretOgden: return "ogden-ledret";
  }
  throw FormatError("to_string: invalid model kind");
}

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "lambda-pann") return ModelKind::LambdaPann;
  if (s == "lambda-pann-nophi") return ModelKind::LambdaPannNoPhi;
  if (s == "lambda-pann-additive") return ModelKind::LambdaPannAdditive;
  if (s == "i-pann") return ModelKind::IPann;
  if (s == "ogden-incompressible") return ModelKind::OgdenIncompressible;
  if (s == "ogden-compressible") return ModelKind::OgdenCompressible;
  if (s == "ogden-generalized-invariant") return ModelKind::GenOgdenInvariant;
  if (s == "ogden-ledret") return ModelKind::LedretOgden;
  throw FormatError("unknown model kind '" + s + "'");
}

inline bool is_neural(ModelKind k) {
  switch (k) {
    case ModelKind::LambdaPann:
    case ModelKind::LambdaPannNoPhi:
    case ModelKind::LambdaPannAdditive:
    case ModelKind::IPann:
      return true;
    default:
      return false;
  }
}

// ---------------------------------------------------------------------------
// Common interface: strain energy density and its stretch derivatives at a
// principal state.  Derivatives pair with s.stretches (descending order);
// isotropy makes the pairing consistent under any axis relabeling.

class EnergyModel {
 public:
  virtual ~EnergyModel() = default;
  virtual ModelKind kind() const = 0;
  // Deviatoric-only energies: general-F stress is undefined (pressure comes
  // from boundary conditions); use the loading module's mode elimination.
  virtual bool incompressible() const { return false; }
  virtual double energy(const SpectralState& s) const = 0;
  virtual Vec3 stretch_derivatives(const SpectralState& s) const = 0;
  // Re-establish sigma(I) = 0 after a parameter change.  A no-op for kinds
  // that are stress-free at the identity by construction.
  virtual void calibrate() {}
};

inline std::array<double, 6> to_voigt(const Mat3& m) {
  return {m[0][0], m[1][1], m[2][2], m[0][1], m[0][2], m[1][2]};
}

// sigma = sum_a (lambda_a / J) * dpsi/dlambda_a * n_a (x) n_a
inline Mat3 cauchy_stress(const EnergyModel& m, const DefGrad& f) {
  if (m.incompressible())
    throw IncompressibleUnsupported(
        "cauchy_stress: '" + to_string(m.kind()) +
        "' is incompressible; use the mode-stress elimination");
  const SpectralState s = spectral(f);
  const Vec3 g = m.stretch_derivatives(s);
  Mat3 sigma{};
  for (int a = 0; a < 3; ++a) {
    const double coeff = s.stretches[a] / s.j * g[a];
    const Mat3 nn = outer(s.directions[a], s.directions[a]);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) sigma[r][c] += coeff * nn[r][c];
  }
  return sigma;
}

// ---------------------------------------------------------------------------
// Closed-form baselines.

struct OgdenParams {
  std::vector<double> mu;     // shear-like moduli (stress units)
  std::vector<double> alpha;  // exponents
  double kappa = 0.0;         // bulk-like modulus
  double beta = 0.0;
};

inline void validate(const OgdenParams& p, bool compressible) {
  if (p.mu.empty() || p.mu.size() != p.alpha.size())
    throw DimensionMismatch("OgdenParams: mu/alpha size mismatch or empty");
  for (std::size_t i = 0; i < p.mu.size(); ++i) {
    if (!(p.mu[i] * p.alpha[i] > 0.0))
      throw DomainError("OgdenParams: mu*alpha must be positive (term " +
                        std::to_string(i) + ")");
    if (!(std::abs(p.alpha[i]) > 1.0))
      throw DomainError("OgdenParams: |alpha| must exceed 1 (term " +
                        std::to_string(i) + ")");
  }
  if (compressible) {
    if (!(p.kappa > 0.0)) throw DomainError("OgdenParams: kappa must be > 0");
    if (!(p.beta > 0.0)) throw DomainError("OgdenParams: beta must be > 0");
  }
}

// Incompressible Ogden, deviatoric part:
//   psi = sum_p (2 mu_p / alpha_p^2) (l1^a + l2^a + l3^a - 3)
// The pressure term is supplied by the loading mode, not the energy.
class OgdenIncompressibleModel : public EnergyModel {
 public:
  explicit OgdenIncompressibleModel(OgdenParams p) : params_(std::move(p)) {
    validate(params_, false);
  }
  ModelKind kind() const override { return ModelKind::OgdenIncompressible; }
  bool incompressible() const override { return true; }

  double energy(const SpectralState& s) const override {
    double e = 0.0;
    for (std::size_t i = 0; i < params_.mu.size(); ++i) {
      const double a = params_.alpha[i];
      e += 2.0 * params_.mu[i] / (a * a) *
           (std::pow(s.stretches[0], a) + std::pow(s.stretches[1], a) +
            std::pow(s.stretches[2], a) - 3.0);
    }
    return e;
  }

  Vec3 stretch_derivatives(const SpectralState& s) const override {
    Vec3 g{};
    for (std::size_t i = 0; i < params_.mu.size(); ++i) {
      const double a = params_.alpha[i];
      const double c = 2.0 * params_.mu[i] / a;
      for (int k = 0; k < 3; ++k)
        g[k] += c * std::pow(s.stretches[k], a - 1.0);
    }
    return g;
  }

  const OgdenParams& params() const { return params_; }

 private:
  OgdenParams params_;
};

// Compressible Ogden:
//   psi = sum_i (mu_i/alpha_i)(lb1^a + lb2^a + lb3^a - 3)
//       + kappa/beta^2 (beta log J + J^-beta - 1),   lb_i = J^(-1/3) l_i
class OgdenCompressibleModel : public EnergyModel {
 public:
  explicit OgdenCompressibleModel(OgdenParams p) : params_(std::move(p)) {
    validate(params_, true);
  }
  ModelKind kind() const override { return ModelKind::OgdenCompressible; }

  double energy(const SpectralState& s) const override {
    const double j = s.j;
    const double jm13 = std::pow(j, -1.0 / 3.0);
    double e = 0.0;
    for (std::size_t i = 0; i < params_.mu.size(); ++i) {
      const double a = params_.alpha[i];
      e += params_.mu[i] / a *
           (std::pow(jm13 * s.stretches[0], a) +
            std::pow(jm13 * s.stretches[1], a) +
            std::pow(jm13 * s.stretches[2], a) - 3.0);
    }
    const double b = params_.beta;
    e += params_.kappa / (b * b) *
         (b * std::log(j) + std::pow(j, -b) - 1.0);
    return e;
  }

  Vec3 stretch_derivatives(const SpectralState& s) const override {
    // d psi_dev / d l_k = sum_i mu_i J^(-a/3) [l_k^(a-1) - (sum_b l_b^a)/(3 l_k)]
    // d psi_vol / d l_k = kappa (1 - J^-beta) / (beta l_k)
    const double j = s.j;
    Vec3 g{};
    for (std::size_t i = 0; i < params_.mu.size(); ++i) {
      const double a = params_.alpha[i];
      const double ja = std::pow(j, -a / 3.0);
      const double psum = std::pow(s.stretches[0], a) +
                          std::pow(s.stretches[1], a) +
                          std::pow(s.stretches[2], a);
      for (int k = 0; k < 3; ++k)
        g[k] += params_.mu[i] * ja *
                (std::pow(s.stretches[k], a - 1.0) -
                 psum / (3.0 * s.stretches[k]));
    }
    const double b = params_.beta;
    const double vol = params_.kappa * (1.0 - std::pow(j, -b)) / b;
    for (int k = 0; k < 3; ++k) g[k] += vol / s.stretches[k];
    return g;
  }

  const OgdenParams& params() const { return params_; }

 private:
  OgdenParams params_;
};

struct GenOgdenParams {
  std::vector<double> c_i0;  // coefficients of (I1b - 3)^i, i = 1..m
  std::vector<double> c_0j;  // coefficients of (I2b^{3/2} - 3*sqrt(3))^j
  double kappa = 0.0;
};

inline void validate(const GenOgdenParams& p) {
  if (p.c_i0.empty() && p.c_0j.empty())
    throw DimensionMismatch("GenOgdenParams: no terms");
  for (double c : p.c_i0)
    if (!(c >= 0.0)) throw DomainError("GenOgdenParams: c_i0 must be >= 0");
  for (double c : p.c_0j)
    if (!(c >= 0.0)) throw DomainError("GenOgdenParams: c_0j must be >= 0");
  if (!(p.kappa >= 0.0)) throw DomainError("GenOgdenParams: kappa must be >= 0");
}

namespace detail {
inline double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}
}  // namespace detail

// Generalized (invariant-based) Ogden:
//   psi = sum_i c_i0 (I1b - 3)^i + sum_j c_0j (I2b^{3/2} - 3 sqrt 3)^j
//       + kappa (J^2 + J^-2 - 2)
// with I1b = J^(-2/3) sum l^2 and I2b = J^(-4/3) sum (l_a l_b)^2.
class GenOgdenModel : public EnergyModel {
 public:
  explicit GenOgdenModel(GenOgdenParams p) : params_(std::move(p)) {
    validate(params_);
  }
  ModelKind kind() const override { return ModelKind::GenOgdenInvariant; }

  double energy(const SpectralState& s) const override {
    const auto [i1b, i2b] = barred_invariants(s);
    const double t1 = i1b - 3.0;
    const double t2 = std::pow(i2b, 1.5) - 3.0 * std::sqrt(3.0);
    double e = 0.0;
    for (std::size_t i = 0; i < params_.c_i0.size(); ++i)
      e += params_.c_i0[i] * detail::ipow(t1, static_cast<int>(i) + 1);
    for (std::size_t j = 0; j < params_.c_0j.size(); ++j)
      e += params_.c_0j[j] * detail::ipow(t2, static_cast<int>(j) + 1);
    e += params_.kappa * (s.j * s.j + 1.0 / (s.j * s.j) - 2.0);
    return e;
  }

  Vec3 stretch_derivatives(const SpectralState& s) const override {
    const auto [i1b, i2b] = barred_invariants(s);
    const double j = s.j;
    const double t1 = i1b - 3.0;
    const double t2 = std::pow(i2b, 1.5) - 3.0 * std::sqrt(3.0);
    // Polynomial derivatives with respect to t1 and t2.
    double dpoly1 = 0.0, dpoly2 = 0.0;
    for (std::size_t i = 0; i < params_.c_i0.size(); ++i)
      dpoly1 += params_.c_i0[i] * (static_cast<double>(i) + 1.0) *
                detail::ipow(t1, static_cast<int>(i));
    for (std::size_t jj = 0; jj < params_.c_0j.size(); ++jj)
      dpoly2 += params_.c_0j[jj] * (static_cast<double>(jj) + 1.0) *
                detail::ipow(t2, static_cast<int>(jj));
    const double i1 = s.stretches[0] * s.stretches[0] +
                      s.stretches[1] * s.stretches[1] +
                      s.stretches[2] * s.stretches[2];
    const double i2 = s.cof_stretches[0] * s.cof_stretches[0] +
                      s.cof_stretches[1] * s.cof_stretches[1] +
                      s.cof_stretches[2] * s.cof_stretches[2];
    const double jm23 = std::pow(j, -2.0 / 3.0);
    const double jm43 = std::pow(j, -4.0 / 3.0);
    Vec3 g{};
    for (int k = 0; k < 3; ++k) {
      const double lk = s.stretches[k];
      const double di1b = 2.0 * jm23 * (lk - i1 / (3.0 * lk));
      // d i2 / d l_k = 2 l_k (sum of the two squared stretches not k)
      const double others = i1 - lk * lk;
      const double di2 = 2.0 * lk * others;
      const double di2b = jm43 * (di2 - 4.0 * i2 / (3.0 * lk));
      const double d_t2 = 1.5 * std::sqrt(i2b) * di2b;
      const double dvol =
          params_.kappa * (2.0 * j - 2.0 / (j * j * j)) * (j / lk);
      g[k] = dpoly1 * di1b + dpoly2 * d_t2 + dvol;
    }
    return g;
  }

  const GenOgdenParams& params() const { return params_; }

 private:
  std::pair<double, double> barred_invariants(const SpectralState& s) const {
    const double i1 = s.stretches[0] * s.stretches[0] +
                      s.stretches[1] * s.stretches[1] +
                      s.stretches[2] * s.stretches[2];
    const double i2 = s.cof_stretches[0] * s.cof_stretches[0] +
                      s.cof_stretches[1] * s.cof_stretches[1] +
                      s.cof_stretches[2] * s.cof_stretches[2];
    return {std::pow(s.j, -2.0 / 3.0) * i1, std::pow(s.j, -4.0 / 3.0) * i2};
  }

  GenOgdenParams params_;
};

struct LedretParams {
  std::vector<double> a_terms;  // each value is both coefficient and exponent
  std::vector<double> b_terms;
  double kappa = 0.0;
};

inline void validate(const LedretParams& p) {
  for (double a : p.a_terms)
    if (!(a >= 1.0))
      throw DomainError("LedretParams: a-terms must be >= 1 for convexity");
  for (double b : p.b_terms)
    if (!(b >= 1.0))
      throw DomainError("LedretParams: b-terms must be >= 1 for convexity");
  if (!(p.kappa >= 0.0)) throw DomainError("LedretParams: kappa must be >= 0");
}

// General (Le Dret style) Ogden expansion:
//   psi = sum_i a_i (l1^{a_i} + l2^{a_i} + l3^{a_i})
//       + sum_j b_j ((l1 l2)^{b_j} + (l1 l3)^{b_j} + (l2 l3)^{b_j}) + G(J)
// The volumetric closure G(J) = kappa (J^2 + J^-2 - 2) - g0 (J - 1) includes
// a linear stress-free-reference correction with g0 = sum a_i^2 + 2 sum b_j^2
// so that sigma(I) = 0; the (J - 1) term is affine in det F and therefore
// preserves polyconvexity.
class LedretModel : public EnergyModel {
 public:
  explicit LedretModel(LedretParams p) : params_(std::move(p)) {
    validate(params_);
    g0_ = 0.0;
    for (double a : params_.a_terms) g0_ += a * a;
    for (double b : params_.b_terms) g0_ += 2.0 * b * b;
  }
  ModelKind kind() const override { return ModelKind::LedretOgden; }

  double energy(const SpectralState& s) const override {
    double e = 0.0;
    for (double a : params_.a_terms)
      e += a * (std::pow(s.stretches[0], a) + std::pow(s.stretches[1], a) +
                std::pow(s.stretches[2], a));
    for (double b : params_.b_terms)
      e += b * (std::pow(s.cof_stretches[0], b) +
                std::pow(s.cof_stretches[1], b) +
                std::pow(s.cof_stretches[2], b));
    e += params_.kappa * (s.j * s.j + 1.0 / (s.j * s.j) - 2.0);
    e -= g0_ * (s.j - 1.0);
    return e;
  }

  Vec3 stretch_derivatives(const SpectralState& s) const override {
    Vec3 g{};
    for (double a : params_.a_terms)
      for (int k = 0; k < 3; ++k)
        g[k] += a * a * std::pow(s.stretches[k], a - 1.0);
    for (double b : params_.b_terms) {
      for (int k = 0; k < 3; ++k) {
        // Pairwise products containing l_k are l_k*l_m for the two other m.
        const int m1 = (k + 1) % 3, m2 = (k + 2) % 3;
        g[k] += b * b * std::pow(s.stretches[k], b - 1.0) *
                (std::pow(s.stretches[m1], b) + std::pow(s.stretches[m2], b));
      }
    }
    const double dvol = params_.kappa * (2.0 * s.j - 2.0 / (s.j * s.j * s.j));
    for (int k = 0; k < 3; ++k)
      g[k] += (dvol - g0_) * (s.j / s.stretches[k]);
    return g;
  }

  const LedretParams& params() const { return params_; }
  double stress_free_slope() const { return g0_; }

 private:
  LedretParams params_;
  double g0_ = 0.0;
};

// ---------------------------------------------------------------------------
// Neural models.  One class covers the full architecture, its two ablation
// variants, and the invariant-based baseline; they differ only in which
// component networks exist and how the eight polyconvex inputs are wired.
//
// Full model:
//   psi = psi_NN(l1,l2,l3, l1l2, l2l3, l1l3, J, -2J) - psi_NN(1,...,1,-2)
//       - sum_a o_a (l_a - 1) + eps (1/J + J^2)
// where psi_NN routes (l1,l2,l3) and the pairwise products through two
// Hölder deep sets and feeds their outputs plus (J, -2J) into a monotone
// convex stack.

class PannModel : public EnergyModel {
 public:
  ModelKind model_kind = ModelKind::LambdaPann;
  double p = 3.0;
  double eps_growth = 0.01;
  std::optional<HolderSet> holder_f;    // over (l1, l2, l3)
  std::optional<HolderSet> holder_cof;  // over (l2 l3, l1 l3, l1 l2)
  std::optional<LayerStack> outer;      // (psi_F, psi_cofF, J, -2J) or
                                        // (I1, I2, J, -2J) for i-pann
  std::optional<LayerStack> psi_j;      // additive variant's J stack
  Vec3 offsets{0.0, 0.0, 0.0};
  std::string data_fingerprint;         // provenance of the training data
  std::optional<double> train_delta;    // training-domain marker metadata

  struct Vars {
    std::optional<HolderVars> hf, hcof;
    std::optional<StackVars> outer, psij;
    std::vector<Tape::Id> leaves;  // all parameter leaves, canonical order
  };

  ModelKind kind() const override { return model_kind; }

  template <class F>
  void visit_stacks(F&& fn) {
    detail_visit(*this, fn);
  }
  template <class F>
  void visit_stacks(F&& fn) const {
    detail_visit(*this, fn);
  }

  std::size_t total_weights() const {
    std::size_t n = 0;
    visit_stacks([&](const char*, const LayerStack& st) {
      n += weight_count(st);
    });
    return n;
  }

  std::size_t total_params() const {
    std::size_t n = 0;
    visit_stacks([&](const char*, const LayerStack& st) {
      n += param_count(st);
    });
    return n;
  }

  std::size_t active_params() const {
    // Weights with nonzero test-time gate plus all biases.
    std::size_t n = 0;
    visit_stacks([&](const char*, const LayerStack& st) {
      n += active_weight_count(st) + (param_count(st) - weight_count(st));
    });
    return n;
  }

  bool has_gates() const {
    bool g = false;
    visit_stacks([&](const char*, const LayerStack& st) {
      if (!st.gate_log_alpha.empty()) g = true;
    });
    return g;
  }

  Vars bind(Tape& t) const {
    Vars v;
    if (holder_f) {
      v.hf = bind_holder(t, *holder_f);
      v.leaves.insert(v.leaves.end(), v.hf->leaves.begin(),
                      v.hf->leaves.end());
    }
    if (holder_cof) {
      v.hcof = bind_holder(t, *holder_cof);
      v.leaves.insert(v.leaves.end(), v.hcof->leaves.begin(),
                      v.hcof->leaves.end());
    }
    if (outer) {
      v.outer = bind_stack(t, *outer);
      v.leaves.insert(v.leaves.end(), v.outer->leaves.begin(),
                      v.outer->leaves.end());
    }
    if (psi_j) {
      v.psij = bind_stack(t, *psi_j);
      v.leaves.insert(v.leaves.end(), v.psij->leaves.begin(),
                      v.psij->leaves.end());
    }
    return v;
  }

  // psi_NN over its seven polyconvex arguments (three stretch slots, three
  // product slots, the determinant slot expanded to (x7, -2 x7)).  This is
  // the map whose convexity the architecture guarantees; exposing it lets
  // tests probe convexity with the slots decoupled.  Not defined for the
  // invariant-based kind, whose inputs are not these slots.
  template <class S>
  S psi_nn_args(const Vars& v, const std::array<S, 7>& x) const {
    const std::array<S, 3> xf{x[0], x[1], x[2]};
    const std::array<S, 3> xc{x[3], x[4], x[5]};
    switch (model_kind) {
      case ModelKind::LambdaPann:
      case ModelKind::LambdaPannNoPhi: {
        const S f = holder_eval<S>(*holder_f, *v.hf, xf);
        const S c = holder_eval<S>(*holder_cof, *v.hcof, xc);
        const std::array<S, 4> xin{f, c, x[6], x[6] * (-2.0)};
        return stack_eval<S>(*outer, *v.outer, xin);
      }
      case ModelKind::LambdaPannAdditive: {
        const S f = holder_eval<S>(*holder_f, *v.hf, xf);
        const S c = holder_eval<S>(*holder_cof, *v.hcof, xc);
        const S gj = stack_eval<S>(*psi_j, *v.psij,
                                   std::span<const S>{&x[6], 1});
        return f + c + gj;
      }
      default:
        throw FormatError("psi_nn_args: kind has no polyconvex-slot form");
    }
  }

  // Raw psi_NN as a function of the three stretches: no energy shift, no
  // offsets, no growth term.  S is Expr or Jet.
  template <class S>
  S psi_nn_eval(const Vars& v, const std::array<S, 3>& lam) const {
    const S p12 = lam[0] * lam[1];
    const S p13 = lam[0] * lam[2];
    const S p23 = lam[1] * lam[2];
    const S jdet = p12 * lam[2];
    if (model_kind == ModelKind::IPann) {
      const S i1 = lam[0] * lam[0] + lam[1] * lam[1] + lam[2] * lam[2];
      const S i2 = p12 * p12 + p13 * p13 + p23 * p23;
      const std::array<S, 4> xin{i1, i2, jdet, jdet * (-2.0)};
      return stack_eval<S>(*outer, *v.outer, xin);
    }
    return psi_nn_args<S>(
        v, {lam[0], lam[1], lam[2], p23, p13, p12, jdet});
  }

  // Value of the polyconvex-slot map at plain doubles (testing hook).
  double psi_nn_forward(const std::array<double, 7>& x) const {
    Tape t;
    const Vars v = bind(t);
    std::array<Expr, 7> xs{};
    for (int i = 0; i < 7; ++i) xs[i] = wrap(t, t.constant(x[i]));
    return psi_nn_args<Expr>(v, xs).val();
  }

  double energy(const SpectralState& s) const override {
    Tape t;
    const Vars v = bind(t);
    const std::array<Expr, 3> lam{wrap(t, t.constant(s.stretches[0])),
                                  wrap(t, t.constant(s.stretches[1])),
                                  wrap(t, t.constant(s.stretches[2]))};
    return total_energy_expr(v, lam).val();
  }

  Vec3 stretch_derivatives(const SpectralState& s) const override {
    Tape t;
    const Vars v = bind(t);
    const std::array<Expr, 3> lam{wrap(t, t.input(s.stretches[0])),
                                  wrap(t, t.input(s.stretches[1])),
                                  wrap(t, t.input(s.stretches[2]))};
    const Expr e = total_energy_expr(v, lam);
    t.backward(e.id);
    return {t.adjoint(lam[0].id), t.adjoint(lam[1].id),
            t.adjoint(lam[2].id)};
  }

  // o_a = d psi_NN / d l_a |_I + d psi_growth / d l_a |_I.  By permutation
  // invariance all three coincide.  Forward-mode jets keep the arithmetic
  // identical to the in-graph offset nodes the trainer differentiates
  // through, so stored and in-graph offsets agree bitwise.
  void calibrate() override {
    Tape t;
    const Vars v = bind(t);
    std::array<Jet, 3> lam{};
    for (int a = 0; a < 3; ++a)
      lam[a] = jet_seed(wrap(t, t.input(1.0)), a);
    const Jet raw = psi_nn_eval<Jet>(v, lam);
    const Jet j = lam[0] * lam[1] * lam[2];
    const Jet tot = raw + (pow(j, -1.0) + pow(j, 2.0)) * eps_growth;
    t.forward();
    offsets = {t.value(tot.d[0].id), t.value(tot.d[1].id),
               t.value(tot.d[2].id)};
  }

 private:
  template <class Self, class F>
  static void detail_visit(Self& self, F&& fn) {
    if (self.holder_f) {
      if (self.holder_f->phi) fn("phi_f", *self.holder_f->phi);
      fn("rho_f", self.holder_f->rho);
    }
    if (self.holder_cof) {
      if (self.holder_cof->phi) fn("phi_cof", *self.holder_cof->phi);
      fn("rho_cof", self.holder_cof->rho);
    }
    if (self.outer) fn("outer", *self.outer);
    if (self.psi_j) fn("psi_j", *self.psi_j);
  }

  Expr total_energy_expr(const Vars& v, const std::array<Expr, 3>& lam) const {
    Tape& t = *lam[0].tape;
    const Expr raw = psi_nn_eval<Expr>(v, lam);
    // The shift is the same subgraph evaluated at the identity; separate
    // leaves pinned at 1 keep its derivative out of the stretch adjoints.
    const std::array<Expr, 3> ones{wrap(t, t.constant(1.0)),
                                   wrap(t, t.constant(1.0)),
                                   wrap(t, t.constant(1.0))};
    const Expr shift = psi_nn_eval<Expr>(v, ones);
    const Expr j = lam[0] * lam[1] * lam[2];
    const Expr growth = (pow(j, -1.0) + pow(j, 2.0)) * eps_growth;
    Expr e = raw - shift + growth;
    for (int a = 0; a < 3; ++a)
      e = e - (lam[a] - 1.0) * offsets[a];
    return e;
  }
};

// Fresh neural model with Glorot-initialized components; deterministic in
// seed.  `layers`/`width` size every component stack identically.
inline std::unique_ptr<PannModel> make_pann(ModelKind kind, double p,
                                            int layers, int width,
                                            std::uint64_t seed) {
  if (!is_neural(kind)) throw FormatError("make_pann: not a neural kind");
  auto m = std::make_unique<PannModel>();
  m->model_kind = kind;
  m->p = p;
  rng::Stream rng(rng::mix(seed, 0x6d6f64656c696e69ULL));  // model-init stream
  const bool use_phi = kind != ModelKind::LambdaPannNoPhi;
  switch (kind) {
    case ModelKind::LambdaPann:
    case ModelKind::LambdaPannNoPhi:
      m->holder_f = make_holder(width, layers, p, use_phi, rng);
      m->holder_cof = make_holder(width, layers, p, use_phi, rng);
      m->outer = make_stack(4, width, layers, true, false, rng);
      break;
    case ModelKind::LambdaPannAdditive:
      m->holder_f = make_holder(width, layers, p, true, rng);
      m->holder_cof = make_holder(width, layers, p, true, rng);
      m->psi_j = make_stack(1, width, layers, false, false, rng);
      break;
    case ModelKind::IPann:
      m->outer = make_stack(4, width, layers, true, false, rng);
      break;
    default:
      break;
  }
  m->calibrate();
  return m;
}

}  // namespace pann
