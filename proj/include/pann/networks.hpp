#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "pann/errors.hpp"
#include "pann/rng.hpp"
#include "pann/tape.hpp"

namespace pann {

// ---------------------------------------------------------------------------
// Input-convex feed-forward stacks.
//
// Architecture (depth = number of hidden layers, softplus activations):
//   z_1     = softplus(Wx_0 x + b_0)
//   z_{l+1} = softplus(Wz_l z_l + Wx_l x + b_l)        Wz_l >= 0
//   out     = Wz_L z_L + Wx_L x + b_L                  Wz_L >= 0
// With these weight-sign constraints the output is convex in x.  Setting the
// monotone flag additionally constrains every Wx >= 0, which makes the output
// nondecreasing in each input as well.  positive_output appends a final
// softplus, capping the map to strictly positive values while preserving
// convexity (softplus is convex and increasing).

struct Dense {
  int rows = 0, cols = 0;
  std::vector<double> w;  // row-major

  static Dense zeros(int r, int c) {
    return {r, c, std::vector<double>(static_cast<std::size_t>(r) * c, 0.0)};
  }
  double& at(int r, int c) { return w[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return w[static_cast<std::size_t>(r) * cols + c];
  }
};

struct HiddenLayer {
  Dense wx;               // width x input_dim
  Dense wz;               // width x width; empty for the first layer
  std::vector<double> b;  // width
};

struct OutputLayer {
  std::vector<double> wz;  // width
  std::vector<double> wx;  // input_dim
  double b = 0.0;
};

struct LayerStack {
  int input_dim = 0;
  int width = 0;
  int depth = 0;  // number of hidden layers
  bool monotone = false;
  bool positive_output = false;
  std::vector<HiddenLayer> hidden;
  OutputLayer out;
  // One log-alpha per weight (visit order, biases excluded); empty when the
  // stack carries no stochastic gates.
  std::vector<double> gate_log_alpha;
};

enum class ParamKind { WeightX, WeightZ, Bias };

namespace detail {

// Visits every parameter in canonical order: per hidden layer wx (row-major),
// wz (row-major), b; then out.wz, out.wx, out.b.  The callback receives
// (value&, kind, constrained-to-nonnegative, weight_index) where weight_index
// counts weights only (-1 for biases) and indexes gate_log_alpha.
template <class StackT, class F>
void visit_params_impl(StackT& st, F&& fn) {
  std::ptrdiff_t widx = 0;
  const bool mono = st.monotone;
  for (auto& layer : st.hidden) {
    for (auto& v : layer.wx.w) fn(v, ParamKind::WeightX, mono, widx++);
    for (auto& v : layer.wz.w) fn(v, ParamKind::WeightZ, true, widx++);
    for (auto& v : layer.b) fn(v, ParamKind::Bias, false, std::ptrdiff_t{-1});
  }
  for (auto& v : st.out.wz) fn(v, ParamKind::WeightZ, true, widx++);
  for (auto& v : st.out.wx) fn(v, ParamKind::WeightX, mono, widx++);
  fn(st.out.b, ParamKind::Bias, false, std::ptrdiff_t{-1});
}

}  // namespace detail

template <class F>
void visit_params(LayerStack& st, F&& fn) {
  detail::visit_params_impl(st, fn);
}
template <class F>
void visit_params(const LayerStack& st, F&& fn) {
  detail::visit_params_impl(st, fn);
}

inline std::size_t weight_count(const LayerStack& st) {
  std::size_t n = 0;
  visit_params(st, [&](const double&, ParamKind k, bool, std::ptrdiff_t) {
    if (k != ParamKind::Bias) ++n;
  });
  return n;
}

inline std::size_t param_count(const LayerStack& st) {
  std::size_t n = 0;
  visit_params(st, [&](const double&, ParamKind, bool, std::ptrdiff_t) { ++n; });
  return n;
}

// Glorot-uniform initialization, r = sqrt(6 / (fan_in + fan_out)); weights
// under a nonnegativity constraint take the absolute value of the draw, and
// biases start at zero.
inline LayerStack make_stack(int input_dim, int width, int depth,
                             bool monotone, bool positive_output,
                             rng::Stream& rng) {
  if (input_dim < 1 || width < 1 || depth < 1)
    throw DimensionMismatch("make_stack: dimensions must be positive");
  LayerStack st;
  st.input_dim = input_dim;
  st.width = width;
  st.depth = depth;
  st.monotone = monotone;
  st.positive_output = positive_output;

  const auto draw = [&](int fan_in, int fan_out, bool constrained) {
    const double r = std::sqrt(6.0 / (fan_in + fan_out));
    const double v = rng.next_uniform(-r, r);
    return constrained ? std::abs(v) : v;
  };

  for (int l = 0; l < depth; ++l) {
    HiddenLayer layer;
    layer.wx = Dense::zeros(width, input_dim);
    for (auto& v : layer.wx.w) v = draw(input_dim, width, monotone);
    if (l > 0) {
      layer.wz = Dense::zeros(width, width);
      for (auto& v : layer.wz.w) v = draw(width, width, true);
    }
    layer.b.assign(width, 0.0);
    st.hidden.push_back(std::move(layer));
  }
  st.out.wz.resize(width);
  for (auto& v : st.out.wz) v = draw(width, 1, true);
  st.out.wx.resize(input_dim);
  for (auto& v : st.out.wx) v = draw(input_dim, 1, monotone);
  st.out.b = 0.0;
  return st;
}

// Clip-after-step projection onto the constraint set.
inline void project_constraints(LayerStack& st) {
  visit_params(st, [](double& v, ParamKind, bool constrained, std::ptrdiff_t) {
    if (constrained && v < 0.0) v = 0.0;
  });
}

// ---------------------------------------------------------------------------
// Hard-concrete stochastic gates for differentiable L0 sparsification.
// A gate multiplies one weight; during training it is sampled from a
// stretched, clamped binary concrete distribution, and at inference it is
// frozen at a deterministic value.

struct HardConcrete {
  double temperature = 2.0 / 3.0;
  double stretch_lo = -0.1;
  double stretch_hi = 1.1;
};

// Sampled gate value for uniform noise u in (0, 1).
inline double gate_sample(double log_alpha, double u,
                          const HardConcrete& hc = {}) {
  const double s = stable_sigmoid(
      (std::log(u) - std::log1p(-u) + log_alpha) / hc.temperature);
  const double stretched =
      s * (hc.stretch_hi - hc.stretch_lo) + hc.stretch_lo;
  return std::min(1.0, std::max(0.0, stretched));
}

// d(sampled gate)/d(log_alpha) at fixed noise; zero where the clamp binds.
inline double gate_sample_dlogalpha(double log_alpha, double u,
                                    const HardConcrete& hc = {}) {
  const double s = stable_sigmoid(
      (std::log(u) - std::log1p(-u) + log_alpha) / hc.temperature);
  const double stretched =
      s * (hc.stretch_hi - hc.stretch_lo) + hc.stretch_lo;
  if (stretched <= 0.0 || stretched >= 1.0) return 0.0;
  return s * (1.0 - s) * (hc.stretch_hi - hc.stretch_lo) / hc.temperature;
}

// Deterministic test-time gate (the noise-free surrogate).
inline double gate_test_value(double log_alpha, const HardConcrete& hc = {}) {
  const double stretched = stable_sigmoid(log_alpha) *
                               (hc.stretch_hi - hc.stretch_lo) +
                           hc.stretch_lo;
  return std::min(1.0, std::max(0.0, stretched));
}

// Probability that the gate is nonzero: the expected-L0 penalty term.
inline double gate_expected_active(double log_alpha,
                                   const HardConcrete& hc = {}) {
  return stable_sigmoid(log_alpha - hc.temperature *
                                        std::log(-hc.stretch_lo /
                                                 hc.stretch_hi));
}

inline double gate_expected_active_dlogalpha(double log_alpha,
                                             const HardConcrete& hc = {}) {
  const double s = gate_expected_active(log_alpha, hc);
  return s * (1.0 - s);
}

inline void enable_gates(LayerStack& st, double init_log_alpha) {
  st.gate_log_alpha.assign(weight_count(st), init_log_alpha);
}

// Weight values with test-time gates applied (biases pass through), in
// visit order.  This is what evaluation graphs bind as leaves.
inline std::vector<double> effective_params(const LayerStack& st) {
  std::vector<double> vals;
  vals.reserve(param_count(st));
  const bool gated = !st.gate_log_alpha.empty();
  visit_params(st, [&](const double& v, ParamKind k, bool,
                       std::ptrdiff_t widx) {
    if (gated && k != ParamKind::Bias)
      vals.push_back(v * gate_test_value(st.gate_log_alpha[widx]));
    else
      vals.push_back(v);
  });
  return vals;
}

// Number of weights whose test-time gate is nonzero (all weights when the
// stack has no gates).
inline std::size_t active_weight_count(const LayerStack& st) {
  if (st.gate_log_alpha.empty()) return weight_count(st);
  std::size_t n = 0;
  for (double la : st.gate_log_alpha)
    if (gate_test_value(la) > 0.0) ++n;
  return n;
}

// ---------------------------------------------------------------------------
// Binding a stack onto a tape.  Every parameter becomes an Input leaf whose
// initial value is the current effective parameter; `leaves` lists them in
// visit order so a trainer can re-set values without rebuilding the graph.

struct LayerVars {
  std::vector<Expr> wx, wz, b;
};

struct StackVars {
  std::vector<LayerVars> hidden;
  LayerVars out;
  std::vector<Tape::Id> leaves;
};

inline StackVars bind_stack(Tape& t, const LayerStack& st) {
  const std::vector<double> vals = effective_params(st);
  StackVars sv;
  std::size_t i = 0;
  const auto leaf = [&]() {
    const Tape::Id id = t.input(vals[i++]);
    sv.leaves.push_back(id);
    return wrap(t, id);
  };
  for (const auto& layer : st.hidden) {
    LayerVars lv;
    lv.wx.reserve(layer.wx.w.size());
    for (std::size_t k = 0; k < layer.wx.w.size(); ++k)
      lv.wx.push_back(leaf());
    lv.wz.reserve(layer.wz.w.size());
    for (std::size_t k = 0; k < layer.wz.w.size(); ++k)
      lv.wz.push_back(leaf());
    lv.b.reserve(layer.b.size());
    for (std::size_t k = 0; k < layer.b.size(); ++k) lv.b.push_back(leaf());
    sv.hidden.push_back(std::move(lv));
  }
  sv.out.wz.reserve(st.out.wz.size());
  for (std::size_t k = 0; k < st.out.wz.size(); ++k)
    sv.out.wz.push_back(leaf());
  sv.out.wx.reserve(st.out.wx.size());
  for (std::size_t k = 0; k < st.out.wx.size(); ++k)
    sv.out.wx.push_back(leaf());
  sv.out.b.push_back(leaf());
  return sv;
}

namespace detail {
inline double value_of(const Expr& e) { return e.val(); }
inline double value_of(const Jet& j) { return j.v.val(); }
}  // namespace detail

// Evaluate the stack on tape values or jets.  S is Expr or Jet.
template <class S>
S stack_eval(const LayerStack& st, const StackVars& sv,
             std::span<const S> x) {
  if (static_cast<int>(x.size()) != st.input_dim)
    throw DimensionMismatch("stack_eval: input dimension mismatch");
  std::vector<S> z;
  z.reserve(st.width);
  std::vector<S> znext;
  znext.reserve(st.width);
  for (int l = 0; l < st.depth; ++l) {
    const LayerVars& lv = sv.hidden[l];
    znext.clear();
    for (int i = 0; i < st.width; ++i) {
      const std::span<const Expr> wx_row{
          lv.wx.data() + static_cast<std::size_t>(i) * st.input_dim,
          static_cast<std::size_t>(st.input_dim)};
      S pre = dot(wx_row, x) + lv.b[i];
      if (l > 0) {
        const std::span<const Expr> wz_row{
            lv.wz.data() + static_cast<std::size_t>(i) * st.width,
            static_cast<std::size_t>(st.width)};
        pre = pre + dot(wz_row, std::span<const S>{z});
      }
      znext.push_back(softplus(pre));
    }
    std::swap(z, znext);
  }
  S o = dot(std::span<const Expr>{sv.out.wz}, std::span<const S>{z}) +
        dot(std::span<const Expr>{sv.out.wx}, x) + sv.out.b[0];
  if (st.positive_output) o = softplus(o);
  return o;
}

// Plain value evaluation on a throwaway tape.
inline double stack_forward(const LayerStack& st,
                            std::span<const double> x) {
  Tape t;
  const StackVars sv = bind_stack(t, st);
  std::vector<Expr> xs;
  xs.reserve(x.size());
  for (double xi : x) xs.push_back(wrap(t, t.constant(xi)));
  return stack_eval<Expr>(st, sv, xs).val();
}

// ---------------------------------------------------------------------------
// Symmetrized set function with a Hölder-mean style reduction:
//   y = (sum_i phi(x_i)^p)^(1/p),   out = rho(y)
// phi is a convex stack with a positive output cap, rho a monotone convex
// stack; the p-root of a sum of p-th powers of convex positive functions is
// convex and permutation-invariant, and rho preserves that.  When phi is
// absent the reduction acts on the raw (positive) inputs.

struct HolderSet {
  std::optional<LayerStack> phi;
  LayerStack rho;
  double p = 3.0;
};

struct HolderVars {
  std::optional<StackVars> phi;
  StackVars rho;
  std::vector<Tape::Id> leaves;
};

inline HolderSet make_holder(int width, int depth, double p, bool use_phi,
                             rng::Stream& rng) {
  if (!(p >= 1.0))
    throw DomainError("make_holder: reduction power p must be >= 1");
  HolderSet hs;
  if (use_phi) hs.phi = make_stack(1, width, depth, false, true, rng);
  hs.rho = make_stack(1, width, depth, true, false, rng);
  hs.p = p;
  return hs;
}

inline HolderVars bind_holder(Tape& t, const HolderSet& hs) {
  HolderVars hv;
  if (hs.phi) {
    hv.phi = bind_stack(t, *hs.phi);
    hv.leaves = hv.phi->leaves;
  }
  hv.rho = bind_stack(t, hs.rho);
  hv.leaves.insert(hv.leaves.end(), hv.rho.leaves.begin(),
                   hv.rho.leaves.end());
  return hv;
}

template <class S>
S holder_eval(const HolderSet& hs, const HolderVars& hv,
              const std::array<S, 3>& x) {
  // Evaluate elements in descending order of their current values.  The sum
  // inside the reduction is mathematically symmetric; fixing the floating-
  // point summation order makes it bitwise permutation-invariant too.
  std::array<int, 3> idx{0, 1, 2};
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return detail::value_of(x[a]) > detail::value_of(x[b]);
  });
  std::vector<S> bases;
  bases.reserve(3);
  for (int k = 0; k < 3; ++k) {
    const S& xi = x[idx[k]];
    if (hs.phi)
      bases.push_back(
          stack_eval<S>(*hs.phi, *hv.phi, std::span<const S>{&xi, 1}));
    else
      bases.push_back(xi);
  }
  const S y = p_root(std::span<const S>{bases}, hs.p);
  return stack_eval<S>(hs.rho, hv.rho, std::span<const S>{&y, 1});
}

inline double holder_forward(const HolderSet& hs, double a, double b,
                             double c) {
  Tape t;
  const HolderVars hv = bind_holder(t, hs);
  const std::array<Expr, 3> x{wrap(t, t.constant(a)), wrap(t, t.constant(b)),
                              wrap(t, t.constant(c))};
  return holder_eval<Expr>(hs, hv, x).val();
}

}  // namespace pann
