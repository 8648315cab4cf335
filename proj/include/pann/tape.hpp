#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pann/errors.hpp"

namespace pann {

// Overflow-safe logistic function, shared by tape ops and gate math.
inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Reverse-mode automatic differentiation on a scalar tape.
//
// Nodes are appended once (recording evaluates eagerly); afterwards the
// fixed graph can be re-evaluated with forward() after changing leaf values
// via set_input(), and differentiated with backward(), which accumulates
// adjoints for every node in a single reverse sweep.  Structure-dependent
// constants (the exponent of pow, the p of the p-root reduction) are baked
// into the node, so re-evaluation never re-interprets shapes.
//
// Storage is struct-of-arrays and append-only; Ids are indices and remain
// valid for the lifetime of the tape.
class Tape {
 public:
  using Id = std::int32_t;

  enum class Op : std::uint8_t {
    Const,
    Input,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Pow,       // pow(x, e) with constant exponent e; requires x > 0
    Exp,
    Log,
    Softplus,
    Sigmoid,
    Clamp01,
    Sum,       // sum of n arguments
    Dot,       // sum of products over interleaved argument pairs
    PRoot,     // (sum_i x_i^p)^(1/p) with constant p; requires x_i > 0
  };

  Id constant(double v) { return push_leaf(Op::Const, v); }
  Id input(double v) { return push_leaf(Op::Input, v); }

  // Memoized shared constants, convenient for jet seeding.
  Id zero() {
    if (zero_ < 0) zero_ = constant(0.0);
    return zero_;
  }
  Id one() {
    if (one_ < 0) one_ = constant(1.0);
    return one_;
  }

  void set_input(Id id, double v) {
    if (op_[id] != Op::Input && op_[id] != Op::Const)
      throw std::logic_error("Tape::set_input: node is not a leaf");
    val_[id] = v;
  }

  double value(Id id) const { return val_[id]; }
  double adjoint(Id id) const { return adj_[id]; }
  std::size_t size() const { return op_.size(); }
  void reserve(std::size_t n) {
    op_.reserve(n);
    val_.reserve(n);
    aux_.reserve(n);
    arg_begin_.reserve(n);
    arg_count_.reserve(n);
  }

  Id add(Id a, Id b) { return make_node(Op::Add, {a, b}); }
  Id sub(Id a, Id b) { return make_node(Op::Sub, {a, b}); }
  Id mul(Id a, Id b) { return make_node(Op::Mul, {a, b}); }
  Id div(Id a, Id b) { return make_node(Op::Div, {a, b}); }
  Id neg(Id a) { return make_node(Op::Neg, {a}); }
  Id pow_const(Id base, double expo) {
    return make_node(Op::Pow, {base}, expo);
  }
  Id exp_of(Id a) { return make_node(Op::Exp, {a}); }
  Id log_of(Id a) { return make_node(Op::Log, {a}); }
  Id softplus_of(Id a) { return make_node(Op::Softplus, {a}); }
  Id sigmoid_of(Id a) { return make_node(Op::Sigmoid, {a}); }
  Id clamp01_of(Id a) { return make_node(Op::Clamp01, {a}); }
  Id sum_of(std::span<const Id> xs) { return make_node_n(Op::Sum, xs, 0.0); }

  // dot(a, b) records arguments interleaved (a0, b0, a1, b1, ...).
  Id dot_of(std::span<const Id> a, std::span<const Id> b) {
    if (a.size() != b.size())
      throw DimensionMismatch("Tape::dot_of: length mismatch");
    scratch_.clear();
    for (std::size_t i = 0; i < a.size(); ++i) {
      scratch_.push_back(a[i]);
      scratch_.push_back(b[i]);
    }
    return make_node_n(Op::Dot, scratch_, 0.0);
  }

  Id p_root(std::span<const Id> xs, double p) {
    if (xs.empty()) throw DimensionMismatch("Tape::p_root: empty reduction");
    return make_node_n(Op::PRoot, xs, p);
  }

  // Recompute every non-leaf value (and local partials) in append order.
  void forward() {
    const std::size_t n = op_.size();
    for (std::size_t i = 0; i < n; ++i)
      if (op_[i] != Op::Const && op_[i] != Op::Input)
        eval_node(static_cast<Id>(i));
  }

  // Reverse sweep seeding d(output)/d(output) = 1.  Values and partials
  // must be current (either freshly recorded or recomputed by forward()).
  void backward(Id output) {
    adj_.assign(op_.size(), 0.0);
    adj_[output] = 1.0;
    for (Id i = static_cast<Id>(op_.size()) - 1; i >= 0; --i) {
      const double a = adj_[i];
      if (a == 0.0) continue;
      const std::int32_t begin = arg_begin_[i];
      const std::int32_t cnt = arg_count_[i];
      for (std::int32_t k = 0; k < cnt; ++k)
        adj_[args_[begin + k]] += a * partial_[begin + k];
    }
  }

 private:
  Id push_leaf(Op op, double v) {
    const Id id = static_cast<Id>(op_.size());
    op_.push_back(op);
    val_.push_back(v);
    aux_.push_back(0.0);
    arg_begin_.push_back(static_cast<std::int32_t>(args_.size()));
    arg_count_.push_back(0);
    return id;
  }

  Id make_node(Op op, std::initializer_list<Id> as, double aux = 0.0) {
    return make_node_n(op, {as.begin(), as.size()}, aux);
  }

  Id make_node_n(Op op, std::span<const Id> as, double aux) {
    const Id id = static_cast<Id>(op_.size());
    op_.push_back(op);
    val_.push_back(0.0);
    aux_.push_back(aux);
    arg_begin_.push_back(static_cast<std::int32_t>(args_.size()));
    arg_count_.push_back(static_cast<std::int32_t>(as.size()));
    args_.insert(args_.end(), as.begin(), as.end());
    partial_.resize(args_.size());
    eval_node(id);
    return id;
  }

  void eval_node(Id i) {
    const std::int32_t b = arg_begin_[i];
    switch (op_[i]) {
      case Op::Const:
      case Op::Input:
        break;
      case Op::Add: {
        val_[i] = val_[args_[b]] + val_[args_[b + 1]];
        partial_[b] = 1.0;
        partial_[b + 1] = 1.0;
        break;
      }
      case Op::Sub: {
        val_[i] = val_[args_[b]] - val_[args_[b + 1]];
        partial_[b] = 1.0;
        partial_[b + 1] = -1.0;
        break;
      }
      case Op::Mul: {
        const double x = val_[args_[b]], y = val_[args_[b + 1]];
        val_[i] = x * y;
        partial_[b] = y;
        partial_[b + 1] = x;
        break;
      }
      case Op::Div: {
        const double x = val_[args_[b]], y = val_[args_[b + 1]];
        if (y == 0.0)
          throw DomainError("Tape: division by zero at node " +
                            std::to_string(i));
        val_[i] = x / y;
        partial_[b] = 1.0 / y;
        partial_[b + 1] = -x / (y * y);
        break;
      }
      case Op::Neg: {
        val_[i] = -val_[args_[b]];
        partial_[b] = -1.0;
        break;
      }
      case Op::Pow: {
        const double x = val_[args_[b]];
        const double e = aux_[i];
        if (!(x > 0.0))
          throw DomainError("Tape: pow base " + std::to_string(x) +
                            " is not positive at node " + std::to_string(i));
        val_[i] = std::pow(x, e);
        partial_[b] = e * std::pow(x, e - 1.0);
        break;
      }
      case Op::Exp: {
        val_[i] = std::exp(val_[args_[b]]);
        partial_[b] = val_[i];
        break;
      }
      case Op::Log: {
        const double x = val_[args_[b]];
        if (!(x > 0.0))
          throw DomainError("Tape: log argument " + std::to_string(x) +
                            " is not positive at node " + std::to_string(i));
        val_[i] = std::log(x);
        partial_[b] = 1.0 / x;
        break;
      }
      case Op::Softplus: {
        const double x = val_[args_[b]];
        // Overflow-safe: softplus(x) = max(x, 0) + log1p(exp(-|x|)).
        val_[i] = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
        partial_[b] = stable_sigmoid(x);
        break;
      }
      case Op::Sigmoid: {
        const double s = stable_sigmoid(val_[args_[b]]);
        val_[i] = s;
        partial_[b] = s * (1.0 - s);
        break;
      }
      case Op::Clamp01: {
        const double x = val_[args_[b]];
        val_[i] = std::min(1.0, std::max(0.0, x));
        partial_[b] = (x > 0.0 && x < 1.0) ? 1.0 : 0.0;
        break;
      }
      case Op::Sum: {
        double s = 0.0;
        const std::int32_t cnt = arg_count_[i];
        for (std::int32_t k = 0; k < cnt; ++k) {
          s += val_[args_[b + k]];
          partial_[b + k] = 1.0;
        }
        val_[i] = s;
        break;
      }
      case Op::Dot: {
        double s = 0.0;
        const std::int32_t cnt = arg_count_[i];
        for (std::int32_t k = 0; k < cnt; k += 2) {
          const double x = val_[args_[b + k]];
          const double y = val_[args_[b + k + 1]];
          s += x * y;
          partial_[b + k] = y;
          partial_[b + k + 1] = x;
        }
        val_[i] = s;
        break;
      }
      case Op::PRoot: {
        const double p = aux_[i];
        const std::int32_t cnt = arg_count_[i];
        double s = 0.0;
        for (std::int32_t k = 0; k < cnt; ++k) {
          const double x = val_[args_[b + k]];
          if (!(x > 0.0))
            throw DomainError("Tape: p-root operand " + std::to_string(x) +
                              " is not positive at node " +
                              std::to_string(i));
          s += std::pow(x, p);
        }
        const double y = std::pow(s, 1.0 / p);
        val_[i] = y;
        for (std::int32_t k = 0; k < cnt; ++k)
          partial_[b + k] = std::pow(val_[args_[b + k]] / y, p - 1.0);
        break;
      }
    }
  }

  std::vector<Op> op_;
  std::vector<double> val_;
  std::vector<double> aux_;
  std::vector<std::int32_t> arg_begin_;
  std::vector<std::int32_t> arg_count_;
  std::vector<Id> args_;
  std::vector<double> partial_;  // local partials, parallel to args_
  std::vector<double> adj_;
  std::vector<Id> scratch_;
  Id zero_ = -1;
  Id one_ = -1;
};

// ---------------------------------------------------------------------------
// Expression handle: a (tape, node) pair with operator sugar, so model code
// reads like the formulas it implements.

struct Expr {
  Tape* tape = nullptr;
  Tape::Id id = -1;
  double val() const { return tape->value(id); }
};

inline Expr wrap(Tape& t, Tape::Id id) { return {&t, id}; }

inline Expr operator+(Expr a, Expr b) { return {a.tape, a.tape->add(a.id, b.id)}; }
inline Expr operator-(Expr a, Expr b) { return {a.tape, a.tape->sub(a.id, b.id)}; }
inline Expr operator*(Expr a, Expr b) { return {a.tape, a.tape->mul(a.id, b.id)}; }
inline Expr operator/(Expr a, Expr b) { return {a.tape, a.tape->div(a.id, b.id)}; }
inline Expr operator-(Expr a) { return {a.tape, a.tape->neg(a.id)}; }

inline Expr operator+(Expr a, double c) { return a + wrap(*a.tape, a.tape->constant(c)); }
inline Expr operator+(double c, Expr a) { return a + c; }
inline Expr operator-(Expr a, double c) { return a - wrap(*a.tape, a.tape->constant(c)); }
inline Expr operator-(double c, Expr a) { return wrap(*a.tape, a.tape->constant(c)) - a; }
inline Expr operator*(Expr a, double c) { return a * wrap(*a.tape, a.tape->constant(c)); }
inline Expr operator*(double c, Expr a) { return a * c; }
inline Expr operator/(Expr a, double c) { return a / wrap(*a.tape, a.tape->constant(c)); }
inline Expr operator/(double c, Expr a) { return wrap(*a.tape, a.tape->constant(c)) / a; }

inline Expr pow(Expr a, double e) { return {a.tape, a.tape->pow_const(a.id, e)}; }
inline Expr exp(Expr a) { return {a.tape, a.tape->exp_of(a.id)}; }
inline Expr log(Expr a) { return {a.tape, a.tape->log_of(a.id)}; }
inline Expr softplus(Expr a) { return {a.tape, a.tape->softplus_of(a.id)}; }
inline Expr sigmoid(Expr a) { return {a.tape, a.tape->sigmoid_of(a.id)}; }
inline Expr clamp01(Expr a) { return {a.tape, a.tape->clamp01_of(a.id)}; }

namespace detail {
inline std::vector<Tape::Id> ids_of(std::span<const Expr> xs) {
  std::vector<Tape::Id> ids;
  ids.reserve(xs.size());
  for (const Expr& x : xs) ids.push_back(x.id);
  return ids;
}
}  // namespace detail

inline Expr sum(std::span<const Expr> xs) {
  const auto ids = detail::ids_of(xs);
  return {xs[0].tape, xs[0].tape->sum_of(ids)};
}

inline Expr dot(std::span<const Expr> a, std::span<const Expr> b) {
  const auto ia = detail::ids_of(a);
  const auto ib = detail::ids_of(b);
  return {a[0].tape, a[0].tape->dot_of(ia, ib)};
}

inline Expr p_root(std::span<const Expr> xs, double p) {
  const auto ids = detail::ids_of(xs);
  return {xs[0].tape, xs[0].tape->p_root(ids, p)};
}

// ---------------------------------------------------------------------------
// First-order jet with three tangent directions.  Propagating a jet through
// the recorded graph builds *nodes* for the directional derivatives, so the
// tangents themselves remain differentiable by the reverse sweep.  This is
// how stress (an energy gradient) becomes part of the training graph while
// the tape itself stays strictly first-order.

struct Jet {
  Expr v;
  std::array<Expr, 3> d;
};

// Constant with zero tangents.
inline Jet jet_const(Tape& t, double c) {
  const Expr z = wrap(t, t.zero());
  return {wrap(t, t.constant(c)), {z, z, z}};
}

// Lift a tangent-free expression (e.g. a parameter leaf).
inline Jet jet_lift(Expr v) {
  Tape& t = *v.tape;
  const Expr z = wrap(t, t.zero());
  return {v, {z, z, z}};
}

// Input with unit tangent along the given axis: the seeds for the three
// principal stretches.
inline Jet jet_seed(Expr v, int axis) {
  Tape& t = *v.tape;
  const Expr z = wrap(t, t.zero());
  Jet j{v, {z, z, z}};
  j.d[axis] = wrap(t, t.one());
  return j;
}

inline Jet operator+(const Jet& a, const Jet& b) {
  return {a.v + b.v, {a.d[0] + b.d[0], a.d[1] + b.d[1], a.d[2] + b.d[2]}};
}
inline Jet operator+(const Jet& a, Expr b) { return {a.v + b, a.d}; }
inline Jet operator+(Expr a, const Jet& b) { return b + a; }
inline Jet operator-(const Jet& a, const Jet& b) {
  return {a.v - b.v, {a.d[0] - b.d[0], a.d[1] - b.d[1], a.d[2] - b.d[2]}};
}
inline Jet operator-(const Jet& a) {
  return {-a.v, {-a.d[0], -a.d[1], -a.d[2]}};
}
inline Jet operator*(const Jet& a, const Jet& b) {
  return {a.v * b.v,
          {a.d[0] * b.v + b.d[0] * a.v, a.d[1] * b.v + b.d[1] * a.v,
           a.d[2] * b.v + b.d[2] * a.v}};
}
inline Jet operator*(const Jet& a, Expr c) {
  return {a.v * c, {a.d[0] * c, a.d[1] * c, a.d[2] * c}};
}
inline Jet operator*(Expr c, const Jet& a) { return a * c; }
inline Jet operator*(const Jet& a, double c) {
  return a * wrap(*a.v.tape, a.v.tape->constant(c));
}
inline Jet operator*(double c, const Jet& a) { return a * c; }
inline Jet operator/(const Jet& a, const Jet& b) {
  const Expr v = a.v / b.v;
  return {v,
          {(a.d[0] - v * b.d[0]) / b.v, (a.d[1] - v * b.d[1]) / b.v,
           (a.d[2] - v * b.d[2]) / b.v}};
}

inline Jet pow(const Jet& a, double e) {
  Tape& t = *a.v.tape;
  const Expr v = pow(a.v, e);
  const Expr f = wrap(t, t.constant(e)) * pow(a.v, e - 1.0);
  return {v, {f * a.d[0], f * a.d[1], f * a.d[2]}};
}
inline Jet exp(const Jet& a) {
  const Expr v = exp(a.v);
  return {v, {v * a.d[0], v * a.d[1], v * a.d[2]}};
}
inline Jet log(const Jet& a) {
  return {log(a.v), {a.d[0] / a.v, a.d[1] / a.v, a.d[2] / a.v}};
}
inline Jet softplus(const Jet& a) {
  const Expr g = sigmoid(a.v);
  return {softplus(a.v), {g * a.d[0], g * a.d[1], g * a.d[2]}};
}

inline Jet sum(std::span<const Jet> xs) {
  std::vector<Expr> vs, d0, d1, d2;
  vs.reserve(xs.size());
  d0.reserve(xs.size());
  d1.reserve(xs.size());
  d2.reserve(xs.size());
  for (const Jet& x : xs) {
    vs.push_back(x.v);
    d0.push_back(x.d[0]);
    d1.push_back(x.d[1]);
    d2.push_back(x.d[2]);
  }
  return {sum(vs), {sum(d0), sum(d1), sum(d2)}};
}

// Weighted sum with tangent-free weights, fused into Dot nodes.
inline Jet dot(std::span<const Expr> w, std::span<const Jet> x) {
  std::vector<Expr> vs, d0, d1, d2;
  vs.reserve(x.size());
  d0.reserve(x.size());
  d1.reserve(x.size());
  d2.reserve(x.size());
  for (const Jet& xi : x) {
    vs.push_back(xi.v);
    d0.push_back(xi.d[0]);
    d1.push_back(xi.d[1]);
    d2.push_back(xi.d[2]);
  }
  return {dot(w, vs), {dot(w, d0), dot(w, d1), dot(w, d2)}};
}

inline Jet p_root(std::span<const Jet> xs, double p) {
  std::vector<Expr> vs;
  vs.reserve(xs.size());
  for (const Jet& x : xs) vs.push_back(x.v);
  const Expr y = p_root(vs, p);
  // d y / d x_i = (x_i / y)^(p-1); chain with each operand's tangents.
  std::vector<Expr> w;
  w.reserve(xs.size());
  for (const Jet& x : xs) w.push_back(pow(x.v / y, p - 1.0));
  std::array<Expr, 3> d;
  for (int k = 0; k < 3; ++k) {
    std::vector<Expr> dk;
    dk.reserve(xs.size());
    for (const Jet& x : xs) dk.push_back(x.d[k]);
    d[k] = dot(w, dk);
  }
  return {y, d};
}

}  // namespace pann
