#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pann/datagen.hpp"
#include "pann/errors.hpp"
#include "pann/loading.hpp"
#include "pann/models.hpp"
#include "pann/networks.hpp"
#include "pann/rng.hpp"
#include "pann/tape.hpp"

namespace pann {

// Which stress measure the experimental loss compares in.  AsDeclared uses
// each data row's own measure; the other two convert everything.  Synthetic
// (tensor) data always compares Cauchy components.
enum class LossMeasure { AsDeclared, Cauchy, Nominal };

struct TrainConfig {
  ModelKind arch = ModelKind::LambdaPann;
  double p = 3.0;  // deep-set reduction exponent
  int layers = 2;
  int width = 10;
  double lr = 1e-3;
  int epochs = 100000;
  double l0_factor = 0.0;  // 0 disables gates; 1e-4 for experimental fits
  std::uint64_t seed = 0;
  LossMeasure loss_stress_measure = LossMeasure::AsDeclared;
  int report_stride = 100;
  double gate_init_log_alpha = 2.2;
};

inline void validate(const TrainConfig& cfg) {
  // lr = 0 is allowed as the degenerate "optimizer off" case.
  if (!(cfg.lr >= 0.0)) throw DomainError("TrainConfig: lr must be >= 0");
  if (cfg.epochs <= 0) throw DomainError("TrainConfig: epochs must be > 0");
  if (!(cfg.p >= 1.0)) throw DomainError("TrainConfig: p must be >= 1");
  if (cfg.report_stride <= 0)
    throw DomainError("TrainConfig: report_stride must be > 0");
  if (!(cfg.l0_factor >= 0.0))
    throw DomainError("TrainConfig: l0_factor must be >= 0");
}

struct ReportRow {
  int epoch = 0;
  double train_loss = 0.0;
  double extrap_loss = std::numeric_limits<double>::quiet_NaN();
  std::size_t active_params = 0;
};

struct TrainReport {
  std::vector<ReportRow> rows;
  double final_train_mse = std::numeric_limits<double>::quiet_NaN();
  double final_extrap_mse = std::numeric_limits<double>::quiet_NaN();
  std::map<std::string, double> r2;  // per-mode, experimental fits only
};

// ---------------------------------------------------------------------------
// Reusable full-batch loss graphs.  One tape holds the parameter leaves and
// one record's worth of data leaves; iterating a batch re-sets the data
// leaves and re-runs forward/backward, so graph construction happens once
// per training run.

class BatchGraph {
 public:
  virtual ~BatchGraph() = default;
  virtual std::size_t size() const = 0;
  virtual void set_params(std::span<const double> leaf_values) = 0;
  virtual void set_offsets(const Vec3& offsets) = 0;
  virtual void select(std::size_t record) = 0;
  virtual double forward() = 0;  // data loss of the selected record
  virtual void backward() = 0;
  virtual double param_adjoint(std::size_t leaf) const = 0;
  virtual double offset_adjoint(int axis) const = 0;
  virtual std::size_t param_leaf_count() const = 0;
};

namespace detail {

// Shared graph-building core: stress prediction on the mode/spectral axes.
// sigma_a = (lambda_a / J) (d psi_NN/d lambda_a - o_a + d psi_growth/d
// lambda_a) built with jets so one reverse sweep differentiates the whole
// stress residual with respect to the parameter leaves.
struct StressNodes {
  std::array<Expr, 3> lam_leaf;  // sorted descending when set
  std::array<Expr, 3> off_leaf;
  std::array<Expr, 3> sigma_coef;  // sigma_a without the direction factors
};

inline StressNodes build_stress_nodes(Tape& t, const PannModel& model,
                                      const PannModel::Vars& vars) {
  StressNodes n;
  // Strictly decreasing placeholder stretches freeze the deep-set evaluation
  // order; every later record is loaded sorted, so the order stays valid.
  const double init[3] = {1.3, 1.05, 0.9};
  std::array<Jet, 3> lam{};
  for (int a = 0; a < 3; ++a) {
    n.lam_leaf[a] = wrap(t, t.input(init[a]));
    lam[a] = jet_seed(n.lam_leaf[a], a);
    n.off_leaf[a] = wrap(t, t.input(model.offsets[a]));
  }
  const Jet psi = model.psi_nn_eval<Jet>(vars, lam);
  const Jet jdet = lam[0] * lam[1] * lam[2];
  const Jet growth = (pow(jdet, -1.0) + pow(jdet, 2.0)) * model.eps_growth;
  const Jet total = psi + growth;
  const Expr inv_j = wrap(t, t.one()) / jdet.v;
  for (int a = 0; a < 3; ++a)
    n.sigma_coef[a] = n.lam_leaf[a] * (total.d[a] - n.off_leaf[a]) * inv_j;
  return n;
}

inline constexpr std::uint64_t kGateNoiseLabel = 0x676174656e6f6973ULL;

// The normalization offsets are functions of the parameters, o_a(w) =
// d(psi_NN + psi_growth)/d lambda_a at F = I, and the loss depends on them
// through every stress residual.  Treating them as constants during the
// backward pass leaves a spurious common-mode direction that the optimizer
// happily runs away along; this small identity-point graph supplies the
// missing d o/d w term.  Construction mirrors PannModel::calibrate op for
// op, so in-graph and stored offsets agree bitwise.
class OffsetGraph {
 public:
  explicit OffsetGraph(const PannModel& model) {
    vars_ = model.bind(tape_);
    std::array<Jet, 3> lam{};
    for (int a = 0; a < 3; ++a)
      lam[a] = jet_seed(wrap(tape_, tape_.input(1.0)), a);
    const Jet raw = model.psi_nn_eval<Jet>(vars_, lam);
    const Jet j = lam[0] * lam[1] * lam[2];
    const Jet tot = raw + (pow(j, -1.0) + pow(j, 2.0)) * model.eps_growth;
    for (int a = 0; a < 3; ++a) o_[a] = tot.d[a];
  }

  std::size_t param_leaf_count() const { return vars_.leaves.size(); }

  void set_params(std::span<const double> leaf_values) {
    if (leaf_values.size() != vars_.leaves.size())
      throw DimensionMismatch("OffsetGraph: parameter vector mismatch");
    for (std::size_t i = 0; i < leaf_values.size(); ++i)
      tape_.set_input(vars_.leaves[i], leaf_values[i]);
  }

  Vec3 offsets() {
    tape_.forward();
    return {tape_.value(o_[0].id), tape_.value(o_[1].id),
            tape_.value(o_[2].id)};
  }

  // grad[i] += sum_a dl_do[a] * d o_a / d leaf_i; call after offsets().
  void accumulate(const Vec3& dl_do, std::vector<double>& grad) {
    for (int a = 0; a < 3; ++a) {
      if (dl_do[a] == 0.0) continue;
      tape_.backward(o_[a].id);
      for (std::size_t i = 0; i < vars_.leaves.size(); ++i)
        grad[i] += dl_do[a] * tape_.adjoint(vars_.leaves[i]);
    }
  }

 private:
  Tape tape_;
  PannModel::Vars vars_;
  std::array<Expr, 3> o_{};
};

}  // namespace detail

// Batch over synthetic (F, sigma) records: per-record loss is the mean of
// squared differences over the six independent Cauchy components.
class SyntheticBatch : public BatchGraph {
 public:
  SyntheticBatch(const PannModel& model, const Dataset& data)
      : data_(&data) {
    vars_ = model.bind(tape_);
    nodes_ = detail::build_stress_nodes(tape_, model, vars_);
    for (int a = 0; a < 3; ++a)
      for (int c = 0; c < 6; ++c)
        dir_leaf_[static_cast<std::size_t>(a) * 6 + c] =
            wrap(tape_, tape_.input(0.0));
    std::array<Expr, 6> sq{};
    for (int c = 0; c < 6; ++c) {
      tgt_leaf_[c] = wrap(tape_, tape_.input(0.0));
      const std::array<Expr, 3> cols{dir_leaf_[c], dir_leaf_[6 + c],
                                     dir_leaf_[12 + c]};
      const Expr pred =
          dot(std::span<const Expr>{nodes_.sigma_coef}, std::span<const Expr>{cols});
      const Expr res = pred - tgt_leaf_[c];
      sq[c] = res * res;
    }
    loss_ = sum(std::span<const Expr>{sq}) * (1.0 / 6.0);
    // Cache the spectral decompositions; they do not change over training.
    states_.reserve(data.records.size());
    for (const Record& r : data.records) states_.push_back(spectral(r.f));
  }

  std::size_t size() const override { return data_->records.size(); }
  std::size_t param_leaf_count() const override { return vars_.leaves.size(); }

  void set_params(std::span<const double> leaf_values) override {
    if (leaf_values.size() != vars_.leaves.size())
      throw DimensionMismatch("SyntheticBatch: parameter vector mismatch");
    for (std::size_t i = 0; i < leaf_values.size(); ++i)
      tape_.set_input(vars_.leaves[i], leaf_values[i]);
  }

  void set_offsets(const Vec3& offsets) override {
    for (int a = 0; a < 3; ++a)
      tape_.set_input(nodes_.off_leaf[a].id, offsets[a]);
  }

  void select(std::size_t record) override {
    const SpectralState& s = states_[record];
    for (int a = 0; a < 3; ++a) {
      tape_.set_input(nodes_.lam_leaf[a].id, s.stretches[a]);
      const Vec3& n = s.directions[a];
      const double m[6] = {n[0] * n[0], n[1] * n[1], n[2] * n[2],
                           n[0] * n[1], n[0] * n[2], n[1] * n[2]};
      for (int c = 0; c < 6; ++c)
        tape_.set_input(dir_leaf_[static_cast<std::size_t>(a) * 6 + c].id,
                        m[c]);
    }
    for (int c = 0; c < 6; ++c)
      tape_.set_input(tgt_leaf_[c].id, data_->records[record].sigma[c]);
  }

  double forward() override {
    tape_.forward();
    return tape_.value(loss_.id);
  }

  void backward() override { tape_.backward(loss_.id); }

  double param_adjoint(std::size_t leaf) const override {
    return tape_.adjoint(vars_.leaves[leaf]);
  }

  double offset_adjoint(int axis) const override {
    return tape_.adjoint(nodes_.off_leaf[axis].id);
  }

 private:
  const Dataset* data_;
  std::vector<SpectralState> states_;
  Tape tape_;
  PannModel::Vars vars_;
  detail::StressNodes nodes_;
  std::array<Expr, 18> dir_leaf_{};
  std::array<Expr, 6> tgt_leaf_{};
  Expr loss_{};
};

// Batch over experimental mode curves.  Each record is a scalar stress at an
// isochoric Table-1 mode state; the prediction is the axial-minus-eliminated
// principal-stress difference, optionally rescaled to the nominal measure.
class CurveBatch : public BatchGraph {
 public:
  CurveBatch(const PannModel& model, std::vector<ExperimentalPoint> points,
             LossMeasure measure)
      : points_(std::move(points)), measure_(measure) {
    vars_ = model.bind(tape_);
    nodes_ = detail::build_stress_nodes(tape_, model, vars_);
    for (int a = 0; a < 3; ++a) {
      applied_leaf_[a] = wrap(tape_, tape_.input(a == 0 ? 1.0 : 0.0));
      elim_leaf_[a] = wrap(tape_, tape_.input(a == 2 ? 1.0 : 0.0));
    }
    factor_leaf_ = wrap(tape_, tape_.input(1.0));
    tgt_leaf_ = wrap(tape_, tape_.input(0.0));
    const Expr s_applied = dot(std::span<const Expr>{nodes_.sigma_coef},
                               std::span<const Expr>{applied_leaf_});
    const Expr s_elim = dot(std::span<const Expr>{nodes_.sigma_coef},
                            std::span<const Expr>{elim_leaf_});
    const Expr res = (s_applied - s_elim) * factor_leaf_ - tgt_leaf_;
    loss_ = res * res;
  }

  std::size_t size() const override { return points_.size(); }
  std::size_t param_leaf_count() const override { return vars_.leaves.size(); }

  void set_params(std::span<const double> leaf_values) override {
    if (leaf_values.size() != vars_.leaves.size())
      throw DimensionMismatch("CurveBatch: parameter vector mismatch");
    for (std::size_t i = 0; i < leaf_values.size(); ++i)
      tape_.set_input(vars_.leaves[i], leaf_values[i]);
  }

  void set_offsets(const Vec3& offsets) override {
    for (int a = 0; a < 3; ++a)
      tape_.set_input(nodes_.off_leaf[a].id, offsets[a]);
  }

  void select(std::size_t record) override {
    const ExperimentalPoint& pt = points_[record];
    const Vec3 axis_l = mode_stretches(pt.spec);
    // Sort descending, remembering which mode axis landed in each slot.
    std::array<int, 3> axis_of{0, 1, 2};
    std::stable_sort(axis_of.begin(), axis_of.end(), [&](int a, int b) {
      return axis_l[a] > axis_l[b];
    });
    const int elim_axis = pt.spec.mode == Mode::UT ? 1 : 2;
    for (int slot = 0; slot < 3; ++slot) {
      tape_.set_input(nodes_.lam_leaf[slot].id, axis_l[axis_of[slot]]);
      tape_.set_input(applied_leaf_[slot].id,
                      axis_of[slot] == 0 ? 1.0 : 0.0);
      tape_.set_input(elim_leaf_[slot].id,
                      axis_of[slot] == elim_axis ? 1.0 : 0.0);
    }
    const auto [factor, target] = comparison_terms(pt, measure_);
    tape_.set_input(factor_leaf_.id, factor);
    tape_.set_input(tgt_leaf_.id, target);
  }

  double forward() override {
    tape_.forward();
    return tape_.value(loss_.id);
  }

  void backward() override { tape_.backward(loss_.id); }

  double param_adjoint(std::size_t leaf) const override {
    return tape_.adjoint(vars_.leaves[leaf]);
  }

  double offset_adjoint(int axis) const override {
    return tape_.adjoint(nodes_.off_leaf[axis].id);
  }

  // Prediction rescale factor and converted target for a data point, given
  // the loss's comparison measure.  Conversion uses the incompressible
  // uniaxial-type relation sigma = P * lambda_applied.
  static std::pair<double, double> comparison_terms(
      const ExperimentalPoint& pt, LossMeasure measure) {
    StressMeasure cmp;
    switch (measure) {
      case LossMeasure::AsDeclared: cmp = pt.measure; break;
      case LossMeasure::Cauchy: cmp = StressMeasure::Cauchy; break;
      default: cmp = StressMeasure::Nominal; break;
    }
    const double factor =
        cmp == StressMeasure::Nominal ? 1.0 / pt.spec.lambda : 1.0;
    double target = pt.stress;
    if (pt.measure != cmp)
      target = pt.measure == StressMeasure::Nominal
                   ? pt.stress * pt.spec.lambda   // nominal -> cauchy
                   : pt.stress / pt.spec.lambda;  // cauchy -> nominal
    return {factor, target};
  }

  const std::vector<ExperimentalPoint>& points() const { return points_; }

 private:
  std::vector<ExperimentalPoint> points_;
  LossMeasure measure_;
  Tape tape_;
  PannModel::Vars vars_;
  detail::StressNodes nodes_;
  std::array<Expr, 3> applied_leaf_{};
  std::array<Expr, 3> elim_leaf_{};
  Expr factor_leaf_{};
  Expr tgt_leaf_{};
  Expr loss_{};
};

// ---------------------------------------------------------------------------
// Full-batch Adam with projection and offset recalibration.

class Trainer {
 public:
  Trainer(PannModel& model, BatchGraph& train_batch, TrainConfig cfg)
      : model_(&model),
        train_(&train_batch),
        cfg_(std::move(cfg)),
        offsets_(model) {
    validate(cfg_);
    model.visit_stacks(
        [&](const char*, LayerStack& st) { stacks_.push_back(&st); });
    std::size_t alpha_total = 0;
    for (LayerStack* st : stacks_) {
      visit_params(*st, [&](double& v, ParamKind k, bool, std::ptrdiff_t w) {
        LeafMeta lm;
        lm.value = &v;
        lm.weight = k != ParamKind::Bias;
        lm.log_alpha = nullptr;
        if (lm.weight && !st->gate_log_alpha.empty()) {
          lm.log_alpha = &st->gate_log_alpha[static_cast<std::size_t>(w)];
          lm.alpha_index = alpha_total + static_cast<std::size_t>(w);
        }
        if (lm.weight) ++global_weights_;
        lm.weight_index = lm.weight ? global_weights_ - 1 : 0;
        leaves_.push_back(lm);
      });
      alpha_total += st->gate_log_alpha.size();
    }
    n_alpha_ = alpha_total;
    if (leaves_.size() != train_->param_leaf_count())
      throw DimensionMismatch("Trainer: model/batch parameter count mismatch");
    const std::size_t n = leaves_.size() + n_alpha_;
    adam_m_.assign(n, 0.0);
    adam_v_.assign(n, 0.0);
    eff_.resize(leaves_.size());
    gate_.assign(leaves_.size(), 1.0);
    dgate_.assign(leaves_.size(), 0.0);
    grad_eff_.resize(leaves_.size());
    grad_.resize(n);
  }

  int epoch() const { return epoch_; }

  bool gated() const { return n_alpha_ > 0 && cfg_.l0_factor > 0.0; }

  // One full-batch step: returns the optimized objective at the step start
  // (data term plus L0 penalty when gates are active).
  double step() {
    ++epoch_;
    const double obj = objective_and_gradient(grad_, /*sampled=*/true);
    adam_update(grad_);
    for (LayerStack* st : stacks_) project_constraints(*st);
    model_->calibrate();
    return obj;
  }

  // Objective and its gradient (raw weights first, then gate log-alphas) at
  // the current parameters, with deterministic test gates.  Diagnostic hook:
  // finite-differencing the objective across a weight perturbation followed
  // by recalibration must reproduce this gradient.
  double objective(std::vector<double>& grad) {
    grad.resize(leaves_.size() + n_alpha_);
    return objective_and_gradient(grad, /*sampled=*/false);
  }

  // Frozen-model loss on a batch: deterministic test gates, stored offsets.
  double eval_loss(BatchGraph& batch, double l0_factor) {
    std::vector<double> eff;
    eff.reserve(leaves_.size());
    for (LayerStack* st : stacks_) {
      const std::vector<double> vals = effective_params(*st);
      eff.insert(eff.end(), vals.begin(), vals.end());
    }
    batch.set_params(eff);
    batch.set_offsets(model_->offsets);
    double loss = 0.0;
    for (std::size_t r = 0; r < batch.size(); ++r) {
      batch.select(r);
      loss += batch.forward();
    }
    loss /= static_cast<double>(std::max<std::size_t>(batch.size(), 1));
    if (l0_factor > 0.0)
      for (LayerStack* st : stacks_)
        for (double la : st->gate_log_alpha)
          loss += l0_factor * gate_expected_active(la);
    return loss;
  }

 private:
  struct LeafMeta {
    double* value = nullptr;
    double* log_alpha = nullptr;  // null when the leaf carries no gate
    std::size_t alpha_index = 0;
    std::size_t weight_index = 0;  // global, weights only
    bool weight = false;
  };

  double objective_and_gradient(std::vector<double>& grad, bool sampled) {
    const bool use_gates = gated();
    // Effective leaf values; gate noise is counter-based on
    // (seed, epoch, weight index) for bitwise reproducibility.
    const std::uint64_t label =
        rng::mix(detail::kGateNoiseLabel, static_cast<std::uint64_t>(epoch_));
    for (std::size_t i = 0; i < leaves_.size(); ++i) {
      const LeafMeta& lm = leaves_[i];
      if (use_gates && lm.log_alpha) {
        if (sampled) {
          double u = rng::unit_at(cfg_.seed, label,
                                  static_cast<std::uint64_t>(lm.weight_index));
          u = std::max(u, 0x1.0p-53);
          gate_[i] = gate_sample(*lm.log_alpha, u);
          dgate_[i] = gate_sample_dlogalpha(*lm.log_alpha, u);
        } else {
          gate_[i] = gate_test_value(*lm.log_alpha);
          dgate_[i] = 0.0;
        }
        eff_[i] = *lm.value * gate_[i];
      } else {
        gate_[i] = 1.0;
        dgate_[i] = 0.0;
        eff_[i] = *lm.value;
      }
    }
    offsets_.set_params(eff_);
    const Vec3 o = offsets_.offsets();
    train_->set_params(eff_);
    train_->set_offsets(o);

    std::fill(grad_eff_.begin(), grad_eff_.end(), 0.0);
    Vec3 dl_do{0.0, 0.0, 0.0};
    double data_loss = 0.0;
    const std::size_t n_rec = train_->size();
    for (std::size_t r = 0; r < n_rec; ++r) {
      train_->select(r);
      const double rec_loss = train_->forward();
      if (!std::isfinite(rec_loss))
        throw NonFiniteLoss("training loss non-finite at epoch " +
                            std::to_string(epoch_) + ", record " +
                            std::to_string(r));
      data_loss += rec_loss;
      train_->backward();
      for (std::size_t i = 0; i < leaves_.size(); ++i)
        grad_eff_[i] += train_->param_adjoint(i);
      for (int a = 0; a < 3; ++a) dl_do[a] += train_->offset_adjoint(a);
    }
    offsets_.accumulate(dl_do, grad_eff_);
    const double inv_n = 1.0 / static_cast<double>(n_rec);
    data_loss *= inv_n;

    // Chain rule from effective weights to raw weights and gate log-alphas,
    // then the closed-form expected-L0 penalty.
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < leaves_.size(); ++i) {
      const LeafMeta& lm = leaves_[i];
      const double ge = grad_eff_[i] * inv_n;
      if (use_gates && lm.log_alpha) {
        grad[i] = ge * gate_[i];
        grad[leaves_.size() + lm.alpha_index] += ge * *lm.value * dgate_[i];
      } else {
        grad[i] = ge;
      }
    }
    double penalty = 0.0;
    if (use_gates) {
      std::size_t a = 0;
      for (LayerStack* st : stacks_)
        for (double& la : st->gate_log_alpha) {
          penalty += gate_expected_active(la);
          grad[leaves_.size() + a] +=
              cfg_.l0_factor * gate_expected_active_dlogalpha(la);
          ++a;
        }
      penalty *= cfg_.l0_factor;
    }
    return data_loss + penalty;
  }

  void adam_update(const std::vector<double>& grad) {
    ++adam_t_;
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam_t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam_t_));
    const auto apply = [&](double& theta, std::size_t k) {
      adam_m_[k] = b1 * adam_m_[k] + (1.0 - b1) * grad[k];
      adam_v_[k] = b2 * adam_v_[k] + (1.0 - b2) * grad[k] * grad[k];
      const double mhat = adam_m_[k] / c1;
      const double vhat = adam_v_[k] / c2;
      theta -= cfg_.lr * mhat / (std::sqrt(vhat) + eps);
    };
    for (std::size_t i = 0; i < leaves_.size(); ++i)
      apply(*leaves_[i].value, i);
    std::size_t a = 0;
    for (LayerStack* st : stacks_)
      for (double& la : st->gate_log_alpha) apply(la, leaves_.size() + a++);
  }

  PannModel* model_;
  BatchGraph* train_;
  TrainConfig cfg_;
  detail::OffsetGraph offsets_;
  std::vector<LayerStack*> stacks_;
  std::vector<LeafMeta> leaves_;
  std::size_t n_alpha_ = 0;
  std::size_t global_weights_ = 0;
  std::vector<double> adam_m_, adam_v_;
  long adam_t_ = 0;
  int epoch_ = 0;
  std::vector<double> eff_, gate_, dgate_, grad_eff_, grad_;
};

// ---------------------------------------------------------------------------
// Free loss function over a dataset (frozen model, deterministic gates).

inline double loss(const PannModel& model, const Dataset& data,
                   double l0_factor = 0.0) {
  PannModel& m = const_cast<PannModel&>(model);  // Trainer mutates nothing here
  SyntheticBatch batch(model, data);
  TrainConfig cfg;
  cfg.arch = model.model_kind;
  cfg.p = model.p;
  cfg.l0_factor = l0_factor;
  Trainer tr(m, batch, cfg);
  return tr.eval_loss(batch, l0_factor);
}

inline double loss(const PannModel& model,
                   const std::vector<ExperimentalPoint>& pts,
                   LossMeasure measure, double l0_factor = 0.0) {
  PannModel& m = const_cast<PannModel&>(model);
  CurveBatch batch(model, pts, measure);
  TrainConfig cfg;
  cfg.arch = model.model_kind;
  cfg.p = model.p;
  cfg.l0_factor = l0_factor;
  Trainer tr(m, batch, cfg);
  return tr.eval_loss(batch, l0_factor);
}

// ---------------------------------------------------------------------------
// R^2 per mode on the declared (or forced) stress measure.

inline std::map<std::string, double> r_squared(
    const EnergyModel& model, const std::vector<ExperimentalPoint>& pts,
    LossMeasure measure = LossMeasure::AsDeclared) {
  if (pts.empty()) throw DomainError("r_squared: no data points");
  std::map<std::string, std::vector<std::pair<double, double>>> by_mode;
  for (const ExperimentalPoint& pt : pts) {
    const double pred_cauchy =
        incompressible_mode_stress(model, pt.spec)[0];
    const auto [factor, target] = CurveBatch::comparison_terms(pt, measure);
    by_mode[to_string(pt.spec.mode)].push_back(
        {factor * pred_cauchy, target});
  }
  std::map<std::string, double> out;
  for (const auto& entry : by_mode) {
    const auto& pairs = entry.second;
    double mean = 0.0;
    for (const auto& pr : pairs) mean += pr.second;
    mean /= static_cast<double>(pairs.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (const auto& pr : pairs) {
      ss_res += (pr.second - pr.first) * (pr.second - pr.first);
      ss_tot += (pr.second - mean) * (pr.second - mean);
    }
    if (ss_tot == 0.0)
      throw DegenerateVariance("r_squared: zero variance in mode " +
                               entry.first);
    out[entry.first] = 1.0 - ss_res / ss_tot;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training drivers.

inline std::unique_ptr<PannModel> make_model_for(const TrainConfig& cfg) {
  auto model = make_pann(cfg.arch, cfg.p, cfg.layers, cfg.width, cfg.seed);
  if (cfg.l0_factor > 0.0) {
    model->visit_stacks([&](const char*, LayerStack& st) {
      enable_gates(st, cfg.gate_init_log_alpha);
    });
    model->calibrate();  // test gates scale the weights the offsets see
  }
  return model;
}

inline std::pair<std::unique_ptr<PannModel>, TrainReport> train(
    const TrainConfig& cfg, const Dataset& train_data,
    const Dataset* eval_data = nullptr) {
  validate(cfg);
  auto model = make_model_for(cfg);
  model->data_fingerprint = text_fingerprint(dataset_dumps(train_data));
  model->train_delta = train_data.meta.delta;
  SyntheticBatch tb(*model, train_data);
  std::unique_ptr<SyntheticBatch> eb;
  if (eval_data) eb = std::make_unique<SyntheticBatch>(*model, *eval_data);
  Trainer tr(*model, tb, cfg);
  TrainReport rep;
  for (int e = 1; e <= cfg.epochs; ++e) {
    const double obj = tr.step();
    if (e % cfg.report_stride == 0 || e == cfg.epochs) {
      ReportRow row;
      row.epoch = e;
      row.train_loss = obj;
      if (eb) row.extrap_loss = tr.eval_loss(*eb, 0.0);
      row.active_params = model->active_params();
      rep.rows.push_back(row);
    }
  }
  rep.final_train_mse = tr.eval_loss(tb, 0.0);
  if (eb) rep.final_extrap_mse = tr.eval_loss(*eb, 0.0);
  return {std::move(model), rep};
}

// Experimental-fit driver: UT and ET rows train, PS rows validate.
inline std::pair<std::unique_ptr<PannModel>, TrainReport> train_experimental(
    const TrainConfig& cfg, const std::vector<ExperimentalPoint>& pts,
    const std::string& data_fingerprint = "") {
  validate(cfg);
  std::vector<ExperimentalPoint> fit, held;
  for (const ExperimentalPoint& pt : pts)
    (pt.spec.mode == Mode::PS ? held : fit).push_back(pt);
  if (fit.empty())
    throw DomainError("train_experimental: no UT/ET training rows");
  auto model = make_model_for(cfg);
  model->data_fingerprint = data_fingerprint;
  CurveBatch tb(*model, fit, cfg.loss_stress_measure);
  std::unique_ptr<CurveBatch> vb;
  if (!held.empty())
    vb = std::make_unique<CurveBatch>(*model, held, cfg.loss_stress_measure);
  Trainer tr(*model, tb, cfg);
  TrainReport rep;
  for (int e = 1; e <= cfg.epochs; ++e) {
    const double obj = tr.step();
    if (e % cfg.report_stride == 0 || e == cfg.epochs) {
      ReportRow row;
      row.epoch = e;
      row.train_loss = obj;
      if (vb) row.extrap_loss = tr.eval_loss(*vb, 0.0);
      row.active_params = model->active_params();
      rep.rows.push_back(row);
    }
  }
  rep.final_train_mse = tr.eval_loss(tb, 0.0);
  if (vb) rep.final_extrap_mse = tr.eval_loss(*vb, 0.0);
  rep.r2 = r_squared(*model, pts, cfg.loss_stress_measure);
  return {std::move(model), rep};
}

// ---------------------------------------------------------------------------
// Median benchmark across fixture materials (Fig. 3/5-style comparisons).

struct ArchSpec {
  ModelKind kind = ModelKind::LambdaPann;
  double p = 3.0;
  int width = 0;   // 0: inherit the benchmark config's width
  int layers = 0;  // 0: likewise
};

inline std::string to_string(const ArchSpec& a) {
  std::string s = to_string(a.kind);
  if (is_neural(a.kind) && a.kind != ModelKind::IPann)
    s += ":p=" + std::to_string(static_cast<int>(a.p));
  if (a.width > 0) s += ":w=" + std::to_string(a.width);
  if (a.layers > 0) s += ":d=" + std::to_string(a.layers);
  return s;
}

// "lambda-pann:p=3", "i-pann:w=23", ...; options p= (deep-set exponent),
// w= (width), d= (depth) in any order.
inline ArchSpec parse_arch_spec(const std::string& text) {
  ArchSpec a;
  std::size_t pos = text.find(':');
  a.kind = model_kind_from_string(text.substr(0, pos));
  if (!is_neural(a.kind))
    throw FormatError("arch '" + text + "' is not trainable");
  while (pos != std::string::npos) {
    const std::size_t next = text.find(':', pos + 1);
    const std::string opt =
        text.substr(pos + 1, next == std::string::npos ? next : next - pos - 1);
    if (opt.size() < 3 || opt[1] != '=')
      throw FormatError("arch option '" + opt + "' not recognized");
    try {
      std::size_t used = 0;
      const std::string val = opt.substr(2);
      switch (opt[0]) {
        case 'p': a.p = std::stod(val, &used); break;
        case 'w': a.width = std::stoi(val, &used, 10); break;
        case 'd': a.layers = std::stoi(val, &used, 10); break;
        default: throw FormatError("arch option '" + opt + "' not recognized");
      }
      if (used != val.size()) throw std::invalid_argument("");
    } catch (const std::invalid_argument&) {
      throw FormatError("arch option '" + opt + "' is malformed");
    } catch (const std::out_of_range&) {
      throw FormatError("arch option '" + opt + "' is malformed");
    }
    pos = next;
  }
  return a;
}

struct BenchSeries {
  ArchSpec arch;
  std::vector<int> epochs;
  std::vector<double> median_train, median_extrap;
  std::vector<double> final_train, final_extrap;  // per fixture
};

struct BenchReport {
  std::vector<BenchSeries> series;
};

namespace detail {
inline double median_of(std::vector<double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
}  // namespace detail

inline BenchSeries median_series(const ArchSpec& arch,
                                 const std::vector<TrainReport>& reports) {
  BenchSeries s;
  s.arch = arch;
  if (reports.empty()) return s;
  const std::size_t rows = reports.front().rows.size();
  for (const TrainReport& r : reports) {
    if (r.rows.size() != rows)
      throw DimensionMismatch("median_series: reports have unequal rows");
    s.final_train.push_back(r.final_train_mse);
    s.final_extrap.push_back(r.final_extrap_mse);
  }
  for (std::size_t i = 0; i < rows; ++i) {
    s.epochs.push_back(reports.front().rows[i].epoch);
    std::vector<double> tr, ex;
    for (const TrainReport& r : reports) {
      tr.push_back(r.rows[i].train_loss);
      ex.push_back(r.rows[i].extrap_loss);
    }
    s.median_train.push_back(detail::median_of(tr));
    s.median_extrap.push_back(detail::median_of(ex));
  }
  return s;
}

// Trains each architecture on each ground-truth material and reports the
// across-material median loss trajectories.  Data and run seeds derive from
// cfg.seed and the fixture position so the whole benchmark is reproducible.
inline BenchReport median_benchmark(
    const std::vector<ArchSpec>& archs,
    const std::vector<const EnergyModel*>& truths, const TrainConfig& cfg,
    double train_delta = 0.2, int train_n = 200, double extrap_delta = 0.3,
    int extrap_n = 500) {
  BenchReport out;
  std::vector<std::pair<Dataset, Dataset>> data;
  data.reserve(truths.size());
  for (std::size_t i = 0; i < truths.size(); ++i) {
    SampleConfig tc{train_delta, train_n,
                    rng::mix(cfg.seed, 0x747261696e000ULL + i)};
    SampleConfig ec{extrap_delta, extrap_n,
                    rng::mix(cfg.seed, 0x6578747261700ULL + i)};
    data.push_back({build_dataset(*truths[i], tc),
                    build_dataset(*truths[i], ec)});
  }
  for (std::size_t ai = 0; ai < archs.size(); ++ai) {
    std::vector<TrainReport> reports;
    for (std::size_t fi = 0; fi < truths.size(); ++fi) {
      TrainConfig run = cfg;
      run.arch = archs[ai].kind;
      run.p = archs[ai].p;
      if (archs[ai].width > 0) run.width = archs[ai].width;
      if (archs[ai].layers > 0) run.layers = archs[ai].layers;
      run.seed = rng::mix(cfg.seed, (ai << 16) | fi);
      auto [model, rep] = train(run, data[fi].first, &data[fi].second);
      reports.push_back(std::move(rep));
    }
    out.series.push_back(median_series(archs[ai], reports));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report persistence: JSON for the full report, CSV for the loss curves.

inline nlohmann::json report_to_json(const TrainReport& rep) {
  nlohmann::json j;
  nlohmann::json rows = nlohmann::json::array();
  for (const ReportRow& r : rep.rows) {
    nlohmann::json row;
    row["epoch"] = r.epoch;
    row["train_loss"] = r.train_loss;
    if (std::isfinite(r.extrap_loss))
      row["extrap_loss"] = r.extrap_loss;
    else
      row["extrap_loss"] = nullptr;
    row["active_params"] = r.active_params;
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  j["final_train_mse"] = rep.final_train_mse;
  if (std::isfinite(rep.final_extrap_mse))
    j["final_extrap_mse"] = rep.final_extrap_mse;
  else
    j["final_extrap_mse"] = nullptr;
  j["r2"] = rep.r2;
  return j;
}

inline void save_report(const TrainReport& rep, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << report_to_json(rep).dump(2) << "\n";
  if (!out) throw FormatError("write failed for '" + path + "'");
}

namespace detail {
inline std::string float_field(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

inline std::string loss_csv(const TrainReport& rep) {
  std::string out = "epoch,train_loss,extrap_loss,active_params\n";
  for (const ReportRow& r : rep.rows) {
    out += std::to_string(r.epoch);
    out += ',';
    out += detail::float_field(r.train_loss);
    out += ',';
    out += detail::float_field(r.extrap_loss);
    out += ',';
    out += std::to_string(r.active_params);
    out += '\n';
  }
  return out;
}

inline void save_loss_csv(const TrainReport& rep, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << loss_csv(rep);
  if (!out) throw FormatError("write failed for '" + path + "'");
}

}  // namespace pann
