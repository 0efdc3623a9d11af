#include "tubal/earlystop.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>

#include "tubal/csv.hpp"
#include "tubal/error.hpp"

namespace tubal::es {

SplitPlan split(Index m, double val_frac, Seed seed) {
  if (!(val_frac > 0.0 && val_frac < 1.0))
    raise(ErrorCode::invalid_argument, "val_frac must lie in (0, 1)");
  if (m < 2) raise(ErrorCode::invalid_argument, "a split needs at least 2 measurements");
  const auto n_val = static_cast<Index>(std::llround(val_frac * static_cast<double>(m)));
  if (n_val < 1 || n_val >= m)
    raise(ErrorCode::invalid_argument, "val_frac leaves one side of the split empty");

  std::vector<Index> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), Index{0});
  // Partial Fisher-Yates: the first n_val slots become the validation set.
  Rng rng(derive_seed(seed, Stream::split));
  for (Index i = 0; i < n_val; ++i) {
    const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(m - i)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  SplitPlan plan;
  plan.val_frac = val_frac;
  plan.seed = seed;
  plan.val.assign(perm.begin(), perm.begin() + n_val);
  plan.train.assign(perm.begin() + n_val, perm.end());
  std::sort(plan.val.begin(), plan.val.end());
  std::sort(plan.train.begin(), plan.train.end());
  return plan;
}

double validation_loss(const Tensor3& u, const SensingOperator& op_val,
                       const Eigen::VectorXd& y_val) {
  if (y_val.size() != op_val.m())
    raise(ErrorCode::dimension_mismatch, "validation observations do not match the operator");
  const Eigen::VectorXd r = y_val - op_val.forward(tprod(u, ttranspose(u)));
  return 0.25 * r.squaredNorm() / static_cast<double>(op_val.m());
}

Index argmin_after_start(const std::vector<double>& curve) {
  if (curve.size() <= 1) return 0;
  Index best = 1;
  for (std::size_t t = 2; t < curve.size(); ++t)
    if (curve[t] < curve[static_cast<std::size_t>(best)]) best = static_cast<Index>(t);
  return best;
}

bool validation_size_sufficient(Index m_val, Index r, double kappa, Index T) {
  if (T < 2) return true;
  const double need = static_cast<double>(r * r) * std::pow(kappa, 8.0) *
                      std::log(static_cast<double>(T));
  return static_cast<double>(m_val) >= need;
}

namespace {

// Best-iterate slot owned by the observer of one run.
struct Tracker {
  Index best_iter = -1;
  double best_val = 0.0;
  double best_rse = fgd::kMissing;
  Tensor3 best_u;
};

}  // namespace

std::vector<EarlyStopResult> run_batch(const SensingOperator& op, std::vector<fgd::Run> runs,
                                       const std::vector<SplitPlan>& plans) {
  if (plans.size() != runs.size())
    raise(ErrorCode::invalid_argument, "one split plan per run is required");
  auto trackers = std::make_unique<Tracker[]>(runs.size());
  std::vector<Index> m_val(runs.size());
  std::vector<const fgd::GroundTruth*> truths(runs.size());
  for (std::size_t b = 0; b < runs.size(); ++b) {
    const SplitPlan& plan = plans[b];
    if (plan.val.empty() || plan.train.empty())
      raise(ErrorCode::invalid_argument, "split plan has an empty side");
    fgd::Run& run = runs[b];
    run.train_rows = plan.train;
    run.val_rows = plan.val;
    m_val[b] = static_cast<Index>(plan.val.size());
    truths[b] = run.truth;
    Tracker* slot = &trackers[b];
    const Index T = run.T;
    run.observer = [slot, T](const Tensor3& u, const fgd::IterationRecord& rec) {
      // t = 0 only counts when it is the sole iterate.
      if (rec.iter == 0 && T > 0) return;
      if (slot->best_iter < 0 || rec.val_loss < slot->best_val) {
        slot->best_iter = rec.iter;
        slot->best_val = rec.val_loss;
        slot->best_rse = rec.rse;
        slot->best_u = u;
      }
    };
  }

  std::vector<fgd::SolveResult> solved = fgd::solve_batch(op, std::move(runs));

  std::vector<EarlyStopResult> out(solved.size());
  for (std::size_t b = 0; b < solved.size(); ++b) {
    EarlyStopResult& r = out[b];
    const Tracker& slot = trackers[b];
    r.trace = std::move(solved[b].trace);
    r.val_loss_curve.reserve(r.trace.rows.size());
    for (const auto& row : r.trace.rows) r.val_loss_curve.push_back(row.val_loss);
    if (slot.best_iter >= 0) {
      r.t_check = slot.best_iter;
      r.val_loss_min = slot.best_val;
      r.rse_at_t_check = slot.best_rse;
      r.chosen_estimate = tprod(slot.best_u, ttranspose(slot.best_u));
    }
    r.rse_best = r.trace.min_rse();
    if (!r.trace.rows.empty()) r.rse_final = r.trace.rows.back().rse;
    if (truths[b]) {
      const Index T = r.trace.rows.empty() ? 0 : r.trace.rows.back().iter;
      r.val_size_sufficient = validation_size_sufficient(
          m_val[b], truths[b]->r, truths[b]->spectrum.condition_number, T);
    }
  }
  return out;
}

EarlyStopResult run_with_early_stopping(const SensingOperator& op, const Eigen::VectorXd& y,
                                        const fgd::SolverConfig& config, const SplitPlan& plan,
                                        const fgd::GroundTruth* truth) {
  config.validate(op.n());
  fgd::Run run;
  if (config.init == fgd::InitKind::spectral) {
    run.u0 = fgd::init_spectral(op, y, plan.train, config.R);
  } else {
    run.u0 = fgd::initialize(config, op, y);
  }
  run.y = y;
  run.eta = config.eta;
  run.T = config.T;
  run.symmetrize_gradient = config.symmetrize_gradient;
  run.divergence_guard = config.divergence_guard;
  run.diag_stride = config.diag_stride;
  run.truth = truth;
  std::vector<fgd::Run> runs;
  runs.push_back(std::move(run));
  auto results = run_batch(op, std::move(runs), {plan});
  if (results.front().trace.diverged)
    raise(ErrorCode::divergence, results.front().trace.message);
  return std::move(results.front());
}

void write_trace_csv(std::ostream& os, const EarlyStopResult& result) {
  fgd::write_trace_csv(os, result.trace, fgd::TraceCsvOptions{.val_loss = true, .elapsed = true});
}

void write_summary_csv(std::ostream& os, const EarlyStopResult& result) {
  os << "t_check,val_loss_min,rse_at_t_check\n"
     << result.t_check << ',' << csv_number(result.val_loss_min) << ','
     << csv_number(result.rse_at_t_check) << '\n';
}

}  // namespace tubal::es
