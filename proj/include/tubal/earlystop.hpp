#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "tubal/fgd.hpp"
#include "tubal/sensing.hpp"
#include "tubal/talg.hpp"

namespace tubal::es {

/// Disjoint train/validation partition of the measurement indices 0..m-1.
/// Both index lists are sorted.
struct SplitPlan {
  std::vector<Index> train;
  std::vector<Index> val;
  double val_frac = 0.0;
  Seed seed = 0;
};

/// |val| = round(val_frac * m), drawn uniformly without replacement.
/// Throws invalid_argument if either side would be empty.
SplitPlan split(Index m, double val_frac, Seed seed);

/// (1 / (4 m_val)) ||y_val - M_val(U * U^T)||^2 where op_val holds only the
/// validation measurements and y_val their observations.
double validation_loss(const Tensor3& u, const SensingOperator& op_val,
                       const Eigen::VectorXd& y_val);

struct EarlyStopResult {
  Index t_check = 0;
  double val_loss_min = fgd::kMissing;
  std::vector<double> val_loss_curve;  ///< e_t for t = 0 .. T
  Tensor3 chosen_estimate;             ///< U * U^T at t_check
  double rse_at_t_check = fgd::kMissing;
  double rse_best = fgd::kMissing;     ///< min over t of the oracle rse
  double rse_final = fgd::kMissing;
  /// Whether m_val >= r^2 kappa^8 log T, a sufficient sample-size condition
  /// reported for information only. Needs ground truth; false otherwise.
  bool val_size_sufficient = false;
  fgd::SolveTrace trace;
};

/// t in 1..T minimizing curve[t], smallest t on ties; 0 when T = 0.
Index argmin_after_start(const std::vector<double>& curve);

/// m_val >= r^2 kappa^8 log T.
bool validation_size_sufficient(Index m_val, Index r, double kappa, Index T);

/// Trains each run on its plan's train rows only and scores the val rows
/// every iteration, keeping just the best iterate. `runs` supply u0, y and
/// the step settings; their row lists are overwritten. Divergence is kept in
/// the trace and the argmin covers the rows recorded before it. Results are
/// in input order.
std::vector<EarlyStopResult> run_batch(const SensingOperator& op, std::vector<fgd::Run> runs,
                                       const std::vector<SplitPlan>& plans);

EarlyStopResult run_with_early_stopping(const SensingOperator& op, const Eigen::VectorXd& y,
                                        const fgd::SolverConfig& config, const SplitPlan& plan,
                                        const fgd::GroundTruth* truth = nullptr);

/// fgd trace columns plus val_loss.
void write_trace_csv(std::ostream& os, const EarlyStopResult& result);
/// Header and one row: t_check,val_loss_min,rse_at_t_check.
void write_summary_csv(std::ostream& os, const EarlyStopResult& result);

}  // namespace tubal::es
