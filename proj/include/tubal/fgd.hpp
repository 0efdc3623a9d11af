#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tubal/sensing.hpp"
#include "tubal/talg.hpp"

namespace tubal::fgd {

/// Symmetric PSD target X_star = X_factor * X_factor^T with ||X_star||_F = 1,
/// plus the tensor-column subspaces used by the phase diagnostics.
struct GroundTruth {
  Tensor3 x_factor;  ///< n x r x k
  Tensor3 x_star;    ///< n x n x k
  Index r = 0;
  SpectrumSummary spectrum;
  Tensor3 v_x;       ///< n x r x k, leading tensor columns of the t-SVD of x_star
  Tensor3 v_x_perp;  ///< n x (n - r) x k; empty when r == n
  FourierSlices fv_x;
  FourierSlices fv_x_perp;
};

/// X_factor with i.i.d. N(0, 1) entries, then both tensors rescaled so that
/// ||X_star||_F = 1 and X_factor * X_factor^T = X_star still holds.
GroundTruth make_ground_truth(Index n, Index r, Index k, Seed seed);
/// Ground truth for a given symmetric PSD tensor of tubal rank r. The tensor is
/// used as is; the factor is its rank-r square root.
GroundTruth ground_truth_from_star(Tensor3 x_star, Index r);

enum class InitKind { small, spectral, large };

const char* to_string(InitKind kind) noexcept;
InitKind parse_init_kind(std::string_view name);

/// Default scale and step for the large random start.
inline constexpr double kLargeInitAlpha = 10.0;
inline constexpr double kLargeInitEta = 1e-3;
inline constexpr double kDefaultDivergenceGuard = 1e6;

struct SolverConfig {
  Index R = 1;
  double eta = 0.1;
  Index T = 1000;
  InitKind init = InitKind::small;
  double alpha = 1e-10;  ///< ignored by spectral init
  double divergence_guard = kDefaultDivergenceGuard;
  Seed seed = 0;
  /// Use (G + G^T)/2 in place of G = M^*(residual). Off reproduces the update
  /// exactly as written; on gives the exact gradient of the loss.
  bool symmetrize_gradient = false;
  /// Phase diagnostics every this many iterations; 0 disables them.
  Index diag_stride = 1;

  /// Throws ErrorCode::config on invalid values.
  void validate(Index n) const;
};

/// I.i.d. N(0, alpha^2 / R) entries.
Tensor3 init_small(Index n, Index R, Index k, double alpha, Seed seed);
Tensor3 init_large(Index n, Index R, Index k, Seed seed, double alpha = kLargeInitAlpha);
/// Square-root factor of the top-R Fourier-domain eigenpairs of
/// (Z + Z^T)/2 with Z = gradient_scale * adjoint(y); negative eigenvalues
/// are clipped to zero.
Tensor3 init_spectral(const SensingOperator& op, const Eigen::VectorXd& y, Index R);
/// Spectral start from the listed measurements only, normalized by their
/// count. Equals init_spectral when `rows` covers all of them.
Tensor3 init_spectral(const SensingOperator& op, const Eigen::VectorXd& y,
                      const std::vector<Index>& rows, Index R);
Tensor3 initialize(const SolverConfig& config, const SensingOperator& op, const Eigen::VectorXd& y);

/// Rank-R square-root factor U of a symmetric tensor, U * U^T being the best
/// PSD approximation of tubal rank <= R.
Tensor3 psd_factor(const Tensor3& symmetric, Index R);

/// (1/4) c ||y - M(U * U^T)||^2, c = op.gradient_scale().
double training_loss(const Tensor3& u, const SensingOperator& op, const Eigen::VectorXd& y);

/// c * G * U with G = M^*(M(U * U^T) - y), the direction the update subtracts.
Tensor3 update_direction(const Tensor3& u, const SensingOperator& op, const Eigen::VectorXd& y,
                         bool symmetrize = false);

/// U - eta * update_direction(U). Throws ErrorCode::divergence if the result
/// is not finite.
Tensor3 fgd_step(const Tensor3& u, const SensingOperator& op, const Eigen::VectorXd& y, double eta,
                 bool symmetrize = false);

/// ||est - truth||_F^2 / ||truth||_F^2.
double rse(const Tensor3& estimate, const Tensor3& truth);

struct PhaseDiagnostics {
  double sigma_min_signal = 0.0;  ///< sigma_min(U * W)
  double overparam_norm = 0.0;    ///< ||U * W_perp||
  double misalignment = 0.0;      ///< ||V_perp^T * V_{U*W}||
  /// V_X^T * U was numerically rank deficient; misalignment is then 1.
  bool degenerate = false;
};

PhaseDiagnostics phase_diagnostics(const Tensor3& u, const GroundTruth& gt);

struct ErrorDecomposition {
  double total = 0.0;        ///< ||U U^T - X_star||
  double in_subspace = 0.0;  ///< ||V_X^T * (U U^T - X_star)||
  double overparam = 0.0;    ///< ||U * W_perp||^2
  /// total <= 4 in_subspace + overparam, up to round-off. This is a
  /// property of the refinement phase, not an identity for every U.
  bool bound_holds = false;
};

ErrorDecomposition error_decomposition(const Tensor3& u, const GroundTruth& gt);

/// n r k sigma^2 / ((1 + delta) m).
double minimax_floor(Index n, Index r, Index k, double sigma, Index m, double delta = 0.0);

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// One row per iterate U_t, t = 0 .. T. NaN marks a metric that was not
/// computed (no ground truth, no validation split, or off the diagnostic
/// stride).
struct IterationRecord {
  Index iter = 0;
  double train_loss = kMissing;
  double val_loss = kMissing;
  double rse = kMissing;
  double sigma_min_signal = kMissing;
  double overparam_norm = kMissing;
  double misalignment = kMissing;
  double elapsed_ms = kMissing;
};

struct SolveTrace {
  std::vector<IterationRecord> rows;
  bool diverged = false;
  std::string message;

  double min_rse() const;
  /// Iteration at which rse is smallest (first one on ties).
  Index argmin_rse() const;
};

struct TraceCsvOptions {
  bool val_loss = false;
  bool elapsed = true;
};

/// Header iter,train_loss,rse,sigma_min_signal,overparam_norm,misalignment,
/// elapsed_ms (+ val_loss when requested). Missing values are empty fields.
void write_trace_csv(std::ostream& os, const SolveTrace& trace, TraceCsvOptions opts = {});

struct SolveResult {
  SolveTrace trace;
  Tensor3 final_u;
};

using IterationObserver = std::function<void(const Tensor3& u, const IterationRecord& rec)>;

/// One trajectory for the batch engine.
struct Run {
  Tensor3 u0;
  /// All m observations in the operator's scaling convention.
  Eigen::VectorXd y;
  /// Measurements the gradient may use; empty means all of them.
  std::vector<Index> train_rows;
  /// Measurements scored as validation loss; never touched by the gradient.
  std::vector<Index> val_rows;
  double eta = 0.1;
  Index T = 1000;
  bool symmetrize_gradient = false;
  double divergence_guard = kDefaultDivergenceGuard;
  Index diag_stride = 1;
  const GroundTruth* truth = nullptr;
  IterationObserver observer;
};

/// Runs every trajectory against one operator, sharing each pass over the
/// measurement matrix. Each run's result equals what a batch of one would
/// produce up to GEMM summation order; the batch layout is fixed by the
/// caller so repeated calls are bitwise reproducible. Divergence stops the
/// affected run only and is reported in its trace.
std::vector<SolveResult> solve_batch(const SensingOperator& op, std::vector<Run> runs);

/// Initialize per config and run T iterations on all measurements.
/// Throws ErrorCode::divergence when the guard trips.
SolveResult solve(const SensingOperator& op, const Eigen::VectorXd& y, const SolverConfig& config,
                  const GroundTruth* truth = nullptr);

}  // namespace tubal::fgd
