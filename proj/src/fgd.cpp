#include "tubal/fgd.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "tubal/csv.hpp"
#include "tubal/error.hpp"

namespace tubal::fgd {

namespace {

using Complex = std::complex<double>;

Tensor3 gram(const Tensor3& u) { return tprod(u, ttranspose(u)); }

double spectral2(const Eigen::MatrixXcd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues()(0);
}

}  // namespace

// ------------------------------------------------------------ ground truth

Tensor3 psd_factor(const Tensor3& symmetric, Index R) {
  if (symmetric.n1() != symmetric.n2())
    raise(ErrorCode::dimension_mismatch, "psd_factor needs square frontal slices");
  const Index n = symmetric.n1();
  const Index k = symmetric.k();
  if (R < 1 || R > n) raise(ErrorCode::invalid_argument, "factor width must lie in [1, n]");
  FourierSlices f = fft_mode3(symmetric);
  FourierSlices out{n, R, std::vector<Eigen::MatrixXcd>(static_cast<std::size_t>(k))};
  for (Index j = 0; j < independent_slices(k); ++j) {
    const auto js = static_cast<std::size_t>(j);
    const Eigen::MatrixXcd herm = 0.5 * (f.slices[js] + f.slices[js].adjoint());
    Eigen::MatrixXcd vecs;
    Eigen::VectorXd vals;
    if (self_conjugate(j, k)) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(herm.real());
      if (es.info() != Eigen::Success) raise(ErrorCode::convergence, "eigensolver failed");
      vecs = es.eigenvectors().cast<Complex>();
      vals = es.eigenvalues();
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm);
      if (es.info() != Eigen::Success) raise(ErrorCode::convergence, "eigensolver failed");
      vecs = es.eigenvectors();
      vals = es.eigenvalues();
    }
    // Ascending order from the solver; take the R largest.
    Eigen::MatrixXcd u(n, R);
    for (Index c = 0; c < R; ++c) {
      const Index src = n - 1 - c;
      u.col(c) = vecs.col(src) * std::sqrt(std::max(vals(src), 0.0));
    }
    out.slices[js] = std::move(u);
  }
  for (Index j = independent_slices(k); j < k; ++j)
    out.slices[static_cast<std::size_t>(j)] = out.slices[static_cast<std::size_t>(k - j)].conjugate();
  return ifft_mode3(out);
}

GroundTruth ground_truth_from_star(Tensor3 x_star, Index r) {
  const Index n = x_star.n1();
  if (x_star.n2() != n) raise(ErrorCode::dimension_mismatch, "ground truth must be n x n x k");
  if (r < 1 || r > n) raise(ErrorCode::invalid_argument, "true rank must lie in [1, n]");
  GroundTruth gt;
  gt.r = r;
  gt.spectrum = spectrum(x_star);
  const TSVD d = tsvd(x_star);
  gt.v_x = columns(d.V, 0, r);
  gt.fv_x = fft_mode3(gt.v_x);
  if (r < n) {
    gt.v_x_perp = columns(d.V, r, n - r);
    gt.fv_x_perp = fft_mode3(gt.v_x_perp);
  }
  gt.x_factor = psd_factor(x_star, r);
  gt.x_star = std::move(x_star);
  return gt;
}

GroundTruth make_ground_truth(Index n, Index r, Index k, Seed seed) {
  if (r < 1 || r > n) raise(ErrorCode::invalid_argument, "true rank must lie in [1, n]");
  Rng rng(derive_seed(seed, Stream::truth));
  Tensor3 x = Tensor3::gaussian(n, r, k, rng);
  Tensor3 xs = gram(x);
  const double c = frobenius_norm(xs);
  xs *= 1.0 / c;
  x *= 1.0 / std::sqrt(c);
  GroundTruth gt = ground_truth_from_star(std::move(xs), r);
  gt.x_factor = std::move(x);
  return gt;
}

// --------------------------------------------------------- initialization

const char* to_string(InitKind kind) noexcept {
  switch (kind) {
    case InitKind::small: return "small";
    case InitKind::spectral: return "spectral";
    case InitKind::large: return "large";
  }
  return "small";
}

InitKind parse_init_kind(std::string_view name) {
  if (name == "small") return InitKind::small;
  if (name == "spectral") return InitKind::spectral;
  if (name == "large") return InitKind::large;
  raise(ErrorCode::config, "unknown init '" + std::string(name) + "'");
}

void SolverConfig::validate(Index n) const {
  if (R < 1 || R > n) raise(ErrorCode::config, "R must lie in [1, n]");
  if (!(eta >= 0.0) || !std::isfinite(eta)) raise(ErrorCode::config, "eta must be nonnegative");
  if (T < 0) raise(ErrorCode::config, "T must be nonnegative");
  if (init != InitKind::spectral && !(alpha > 0.0)) raise(ErrorCode::config, "alpha must be positive");
  if (!(divergence_guard > 1.0)) raise(ErrorCode::config, "divergence_guard must exceed 1");
  if (diag_stride < 0) raise(ErrorCode::config, "diag_stride must be nonnegative");
}

Tensor3 init_small(Index n, Index R, Index k, double alpha, Seed seed) {
  if (!(alpha > 0.0)) raise(ErrorCode::invalid_argument, "alpha must be positive");
  if (R < 1) raise(ErrorCode::invalid_argument, "R must be positive");
  Rng rng(derive_seed(seed, Stream::init));
  return Tensor3::gaussian(n, R, k, rng, alpha / std::sqrt(static_cast<double>(R)));
}

Tensor3 init_large(Index n, Index R, Index k, Seed seed, double alpha) {
  return init_small(n, R, k, alpha, seed);
}

Tensor3 init_spectral(const SensingOperator& op, const Eigen::VectorXd& y, Index R) {
  if (R < 1 || R > op.n()) raise(ErrorCode::invalid_argument, "R must lie in [1, n]");
  Tensor3 z = op.adjoint(y);
  z *= op.gradient_scale();
  Tensor3 sym = z + ttranspose(z);
  sym *= 0.5;
  return psd_factor(sym, R);
}

Tensor3 init_spectral(const SensingOperator& op, const Eigen::VectorXd& y,
                      const std::vector<Index>& rows, Index R) {
  if (R < 1 || R > op.n()) raise(ErrorCode::invalid_argument, "R must lie in [1, n]");
  if (y.size() != op.m()) raise(ErrorCode::dimension_mismatch, "observation length != m");
  if (rows.empty()) raise(ErrorCode::invalid_argument, "spectral start needs measurements");
  Eigen::VectorXd e = Eigen::VectorXd::Zero(op.m());
  for (Index i : rows) {
    if (i < 0 || i >= op.m()) raise(ErrorCode::invalid_argument, "row index out of range");
    e(i) = y(i) / op.scale();
  }
  Tensor3 z(op.n(), op.n(), op.k());
  z.vec().noalias() = op.matrix() * e;
  z *= 1.0 / static_cast<double>(rows.size());
  Tensor3 sym = z + ttranspose(z);
  sym *= 0.5;
  return psd_factor(sym, R);
}

Tensor3 initialize(const SolverConfig& config, const SensingOperator& op, const Eigen::VectorXd& y) {
  switch (config.init) {
    case InitKind::small: return init_small(op.n(), config.R, op.k(), config.alpha, config.seed);
    case InitKind::large: return init_large(op.n(), config.R, op.k(), config.seed, config.alpha);
    case InitKind::spectral: return init_spectral(op, y, config.R);
  }
  raise(ErrorCode::config, "unknown init");
}

// ------------------------------------------------------------ update rule

double training_loss(const Tensor3& u, const SensingOperator& op, const Eigen::VectorXd& y) {
  if (y.size() != op.m()) raise(ErrorCode::dimension_mismatch, "observation length != m");
  return 0.25 * op.gradient_scale() * (y - op.forward(gram(u))).squaredNorm();
}

Tensor3 update_direction(const Tensor3& u, const SensingOperator& op, const Eigen::VectorXd& y,
                         bool symmetrize) {
  if (u.n1() != op.n() || u.k() != op.k())
    raise(ErrorCode::dimension_mismatch, "factor shape does not match the operator");
  if (y.size() != op.m()) raise(ErrorCode::dimension_mismatch, "observation length != m");
  Tensor3 g = op.adjoint(op.forward(gram(u)) - y);
  if (symmetrize) {
    g += ttranspose(g);
    g *= 0.5;
  }
  Tensor3 d = tprod(g, u);
  d *= op.gradient_scale();
  return d;
}

Tensor3 fgd_step(const Tensor3& u, const SensingOperator& op, const Eigen::VectorXd& y, double eta,
                 bool symmetrize) {
  Tensor3 next = u - eta * update_direction(u, op, y, symmetrize);
  if (!next.all_finite()) raise(ErrorCode::divergence, "non-finite iterate after an FGD step");
  return next;
}

double rse(const Tensor3& estimate, const Tensor3& truth) {
  const double denom = truth.vec().squaredNorm();
  if (denom == 0.0) raise(ErrorCode::invalid_argument, "rse against a zero tensor");
  return (estimate - truth).vec().squaredNorm() / denom;
}

// ------------------------------------------------------------ diagnostics

namespace {

struct SliceSplit {
  Eigen::MatrixXcd signal;  // U_j W_j (n x q_eff)
  Eigen::MatrixXcd perp;    // U_j W_perp,j (n x (R - q_eff))
  Index rank = 0;
  Index wanted = 0;
};

SliceSplit split_slice(const Eigen::MatrixXcd& vx, const Eigen::MatrixXcd& u) {
  SliceSplit s;
  const Index R = u.cols();
  s.wanted = std::min(vx.cols(), R);
  const double scale = spectral2(u);
  if (scale > 0.0) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(vx.adjoint() * u, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    for (Index i = 0; i < s.wanted; ++i)
      if (sv(i) > 1e-10 * scale) ++s.rank;
    const Eigen::MatrixXcd& w = svd.matrixV();
    s.signal = u * w.leftCols(s.rank);
    s.perp = u * w.rightCols(R - s.rank);
  } else {
    s.signal.resize(u.rows(), 0);
    s.perp = u;
  }
  return s;
}

}  // namespace

PhaseDiagnostics phase_diagnostics(const Tensor3& u, const GroundTruth& gt) {
  if (u.n1() != gt.x_star.n1() || u.k() != gt.x_star.k())
    raise(ErrorCode::dimension_mismatch, "factor shape does not match the ground truth");
  const FourierSlices fu = fft_mode3(u);
  const Index k = u.k();
  PhaseDiagnostics out;
  out.sigma_min_signal = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < independent_slices(k); ++j) {
    const auto js = static_cast<std::size_t>(j);
    const SliceSplit s = split_slice(gt.fv_x.slices[js], fu.slices[js]);
    if (s.rank < s.wanted) out.degenerate = true;
    if (s.rank == 0) {
      out.sigma_min_signal = 0.0;
    } else {
      Eigen::JacobiSVD<Eigen::MatrixXcd> svd(s.signal, Eigen::ComputeThinU);
      out.sigma_min_signal = std::min(out.sigma_min_signal, svd.singularValues()(s.rank - 1));
      if (s.rank < s.wanted) out.sigma_min_signal = 0.0;
      if (!gt.fv_x_perp.slices.empty()) {
        const Eigen::MatrixXcd basis = svd.matrixU().leftCols(s.rank);
        out.misalignment =
            std::max(out.misalignment, spectral2(gt.fv_x_perp.slices[js].adjoint() * basis));
      }
    }
    out.overparam_norm = std::max(out.overparam_norm, spectral2(s.perp));
  }
  if (out.degenerate) out.misalignment = 1.0;
  return out;
}

ErrorDecomposition error_decomposition(const Tensor3& u, const GroundTruth& gt) {
  const Tensor3 delta = gram(u) - gt.x_star;
  ErrorDecomposition out;
  out.total = spectral_norm(delta);
  out.in_subspace = spectral_norm(tprod(ttranspose(gt.v_x), delta));
  const double op_norm = phase_diagnostics(u, gt).overparam_norm;
  out.overparam = op_norm * op_norm;
  const double slack = 1e-12 * std::max({out.total, out.in_subspace, 1e-300});
  out.bound_holds = out.total <= 4.0 * out.in_subspace + out.overparam + slack;
  return out;
}

double minimax_floor(Index n, Index r, Index k, double sigma, Index m, double delta) {
  if (n < 1 || r < 1 || k < 1 || m < 1 || sigma < 0.0 || delta < 0.0)
    raise(ErrorCode::invalid_argument, "minimax_floor: arguments must be positive");
  return static_cast<double>(n * r * k) * sigma * sigma /
         ((1.0 + delta) * static_cast<double>(m));
}

// ------------------------------------------------------------------ trace

double SolveTrace::min_rse() const {
  double best = kMissing;
  for (const auto& row : rows)
    if (!std::isnan(row.rse) && (std::isnan(best) || row.rse < best)) best = row.rse;
  return best;
}

Index SolveTrace::argmin_rse() const {
  Index at = -1;
  double best = 0.0;
  for (const auto& row : rows)
    if (!std::isnan(row.rse) && (at < 0 || row.rse < best)) {
      best = row.rse;
      at = row.iter;
    }
  return at;
}

void write_trace_csv(std::ostream& os, const SolveTrace& trace, TraceCsvOptions opts) {
  os << "iter,train_loss,rse,sigma_min_signal,overparam_norm,misalignment";
  if (opts.elapsed) os << ",elapsed_ms";
  if (opts.val_loss) os << ",val_loss";
  os << '\n';
  for (const auto& r : trace.rows) {
    os << r.iter << ',' << csv_number(r.train_loss) << ',' << csv_number(r.rse) << ','
       << csv_number(r.sigma_min_signal) << ',' << csv_number(r.overparam_norm) << ','
       << csv_number(r.misalignment);
    if (opts.elapsed) os << ',' << csv_number(r.elapsed_ms);
    if (opts.val_loss) os << ',' << csv_number(r.val_loss);
    os << '\n';
  }
}

// --------------------------------------------------------------- engine

namespace {

// Measurement columns per fused pass; a block of A stays cache resident
// between its forward and adjoint use.
constexpr Index kMeasurementBlock = 48;

struct RunState {
  Run spec;
  Tensor3 u;
  Eigen::VectorXd y_raw;
  Eigen::VectorXd fit_weight;  // 1 on rows the gradient uses
  Eigen::VectorXd val_weight;  // 1 on validation rows
  double inv_fit = 1.0;
  double inv_val = 0.0;
  double initial_loss = 0.0;
  double truth_sq = 0.0;
  bool active = true;
  SolveTrace trace;
};

void validate_run(const SensingOperator& op, const Run& run) {
  if (run.u0.n1() != op.n() || run.u0.k() != op.k())
    raise(ErrorCode::dimension_mismatch, "initial factor does not match the operator");
  if (run.y.size() != op.m()) raise(ErrorCode::dimension_mismatch, "observation length != m");
  if (!(run.eta >= 0.0)) raise(ErrorCode::invalid_argument, "eta must be nonnegative");
  if (run.T < 0) raise(ErrorCode::invalid_argument, "T must be nonnegative");
  for (Index i : run.train_rows)
    if (i < 0 || i >= op.m()) raise(ErrorCode::invalid_argument, "train index out of range");
  for (Index i : run.val_rows)
    if (i < 0 || i >= op.m()) raise(ErrorCode::invalid_argument, "validation index out of range");
  if (run.truth && !run.truth->x_star.same_shape(Tensor3(op.n(), op.n(), op.k())))
    raise(ErrorCode::dimension_mismatch, "ground truth does not match the operator");
}

}  // namespace

std::vector<SolveResult> solve_batch(const SensingOperator& op, std::vector<Run> runs) {
  using Clock = std::chrono::steady_clock;
  const Index N = op.dim();
  const Index m = op.m();
  const double inv_scale = 1.0 / op.scale();
  const Eigen::MatrixXd& a = op.matrix();

  std::vector<RunState> states;
  states.reserve(runs.size());
  for (auto& run : runs) {
    validate_run(op, run);
    RunState s;
    s.u = run.u0;
    s.y_raw = run.y * inv_scale;
    s.fit_weight = Eigen::VectorXd::Zero(m);
    s.val_weight = Eigen::VectorXd::Zero(m);
    if (run.train_rows.empty()) {
      s.fit_weight.setOnes();
    } else {
      for (Index i : run.train_rows) s.fit_weight(i) = 1.0;
    }
    for (Index i : run.val_rows) s.val_weight(i) = 1.0;
    s.inv_fit = 1.0 / s.fit_weight.sum();
    s.inv_val = run.val_rows.empty() ? 0.0 : 1.0 / s.val_weight.sum();
    if (run.truth) s.truth_sq = run.truth->x_star.vec().squaredNorm();
    s.trace.rows.reserve(static_cast<std::size_t>(run.T + 1));
    s.spec = std::move(run);
    states.push_back(std::move(s));
  }

  Index t_max = 0;
  for (const auto& s : states) t_max = std::max(t_max, s.spec.T);

  // Per-run observation and row-weight columns, rebuilt when the live set
  // changes.
  std::vector<std::size_t> live, prev_live;
  Eigen::MatrixXd y_cols, fit_cols, val_cols;
  std::vector<Tensor3> grams(states.size());

  for (Index t = 0; t <= t_max; ++t) {
    const auto tick = Clock::now();
    live.clear();
    for (std::size_t b = 0; b < states.size(); ++b)
      if (states[b].active && t <= states[b].spec.T) live.push_back(b);
    if (live.empty()) break;
    const Index B = static_cast<Index>(live.size());
    if (live != prev_live) {
      y_cols.resize(m, B);
      fit_cols.resize(m, B);
      val_cols.resize(m, B);
      for (Index c = 0; c < B; ++c) {
        const RunState& s = states[live[static_cast<std::size_t>(c)]];
        y_cols.col(c) = s.y_raw;
        fit_cols.col(c) = s.fit_weight;
        val_cols.col(c) = s.val_weight;
      }
      prev_live = live;
    }

    bool any_step = false;
    Eigen::MatrixXd x(N, B);
    for (Index c = 0; c < B; ++c) {
      const auto b = live[static_cast<std::size_t>(c)];
      grams[b] = gram(states[b].u);
      x.col(c) = grams[b].vec();
      any_step = any_step || t < states[b].spec.T;
    }

    // One pass over the measurement matrix: forward values, residuals and
    // the adjoint accumulation, block by block. The block order is fixed so
    // results do not depend on anything but the batch layout.
    Eigen::RowVectorXd fit_sq = Eigen::RowVectorXd::Zero(B);
    Eigen::RowVectorXd val_sq = Eigen::RowVectorXd::Zero(B);
    Eigen::MatrixXd g;
    if (any_step) g = Eigen::MatrixXd::Zero(N, B);
    Eigen::MatrixXd f, resid;
    for (Index c0 = 0; c0 < m; c0 += kMeasurementBlock) {
      const Index bs = std::min(kMeasurementBlock, m - c0);
      const auto blk = a.middleCols(c0, bs);
      f.noalias() = blk.transpose() * x;
      f -= y_cols.middleRows(c0, bs);
      resid = f.cwiseProduct(fit_cols.middleRows(c0, bs));
      fit_sq += resid.colwise().squaredNorm();
      val_sq += f.cwiseProduct(val_cols.middleRows(c0, bs)).colwise().squaredNorm();
      if (any_step) g.noalias() += blk * resid;
    }

    for (Index c = 0; c < B; ++c) {
      const auto b = live[static_cast<std::size_t>(c)];
      RunState& s = states[b];
      IterationRecord rec;
      rec.iter = t;
      rec.train_loss = 0.25 * s.inv_fit * fit_sq(c);
      if (!s.spec.val_rows.empty()) rec.val_loss = 0.25 * s.inv_val * val_sq(c);
      if (s.spec.truth) {
        rec.rse = (grams[b] - s.spec.truth->x_star).vec().squaredNorm() / s.truth_sq;
        if (s.spec.diag_stride > 0 && (t % s.spec.diag_stride == 0 || t == s.spec.T)) {
          const PhaseDiagnostics d = phase_diagnostics(s.u, *s.spec.truth);
          rec.sigma_min_signal = d.sigma_min_signal;
          rec.overparam_norm = d.overparam_norm;
          rec.misalignment = d.misalignment;
        }
      }

      if (t == 0) s.initial_loss = rec.train_loss;
      const bool blown = !std::isfinite(rec.train_loss) || !s.u.all_finite() ||
                         (s.initial_loss > 0.0 &&
                          rec.train_loss > s.spec.divergence_guard * s.initial_loss);
      if (blown) {
        s.active = false;
        s.trace.diverged = true;
        s.trace.message = "diverged at iteration " + std::to_string(t);
        continue;
      }
      s.trace.rows.push_back(rec);
      if (s.spec.observer) s.spec.observer(s.u, s.trace.rows.back());
      if (t < s.spec.T) {
        Tensor3 grad(op.n(), op.n(), op.k());
        grad.vec() = g.col(c);
        if (s.spec.symmetrize_gradient) {
          grad += ttranspose(grad);
          grad *= 0.5;
        }
        s.u -= (s.spec.eta * s.inv_fit) * tprod(grad, s.u);
      }
    }

    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - tick).count();
    for (std::size_t b : live) {
      RunState& s = states[b];
      if (!s.trace.rows.empty() && s.trace.rows.back().iter == t) s.trace.rows.back().elapsed_ms = ms;
    }
  }

  std::vector<SolveResult> out;
  out.reserve(states.size());
  for (auto& s : states) out.push_back(SolveResult{std::move(s.trace), std::move(s.u)});
  return out;
}

SolveResult solve(const SensingOperator& op, const Eigen::VectorXd& y, const SolverConfig& config,
                  const GroundTruth* truth) {
  config.validate(op.n());
  Run run;
  run.u0 = initialize(config, op, y);
  run.y = y;
  run.eta = config.eta;
  run.T = config.T;
  run.symmetrize_gradient = config.symmetrize_gradient;
  run.divergence_guard = config.divergence_guard;
  run.diag_stride = config.diag_stride;
  run.truth = truth;
  std::vector<Run> runs;
  runs.push_back(std::move(run));
  auto results = solve_batch(op, std::move(runs));
  if (results.front().trace.diverged)
    raise(ErrorCode::divergence, results.front().trace.message);
  return std::move(results.front());
}

}  // namespace tubal::fgd
