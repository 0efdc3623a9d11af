#include "doctest.h"

#include <sstream>

#include <Eigen/Eigenvalues>

#include "oracles.hpp"
#include "tubal/error.hpp"
#include "tubal/fgd.hpp"

using namespace tubal;
using namespace tubal::fgd;

namespace {

// c * M^*(M(U U^T) - y) * U from explicit measurement loops.
Tensor3 naive_direction(const Tensor3& u, const SensingOperator& op, const Eigen::VectorXd& y) {
  const Tensor3 x = oracle::circular_tprod(u, oracle::transpose(u));
  Tensor3 g(op.n(), op.n(), op.k());
  for (Index i = 0; i < op.m(); ++i) {
    const Tensor3 a = op.measurement(i);
    g += (oracle::dot(a, x) - y(i)) * a;
  }
  return op.gradient_scale() * oracle::circular_tprod(g, u);
}

Eigen::VectorXd observe(const SensingOperator& op, const Tensor3& x, double sigma, Seed seed) {
  Eigen::VectorXd y = op.forward(x);
  if (sigma > 0.0) y += sample_noise(NoiseSpec::gaussian(sigma, seed), op.m());
  return y;
}

}  // namespace

TEST_CASE("ground truth is normalized symmetric PSD of the requested rank") {
  const GroundTruth gt = make_ground_truth(8, 2, 3, 42);
  CHECK(oracle::frob(gt.x_star) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(oracle::rel_diff(ttranspose(gt.x_star), gt.x_star) < 1e-14);
  CHECK(oracle::rel_diff(tprod(gt.x_factor, ttranspose(gt.x_factor)), gt.x_star) < 1e-12);
  CHECK(tubal_rank(gt.x_star) == 2);
  CHECK(gt.v_x.n2() == 2);
  CHECK(gt.v_x_perp.n2() == 6);
  CHECK(gt.spectrum.condition_number >= 1.0);
}

TEST_CASE("direction matches explicit measurement loops") {
  const SensingOperator op = SensingOperator::gaussian(4, 3, 30, 1);
  const Tensor3 u = oracle::random_tensor(4, 3, 3, 2);
  const Eigen::VectorXd y = observe(op, oracle::random_tensor(4, 4, 3, 3), 0.0, 0);
  CHECK(oracle::rel_diff(update_direction(u, op, y), naive_direction(u, op, y)) < 1e-11);
  const Tensor3 next = fgd_step(u, op, y, 0.05);
  CHECK(oracle::rel_diff(next, u - 0.05 * naive_direction(u, op, y)) < 1e-12);
}

TEST_CASE("symmetrized direction is the loss gradient") {
  for (int point = 0; point < 10; ++point) {
    const SensingOperator op = SensingOperator::gaussian(4, 2, 40, 100 + point);
    const GroundTruth gt = make_ground_truth(4, 2, 2, 200 + point);
    const Eigen::VectorXd y = observe(op, gt.x_star, 0.01, 300 + point);
    const Tensor3 u = oracle::random_tensor(4, 3, 2, 400 + point);
    const Tensor3 d = oracle::random_tensor(4, 3, 2, 500 + point);
    const auto f = [&](const Tensor3& v) { return training_loss(v, op, y); };
    const double fd = oracle::directional_fd(f, u, d, 1e-5);
    const double analytic = oracle::dot(update_direction(u, op, y, true), d);
    CHECK(std::abs(fd - analytic) <= 1e-5 * std::abs(analytic));
  }
}

TEST_CASE("k = 1 step matches dense matrix sensing") {
  for (int inst = 0; inst < 5; ++inst) {
    const Index n = 5, R = 3, m = 40;
    const SensingOperator op = SensingOperator::gaussian(n, 1, m, 10 + inst);
    const Tensor3 u = oracle::random_tensor(n, R, 1, 20 + inst);
    Rng rng(30 + inst);
    Eigen::VectorXd y(m);
    for (Index i = 0; i < m; ++i) y(i) = rng.normal();

    const Eigen::MatrixXd U = oracle::slice0(u);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
    for (Index i = 0; i < m; ++i) {
      const Eigen::MatrixXd A = oracle::slice0(op.measurement(i));
      G += ((A.cwiseProduct(U * U.transpose())).sum() - y(i)) * A;
    }
    const Eigen::MatrixXd expected = U - 0.1 / static_cast<double>(m) * G * U;
    const Eigen::MatrixXd got = oracle::slice0(fgd_step(u, op, y, 0.1));
    CHECK((got - expected).norm() <= 1e-10 * expected.norm());
  }
}

TEST_CASE("step rejects non-finite iterates") {
  const SensingOperator op = SensingOperator::gaussian(3, 2, 10, 1);
  Tensor3 u = oracle::random_tensor(3, 2, 2, 2);
  u(0, 0, 0) = std::numeric_limits<double>::infinity();
  const Eigen::VectorXd y = Eigen::VectorXd::Zero(10);
  try {
    (void)fgd_step(u, op, y, 0.1);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::divergence);
  }
}

TEST_CASE("small init has the requested scale") {
  const Index n = 60, R = 5, k = 3;
  const Tensor3 u = init_small(n, R, k, 1e-3, 8);
  const double sd = std::sqrt(u.vec().squaredNorm() / static_cast<double>(u.size()));
  // Sample sd of N entries is within a few multiples of 1/sqrt(2N).
  CHECK(std::abs(sd / (1e-3 / std::sqrt(5.0)) - 1.0) < 5.0 / std::sqrt(2.0 * u.size()));
  CHECK(oracle::rel_diff(init_small(n, R, k, 1e-3, 8), u) == 0.0);
}

TEST_CASE("psd factor matches a dense eigendecomposition when k = 1") {
  Tensor3 s = oracle::random_tensor(6, 6, 1, 5);
  s = 0.5 * (s + ttranspose(s));
  const Tensor3 u = psd_factor(s, 3);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(oracle::slice0(s));
  Eigen::MatrixXd ref = Eigen::MatrixXd::Zero(6, 6);
  for (Index i = 3; i < 6; ++i) {  // eigenvalues are ascending
    const double lambda = std::max(es.eigenvalues()(i), 0.0);
    ref += lambda * es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose();
  }
  CHECK((oracle::slice0(tprod(u, ttranspose(u))) - ref).norm() < 1e-12 * ref.norm() + 1e-14);
}

TEST_CASE("psd factor recovers an exact low-rank PSD tensor") {
  const GroundTruth gt = make_ground_truth(7, 2, 4, 9);
  const Tensor3 u = psd_factor(gt.x_star, 2);
  CHECK(oracle::rel_diff(tprod(u, ttranspose(u)), gt.x_star) < 1e-10);
  // Extra columns carry only zero eigenvalues.
  const Tensor3 w = psd_factor(gt.x_star, 4);
  CHECK(oracle::rel_diff(tprod(w, ttranspose(w)), gt.x_star) < 1e-10);
}

TEST_CASE("spectral init on all rows equals the plain spectral init") {
  const SensingOperator op = SensingOperator::gaussian(5, 3, 200, 3);
  const GroundTruth gt = make_ground_truth(5, 2, 3, 4);
  const Eigen::VectorXd y = observe(op, gt.x_star, 1e-3, 5);
  std::vector<Index> all(200);
  for (Index i = 0; i < 200; ++i) all[static_cast<std::size_t>(i)] = i;
  const Tensor3 a = init_spectral(op, y, 2);
  const Tensor3 b = init_spectral(op, y, all, 2);
  CHECK(oracle::rel_diff(tprod(a, ttranspose(a)), tprod(b, ttranspose(b))) < 1e-10);
}

TEST_CASE("minimax floor and rse") {
  CHECK(minimax_floor(30, 3, 3, 1e-3, 2700) == doctest::Approx(30.0 * 3 * 3 * 1e-6 / 2700));
  CHECK(minimax_floor(30, 3, 3, 1e-3, 2700, 0.5) == doctest::Approx(30.0 * 3 * 3 * 1e-6 / 4050));
  const Tensor3 t = oracle::random_tensor(3, 3, 2, 1);
  CHECK(rse(t, t) == 0.0);
  CHECK(rse(Tensor3(3, 3, 2), t) == doctest::Approx(1.0));
  CHECK(rse(2.0 * t, t) == doctest::Approx(1.0));
}

TEST_CASE("phase diagnostics at reference points") {
  const GroundTruth gt = make_ground_truth(6, 2, 3, 17);
  const PhaseDiagnostics at_truth = phase_diagnostics(gt.x_factor, gt);
  CHECK_FALSE(at_truth.degenerate);
  CHECK(at_truth.sigma_min_signal == doctest::Approx(sigma_min(gt.x_factor)).epsilon(1e-9));
  CHECK(at_truth.overparam_norm < 1e-12);
  CHECK(at_truth.misalignment < 1e-10);

  const Tensor3 padded = hcat(gt.x_factor, Tensor3(6, 1, 3));
  const PhaseDiagnostics pad = phase_diagnostics(padded, gt);
  CHECK(pad.overparam_norm < 1e-12);
  const ErrorDecomposition ed = error_decomposition(padded, gt);
  CHECK(ed.total < 1e-12);

  const PhaseDiagnostics zero = phase_diagnostics(Tensor3(6, 3, 3), gt);
  CHECK(zero.degenerate);
  CHECK(zero.misalignment == 1.0);
}

TEST_CASE("noiseless recovery converges and traces are complete") {
  const Index n = 8, k = 2, r = 1;
  const GroundTruth gt = make_ground_truth(n, r, k, 3);
  const SensingOperator op = SensingOperator::gaussian(n, k, 10 * n * r * k, 4);
  const Eigen::VectorXd y = observe(op, gt.x_star, 0.0, 0);
  SolverConfig cfg;
  cfg.R = 2;
  cfg.eta = 0.1;
  cfg.T = 1500;
  cfg.alpha = 1e-6;
  cfg.seed = 5;
  cfg.diag_stride = 500;
  const SolveResult res = solve(op, y, cfg, &gt);
  REQUIRE(res.trace.rows.size() == 1501);
  CHECK(res.trace.rows.back().rse < 1e-8);
  CHECK(res.trace.rows.front().iter == 0);
  CHECK_FALSE(std::isnan(res.trace.rows[500].misalignment));
  CHECK(std::isnan(res.trace.rows[501].misalignment));
  CHECK(res.trace.rows.back().train_loss ==
        doctest::Approx(training_loss(res.final_u, op, y)).epsilon(1e-6));
  std::ostringstream os;
  write_trace_csv(os, res.trace);
  CHECK(os.str().rfind("iter,train_loss,rse,sigma_min_signal,overparam_norm,misalignment", 0) == 0);
}

TEST_CASE("batched runs equal solo runs and divergence stays local") {
  const GroundTruth gt = make_ground_truth(6, 2, 2, 7);
  const SensingOperator op = SensingOperator::gaussian(6, 2, 150, 8);
  const Eigen::VectorXd y = observe(op, gt.x_star, 1e-3, 9);
  auto make = [&](double eta, Seed seed) {
    Run run;
    run.u0 = init_small(6, 3, 2, 1e-3, seed);
    run.y = y;
    run.eta = eta;
    run.T = 200;
    run.truth = &gt;
    run.diag_stride = 0;
    return run;
  };
  std::vector<Run> solo{make(0.1, 1)};
  const auto one = solve_batch(op, solo);
  std::vector<Run> many{make(0.1, 1), make(500.0, 2), make(0.2, 3)};
  const auto three = solve_batch(op, many);
  CHECK(oracle::rel_diff(three[0].final_u, one[0].final_u) < 1e-10);
  CHECK(three[1].trace.diverged);
  CHECK(three[1].trace.rows.size() < 201);
  CHECK_FALSE(three[2].trace.diverged);
  CHECK(three[2].trace.rows.size() == 201);

  SolverConfig cfg;
  cfg.R = 3;
  cfg.eta = 500.0;
  cfg.T = 50;
  cfg.alpha = 1e-3;
  CHECK_THROWS_AS(solve(op, y, cfg), Error);
}

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  cfg.R = 0;
  CHECK_THROWS_AS(cfg.validate(5), Error);
  cfg.R = 6;
  CHECK_THROWS_AS(cfg.validate(5), Error);
  cfg.R = 2;
  cfg.eta = -1.0;
  CHECK_THROWS_AS(cfg.validate(5), Error);
  cfg.eta = 0.1;
  CHECK_NOTHROW(cfg.validate(5));
  CHECK(parse_init_kind("spectral") == InitKind::spectral);
  CHECK_THROWS_AS(parse_init_kind("zero"), Error);
}
