#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "tubal/random.hpp"
#include "tubal/talg.hpp"

namespace tubal {

enum class Scaling : std::uint32_t {
  raw = 0,         ///< forward(t)_i = <A_i, t>
  inv_sqrt_m = 1,  ///< forward(t)_i = <A_i, t> / sqrt(m)
};

/// Linear map R^{n x n x k} -> R^m given by m dense measurement tensors.
///
/// The tensors are held as the columns of one N x m matrix (N = n*n*k), each
/// column being vec(A_i) in Tensor3 storage order. The matrix is shared and
/// immutable, so copies and subsets are cheap to pass around.
class SensingOperator {
 public:
  /// I.i.d. N(0, 1) entries, drawn A_1 first, each in storage order.
  static SensingOperator gaussian(Index n, Index k, Index m, Seed seed,
                                  Scaling scaling = Scaling::raw);
  static SensingOperator from_measurements(std::span<const Tensor3> tensors,
                                           Scaling scaling = Scaling::raw, Seed seed = 0);
  /// A_i = sqrt(m) e_i with m = n*n*k, so M^* M / m is the identity.
  static SensingOperator identity_stub(Index n, Index k);

  Index n() const noexcept { return n_; }
  Index k() const noexcept { return k_; }
  Index m() const noexcept { return matrix_->cols(); }
  Index dim() const noexcept { return matrix_->rows(); }
  Seed seed() const noexcept { return seed_; }
  Scaling scaling() const noexcept { return scaling_; }

  /// Factor applied to every forward/adjoint value: 1 or 1/sqrt(m).
  double scale() const noexcept;
  /// c such that c * adjoint(forward(X)) ~ X: 1/m for raw, 1 for inv_sqrt_m.
  double gradient_scale() const noexcept;

  Eigen::VectorXd forward(const Tensor3& t) const;
  Tensor3 adjoint(const Eigen::VectorXd& e) const;

  /// Columns of `vecs` (N x B) mapped to columns of an m x B matrix.
  Eigen::MatrixXd forward_many(const Eigen::MatrixXd& vecs) const;
  /// m x B coefficient columns mapped to N x B adjoint columns.
  Eigen::MatrixXd adjoint_many(const Eigen::MatrixXd& coeffs) const;

  Tensor3 measurement(Index i) const;
  /// Operator keeping only the given measurements, in the given order. The
  /// scaling convention is kept, with 1/sqrt(m) re-evaluated on the subset.
  SensingOperator subset(std::span<const Index> rows) const;

  const Eigen::MatrixXd& matrix() const noexcept { return *matrix_; }

 private:
  SensingOperator(Index n, Index k, std::shared_ptr<const Eigen::MatrixXd> matrix, Seed seed,
                  Scaling scaling);
  void check_shape(const Tensor3& t) const;

  Index n_ = 0;
  Index k_ = 0;
  std::shared_ptr<const Eigen::MatrixXd> matrix_;
  Seed seed_ = 0;
  Scaling scaling_ = Scaling::raw;
};

/// TSNS container: "TSNS", u32 version (=1), u32 n, u32 k, u32 m,
/// u32 scaling flag, u64 seed, then m TBL3 tensor records.
void write_operator(std::ostream& os, const SensingOperator& op);
SensingOperator read_operator(std::istream& is);
void save_operator(const std::filesystem::path& path, const SensingOperator& op);
SensingOperator load_operator(const std::filesystem::path& path);

struct NoiseSpec {
  enum class Kind { none, gaussian, laplace, exponential };

  Kind kind = Kind::none;
  /// sigma for gaussian, b for laplace, lambda for exponential.
  double param = 0.0;
  /// Location of the Laplace law.
  double mu = 0.0;
  Seed seed = 0;

  static NoiseSpec none() { return {}; }
  static NoiseSpec gaussian(double sigma, Seed seed) { return {Kind::gaussian, sigma, 0.0, seed}; }
  static NoiseSpec laplace(double b, Seed seed, double mu = 0.0) {
    return {Kind::laplace, b, mu, seed};
  }
  static NoiseSpec exponential(double lambda, Seed seed) {
    return {Kind::exponential, lambda, 0.0, seed};
  }
};

const char* to_string(NoiseSpec::Kind kind) noexcept;
NoiseSpec::Kind parse_noise_kind(std::string_view name);

/// Standard deviation of one draw. Zero for Kind::none.
double noise_stddev(const NoiseSpec& spec);

Eigen::VectorXd sample_noise(const NoiseSpec& spec, Index m);

struct TripProbe {
  /// max over trials of | c ||M(Y)||^2 - 1 | for unit-norm Y of tubal rank <= r,
  /// with c = gradient_scale(). A sampled lower bound on the t-RIP constant,
  /// not a certificate.
  double delta_hat = 0.0;
  Index trials = 0;
};

TripProbe empirical_trip_probe(const SensingOperator& op, Index r, Index trials, Seed seed);

}  // namespace tubal
