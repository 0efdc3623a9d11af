#include "tubal/sensing.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "tubal/error.hpp"
#include "tubal/io.hpp"

namespace tubal {

namespace {

constexpr char kOperatorMagic[4] = {'T', 'S', 'N', 'S'};
constexpr std::uint32_t kOperatorVersion = 1;

}  // namespace

SensingOperator::SensingOperator(Index n, Index k, std::shared_ptr<const Eigen::MatrixXd> matrix,
                                 Seed seed, Scaling scaling)
    : n_(n), k_(k), matrix_(std::move(matrix)), seed_(seed), scaling_(scaling) {}

SensingOperator SensingOperator::gaussian(Index n, Index k, Index m, Seed seed, Scaling scaling) {
  if (m < 1) raise(ErrorCode::invalid_argument, "measurement count must be at least 1");
  if (n < 1 || k < 1) raise(ErrorCode::invalid_argument, "tensor dimensions must be positive");
  auto a = std::make_shared<Eigen::MatrixXd>(n * n * k, m);
  Rng rng(derive_seed(seed, Stream::operator_entries));
  for (Index i = 0; i < a->size(); ++i) a->data()[i] = rng.normal();
  return SensingOperator(n, k, std::move(a), seed, scaling);
}

SensingOperator SensingOperator::from_measurements(std::span<const Tensor3> tensors, Scaling scaling,
                                                   Seed seed) {
  if (tensors.empty()) raise(ErrorCode::invalid_argument, "measurement count must be at least 1");
  const Tensor3& first = tensors.front();
  if (first.n1() != first.n2())
    raise(ErrorCode::dimension_mismatch, "measurement tensors must have square frontal slices");
  auto a = std::make_shared<Eigen::MatrixXd>(first.size(), static_cast<Index>(tensors.size()));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (!tensors[i].same_shape(first))
      raise(ErrorCode::dimension_mismatch, "measurement tensors differ in shape");
    a->col(static_cast<Index>(i)) = tensors[i].vec();
  }
  return SensingOperator(first.n1(), first.k(), std::move(a), seed, scaling);
}

SensingOperator SensingOperator::identity_stub(Index n, Index k) {
  const Index dim = n * n * k;
  auto a = std::make_shared<Eigen::MatrixXd>(
      std::sqrt(static_cast<double>(dim)) * Eigen::MatrixXd::Identity(dim, dim));
  return SensingOperator(n, k, std::move(a), 0, Scaling::raw);
}

double SensingOperator::scale() const noexcept {
  return scaling_ == Scaling::raw ? 1.0 : 1.0 / std::sqrt(static_cast<double>(m()));
}

double SensingOperator::gradient_scale() const noexcept {
  return scaling_ == Scaling::raw ? 1.0 / static_cast<double>(m()) : 1.0;
}

void SensingOperator::check_shape(const Tensor3& t) const {
  if (t.n1() != n_ || t.n2() != n_ || t.k() != k_)
    raise(ErrorCode::dimension_mismatch,
          "operator expects " + std::to_string(n_) + "x" + std::to_string(n_) + "x" +
              std::to_string(k_) + " tensors");
}

Eigen::VectorXd SensingOperator::forward(const Tensor3& t) const {
  check_shape(t);
  Eigen::VectorXd out = matrix_->transpose() * t.vec();
  if (scaling_ != Scaling::raw) out *= scale();
  return out;
}

Tensor3 SensingOperator::adjoint(const Eigen::VectorXd& e) const {
  if (e.size() != m()) raise(ErrorCode::dimension_mismatch, "adjoint: coefficient length != m");
  Tensor3 out(n_, n_, k_);
  out.vec().noalias() = *matrix_ * e;
  if (scaling_ != Scaling::raw) out *= scale();
  return out;
}

Eigen::MatrixXd SensingOperator::forward_many(const Eigen::MatrixXd& vecs) const {
  if (vecs.rows() != dim()) raise(ErrorCode::dimension_mismatch, "forward_many: row count != N");
  Eigen::MatrixXd out = matrix_->transpose() * vecs;
  if (scaling_ != Scaling::raw) out *= scale();
  return out;
}

Eigen::MatrixXd SensingOperator::adjoint_many(const Eigen::MatrixXd& coeffs) const {
  if (coeffs.rows() != m()) raise(ErrorCode::dimension_mismatch, "adjoint_many: row count != m");
  Eigen::MatrixXd out = *matrix_ * coeffs;
  if (scaling_ != Scaling::raw) out *= scale();
  return out;
}

Tensor3 SensingOperator::measurement(Index i) const {
  if (i < 0 || i >= m()) raise(ErrorCode::invalid_argument, "measurement index out of range");
  Tensor3 t(n_, n_, k_);
  t.vec() = matrix_->col(i);
  return t;
}

SensingOperator SensingOperator::subset(std::span<const Index> rows) const {
  if (rows.empty()) raise(ErrorCode::invalid_argument, "empty measurement subset");
  auto a = std::make_shared<Eigen::MatrixXd>(dim(), static_cast<Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c) {
    if (rows[c] < 0 || rows[c] >= m())
      raise(ErrorCode::invalid_argument, "measurement index out of range");
    a->col(static_cast<Index>(c)) = matrix_->col(rows[c]);
  }
  return SensingOperator(n_, k_, std::move(a), seed_, scaling_);
}

// ------------------------------------------------------------ serialization

void write_operator(std::ostream& os, const SensingOperator& op) {
  os.write(kOperatorMagic, 4);
  io::write_u32(os, kOperatorVersion);
  io::write_u32(os, static_cast<std::uint32_t>(op.n()));
  io::write_u32(os, static_cast<std::uint32_t>(op.k()));
  io::write_u32(os, static_cast<std::uint32_t>(op.m()));
  io::write_u32(os, static_cast<std::uint32_t>(op.scaling()));
  io::write_u64(os, op.seed());
  for (Index i = 0; i < op.m(); ++i) io::write_tensor(os, op.measurement(i));
}

SensingOperator read_operator(std::istream& is) {
  char magic[4] = {};
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, kOperatorMagic, 4) != 0)
    raise(ErrorCode::io, "not a TSNS operator file");
  const auto version = io::read_u32(is);
  if (version != kOperatorVersion)
    raise(ErrorCode::io, "unsupported TSNS version " + std::to_string(version));
  const Index n = io::read_u32(is);
  const Index k = io::read_u32(is);
  const Index m = io::read_u32(is);
  const auto flag = io::read_u32(is);
  if (flag > 1) raise(ErrorCode::io, "unknown scaling flag " + std::to_string(flag));
  const Seed seed = io::read_u64(is);
  if (m < 1) raise(ErrorCode::io, "operator file declares no measurements");
  std::vector<Tensor3> tensors;
  tensors.reserve(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) {
    tensors.push_back(io::read_tensor(is));
    if (tensors.back().n1() != n || tensors.back().n2() != n || tensors.back().k() != k)
      raise(ErrorCode::io, "measurement record shape disagrees with operator header");
  }
  return SensingOperator::from_measurements(tensors, static_cast<Scaling>(flag), seed);
}

void save_operator(const std::filesystem::path& path, const SensingOperator& op) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) raise(ErrorCode::io, "cannot open " + path.string() + " for writing");
  write_operator(os, op);
}

SensingOperator load_operator(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) raise(ErrorCode::io, "cannot open " + path.string());
  return read_operator(is);
}

// -------------------------------------------------------------------- noise

const char* to_string(NoiseSpec::Kind kind) noexcept {
  switch (kind) {
    case NoiseSpec::Kind::none: return "none";
    case NoiseSpec::Kind::gaussian: return "gaussian";
    case NoiseSpec::Kind::laplace: return "laplace";
    case NoiseSpec::Kind::exponential: return "exponential";
  }
  return "none";
}

NoiseSpec::Kind parse_noise_kind(std::string_view name) {
  if (name == "none") return NoiseSpec::Kind::none;
  if (name == "gaussian") return NoiseSpec::Kind::gaussian;
  if (name == "laplace") return NoiseSpec::Kind::laplace;
  if (name == "exponential") return NoiseSpec::Kind::exponential;
  raise(ErrorCode::config, "unknown noise kind '" + std::string(name) + "'");
}

double noise_stddev(const NoiseSpec& spec) {
  switch (spec.kind) {
    case NoiseSpec::Kind::none: return 0.0;
    case NoiseSpec::Kind::gaussian: return spec.param;
    case NoiseSpec::Kind::laplace: return std::sqrt(2.0) * spec.param;
    case NoiseSpec::Kind::exponential: return 1.0 / spec.param;
  }
  return 0.0;
}

Eigen::VectorXd sample_noise(const NoiseSpec& spec, Index m) {
  if (m < 1) raise(ErrorCode::invalid_argument, "noise length must be at least 1");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
  if (spec.kind == NoiseSpec::Kind::none) return out;
  if (!(spec.param > 0.0) || !std::isfinite(spec.param))
    raise(ErrorCode::invalid_argument, "noise parameter must be positive");
  Rng rng(derive_seed(spec.seed, Stream::noise));
  for (Index i = 0; i < m; ++i) {
    switch (spec.kind) {
      case NoiseSpec::Kind::gaussian: out(i) = spec.param * rng.normal(); break;
      case NoiseSpec::Kind::laplace: out(i) = rng.laplace(spec.mu, spec.param); break;
      case NoiseSpec::Kind::exponential: out(i) = rng.exponential(spec.param); break;
      case NoiseSpec::Kind::none: break;
    }
  }
  return out;
}

// ------------------------------------------------------------------- t-RIP

TripProbe empirical_trip_probe(const SensingOperator& op, Index r, Index trials, Seed seed) {
  if (trials < 1) raise(ErrorCode::invalid_argument, "trials must be at least 1");
  if (r < 1 || r > op.n()) raise(ErrorCode::invalid_argument, "probe rank must lie in [1, n]");
  Rng rng(derive_seed(seed, Stream::probe));
  TripProbe out;
  out.trials = trials;
  for (Index t = 0; t < trials; ++t) {
    const Tensor3 left = Tensor3::gaussian(op.n(), r, op.k(), rng);
    const Tensor3 right = Tensor3::gaussian(op.n(), r, op.k(), rng);
    Tensor3 y = tprod(left, ttranspose(right));
    y *= 1.0 / frobenius_norm(y);
    const double energy = op.gradient_scale() * op.forward(y).squaredNorm();
    out.delta_hat = std::max(out.delta_hat, std::abs(energy - 1.0));
  }
  return out;
}

}  // namespace tubal
