#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "tubal/random.hpp"

namespace tubal {

using Index = Eigen::Index;

/// Dense real third-order tensor of shape n1 x n2 x k.
///
/// Storage is slice-major with column-major frontal slices, i.e. entry
/// (i, j, l) lives at i + n1 * (j + n2 * l). This is also the on-disk order of
/// the TBL3 format, so a slice can be mapped as an Eigen column-major matrix
/// without copying.
class Tensor3 {
 public:
  using SliceMap = Eigen::Map<Eigen::MatrixXd>;
  using ConstSliceMap = Eigen::Map<const Eigen::MatrixXd>;

  Tensor3() = default;
  Tensor3(Index n1, Index n2, Index k);
  Tensor3(Index n1, Index n2, Index k, std::vector<double> values);

  static Tensor3 zeros(Index n1, Index n2, Index k) { return Tensor3(n1, n2, k); }
  /// First frontal slice is I_n, the rest are zero.
  static Tensor3 identity(Index n, Index k);
  /// I.i.d. N(0, stddev^2) entries drawn in storage order.
  static Tensor3 gaussian(Index n1, Index n2, Index k, Rng& rng, double stddev = 1.0);

  Index n1() const noexcept { return n1_; }
  Index n2() const noexcept { return n2_; }
  Index k() const noexcept { return k_; }
  Index size() const noexcept { return static_cast<Index>(values_.size()); }
  bool empty() const noexcept { return values_.empty(); }
  bool same_shape(const Tensor3& o) const noexcept {
    return n1_ == o.n1_ && n2_ == o.n2_ && k_ == o.k_;
  }

  double& operator()(Index i, Index j, Index l) { return values_[offset(i, j, l)]; }
  double operator()(Index i, Index j, Index l) const { return values_[offset(i, j, l)]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  SliceMap slice(Index l) { return SliceMap(values_.data() + l * n1_ * n2_, n1_, n2_); }
  ConstSliceMap slice(Index l) const {
    return ConstSliceMap(values_.data() + l * n1_ * n2_, n1_, n2_);
  }
  /// All entries as one column vector (the vec() used by the sensing maps).
  Eigen::Map<const Eigen::VectorXd> vec() const {
    return Eigen::Map<const Eigen::VectorXd>(values_.data(), size());
  }
  Eigen::Map<Eigen::VectorXd> vec() { return Eigen::Map<Eigen::VectorXd>(values_.data(), size()); }

  bool all_finite() const noexcept;

  Tensor3& operator+=(const Tensor3& o);
  Tensor3& operator-=(const Tensor3& o);
  Tensor3& operator*=(double s);

  friend Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
  friend Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
  friend Tensor3 operator*(Tensor3 a, double s) { return a *= s; }
  friend Tensor3 operator*(double s, Tensor3 a) { return a *= s; }

 private:
  Index offset(Index i, Index j, Index l) const noexcept { return i + n1_ * (j + n2_ * l); }

  Index n1_ = 0;
  Index n2_ = 0;
  Index k_ = 0;
  std::vector<double> values_;
};

/// Complex frontal slices after an unnormalized DFT along mode 3.
struct FourierSlices {
  Index n1 = 0;
  Index n2 = 0;
  std::vector<Eigen::MatrixXcd> slices;

  Index k() const noexcept { return static_cast<Index>(slices.size()); }
};

/// Number of Fourier slices a real tensor determines on its own:
/// ceil((k + 1) / 2). The rest are complex conjugates.
constexpr Index independent_slices(Index k) noexcept { return k / 2 + 1; }

/// True for the frequencies whose slice must be real (0, and k/2 for even k).
constexpr bool self_conjugate(Index j, Index k) noexcept { return j == 0 || 2 * j == k; }

FourierSlices fft_mode3(const Tensor3& t);
/// Inverse of fft_mode3. Throws ErrorCode::non_real when the input is not
/// conjugate symmetric to within 1e-10 of its largest entry.
Tensor3 ifft_mode3(const FourierSlices& f);

/// t-product of an n1 x p x k and a p x n2 x k tensor.
Tensor3 tprod(const Tensor3& a, const Tensor3& b);
Tensor3 ttranspose(const Tensor3& t);

double inner(const Tensor3& a, const Tensor3& b);
double frobenius_norm(const Tensor3& t);

/// Tensor columns [begin, begin + count) as an n1 x count x k tensor.
Tensor3 columns(const Tensor3& t, Index begin, Index count);
/// Concatenate along mode 2; zero-width pieces are not representable, so
/// callers pad with Tensor3::zeros.
Tensor3 hcat(const Tensor3& a, const Tensor3& b);

struct TSVD {
  Tensor3 V;  ///< n1 x n1 x k, orthogonal
  Tensor3 S;  ///< n1 x n2 x k, f-diagonal
  Tensor3 W;  ///< n2 x n2 x k, orthogonal
  /// Fourier-domain singular values, one nonincreasing vector per slice.
  std::vector<Eigen::VectorXd> singular_values;
};

TSVD tsvd(const Tensor3& t);

/// V(:, 0:r) * S(0:r, 0:r) * W(:, 0:r)^T.
Tensor3 truncate(const TSVD& d, Index r);

/// Frobenius norm of each diagonal tube S(i, i, :), from Parseval.
Eigen::VectorXd tube_norms(const TSVD& d);

constexpr double kDefaultRankTol = 1e-8;

Index tubal_rank(const Tensor3& t, double rel_tol = kDefaultRankTol);

struct Norms {
  double spectral = 0.0;
  double frobenius = 0.0;
  double tubal_nuclear = 0.0;
};

Norms norms(const Tensor3& t);
/// Largest singular value over all Fourier slices (= ||bcirc(t)||).
double spectral_norm(const Tensor3& t);

struct SpectrumSummary {
  Index tubal_rank = 0;
  std::vector<Eigen::VectorXd> singular_values;
  double sigma_max = 0.0;
  double sigma_min_pos = 0.0;
  double condition_number = 1.0;
};

/// Throws ErrorCode::invalid_argument on the zero tensor.
SpectrumSummary spectrum(const Tensor3& t, double rel_tol = kDefaultRankTol);

/// Smallest singular value of bdiag(fft(t)), i.e. over every slice and
/// every one of the min(n1, n2) values.
double sigma_min(const Tensor3& t);

/// Dense block-circulant matrix (n1 k) x (n2 k). Reference path for tests
/// and tiny problems.
Eigen::MatrixXd bcirc(const Tensor3& t);
/// Stack the frontal slices vertically: (n1 k) x n2.
Eigen::MatrixXd unfold(const Tensor3& t);
Tensor3 fold(const Eigen::MatrixXd& m, Index n1, Index n2, Index k);
/// fold(bcirc(a) * unfold(b)).
Tensor3 tprod_bcirc(const Tensor3& a, const Tensor3& b);

/// ||t^T * t - I||_F <= tol.
bool orthonormal_columns(const Tensor3& t, double tol = 1e-9);

}  // namespace tubal
