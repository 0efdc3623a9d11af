#include "tubal/talg.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include <Eigen/SVD>

#include "tubal/error.hpp"

namespace tubal {

namespace {

using Complex = std::complex<double>;
using Half = std::vector<Eigen::MatrixXcd>;

std::string shape_str(const Tensor3& t) {
  return std::to_string(t.n1()) + "x" + std::to_string(t.n2()) + "x" + std::to_string(t.k());
}

double twiddle_angle(Index j, Index l, Index k) {
  return 2.0 * std::numbers::pi * static_cast<double>((j * l) % k) / static_cast<double>(k);
}

// Slices 0 .. ceil((k+1)/2) - 1 of the mode-3 DFT.
Half forward_half(const Tensor3& t) {
  const Index k = t.k();
  const Index h = independent_slices(k);
  Half out(static_cast<std::size_t>(h));
  Eigen::MatrixXd re(t.n1(), t.n2());
  Eigen::MatrixXd im(t.n1(), t.n2());
  for (Index j = 0; j < h; ++j) {
    re.setZero();
    im.setZero();
    for (Index l = 0; l < k; ++l) {
      if (j == 0) {
        re += t.slice(l);
        continue;
      }
      const double a = twiddle_angle(j, l, k);
      re += std::cos(a) * t.slice(l);
      im -= std::sin(a) * t.slice(l);
    }
    auto& s = out[static_cast<std::size_t>(j)];
    s.resize(t.n1(), t.n2());
    s.real() = re;
    s.imag() = im;
  }
  return out;
}

// Real inverse from the independent half, assuming conjugate symmetry.
Tensor3 inverse_half(const Half& half, Index n1, Index n2, Index k) {
  Tensor3 out(n1, n2, k);
  const Index h = independent_slices(k);
  const double inv_k = 1.0 / static_cast<double>(k);
  for (Index l = 0; l < k; ++l) {
    auto dst = out.slice(l);
    for (Index j = 0; j < h; ++j) {
      const auto& f = half[static_cast<std::size_t>(j)];
      const double w = self_conjugate(j, k) ? inv_k : 2.0 * inv_k;
      if (j == 0) {
        dst += w * f.real();
        continue;
      }
      const double a = twiddle_angle(j, l, k);
      dst += (w * std::cos(a)) * f.real() - (w * std::sin(a)) * f.imag();
    }
  }
  return out;
}

Half mirror(const Half& half, Index k) {
  Half full(half.begin(), half.end());
  full.resize(static_cast<std::size_t>(k));
  for (Index j = independent_slices(k); j < k; ++j)
    full[static_cast<std::size_t>(j)] = half[static_cast<std::size_t>(k - j)].conjugate();
  return full;
}

Eigen::VectorXd slice_singular_values(const Eigen::MatrixXcd& m, bool real_slice) {
  if (real_slice) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m.real());
    return svd.singularValues();
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues();
}

std::vector<Eigen::VectorXd> all_singular_values(const Tensor3& t) {
  const Index k = t.k();
  const Half half = forward_half(t);
  std::vector<Eigen::VectorXd> out(static_cast<std::size_t>(k));
  for (Index j = 0; j < independent_slices(k); ++j)
    out[static_cast<std::size_t>(j)] =
        slice_singular_values(half[static_cast<std::size_t>(j)], self_conjugate(j, k));
  for (Index j = independent_slices(k); j < k; ++j)
    out[static_cast<std::size_t>(j)] = out[static_cast<std::size_t>(k - j)];
  return out;
}

Eigen::VectorXd tube_norms_from(const std::vector<Eigen::VectorXd>& sv) {
  const Index k = static_cast<Index>(sv.size());
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(sv.front().size());
  for (const auto& s : sv) sq += s.cwiseAbs2();
  return (sq / static_cast<double>(k)).cwiseSqrt();
}

Index rank_from(const std::vector<Eigen::VectorXd>& sv, double rel_tol) {
  const Eigen::VectorXd tubes = tube_norms_from(sv);
  const double top = tubes.size() > 0 ? tubes.maxCoeff() : 0.0;
  if (top == 0.0) return 0;
  return static_cast<Index>((tubes.array() > rel_tol * top).count());
}

}  // namespace

// ---------------------------------------------------------------- Tensor3

Tensor3::Tensor3(Index n1, Index n2, Index k)
    : n1_(n1), n2_(n2), k_(k), values_(static_cast<std::size_t>(n1 * n2 * k), 0.0) {
  if (n1 < 1 || n2 < 1 || k < 1)
    raise(ErrorCode::invalid_argument, "tensor dimensions must be positive");
}

Tensor3::Tensor3(Index n1, Index n2, Index k, std::vector<double> values) : Tensor3(n1, n2, k) {
  if (static_cast<Index>(values.size()) != n1 * n2 * k)
    raise(ErrorCode::dimension_mismatch, "value count does not match tensor shape");
  values_ = std::move(values);
}

Tensor3 Tensor3::identity(Index n, Index k) {
  Tensor3 t(n, n, k);
  t.slice(0).setIdentity();
  return t;
}

Tensor3 Tensor3::gaussian(Index n1, Index n2, Index k, Rng& rng, double stddev) {
  Tensor3 t(n1, n2, k);
  for (double& v : t.values_) v = stddev * rng.normal();
  return t;
}

bool Tensor3::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Tensor3& Tensor3::operator+=(const Tensor3& o) {
  if (!same_shape(o)) raise(ErrorCode::dimension_mismatch, "tensor sum shape mismatch");
  vec() += o.vec();
  return *this;
}

Tensor3& Tensor3::operator-=(const Tensor3& o) {
  if (!same_shape(o)) raise(ErrorCode::dimension_mismatch, "tensor difference shape mismatch");
  vec() -= o.vec();
  return *this;
}

Tensor3& Tensor3::operator*=(double s) {
  vec() *= s;
  return *this;
}

// ------------------------------------------------------------- transforms

FourierSlices fft_mode3(const Tensor3& t) {
  return FourierSlices{t.n1(), t.n2(), mirror(forward_half(t), t.k())};
}

Tensor3 ifft_mode3(const FourierSlices& f) {
  const Index k = f.k();
  if (k < 1) raise(ErrorCode::invalid_argument, "no Fourier slices");
  double scale = 0.0;
  for (const auto& s : f.slices) {
    if (s.rows() != f.n1 || s.cols() != f.n2)
      raise(ErrorCode::dimension_mismatch, "Fourier slice shape mismatch");
    if (s.size() > 0) scale = std::max(scale, s.cwiseAbs().maxCoeff());
  }
  const double tol = 1e-10 * scale;
  if (f.slices[0].imag().size() > 0 && f.slices[0].imag().cwiseAbs().maxCoeff() > tol)
    raise(ErrorCode::non_real, "zero-frequency slice is not real");
  for (Index j = 1; j < k; ++j) {
    const auto& a = f.slices[static_cast<std::size_t>(j)];
    const auto& b = f.slices[static_cast<std::size_t>(k - j)];
    if ((a - b.conjugate()).cwiseAbs().maxCoeff() > tol)
      raise(ErrorCode::non_real,
            "Fourier slices " + std::to_string(j) + " and " + std::to_string(k - j) +
                " are not conjugate; input does not come from a real tensor");
  }
  Half half(f.slices.begin(), f.slices.begin() + independent_slices(k));
  return inverse_half(half, f.n1, f.n2, k);
}

// ---------------------------------------------------------------- products

Tensor3 tprod(const Tensor3& a, const Tensor3& b) {
  if (a.n2() != b.n1() || a.k() != b.k())
    raise(ErrorCode::dimension_mismatch,
          "tprod: cannot multiply " + shape_str(a) + " by " + shape_str(b));
  const Index k = a.k();
  if (k == 1) {
    Tensor3 c(a.n1(), b.n2(), 1);
    c.slice(0).noalias() = a.slice(0) * b.slice(0);
    return c;
  }
  const Half fa = forward_half(a);
  const Half fb = forward_half(b);
  Half fc(fa.size());
  for (std::size_t j = 0; j < fa.size(); ++j) fc[j].noalias() = fa[j] * fb[j];
  return inverse_half(fc, a.n1(), b.n2(), k);
}

Tensor3 ttranspose(const Tensor3& t) {
  const Index k = t.k();
  Tensor3 out(t.n2(), t.n1(), k);
  for (Index l = 0; l < k; ++l) out.slice(l) = t.slice(l == 0 ? 0 : k - l).transpose();
  return out;
}

double inner(const Tensor3& a, const Tensor3& b) {
  if (!a.same_shape(b)) raise(ErrorCode::dimension_mismatch, "inner product shape mismatch");
  return a.vec().dot(b.vec());
}

double frobenius_norm(const Tensor3& t) { return t.vec().norm(); }

Tensor3 columns(const Tensor3& t, Index begin, Index count) {
  if (begin < 0 || count < 1 || begin + count > t.n2())
    raise(ErrorCode::invalid_argument, "column range out of bounds");
  Tensor3 out(t.n1(), count, t.k());
  for (Index l = 0; l < t.k(); ++l) out.slice(l) = t.slice(l).middleCols(begin, count);
  return out;
}

Tensor3 hcat(const Tensor3& a, const Tensor3& b) {
  if (a.n1() != b.n1() || a.k() != b.k())
    raise(ErrorCode::dimension_mismatch, "hcat shape mismatch");
  Tensor3 out(a.n1(), a.n2() + b.n2(), a.k());
  for (Index l = 0; l < a.k(); ++l) {
    out.slice(l).leftCols(a.n2()) = a.slice(l);
    out.slice(l).rightCols(b.n2()) = b.slice(l);
  }
  return out;
}

// ------------------------------------------------------------------ t-SVD

TSVD tsvd(const Tensor3& t) {
  const Index k = t.k();
  const Index n1 = t.n1();
  const Index n2 = t.n2();
  const Index p = std::min(n1, n2);
  const Half ft = forward_half(t);
  const Index h = independent_slices(k);
  Half fv(static_cast<std::size_t>(h)), fs(static_cast<std::size_t>(h)),
      fw(static_cast<std::size_t>(h));
  std::vector<Eigen::VectorXd> sv(static_cast<std::size_t>(k));
  const unsigned opts = Eigen::ComputeFullU | Eigen::ComputeFullV;

  for (Index j = 0; j < h; ++j) {
    const auto js = static_cast<std::size_t>(j);
    Eigen::VectorXd s;
    if (self_conjugate(j, k)) {
      // Real slice: a real SVD keeps the factors real after the inverse DFT.
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(ft[js].real(), opts);
      if (svd.info() != Eigen::Success)
        raise(ErrorCode::convergence, "SVD failed on Fourier slice " + std::to_string(j));
      fv[js] = svd.matrixU().cast<Complex>();
      fw[js] = svd.matrixV().cast<Complex>();
      s = svd.singularValues();
    } else {
      Eigen::JacobiSVD<Eigen::MatrixXcd> svd(ft[js], opts);
      if (svd.info() != Eigen::Success)
        raise(ErrorCode::convergence, "SVD failed on Fourier slice " + std::to_string(j));
      fv[js] = svd.matrixU();
      fw[js] = svd.matrixV();
      s = svd.singularValues();
    }
    fs[js] = Eigen::MatrixXcd::Zero(n1, n2);
    for (Index i = 0; i < p; ++i) fs[js](i, i) = s(i);
    sv[js] = std::move(s);
  }
  for (Index j = h; j < k; ++j) sv[static_cast<std::size_t>(j)] = sv[static_cast<std::size_t>(k - j)];

  return TSVD{inverse_half(fv, n1, n1, k), inverse_half(fs, n1, n2, k),
              inverse_half(fw, n2, n2, k), std::move(sv)};
}

Tensor3 truncate(const TSVD& d, Index r) {
  const Index p = std::min(d.S.n1(), d.S.n2());
  if (r < 1 || r > p) raise(ErrorCode::invalid_argument, "truncation rank out of range");
  Tensor3 s(r, r, d.S.k());
  for (Index l = 0; l < d.S.k(); ++l) s.slice(l) = d.S.slice(l).topLeftCorner(r, r);
  return tprod(tprod(columns(d.V, 0, r), s), ttranspose(columns(d.W, 0, r)));
}

Eigen::VectorXd tube_norms(const TSVD& d) { return tube_norms_from(d.singular_values); }

Index tubal_rank(const Tensor3& t, double rel_tol) {
  if (!(rel_tol > 0.0 && rel_tol < 1.0))
    raise(ErrorCode::invalid_argument, "rel_tol must lie in (0, 1)");
  return rank_from(all_singular_values(t), rel_tol);
}

// ------------------------------------------------------------------ norms

Norms norms(const Tensor3& t) {
  const auto sv = all_singular_values(t);
  Norms n;
  n.frobenius = frobenius_norm(t);
  for (const auto& s : sv) {
    if (s.size() == 0) continue;
    n.spectral = std::max(n.spectral, s.maxCoeff());
    n.tubal_nuclear += s.sum();
  }
  return n;
}

double spectral_norm(const Tensor3& t) {
  double out = 0.0;
  for (const auto& s : all_singular_values(t)) out = std::max(out, s.maxCoeff());
  return out;
}

double sigma_min(const Tensor3& t) {
  double out = std::numeric_limits<double>::infinity();
  for (const auto& s : all_singular_values(t)) out = std::min(out, s.minCoeff());
  return out;
}

SpectrumSummary spectrum(const Tensor3& t, double rel_tol) {
  if (!(rel_tol > 0.0 && rel_tol < 1.0))
    raise(ErrorCode::invalid_argument, "rel_tol must lie in (0, 1)");
  SpectrumSummary out;
  out.singular_values = all_singular_values(t);
  for (const auto& s : out.singular_values) out.sigma_max = std::max(out.sigma_max, s.maxCoeff());
  if (out.sigma_max == 0.0) raise(ErrorCode::invalid_argument, "spectrum of the zero tensor");
  out.sigma_min_pos = out.sigma_max;
  for (const auto& s : out.singular_values)
    for (double v : s)
      if (v > rel_tol * out.sigma_max) out.sigma_min_pos = std::min(out.sigma_min_pos, v);
  out.condition_number = out.sigma_max / out.sigma_min_pos;
  out.tubal_rank = rank_from(out.singular_values, rel_tol);
  return out;
}

// ---------------------------------------------------- block-circulant path

Eigen::MatrixXd bcirc(const Tensor3& t) {
  const Index n1 = t.n1(), n2 = t.n2(), k = t.k();
  Eigen::MatrixXd out(n1 * k, n2 * k);
  for (Index a = 0; a < k; ++a)
    for (Index b = 0; b < k; ++b) out.block(a * n1, b * n2, n1, n2) = t.slice((a - b + k) % k);
  return out;
}

Eigen::MatrixXd unfold(const Tensor3& t) {
  Eigen::MatrixXd out(t.n1() * t.k(), t.n2());
  for (Index l = 0; l < t.k(); ++l) out.middleRows(l * t.n1(), t.n1()) = t.slice(l);
  return out;
}

Tensor3 fold(const Eigen::MatrixXd& m, Index n1, Index n2, Index k) {
  if (m.rows() != n1 * k || m.cols() != n2)
    raise(ErrorCode::dimension_mismatch, "fold: matrix shape does not match tensor shape");
  Tensor3 out(n1, n2, k);
  for (Index l = 0; l < k; ++l) out.slice(l) = m.middleRows(l * n1, n1);
  return out;
}

Tensor3 tprod_bcirc(const Tensor3& a, const Tensor3& b) {
  if (a.n2() != b.n1() || a.k() != b.k())
    raise(ErrorCode::dimension_mismatch,
          "tprod: cannot multiply " + shape_str(a) + " by " + shape_str(b));
  return fold(bcirc(a) * unfold(b), a.n1(), b.n2(), a.k());
}

bool orthonormal_columns(const Tensor3& t, double tol) {
  if (t.n2() > t.n1()) return false;
  const Tensor3 gram = tprod(ttranspose(t), t);
  return frobenius_norm(gram - Tensor3::identity(t.n2(), t.k())) <= tol;
}

}  // namespace tubal
