#include "doctest.h"

#include "oracles.hpp"
#include "tubal/error.hpp"
#include "tubal/talg.hpp"

using namespace tubal;

TEST_CASE("fft slices match a direct DFT sum") {
  for (Index k : {1, 2, 3, 4, 5, 8}) {
    const Tensor3 t = oracle::random_tensor(3, 4, k, 100 + k);
    const FourierSlices f = fft_mode3(t);
    REQUIRE(f.k() == k);
    for (Index j = 0; j < k; ++j)
      for (Index a = 0; a < 3; ++a)
        for (Index b = 0; b < 4; ++b)
          CHECK(std::abs(f.slices[j](a, b) - oracle::dft_entry(t, a, b, j)) < 1e-12);
    CHECK(oracle::rel_diff(ifft_mode3(f), t) < 1e-14);
  }
}

TEST_CASE("tprod equals circular convolution of slices") {
  for (Index k : {1, 2, 3, 6, 7}) {
    const Tensor3 a = oracle::random_tensor(4, 3, k, 200 + k);
    const Tensor3 b = oracle::random_tensor(3, 5, k, 300 + k);
    CHECK(oracle::rel_diff(tprod(a, b), oracle::circular_tprod(a, b)) < 1e-12);
  }
  CHECK_THROWS_AS(tprod(Tensor3(2, 3, 2), Tensor3(2, 3, 2)), Error);
}

TEST_CASE("bcirc and unfold agree with loop-built references") {
  const Tensor3 t = oracle::random_tensor(3, 2, 4, 7);
  CHECK((bcirc(t) - oracle::bcirc(t)).norm() == 0.0);
  CHECK((unfold(t) - oracle::unfold(t)).norm() == 0.0);
  CHECK(oracle::rel_diff(fold(unfold(t), 3, 2, 4), t) == 0.0);
}

TEST_CASE("transpose reverses slices and reverses products") {
  const Tensor3 a = oracle::random_tensor(3, 4, 5, 11);
  const Tensor3 b = oracle::random_tensor(4, 2, 5, 12);
  CHECK(oracle::rel_diff(ttranspose(a), oracle::transpose(a)) == 0.0);
  CHECK(oracle::rel_diff(ttranspose(tprod(a, b)), tprod(ttranspose(b), ttranspose(a))) < 1e-12);
}

TEST_CASE("identity is neutral") {
  const Tensor3 a = oracle::random_tensor(4, 4, 3, 13);
  const Tensor3 I = Tensor3::identity(4, 3);
  CHECK(oracle::rel_diff(tprod(I, a), a) < 1e-14);
  CHECK(oracle::rel_diff(tprod(a, I), a) < 1e-14);
}

TEST_CASE("t-SVD reconstructs with orthogonal factors") {
  for (auto [n1, n2, k] : {std::tuple{8, 6, 4}, std::tuple{5, 7, 3}, std::tuple{4, 4, 1}}) {
    const Tensor3 t = oracle::random_tensor(n1, n2, k, 400 + n1);
    const TSVD d = tsvd(t);
    CHECK(oracle::rel_diff(tprod(tprod(d.V, d.S), ttranspose(d.W)), t) < 1e-12);
    CHECK(orthonormal_columns(d.V, 1e-12));
    CHECK(orthonormal_columns(d.W, 1e-12));
    // S is f-diagonal in the spatial domain.
    for (Index l = 0; l < k; ++l)
      for (Index i = 0; i < n1; ++i)
        for (Index j = 0; j < n2; ++j)
          if (i != j) CHECK(std::abs(d.S(i, j, l)) < 1e-12);
  }
}

TEST_CASE("truncation error is the tail energy") {
  const Tensor3 t = oracle::random_tensor(8, 6, 4, 17);
  const TSVD d = tsvd(t);
  const double total = oracle::frob(t) * oracle::frob(t);
  for (Index r = 1; r <= 6; ++r) {
    // Parseval: ||.||_F^2 = (1/k) sum over Fourier slices of sigma^2.
    double tail = 0.0;
    for (const auto& s : d.singular_values)
      for (Index i = r; i < s.size(); ++i) tail += s(i) * s(i);
    tail /= 4.0;
    const double err = oracle::frob(t - truncate(d, r));
    CHECK(std::abs(err * err - tail) <= 1e-10 * total);
  }
  CHECK_THROWS_AS(truncate(d, 0), Error);
}

TEST_CASE("tubal rank of a product of thin factors") {
  const Tensor3 a = oracle::random_tensor(7, 2, 3, 21);
  const Tensor3 b = oracle::random_tensor(2, 6, 3, 22);
  CHECK(tubal_rank(tprod(a, b)) == 2);
  CHECK(tubal_rank(Tensor3(5, 5, 3)) == 0);
  CHECK(tubal_rank(Tensor3::identity(5, 3)) == 5);
}

TEST_CASE("norms agree with bcirc and slice sums") {
  const Tensor3 t = oracle::random_tensor(5, 4, 3, 23);
  const Norms n = norms(t);
  const Eigen::MatrixXd B = oracle::bcirc(t);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(B);
  CHECK(n.spectral == doctest::Approx(svd.singularValues()(0)).epsilon(1e-12));
  CHECK(n.frobenius == doctest::Approx(oracle::frob(t)).epsilon(1e-12));
  // Sum of all Fourier-slice singular values, i.e. the nuclear norm of bcirc.
  CHECK(n.tubal_nuclear == doctest::Approx(svd.singularValues().sum()).epsilon(1e-12));
  const Norms id = norms(Tensor3::identity(4, 3));
  CHECK(id.spectral == doctest::Approx(1.0));
  CHECK(id.frobenius == doctest::Approx(2.0));
  CHECK(id.tubal_nuclear == doctest::Approx(12.0));
}

TEST_CASE("k = 1 reduces to matrix algebra") {
  const Tensor3 a = oracle::random_tensor(5, 3, 1, 31);
  const Tensor3 b = oracle::random_tensor(3, 4, 1, 32);
  const Eigen::MatrixXd ab = oracle::slice0(a) * oracle::slice0(b);
  CHECK((oracle::slice0(tprod(a, b)) - ab).norm() < 1e-12 * ab.norm());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(oracle::slice0(a));
  const TSVD d = tsvd(a);
  for (Index i = 0; i < 3; ++i)
    CHECK(d.singular_values[0](i) == doctest::Approx(svd.singularValues()(i)).epsilon(1e-12));
  CHECK(norms(a).spectral == doctest::Approx(svd.singularValues()(0)).epsilon(1e-12));
}

TEST_CASE("spectrum summary of a known tensor") {
  // diag(3, 1, 0) on the first slice: singular values are 3 and 1 in every
  // Fourier slice, so sigma_1 = 3 and kappa = 3.
  Tensor3 t(3, 3, 2);
  t(0, 0, 0) = 3.0;
  t(1, 1, 0) = 1.0;
  const SpectrumSummary s = spectrum(t);
  CHECK(s.tubal_rank == 2);
  CHECK(s.sigma_max == doctest::Approx(3.0));
  CHECK(s.condition_number == doctest::Approx(3.0));
}

TEST_CASE("shape errors are reported") {
  CHECK_THROWS_AS(Tensor3(2, 2, 2, std::vector<double>(7)), Error);
  CHECK_THROWS_AS(Tensor3(2, 2, 2) + Tensor3(2, 3, 2), Error);
  CHECK_THROWS_AS(hcat(Tensor3(2, 2, 2), Tensor3(3, 2, 2)), Error);
}
