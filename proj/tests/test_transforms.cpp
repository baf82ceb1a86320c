#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <complex>
#include <cstring>

#include "fnetlab/gradcheck.hpp"
#include "fnetlab/mixing.hpp"
#include "fnetlab/transforms.hpp"
#include "oracles.hpp"

using namespace fnetlab;

namespace {

ComplexSequence<double> random_complex(Index n, std::uint64_t seed) {
  Rng rng(seed);
  ComplexSequence<double> x(n);
  for (Index i = 0; i < n; ++i) {
    x.re[size_t(i)] = rng.normal();
    x.im[size_t(i)] = rng.normal();
  }
  return x;
}

double rel_error(const ComplexSequence<double>& got,
                 const ComplexSequence<double>& want) {
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < got.re.size(); ++i) {
    const double dr = got.re[i] - want.re[i];
    const double di = got.im[i] - want.im[i];
    num += dr * dr + di * di;
    den += want.re[i] * want.re[i] + want.im[i] * want.im[i];
  }
  return std::sqrt(num / std::max(den, 1e-300));
}

ComplexSequence<double> from_std(const std::vector<std::complex<double>>& v) {
  ComplexSequence<double> x(Index(v.size()));
  for (size_t i = 0; i < v.size(); ++i) {
    x.re[i] = v[i].real();
    x.im[i] = v[i].imag();
  }
  return x;
}

std::vector<std::complex<double>> to_std(const ComplexSequence<double>& x) {
  std::vector<std::complex<double>> v(x.re.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = {x.re[i], x.im[i]};
  return v;
}

std::vector<double> random_real(Index n, std::uint64_t seed) {
  Rng rng(seed);
  auto x = std::vector<double>(size_t(n));
  for (auto& v : x) v = rng.normal();
  return x;
}

}  // namespace

TEST_CASE("dft_naive impulse, constant, shifted impulse") {
  ComplexSequence<double> impulse(4);
  impulse.re = {1, 0, 0, 0};
  auto y = dft_naive(impulse);
  for (Index k = 0; k < 4; ++k) {
    CHECK(y.re[size_t(k)] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(y.im[size_t(k)] == doctest::Approx(0.0).epsilon(1e-14));
  }

  ComplexSequence<double> ones(4);
  ones.re = {1, 1, 1, 1};
  y = dft_naive(ones);
  CHECK(y.re[0] == doctest::Approx(4.0));
  for (Index k = 1; k < 4; ++k) {
    CHECK(std::abs(y.re[size_t(k)]) < 1e-12);
    CHECK(std::abs(y.im[size_t(k)]) < 1e-12);
  }

  // [0,1,0,0] -> [1, -i, -1, i]
  ComplexSequence<double> shift(4);
  shift.re = {0, 1, 0, 0};
  y = dft_naive(shift);
  const double er[4] = {1, 0, -1, 0};
  const double ei[4] = {0, -1, 0, 1};
  for (Index k = 0; k < 4; ++k) {
    CHECK(y.re[size_t(k)] == doctest::Approx(er[k]).epsilon(1e-14));
    CHECK(y.im[size_t(k)] == doctest::Approx(ei[k]).epsilon(1e-14));
  }
}

TEST_CASE("dft_naive agrees with the std::complex oracle") {
  for (Index n : {1, 2, 3, 5, 8, 17, 64}) {
    auto x = random_complex(n, 100 + std::uint64_t(n));
    auto want = from_std(oracles::dft_oracle(to_std(x)));
    CHECK(rel_error(dft_naive(x), want) < 1e-12);
  }
}

TEST_CASE("fft equals dft_naive and handles N=1") {
  auto one = random_complex(1, 7);
  auto y1 = fft(one);
  CHECK(y1.re[0] == one.re[0]);
  CHECK(y1.im[0] == one.im[0]);

  auto x = random_complex(8, 8);
  CHECK(rel_error(fft(x), dft_naive(x)) < 1e-12);
}

TEST_CASE("fft rejects non-power-of-two lengths") {
  auto x = random_complex(12, 9);
  CHECK_THROWS_AS(fft(x), UnsupportedLengthError);
}

TEST_CASE("fft involution: fft(fft(x))[k] == N x[(-k) mod N]") {
  for (Index n : {2, 8, 64}) {
    auto x = random_complex(n, 200 + std::uint64_t(n));
    auto y = fft(fft(x));
    for (Index k = 0; k < n; ++k) {
      const Index src = (n - k) % n;
      CHECK(y.re[size_t(k)] ==
            doctest::Approx(double(n) * x.re[size_t(src)]).epsilon(1e-10));
      CHECK(y.im[size_t(k)] ==
            doctest::Approx(double(n) * x.im[size_t(src)]).epsilon(1e-10));
    }
  }
}

TEST_CASE("dft_via_matrix matches dft_naive and fft") {
  for (Index n : {1, 2, 3, 7, 16, 33, 64, 100}) {
    auto x = random_complex(n, 300 + std::uint64_t(n));
    auto viamat = dft_via_matrix(x, DFTMatrix<double>::cached(n));
    CHECK(rel_error(viamat, dft_naive(x)) < 1e-10);
  }
  auto x64 = random_complex(64, 301);
  CHECK(rel_error(dft_via_matrix(x64, DFTMatrix<double>::cached(64)), fft(x64)) < 1e-10);
}

TEST_CASE("cached DFT matrix is reused and bit-stable across calls") {
  const auto& a = DFTMatrix<double>::cached(24);
  const auto& b = DFTMatrix<double>::cached(24);
  CHECK(&a == &b);
  auto x = random_complex(24, 55);
  auto y1 = dft_via_matrix(x, a);
  auto y2 = dft_via_matrix(x, b);
  CHECK(std::memcmp(y1.re.data(), y2.re.data(), 24 * sizeof(double)) == 0);
  CHECK(std::memcmp(y1.im.data(), y2.im.data(), 24 * sizeof(double)) == 0);
}

TEST_CASE("DFT matrix is symmetric with unit-modulus entries") {
  const auto& w = DFTMatrix<double>::cached(12);
  for (Index r = 0; r < 12; ++r)
    for (Index k = 0; k < 12; ++k) {
      CHECK(w.re(r, k) == doctest::Approx(w.re(k, r)).epsilon(1e-15));
      CHECK(w.im(r, k) == doctest::Approx(w.im(k, r)).epsilon(1e-15));
      const double mod = w.re(r, k) * w.re(r, k) + w.im(r, k) * w.im(r, k);
      CHECK(mod == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("fourier_mix_2d trivial grids") {
  TensorD ones = TensorD::full({2, 2}, 1.0);
  for (auto m : {FourierMethod::Fft, FourierMethod::Matrix}) {
    TensorD y = fourier_mix_2d(ones, m);
    CHECK(y.at(0, 0) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(std::abs(y.at(0, 1)) < 1e-12);
    CHECK(std::abs(y.at(1, 0)) < 1e-12);
    CHECK(std::abs(y.at(1, 1)) < 1e-12);

    TensorD impulse = TensorD::from({2, 2}, {1, 0, 0, 0});
    TensorD yi = fourier_mix_2d(impulse, m);
    for (Index i = 0; i < 4; ++i) CHECK(yi[i] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("fourier_mix_2d: axis order commutes and matches the 2D oracle") {
  Rng rng(404);
  TensorD x = TensorD::randn({8, 16}, rng);
  TensorD want = oracles::fourier_mix_2d_oracle(x);

  TensorD got_fft = fourier_mix_2d(x, FourierMethod::Fft);
  TensorD got_mat = fourier_mix_2d(x, FourierMethod::Matrix);
  CHECK((got_fft.array() - want.array()).abs().maxCoeff() < 1e-9);
  CHECK((got_mat.array() - want.array()).abs().maxCoeff() < 1e-9);
  CHECK((got_fft.array() - got_mat.array()).abs().maxCoeff() < 1e-10);

  // seq-then-hidden by hand: transform columns first, then rows.
  ComplexGrid<double> g;
  g.re = x.mat();
  g.im = MatrixRM<double>::Zero(8, 16);
  MatrixRM<double> ret = g.re.transpose(), imt = g.im.transpose();
  detail::dft_rows_inplace(ret, imt, FourierMethod::Fft);  // seq axis first
  g.re = ret.transpose();
  g.im = imt.transpose();
  detail::dft_rows_inplace(g.re, g.im, FourierMethod::Fft);  // hidden axis
  CHECK((g.re.array() - want.mat().array()).abs().maxCoeff() < 1e-10);
}

TEST_CASE("fourier_mix_2d fft rejects non-power-of-two axes") {
  TensorD x({4, 6});
  CHECK_THROWS_AS(fourier_mix_2d(x, FourierMethod::Fft), UnsupportedLengthError);
  CHECK_NOTHROW(fourier_mix_2d(x, FourierMethod::Matrix));
}

TEST_CASE("fourier_mix_1d_seq transforms columns only") {
  TensorD col = TensorD::full({4, 1}, 1.0);
  TensorD y = fourier_mix_1d_seq(col);
  CHECK(y[0] == doctest::Approx(4.0));
  for (Index i = 1; i < 4; ++i) CHECK(std::abs(y[i]) < 1e-12);

  Rng rng(405);
  TensorD x = TensorD::randn({8, 4}, rng);
  TensorD got = fourier_mix_1d_seq(x);
  for (Index c = 0; c < 4; ++c) {
    ComplexSequence<double> xc(8);
    for (Index r = 0; r < 8; ++r) xc.re[size_t(r)] = x.at(r, c);
    auto want = dft_naive(xc);
    for (Index r = 0; r < 8; ++r)
      CHECK(got.at(r, c) == doctest::Approx(want.re[size_t(r)]).epsilon(1e-10));
  }

  // no hidden mixing: permuting columns commutes with the transform
  TensorD xp({8, 4});
  const Index perm[4] = {2, 0, 3, 1};
  for (Index r = 0; r < 8; ++r)
    for (Index c = 0; c < 4; ++c) xp.at(r, c) = x.at(r, perm[c]);
  TensorD got_p = fourier_mix_1d_seq(xp);
  for (Index r = 0; r < 8; ++r)
    for (Index c = 0; c < 4; ++c)
      CHECK(got_p.at(r, c) == doctest::Approx(got.at(r, perm[c])).epsilon(1e-12));
}

TEST_CASE("hadamard impulse, constant, matrix oracle, involution") {
  CHECK(hadamard<double>({1, 0, 0, 0}) == std::vector<double>{1, 1, 1, 1});
  CHECK(hadamard<double>({1, 1, 1, 1}) == std::vector<double>{4, 0, 0, 0});

  Rng rng(501);
  std::vector<double> x(16);
  for (auto& v : x) v = double(Index(rng.below(21)) - 10);  // integers
  auto got = hadamard(x);
  auto h = oracles::hadamard_matrix(16);
  for (Index k = 0; k < 16; ++k) {
    double acc = 0.0;
    for (Index t = 0; t < 16; ++t) acc += double(h[size_t(k)][size_t(t)]) * x[size_t(t)];
    CHECK(got[size_t(k)] == acc);  // exact in integer arithmetic
  }

  auto twice = hadamard(hadamard(random_real(16, 502)));
  auto orig = random_real(16, 502);
  for (Index i = 0; i < 16; ++i)
    CHECK(twice[size_t(i)] == doctest::Approx(16.0 * orig[size_t(i)]).epsilon(1e-12));

  std::vector<double> bad(12, 1.0);
  CHECK_THROWS_AS(hadamard(bad), UnsupportedLengthError);
}

TEST_CASE("hartley values, definition, involution") {
  CHECK(hartley<double>({1, 0, 0, 0}) == std::vector<double>{1, 1, 1, 1});

  // [0,1,0,0]: F = [1,-i,-1,i], Re - Im = [1,1,-1,-1]
  auto y = hartley<double>({0, 1, 0, 0});
  const double want[4] = {1, 1, -1, -1};
  for (Index i = 0; i < 4; ++i)
    CHECK(y[size_t(i)] == doctest::Approx(want[i]).epsilon(1e-12));

  for (Index n : {5, 8, 12}) {
    auto x = random_real(n, 600 + std::uint64_t(n));
    auto got = hartley(x);
    auto want_o = oracles::hartley_oracle(x);
    for (Index i = 0; i < n; ++i)
      CHECK(got[size_t(i)] == doctest::Approx(want_o[size_t(i)]).epsilon(1e-10));
  }

  auto x8 = random_real(8, 601);
  auto twice = hartley(hartley(x8));
  for (Index i = 0; i < 8; ++i)
    CHECK(twice[size_t(i)] == doctest::Approx(8.0 * x8[size_t(i)]).epsilon(1e-10));
}

TEST_CASE("dct2 is the orthonormal DCT-II") {
  std::vector<double> c(9, 3.25);
  auto y = dct2(c);
  CHECK(y[0] == doctest::Approx(3.25 * 3.0).epsilon(1e-12));  // c * sqrt(N)
  for (Index i = 1; i < 9; ++i) CHECK(std::abs(y[size_t(i)]) < 1e-12);

  auto x = random_real(8, 700);
  auto got = dct2(x);
  auto want = oracles::dct2_oracle(x);
  for (Index i = 0; i < 8; ++i)
    CHECK(got[size_t(i)] == doctest::Approx(want[size_t(i)]).epsilon(1e-10));

  auto back = dct2_inverse(got);
  for (Index i = 0; i < 8; ++i)
    CHECK(back[size_t(i)] == doctest::Approx(x[size_t(i)]).epsilon(1e-10));

  const auto& m = dct2_matrix<double>(8);
  MatrixRM<double> eye = m * m.transpose();
  CHECK((eye - MatrixRM<double>::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("linearity of every transform") {
  const double a = 1.7, b = -0.6;
  auto lincheck = [&](auto apply, Index n, std::uint64_t seed) {
    auto x = random_real(n, seed), y = random_real(n, seed + 1);
    auto axby = std::vector<double>(size_t(n));
    for (Index i = 0; i < n; ++i)
      axby[size_t(i)] = a * x[size_t(i)] + b * y[size_t(i)];
    auto lhs = apply(axby);
    auto tx = apply(x), ty = apply(y);
    for (Index i = 0; i < n; ++i)
      CHECK(lhs[size_t(i)] ==
            doctest::Approx(a * tx[size_t(i)] + b * ty[size_t(i)]).epsilon(1e-9));
  };
  lincheck([](const std::vector<double>& v) { return hadamard(v); }, 16, 800);
  lincheck([](const std::vector<double>& v) { return hartley(v); }, 12, 810);
  lincheck([](const std::vector<double>& v) { return dct2(v); }, 10, 820);
  lincheck(
      [](const std::vector<double>& v) {
        auto c = ComplexSequence<double>::from_real(std::span<const double>(v));
        return fft(c).re;
      },
      16, 830);
}

TEST_CASE("Parseval identity for the unnormalized DFT") {
  for (Index n : {8, 64, 100}) {
    auto x = random_complex(n, 900 + std::uint64_t(n));
    auto y = is_pow2(n) ? fft(x) : dft_via_matrix(x, DFTMatrix<double>::cached(n));
    double ex = 0.0, ey = 0.0;
    for (Index i = 0; i < n; ++i) {
      ex += x.re[size_t(i)] * x.re[size_t(i)] + x.im[size_t(i)] * x.im[size_t(i)];
      ey += y.re[size_t(i)] * y.re[size_t(i)] + y.im[size_t(i)] * y.im[size_t(i)];
    }
    CHECK(ey == doctest::Approx(double(n) * ex).epsilon(1e-8));
  }
}

TEST_CASE("conjugate symmetry for real input") {
  for (Index n : {8, 33}) {
    auto xr = random_real(n, 1000 + std::uint64_t(n));
    auto x = ComplexSequence<double>::from_real(std::span<const double>(xr));
    auto y = is_pow2(n) ? fft(x) : dft_via_matrix(x, DFTMatrix<double>::cached(n));
    for (Index k = 1; k < n; ++k) {
      CHECK(y.re[size_t(n - k)] == doctest::Approx(y.re[size_t(k)]).epsilon(1e-10));
      CHECK(y.im[size_t(n - k)] == doctest::Approx(-y.im[size_t(k)]).epsilon(1e-10));
    }
  }
}

TEST_CASE("2D mixes are self-adjoint (or exactly adjoint-paired)") {
  Rng rng(1100);
  TensorD x = TensorD::randn({8, 16}, rng);
  TensorD g = TensorD::randn({8, 16}, rng);
  auto inner = [](const TensorD& u, const TensorD& v) {
    return (u.array() * v.array()).sum();
  };
  for (auto m : {FourierMethod::Fft, FourierMethod::Matrix}) {
    CHECK(inner(fourier_mix_2d(x, m), g) ==
          doctest::Approx(inner(x, fourier_mix_2d(g, m))).epsilon(1e-9));
  }
  CHECK(inner(fourier_mix_1d_seq(x), g) ==
        doctest::Approx(inner(x, fourier_mix_1d_seq(g))).epsilon(1e-9));
  CHECK(inner(hadamard_mix_2d(x), g) ==
        doctest::Approx(inner(x, hadamard_mix_2d(g))).epsilon(1e-9));
  CHECK(inner(hartley_mix_2d(x), g) ==
        doctest::Approx(inner(x, hartley_mix_2d(g))).epsilon(1e-9));
  CHECK(inner(dct2_mix_2d(x, false), g) ==
        doctest::Approx(inner(x, dct2_mix_2d(g, true))).epsilon(1e-9));
}

TEST_CASE("mixing tape ops pass finite-difference checks") {
  auto check = [](const char* name, auto build) {
    TensorD x = [] {
      Rng rng(1200);
      return TensorD::randn({8, 4}, rng);  // batch 2 of 4x4 blocks
    }();
    CAPTURE(name);
    auto res = grad_check(x, build, 1e-5);
    CHECK_MESSAGE(res.max_rel_err < 1e-4, name, " rel err ", res.max_rel_err);
  };
  check("fourier_fft", [](Tape<double>& t, Var v) {
    Var y = ops::fourier_mix(t, v, 2, FourierMethod::Fft);
    return ops::sum(t, ops::mul(t, y, y));
  });
  check("fourier_matrix", [](Tape<double>& t, Var v) {
    Var y = ops::fourier_mix(t, v, 2, FourierMethod::Matrix);
    return ops::sum(t, ops::mul(t, y, y));
  });
  check("fourier_seq_only", [](Tape<double>& t, Var v) {
    Var y = ops::fourier_seq_mix(t, v, 2);
    return ops::sum(t, ops::mul(t, y, y));
  });
  check("hadamard", [](Tape<double>& t, Var v) {
    Var y = ops::hadamard_mix(t, v, 2);
    return ops::sum(t, ops::mul(t, y, y));
  });
  check("hartley", [](Tape<double>& t, Var v) {
    Var y = ops::hartley_mix(t, v, 2);
    return ops::sum(t, ops::mul(t, y, y));
  });
  check("dct", [](Tape<double>& t, Var v) {
    Var y = ops::dct_mix(t, v, 2);
    return ops::sum(t, ops::mul(t, y, y));
  });
}

TEST_CASE("parallel row transforms are bit-identical to sequential") {
  Rng rng(1300);
  TensorD x = TensorD::randn({64, 32}, rng);
  set_row_transform_threads(1);
  TensorD seq = fourier_mix_2d(x, FourierMethod::Fft);
  set_row_transform_threads(3);
  TensorD par = fourier_mix_2d(x, FourierMethod::Fft);
  set_row_transform_threads(1);
  CHECK(std::memcmp(seq.data(), par.data(), sizeof(double) * size_t(seq.size())) == 0);
}

TEST_CASE("float instantiation stays close to double") {
  Rng rng(1400);
  TensorD xd = TensorD::randn({16, 8}, rng);
  TensorF xf({16, 8});
  for (Index i = 0; i < xd.size(); ++i) xf[i] = float(xd[i]);
  TensorD yd = fourier_mix_2d(xd, FourierMethod::Fft);
  TensorF yf = fourier_mix_2d(xf, FourierMethod::Fft);
  for (Index i = 0; i < yd.size(); ++i)
    CHECK(double(yf[i]) == doctest::Approx(yd[i]).epsilon(1e-4));
}
