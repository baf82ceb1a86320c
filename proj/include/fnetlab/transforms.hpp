#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

#include "fnetlab/tensor.hpp"

namespace fnetlab {

inline constexpr double kTwoPi = 6.28318530717958647692528676656;

// ---------------------------------------------------------------------------
// Complex containers (split planes). double is the reference precision;
// float instantiations serve the benchmark speed mode.
// ---------------------------------------------------------------------------

template <typename S>
struct ComplexSequence {
  AlignedVec<S> re, im;

  ComplexSequence() = default;
  explicit ComplexSequence(Index n) : re(size_t(n), S(0)), im(size_t(n), S(0)) {
    require(n >= 1, "ComplexSequence: length must be >= 1");
  }

  static ComplexSequence from_real(std::span<const S> r) {
    ComplexSequence x(Index(r.size()));
    std::copy(r.begin(), r.end(), x.re.begin());
    return x;
  }

  Index size() const {
    require(re.size() == im.size(), "ComplexSequence: plane sizes disagree");
    return Index(re.size());
  }
};

// Complex-valued 2D signal (sequence positions x hidden features); the
// intermediate of the 2D mixing before real-part extraction.
template <typename S>
struct ComplexGrid {
  MatrixRM<S> re, im;

  Index rows() const { return re.rows(); }
  Index cols() const { return re.cols(); }
};

// ---------------------------------------------------------------------------
// Naive DFT: the ground-truth oracle every other transform is tested
// against. Unnormalized forward convention X_k = sum_n x_n e^{-2pi i nk/N}.
// Twiddle angles are reduced mod N in exact integer arithmetic so large
// n*k products do not lose precision.
// ---------------------------------------------------------------------------

template <typename S>
ComplexSequence<S> dft_naive(const ComplexSequence<S>& x) {
  const Index n = x.size();
  ComplexSequence<S> out(n);
  for (Index k = 0; k < n; ++k) {
    double sr = 0.0, si = 0.0;
    for (Index t = 0; t < n; ++t) {
      const Index idx = (k * t) % n;
      const double theta = -kTwoPi * double(idx) / double(n);
      const double c = std::cos(theta), s = std::sin(theta);
      const double xr = double(x.re[size_t(t)]), xi = double(x.im[size_t(t)]);
      sr += xr * c - xi * s;
      si += xr * s + xi * c;
    }
    out.re[size_t(k)] = S(sr);
    out.im[size_t(k)] = S(si);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Radix-2 iterative FFT (decimation in time, bit-reversal permutation,
// cached twiddle tables). Power-of-two lengths only; other lengths are
// served by the cached DFT matrix below.
// ---------------------------------------------------------------------------

struct TwiddleTable {
  // w[k] = e^{-2pi i k / n} for k < n/2.
  std::vector<double> cosv, sinv;
  std::vector<Index> bitrev;
};

inline const TwiddleTable& twiddle_table(Index n) {
  static std::map<Index, std::unique_ptr<TwiddleTable>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return *it->second;
  require(is_pow2(n), "twiddle_table: power-of-two length required");
  auto t = std::make_unique<TwiddleTable>();
  t->cosv.resize(size_t(n / 2));
  t->sinv.resize(size_t(n / 2));
  for (Index k = 0; k < n / 2; ++k) {
    const double theta = -kTwoPi * double(k) / double(n);
    t->cosv[size_t(k)] = std::cos(theta);
    t->sinv[size_t(k)] = std::sin(theta);
  }
  t->bitrev.resize(size_t(n));
  const int bits = log2_exact(n);
  for (Index i = 0; i < n; ++i) {
    Index r = 0;
    for (int b = 0; b < bits; ++b)
      if (i & (Index(1) << b)) r |= Index(1) << (bits - 1 - b);
    t->bitrev[size_t(i)] = r;
  }
  return *(cache[n] = std::move(t));
}

template <typename S>
void fft_inplace(S* re, S* im, Index n) {
  if (n == 1) return;
  if (!is_pow2(n))
    throw UnsupportedLengthError(
        "fft: length " + std::to_string(n) +
        " is not a power of two; use the cached DFT matrix path");
  const TwiddleTable& tw = twiddle_table(n);
  for (Index i = 0; i < n; ++i) {
    const Index j = tw.bitrev[size_t(i)];
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (Index len = 2; len <= n; len <<= 1) {
    const Index half = len >> 1;
    const Index step = n / len;
    for (Index base = 0; base < n; base += len) {
      for (Index j = 0; j < half; ++j) {
        const S wc = S(tw.cosv[size_t(j * step)]);
        const S ws = S(tw.sinv[size_t(j * step)]);
        const Index a = base + j, b = base + j + half;
        const S vr = re[b] * wc - im[b] * ws;
        const S vi = re[b] * ws + im[b] * wc;
        re[b] = re[a] - vr;
        im[b] = im[a] - vi;
        re[a] += vr;
        im[a] += vi;
      }
    }
  }
}

template <typename S>
ComplexSequence<S> fft(const ComplexSequence<S>& x) {
  ComplexSequence<S> out = x;
  fft_inplace(out.re.data(), out.im.data(), out.size());
  return out;
}

// ---------------------------------------------------------------------------
// Cached DFT matrix (Vandermonde matrix of the N roots of unity,
// unnormalized: unit-modulus symmetric entries W[n][k] = e^{-2pi i nk/N}).
// ---------------------------------------------------------------------------

template <typename S>
struct DFTMatrix {
  Index size = 0;
  MatrixRM<S> re, im;

  static DFTMatrix build(Index n) {
    require(n >= 1, "DFTMatrix: size must be >= 1");
    DFTMatrix w;
    w.size = n;
    w.re.resize(n, n);
    w.im.resize(n, n);
    for (Index r = 0; r < n; ++r) {
      for (Index k = 0; k < n; ++k) {
        const Index idx = (r * k) % n;
        const double theta = -kTwoPi * double(idx) / double(n);
        w.re(r, k) = S(std::cos(theta));
        w.im(r, k) = S(std::sin(theta));
      }
    }
    return w;
  }

  static const DFTMatrix& cached(Index n) {
    static std::map<Index, std::unique_ptr<DFTMatrix>> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return *it->second;
    return *(cache[n] = std::make_unique<DFTMatrix>(build(n)));
  }
};

template <typename S>
ComplexSequence<S> dft_via_matrix(const ComplexSequence<S>& x,
                                  const DFTMatrix<S>& w) {
  const Index n = x.size();
  require_dims(n == w.size, "dft_via_matrix: size mismatch");
  ComplexSequence<S> out(n);
  Eigen::Map<const VectorX<S>> xr(x.re.data(), n), xi(x.im.data(), n);
  Eigen::Map<VectorX<S>> yr(out.re.data(), n), yi(out.im.data(), n);
  yr.noalias() = w.re * xr;
  yr.noalias() -= w.im * xi;
  yi.noalias() = w.re * xi;
  yi.noalias() += w.im * xr;
  return out;
}

// ---------------------------------------------------------------------------
// Row-parallel helper for the 1D-transform-per-row loops. Chunks are
// contiguous and disjoint, so results are bit-identical to sequential
// execution regardless of the worker count.
// ---------------------------------------------------------------------------

inline std::atomic<int>& row_transform_threads_flag() {
  static std::atomic<int> v{1};
  return v;
}
inline void set_row_transform_threads(int n) {
  row_transform_threads_flag().store(n < 1 ? 1 : n);
}
inline int row_transform_threads() { return row_transform_threads_flag().load(); }

inline void parallel_rows(Index nrows, int threads,
                          const std::function<void(Index, Index)>& body) {
  if (threads <= 1 || nrows < 2) {
    body(0, nrows);
    return;
  }
  const int workers = int(std::min<Index>(threads, nrows));
  std::vector<std::thread> pool;
  pool.reserve(size_t(workers));
  const Index chunk = (nrows + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const Index lo = Index(w) * chunk;
    const Index hi = std::min(nrows, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// 2D Fourier mixing: 1D DFT along the hidden axis of every row, then
// along the sequence axis of every column, complex throughout; the real
// plane is extracted exactly once, at the end. The two passes commute.
// ---------------------------------------------------------------------------

enum class FourierMethod { Fft, Matrix };

namespace detail {

// One DFT pass along rows of the given planes, in place.
template <typename S>
void dft_rows_inplace(MatrixRM<S>& re, MatrixRM<S>& im, FourierMethod method) {
  const Index rows = re.rows(), cols = re.cols();
  if (cols == 1) return;
  if (method == FourierMethod::Fft) {
    if (!is_pow2(cols))
      throw UnsupportedLengthError(
          "fourier mix: axis length " + std::to_string(cols) +
          " is not a power of two; use the matrix method");
    parallel_rows(rows, row_transform_threads(), [&](Index lo, Index hi) {
      for (Index r = lo; r < hi; ++r)
        fft_inplace(re.data() + r * cols, im.data() + r * cols, cols);
    });
  } else {
    const DFTMatrix<S>& w = DFTMatrix<S>::cached(cols);
    // Row-wise transform of X is X * W (W symmetric).
    MatrixRM<S> nre = re * w.re;
    nre.noalias() -= im * w.im;
    MatrixRM<S> nim = re * w.im;
    nim.noalias() += im * w.re;
    re = std::move(nre);
    im = std::move(nim);
  }
}

}  // namespace detail

// Full complex 2D DFT of a real (n x d_h) input.
template <typename S>
ComplexGrid<S> dft2d(const Tensor<S>& x, FourierMethod method) {
  require_dims(x.rank() == 2, "dft2d: rank-2 input required");
  ComplexGrid<S> g;
  g.re = x.mat();
  g.im = MatrixRM<S>::Zero(x.rows(), x.cols());
  detail::dft_rows_inplace(g.re, g.im, method);  // hidden axis
  MatrixRM<S> ret = g.re.transpose();
  MatrixRM<S> imt = g.im.transpose();
  detail::dft_rows_inplace(ret, imt, method);  // sequence axis
  g.re = ret.transpose();
  g.im = imt.transpose();
  return g;
}

template <typename S>
Tensor<S> fourier_mix_2d(const Tensor<S>& x, FourierMethod method) {
  ComplexGrid<S> g = dft2d(x, method);
  Tensor<S> out(x.dims());
  out.mat() = g.re;
  return out;
}

// Batched form over stacked (batch * n, d) examples. The hidden-axis
// pass runs over the whole stack at once; the sequence-axis pass works
// per example through a reused transpose buffer, so large batches do
// not churn allocations.
template <typename S>
Tensor<S> fourier_mix_2d_batched(const Tensor<S>& x, Index batch,
                                 FourierMethod method) {
  require_dims(x.rank() == 2 && batch >= 1 && x.rows() % batch == 0,
               "fourier_mix_2d_batched: rows not divisible by batch");
  const Index n = x.rows() / batch;
  const Index d = x.cols();
  MatrixRM<S> re = x.mat();
  MatrixRM<S> im = MatrixRM<S>::Zero(batch * n, d);
  detail::dft_rows_inplace(re, im, method);  // hidden axis, all examples
  Tensor<S> out(x.dims());
  MatrixRM<S> ret(d, n), imt(d, n);
  for (Index e = 0; e < batch; ++e) {
    ret = re.middleRows(e * n, n).transpose();
    imt = im.middleRows(e * n, n).transpose();
    detail::dft_rows_inplace(ret, imt, method);  // sequence axis
    out.mat().middleRows(e * n, n) = ret.transpose();
  }
  return out;
}

// Sequence-axis-only variant (no hidden mixing).
template <typename S>
Tensor<S> fourier_mix_1d_seq(const Tensor<S>& x,
                             FourierMethod method = FourierMethod::Fft) {
  require_dims(x.rank() == 2, "fourier_mix_1d_seq: rank-2 input required");
  MatrixRM<S> ret = x.mat().transpose();
  MatrixRM<S> imt = MatrixRM<S>::Zero(ret.rows(), ret.cols());
  detail::dft_rows_inplace(ret, imt, method);
  Tensor<S> out(x.dims());
  out.mat() = ret.transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Walsh-Hadamard transform: the DFT analog over the roots of unity
// {+1, -1}; additions only, unnormalized (H(H(x)) = N x).
// ---------------------------------------------------------------------------

template <typename S>
void wht_inplace(S* a, Index n) {
  if (n == 1) return;
  if (!is_pow2(n))
    throw UnsupportedLengthError("hadamard: power-of-two length required, got " +
                                 std::to_string(n));
  for (Index len = 1; len < n; len <<= 1) {
    for (Index base = 0; base < n; base += 2 * len) {
      for (Index j = base; j < base + len; ++j) {
        const S u = a[j], v = a[j + len];
        a[j] = u + v;
        a[j + len] = u - v;
      }
    }
  }
}

template <typename S>
std::vector<S> hadamard(std::vector<S> x) {
  wht_inplace(x.data(), Index(x.size()));
  return x;
}

// ---------------------------------------------------------------------------
// Hartley transform: H = Re(F) - Im(F); real-to-real, H(H(x)) = N x.
// Power-of-two lengths use the FFT, anything else the cached matrix.
// ---------------------------------------------------------------------------

template <typename S>
std::vector<S> hartley(const std::vector<S>& x) {
  const Index n = Index(x.size());
  require(n >= 1, "hartley: length must be >= 1");
  ComplexSequence<S> c = ComplexSequence<S>::from_real(std::span<const S>(x));
  ComplexSequence<S> f = is_pow2(n)
                             ? fft(c)
                             : dft_via_matrix(c, DFTMatrix<S>::cached(n));
  auto out = std::vector<S>(size_t(n));
  for (Index k = 0; k < n; ++k)
    out[size_t(k)] = f.re[size_t(k)] - f.im[size_t(k)];
  return out;
}

// ---------------------------------------------------------------------------
// Orthonormal DCT-II via a cached cosine matrix; C * C^T = I, so the
// transpose is the exact inverse.
// ---------------------------------------------------------------------------

template <typename S>
const MatrixRM<S>& dct2_matrix(Index n) {
  static std::map<Index, std::unique_ptr<MatrixRM<S>>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return *it->second;
  require(n >= 1, "dct2: length must be >= 1");
  auto m = std::make_unique<MatrixRM<S>>(n, n);
  const double a0 = std::sqrt(1.0 / double(n));
  const double ak = std::sqrt(2.0 / double(n));
  for (Index k = 0; k < n; ++k) {
    for (Index t = 0; t < n; ++t) {
      const double theta = M_PI * (2.0 * double(t) + 1.0) * double(k) / (2.0 * double(n));
      (*m)(k, t) = S((k == 0 ? a0 : ak) * std::cos(theta));
    }
  }
  return *(cache[n] = std::move(m));
}

template <typename S>
std::vector<S> dct2(const std::vector<S>& x) {
  const Index n = Index(x.size());
  const MatrixRM<S>& c = dct2_matrix<S>(n);
  auto out = std::vector<S>(size_t(n));
  Eigen::Map<VectorX<S>>(out.data(), n).noalias() =
      c * Eigen::Map<const VectorX<S>>(x.data(), n);
  return out;
}

// C^T x: the inverse of the orthonormal DCT-II.
template <typename S>
std::vector<S> dct2_inverse(const std::vector<S>& x) {
  const Index n = Index(x.size());
  const MatrixRM<S>& c = dct2_matrix<S>(n);
  auto out = std::vector<S>(size_t(n));
  Eigen::Map<VectorX<S>>(out.data(), n).noalias() =
      c.transpose() * Eigen::Map<const VectorX<S>>(x.data(), n);
  return out;
}

// ---------------------------------------------------------------------------
// Separable 2D versions of the alternative transforms, used as mixing
// sublayers: the 1D transform runs along the hidden axis of every row,
// then along the sequence axis of every column.
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> hadamard_mix_2d(const Tensor<S>& x) {
  require_dims(x.rank() == 2, "hadamard_mix_2d: rank-2 input required");
  Tensor<S> out = x;
  const Index rows = out.rows(), cols = out.cols();
  for (Index r = 0; r < rows; ++r) wht_inplace(out.data() + r * cols, cols);
  MatrixRM<S> t = out.mat().transpose();
  for (Index r = 0; r < cols; ++r) wht_inplace(t.data() + r * rows, rows);
  out.mat() = t.transpose();
  return out;
}

template <typename S>
Tensor<S> hartley_mix_2d(const Tensor<S>& x) {
  require_dims(x.rank() == 2, "hartley_mix_2d: rank-2 input required");
  const Index rows = x.rows(), cols = x.cols();
  Tensor<S> out = x;
  for (Index r = 0; r < rows; ++r) {
    std::vector<S> row(out.data() + r * cols, out.data() + (r + 1) * cols);
    row = hartley(row);
    std::copy(row.begin(), row.end(), out.data() + r * cols);
  }
  MatrixRM<S> t = out.mat().transpose();
  for (Index r = 0; r < cols; ++r) {
    std::vector<S> row(t.data() + r * rows, t.data() + (r + 1) * rows);
    row = hartley(row);
    std::copy(row.begin(), row.end(), t.data() + r * rows);
  }
  out.mat() = t.transpose();
  return out;
}

// y = C_n x C_d^T (forward) or C_n^T x C_d (adjoint, which is also the
// inverse because the matrices are orthonormal).
template <typename S>
Tensor<S> dct2_mix_2d(const Tensor<S>& x, bool adjoint = false) {
  require_dims(x.rank() == 2, "dct2_mix_2d: rank-2 input required");
  const MatrixRM<S>& cn = dct2_matrix<S>(x.rows());
  const MatrixRM<S>& cd = dct2_matrix<S>(x.cols());
  Tensor<S> out(x.dims());
  if (!adjoint)
    out.mat().noalias() = cn * x.mat() * cd.transpose();
  else
    out.mat().noalias() = cn.transpose() * x.mat() * cd;
  return out;
}

}  // namespace fnetlab
