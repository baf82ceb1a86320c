// Test-side reference implementations, deliberately written as direct
// summations independent of the library's transform and matmul paths.
#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "fnetlab/tensor.hpp"

namespace oracles {

using fnetlab::Index;
using fnetlab::TensorD;

// Scalar triple loop, no Eigen.
inline TensorD matmul_oracle(const TensorD& a, const TensorD& b) {
  const Index m = a.rows(), k = a.cols(), p = b.cols();
  TensorD out({m, p});
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < p; ++j) {
      double acc = 0.0;
      for (Index t = 0; t < k; ++t) acc += a.at(i, t) * b.at(t, j);
      out.at(i, j) = acc;
    }
  return out;
}

// Direct O(N^2) DFT over std::complex, unnormalized forward convention.
inline std::vector<std::complex<double>> dft_oracle(
    const std::vector<std::complex<double>>& x) {
  const size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (size_t k = 0; k < n; ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (size_t t = 0; t < n; ++t) {
      const double theta = -2.0 * M_PI * double((k * t) % n) / double(n);
      acc += x[t] * std::complex<double>(std::cos(theta), std::sin(theta));
    }
    out[k] = acc;
  }
  return out;
}

// Real part of the full 2D DFT (hidden axis then sequence axis) of a
// real matrix, computed as one direct double sum per output cell.
inline TensorD fourier_mix_2d_oracle(const TensorD& x) {
  const Index n = x.rows(), d = x.cols();
  TensorD out({n, d});
  for (Index a = 0; a < n; ++a) {
    for (Index b = 0; b < d; ++b) {
      double acc = 0.0;
      for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < d; ++c) {
          const double theta = -2.0 * M_PI * (double(a * r) / double(n) +
                                              double(b * c) / double(d));
          acc += x.at(r, c) * std::cos(theta);
        }
      out.at(a, b) = acc;
    }
  }
  return out;
}

// Sylvester construction of the +-1 Hadamard matrix.
inline std::vector<std::vector<int>> hadamard_matrix(Index n) {
  std::vector<std::vector<int>> h(1, std::vector<int>(1, 1));
  while (Index(h.size()) < n) {
    const Index m = Index(h.size());
    std::vector<std::vector<int>> g(size_t(2 * m), std::vector<int>(size_t(2 * m)));
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < m; ++j) {
        g[size_t(i)][size_t(j)] = h[size_t(i)][size_t(j)];
        g[size_t(i)][size_t(j + m)] = h[size_t(i)][size_t(j)];
        g[size_t(i + m)][size_t(j)] = h[size_t(i)][size_t(j)];
        g[size_t(i + m)][size_t(j + m)] = -h[size_t(i)][size_t(j)];
      }
    h = std::move(g);
  }
  return h;
}

// Orthonormal DCT-II straight from the cosine formula.
inline std::vector<double> dct2_oracle(const std::vector<double>& x) {
  const size_t n = x.size();
  std::vector<double> out(n, 0.0);
  for (size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (size_t t = 0; t < n; ++t)
      acc += x[t] * std::cos(M_PI * (2.0 * double(t) + 1.0) * double(k) /
                             (2.0 * double(n)));
    const double alpha = k == 0 ? std::sqrt(1.0 / double(n)) : std::sqrt(2.0 / double(n));
    out[k] = alpha * acc;
  }
  return out;
}

// cas-kernel Hartley transform from the definition.
inline std::vector<double> hartley_oracle(const std::vector<double>& x) {
  const size_t n = x.size();
  std::vector<double> out(n, 0.0);
  for (size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (size_t t = 0; t < n; ++t) {
      const double theta = 2.0 * M_PI * double((k * t) % n) / double(n);
      acc += x[t] * (std::cos(theta) + std::sin(theta));
    }
    out[k] = acc;
  }
  return out;
}

}  // namespace oracles
