#pragma once

#include "fnetlab/ops.hpp"
#include "fnetlab/transforms.hpp"

namespace fnetlab::ops {

namespace detail {

// Activations are stacked (batch * n, d); apply a (n x d) -> (n x d)
// map to every example slice.
template <typename S, typename F>
Tensor<S> map_example_blocks(const Tensor<S>& x, Index batch, F f) {
  require_dims(batch >= 1 && x.rows() % batch == 0,
               "mixing: rows not divisible by batch");
  const Index n = x.rows() / batch;
  const Index d = x.cols();
  Tensor<S> out(x.dims());
  Tensor<S> blk({n, d});
  for (Index e = 0; e < batch; ++e) {
    blk.mat() = x.mat().middleRows(e * n, n);
    Tensor<S> y = f(blk);
    out.mat().middleRows(e * n, n) = y.mat();
  }
  return out;
}

}  // namespace detail

// 2D Fourier mixing sublayer: y = Re(F_seq(F_h(x))) per example. The
// map is linear and self-adjoint in the real inner product (the DFT
// matrix is symmetric), so the backward pass is the forward map applied
// to the upstream gradient.
template <typename S>
Var fourier_mix(Tape<S>& t, Var x, Index batch, FourierMethod method) {
  Tensor<S> out = fourier_mix_2d_batched(t.value(x), batch, method);
  return t.emit(std::move(out), {x},
                [batch, method](typename Tape<S>::BwdCtx& c) {
                  Tensor<S> gx = fourier_mix_2d_batched(c.g(), batch, method);
                  c.gin(0).array() += gx.array();
                },
                "fourier_mix");
}

// Sequence-axis-only DFT (no hidden mixing); also self-adjoint.
template <typename S>
Var fourier_seq_mix(Tape<S>& t, Var x, Index batch,
                    FourierMethod method = FourierMethod::Fft) {
  Tensor<S> out = detail::map_example_blocks(
      t.value(x), batch,
      [&](const Tensor<S>& b) { return fourier_mix_1d_seq(b, method); });
  return t.emit(std::move(out), {x},
                [batch, method](typename Tape<S>::BwdCtx& c) {
                  Tensor<S> gx = detail::map_example_blocks(
                      c.g(), batch, [&](const Tensor<S>& b) {
                        return fourier_mix_1d_seq(b, method);
                      });
                  c.gin(0).array() += gx.array();
                },
                "fourier_seq_mix");
}

// Separable 2D Walsh-Hadamard mixing; H is symmetric, self-adjoint.
template <typename S>
Var hadamard_mix(Tape<S>& t, Var x, Index batch) {
  Tensor<S> out = detail::map_example_blocks(
      t.value(x), batch, [](const Tensor<S>& b) { return hadamard_mix_2d(b); });
  return t.emit(std::move(out), {x},
                [batch](typename Tape<S>::BwdCtx& c) {
                  Tensor<S> gx = detail::map_example_blocks(
                      c.g(), batch,
                      [](const Tensor<S>& b) { return hadamard_mix_2d(b); });
                  c.gin(0).array() += gx.array();
                },
                "hadamard_mix");
}

// Separable 2D Hartley mixing; the cas matrix is symmetric, self-adjoint.
template <typename S>
Var hartley_mix(Tape<S>& t, Var x, Index batch) {
  Tensor<S> out = detail::map_example_blocks(
      t.value(x), batch, [](const Tensor<S>& b) { return hartley_mix_2d(b); });
  return t.emit(std::move(out), {x},
                [batch](typename Tape<S>::BwdCtx& c) {
                  Tensor<S> gx = detail::map_example_blocks(
                      c.g(), batch,
                      [](const Tensor<S>& b) { return hartley_mix_2d(b); });
                  c.gin(0).array() += gx.array();
                },
                "hartley_mix");
}

// Separable orthonormal DCT-II mixing; not symmetric, so the backward
// applies the transposed (= inverse) matrices.
template <typename S>
Var dct_mix(Tape<S>& t, Var x, Index batch) {
  Tensor<S> out = detail::map_example_blocks(
      t.value(x), batch,
      [](const Tensor<S>& b) { return dct2_mix_2d(b, /*adjoint=*/false); });
  return t.emit(std::move(out), {x},
                [batch](typename Tape<S>::BwdCtx& c) {
                  Tensor<S> gx = detail::map_example_blocks(
                      c.g(), batch, [](const Tensor<S>& b) {
                        return dct2_mix_2d(b, /*adjoint=*/true);
                      });
                  c.gin(0).array() += gx.array();
                },
                "dct_mix");
}

}  // namespace fnetlab::ops
