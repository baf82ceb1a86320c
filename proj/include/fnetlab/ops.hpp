#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "fnetlab/rng.hpp"
#include "fnetlab/tape.hpp"

namespace fnetlab::ops {

template <typename S>
Var add(Tape<S>& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  require_dims(av.same_dims(bv), "add: dims disagree");
  Tensor<S> out = av;
  out.array() += bv.array();
  return t.emit(std::move(out), {a, b},
                [](typename Tape<S>::BwdCtx& c) {
                  c.gin(0).array() += c.g().array();
                  c.gin(1).array() += c.g().array();
                },
                "add");
}

template <typename S>
Var sub(Tape<S>& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  require_dims(av.same_dims(bv), "sub: dims disagree");
  Tensor<S> out = av;
  out.array() -= bv.array();
  return t.emit(std::move(out), {a, b},
                [](typename Tape<S>::BwdCtx& c) {
                  c.gin(0).array() += c.g().array();
                  c.gin(1).array() -= c.g().array();
                },
                "sub");
}

template <typename S>
Var mul(Tape<S>& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  require_dims(av.same_dims(bv), "mul: dims disagree");
  Tensor<S> out = av;
  out.array() *= bv.array();
  return t.emit(std::move(out), {a, b},
                [](typename Tape<S>::BwdCtx& c) {
                  c.gin(0).array() += c.g().array() * c.in(1).array();
                  c.gin(1).array() += c.g().array() * c.in(0).array();
                },
                "mul");
}

template <typename S>
Var scale(Tape<S>& t, Var x, double k) {
  Tensor<S> out = t.value(x);
  out.array() *= S(k);
  return t.emit(std::move(out), {x},
                [k](typename Tape<S>::BwdCtx& c) {
                  c.gin(0).array() += S(k) * c.g().array();
                },
                "scale");
}

// x: (..., d), v: (d). Broadcast add over the folded rows (bias add).
template <typename S>
Var add_rowvec(Tape<S>& t, Var x, Var v) {
  const auto& xv = t.value(x);
  const auto& vv = t.value(v);
  require_dims(vv.rank() == 1 && vv.size() == xv.cols(),
               "add_rowvec: vector length must match last axis");
  Tensor<S> out = xv;
  out.mat().rowwise() += vv.mat().row(0);
  return t.emit(std::move(out), {x, v},
                [](typename Tape<S>::BwdCtx& c) {
                  c.gin(0).array() += c.g().array();
                  c.gin(1).mat().row(0) += c.g().mat().colwise().sum();
                },
                "add_rowvec");
}

template <typename S>
Var reshape(Tape<S>& t, Var x, std::vector<Index> dims) {
  const auto& xv = t.value(x);
  Tensor<S> out(dims);
  require_dims(out.size() == xv.size(), "reshape: element count mismatch");
  out.array() = xv.array();
  return t.emit(std::move(out), {x},
                [](typename Tape<S>::BwdCtx& c) {
                  c.gin(0).array() += c.g().array();
                },
                "reshape");
}

template <typename S>
Var transpose2d(Tape<S>& t, Var x) {
  const auto& xv = t.value(x);
  require_dims(xv.rank() == 2, "transpose2d: rank-2 only");
  Tensor<S> out({xv.cols(), xv.rows()});
  out.mat() = xv.mat().transpose();
  return t.emit(std::move(out), {x},
                [](typename Tape<S>::BwdCtx& c) {
                  c.gin(0).mat() += c.g().mat().transpose();
                },
                "transpose2d");
}

template <typename S>
Var block2d(Tape<S>& t, Var x, Index r0, Index c0, Index nr, Index nc) {
  const auto& xv = t.value(x);
  require_dims(r0 >= 0 && c0 >= 0 && r0 + nr <= xv.rows() && c0 + nc <= xv.cols(),
               "block2d: range out of bounds");
  Tensor<S> out({nr, nc});
  out.mat() = xv.mat().block(r0, c0, nr, nc);
  return t.emit(std::move(out), {x},
                [r0, c0, nr, nc](typename Tape<S>::BwdCtx& c) {
                  c.gin(0).mat().block(r0, c0, nr, nc) += c.g().mat();
                },
                "block2d");
}

template <typename S>
Var concat_cols(Tape<S>& t, const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: empty input");
  const Index rows = t.value(parts[0]).rows();
  Index total = 0;
  for (Var p : parts) {
    require_dims(t.value(p).rows() == rows, "concat_cols: row counts disagree");
    total += t.value(p).cols();
  }
  Tensor<S> out({rows, total});
  std::vector<Index> offsets;
  Index at = 0;
  for (Var p : parts) {
    const auto& pv = t.value(p);
    out.mat().block(0, at, rows, pv.cols()) = pv.mat();
    offsets.push_back(at);
    at += pv.cols();
  }
  return t.emit(std::move(out), parts,
                [offsets](typename Tape<S>::BwdCtx& c) {
                  for (size_t k = 0; k < offsets.size(); ++k) {
                    auto gk = c.gin(int(k)).mat();
                    gk += c.g().mat().block(0, offsets[k], gk.rows(), gk.cols());
                  }
                },
                "concat_cols");
}

template <typename S>
Var concat_rows(Tape<S>& t, const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: empty input");
  const Index cols = t.value(parts[0]).cols();
  Index total = 0;
  for (Var p : parts) {
    require_dims(t.value(p).cols() == cols, "concat_rows: column counts disagree");
    total += t.value(p).rows();
  }
  Tensor<S> out({total, cols});
  std::vector<Index> offsets;
  Index at = 0;
  for (Var p : parts) {
    const auto& pv = t.value(p);
    out.mat().middleRows(at, pv.rows()) = pv.mat();
    offsets.push_back(at);
    at += pv.rows();
  }
  return t.emit(std::move(out), parts,
                [offsets](typename Tape<S>::BwdCtx& c) {
                  for (size_t k = 0; k < offsets.size(); ++k) {
                    auto gk = c.gin(int(k)).mat();
                    gk += c.g().mat().middleRows(offsets[k], gk.rows());
                  }
                },
                "concat_rows");
}

// out row i = x row indices[i]; duplicate indices accumulate in backward.
template <typename S>
Var gather_rows(Tape<S>& t, Var x, std::vector<Index> indices) {
  const auto& xv = t.value(x);
  Tensor<S> out({Index(indices.size()), xv.cols()});
  for (size_t i = 0; i < indices.size(); ++i) {
    require_dims(indices[i] >= 0 && indices[i] < xv.rows(),
                 "gather_rows: index out of range");
    out.mat().row(Index(i)) = xv.mat().row(indices[i]);
  }
  return t.emit(std::move(out), {x},
                [indices](typename Tape<S>::BwdCtx& c) {
                  auto gx = c.gin(0).mat();
                  for (size_t i = 0; i < indices.size(); ++i)
                    gx.row(indices[i]) += c.g().mat().row(Index(i));
                },
                "gather_rows");
}

template <typename S>
Var sum(Tape<S>& t, Var x) {
  Tensor<S> out = Tensor<S>::scalar(t.value(x).array().sum());
  return t.emit(std::move(out), {x},
                [](typename Tape<S>::BwdCtx& c) {
                  c.gin(0).array() += c.g().item();
                },
                "sum");
}

template <typename S>
Var mean(Tape<S>& t, Var x) {
  const Index n = t.value(x).size();
  Tensor<S> out = Tensor<S>::scalar(t.value(x).array().sum() / S(n));
  return t.emit(std::move(out), {x},
                [n](typename Tape<S>::BwdCtx& c) {
                  c.gin(0).array() += c.g().item() / S(n);
                },
                "mean");
}

// Strict rank-2 product with optional transposes.
template <typename S>
Var matmul(Tape<S>& t, Var a, Var b, bool trans_a = false, bool trans_b = false) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  require_dims(av.rank() == 2 && bv.rank() == 2, "matmul: rank-2 operands only");
  Tensor<S> out = matmul_plain(av, bv, trans_a, trans_b);
  return t.emit(
      std::move(out), {a, b},
      [trans_a, trans_b](typename Tape<S>::BwdCtx& c) {
        const auto& g = c.g();
        const auto& A = c.in(0);
        const auto& B = c.in(1);
        if (!trans_a && !trans_b) {
          c.gin(0).mat().noalias() += g.mat() * B.mat().transpose();
          c.gin(1).mat().noalias() += A.mat().transpose() * g.mat();
        } else if (trans_a && !trans_b) {
          c.gin(0).mat().noalias() += B.mat() * g.mat().transpose();
          c.gin(1).mat().noalias() += A.mat() * g.mat();
        } else if (!trans_a && trans_b) {
          c.gin(0).mat().noalias() += g.mat() * B.mat();
          c.gin(1).mat().noalias() += g.mat().transpose() * A.mat();
        } else {
          c.gin(0).mat().noalias() += B.mat().transpose() * g.mat().transpose();
          c.gin(1).mat().noalias() += g.mat().transpose() * A.mat().transpose();
        }
      },
      "matmul");
}

// x: (..., k) folded against W: (k, p); output keeps x's leading axes.
template <typename S>
Var linear(Tape<S>& t, Var x, Var w) {
  const auto& xv = t.value(x);
  const auto& wv = t.value(w);
  require_dims(wv.rank() == 2 && xv.cols() == wv.rows(),
               "linear: shapes (...,k)·(k,p) required");
  std::vector<Index> odims = xv.dims();
  odims.back() = wv.cols();
  Tensor<S> out(odims);
  out.mat().noalias() = xv.mat() * wv.mat();
  return t.emit(std::move(out), {x, w},
                [](typename Tape<S>::BwdCtx& c) {
                  c.gin(0).mat().noalias() += c.g().mat() * c.in(1).mat().transpose();
                  c.gin(1).mat().noalias() += c.in(0).mat().transpose() * c.g().mat();
                },
                "linear");
}

inline constexpr double kGeluC0 = 0.7978845608028653558799;  // sqrt(2/pi)
inline constexpr double kGeluC1 = 0.044715;

// GELU, tanh approximation: 0.5x(1 + tanh(sqrt(2/pi)(x + 0.044715 x^3))).
// tanh(u) is cached for the backward pass; the elementwise math runs
// through Eigen's vectorized array kernels.
template <typename S>
Var gelu(Tape<S>& t, Var x) {
  const auto& xv = t.value(x);
  auto th = std::make_shared<Tensor<S>>(xv.dims());
  Tensor<S> out(xv.dims());
  auto xa = xv.array();
  // tanh(u) = 1 - 2/(exp(2u)+1): exp has vectorized double kernels,
  // tanh does not. exp overflow saturates to the correct +-1 limits.
  th->array() =
      S(1) - S(2) / ((S(2 * kGeluC0) * (xa + S(kGeluC1) * xa.cube())).exp() + S(1));
  out.array() = S(0.5) * xa * (S(1) + th->array());
  return t.emit(std::move(out), {x},
                [th](typename Tape<S>::BwdCtx& c) {
                  auto xa = c.in(0).array();
                  auto ta = th->array();
                  auto du = S(kGeluC0) * (S(1) + S(3.0 * kGeluC1) * xa.square());
                  c.gin(0).array() +=
                      c.g().array() * (S(0.5) * (S(1) + ta) +
                                       S(0.5) * xa * (S(1) - ta.square()) * du);
                },
                "gelu");
}

template <typename S>
Var tanh_act(Tape<S>& t, Var x) {
  Tensor<S> out = t.value(x);
  out.array() = out.array().tanh();
  return t.emit(std::move(out), {x},
                [](typename Tape<S>::BwdCtx& c) {
                  c.gin(0).array() +=
                      c.g().array() * (S(1) - c.out().array().square());
                },
                "tanh");
}

// Row-wise softmax over the last axis, max-subtracted for stability.
template <typename S>
Var softmax(Tape<S>& t, Var x) {
  const auto& xv = t.value(x);
  Tensor<S> out(xv.dims());
  const Index rows = xv.rows();
  for (Index r = 0; r < rows; ++r) {
    auto row = xv.mat().row(r);
    const S m = row.maxCoeff();
    auto orow = out.mat().row(r);
    orow = (row.array() - m).exp().matrix();
    orow /= orow.sum();
  }
  return t.emit(std::move(out), {x},
                [rows](typename Tape<S>::BwdCtx& c) {
                  auto y = c.out().mat();
                  auto g = c.g().mat();
                  auto gx = c.gin(0).mat();
                  for (Index r = 0; r < rows; ++r) {
                    const S dot = (g.row(r).array() * y.row(r).array()).sum();
                    gx.row(r).array() +=
                        y.row(r).array() * (g.row(r).array() - dot);
                  }
                },
                "softmax");
}

// Layer norm over the last axis with learnable gain/offset.
template <typename S>
Var layer_norm(Tape<S>& t, Var x, Var gamma, Var beta, double eps) {
  const auto& xv = t.value(x);
  const auto& gv = t.value(gamma);
  const auto& bv = t.value(beta);
  const Index d = xv.cols();
  require_dims(gv.size() == d && bv.size() == d, "layer_norm: param length != d");
  const Index rows = xv.rows();

  auto xhat = std::make_shared<Tensor<S>>(xv.dims());
  auto inv_std = std::make_shared<Tensor<S>>(std::vector<Index>{rows});
  Tensor<S> out(xv.dims());
  for (Index r = 0; r < rows; ++r) {
    auto row = xv.mat().row(r);
    const S mu = row.mean();
    const S var = (row.array() - mu).square().sum() / S(d);
    const S inv = S(1) / std::sqrt(var + S(eps));
    (*inv_std)[r] = inv;
    xhat->mat().row(r) = ((row.array() - mu) * inv).matrix();
    out.mat().row(r) = (xhat->mat().row(r).array() * gv.array().transpose() +
                        bv.array().transpose())
                           .matrix();
  }
  return t.emit(
      std::move(out), {x, gamma, beta},
      [xhat, inv_std, rows, d](typename Tape<S>::BwdCtx& c) {
        const auto& g = c.g();
        const auto& gv = c.in(1);
        auto gx = c.gin(0).mat();
        auto ggamma = c.gin(1).array();
        auto gbeta = c.gin(2).array();
        ArrayX<S> gi(d);
        for (Index r = 0; r < rows; ++r) {
          auto grow = g.mat().row(r).array();
          auto xrow = xhat->mat().row(r).array();
          ggamma += (grow * xrow).transpose();
          gbeta += grow.transpose();
          // d/dx of the normalized row: remove the mean and the
          // component along xhat, then rescale.
          gi = (grow * gv.array().transpose()).transpose();
          const S m1 = gi.mean();
          const S m2 = (gi * xrow.transpose()).mean();
          gx.row(r).array() +=
              ((gi - m1 - xrow.transpose() * m2) * (*inv_std)[r]).transpose();
        }
      },
      "layer_norm");
}

enum class Mode { Train, Eval };

// Inverted dropout: eval is the identity (same Var, no node recorded).
template <typename S>
Var dropout(Tape<S>& t, Var x, double rate, Mode mode, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1)");
  if (mode == Mode::Eval || rate == 0.0) return x;
  const auto& xv = t.value(x);
  auto mask = std::make_shared<Tensor<S>>(xv.dims());
  const S keep_scale = S(1.0 / (1.0 - rate));
  Tensor<S> out(xv.dims());
  for (Index i = 0; i < xv.size(); ++i) {
    const S m = rng.bernoulli(rate) ? S(0) : keep_scale;
    (*mask)[i] = m;
    out[i] = xv[i] * m;
  }
  return t.emit(std::move(out), {x},
                [mask](typename Tape<S>::BwdCtx& c) {
                  c.gin(0).array() += c.g().array() * mask->array();
                },
                "dropout");
}

// Embedding lookup: out row i = table row ids[i]. Backward scatter-adds
// into the table gradient.
template <typename S>
Var embedding(Tape<S>& t, Var table, const std::vector<std::int32_t>& ids) {
  const auto& tv = t.value(table);
  require_dims(tv.rank() == 2, "embedding: table must be rank 2");
  Tensor<S> out({Index(ids.size()), tv.cols()});
  for (size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && Index(ids[i]) < tv.rows(),
            "embedding: id out of range");
    out.mat().row(Index(i)) = tv.mat().row(ids[i]);
  }
  return t.emit(std::move(out), {table},
                [ids](typename Tape<S>::BwdCtx& c) {
                  auto gt = c.gin(0).mat();
                  for (size_t i = 0; i < ids.size(); ++i)
                    gt.row(ids[i]) += c.g().mat().row(Index(i));
                },
                "embedding");
}

// Sum over rows of -log softmax(logits)[label]; returns a scalar so the
// caller can combine counts across batches exactly.
template <typename S>
Var cross_entropy_sum(Tape<S>& t, Var logits,
                      const std::vector<std::int32_t>& labels) {
  const auto& lv = t.value(logits);
  const Index rows = lv.rows(), cols = lv.cols();
  require_dims(Index(labels.size()) == rows, "cross_entropy: labels/rows mismatch");
  auto probs = std::make_shared<Tensor<S>>(lv.dims());
  double total = 0.0;
  for (Index r = 0; r < rows; ++r) {
    require(labels[r] >= 0 && Index(labels[r]) < cols,
            "cross_entropy: label out of range");
    auto row = lv.mat().row(r);
    const S m = row.maxCoeff();
    ArrayX<S> e = (row.array() - m).exp().transpose();
    const S z = e.sum();
    probs->mat().row(r) = (e / z).transpose();
    total += double(m) + std::log(double(z)) - double(row[labels[r]]);
  }
  return t.emit(Tensor<S>::scalar(S(total)), {logits},
                [probs, labels, rows](typename Tape<S>::BwdCtx& c) {
                  const S gs = c.g().item();
                  auto gl = c.gin(0).mat();
                  for (Index r = 0; r < rows; ++r) {
                    gl.row(r) += gs * probs->mat().row(r);
                    gl(r, labels[r]) -= gs;
                  }
                },
                "cross_entropy");
}

}  // namespace fnetlab::ops
