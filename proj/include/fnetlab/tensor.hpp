#pragma once

#include <cmath>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fnetlab/common.hpp"
#include "fnetlab/rng.hpp"

namespace fnetlab {

// Dense n-dimensional array, row-major, value semantics. double is the
// correctness mode; float instantiations exist as a speed mode for
// benchmarks only. Rank-0 is not a thing here: scalars are {1}.
template <typename Scalar>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<Index> dims)
      : dims_(std::move(dims)), data_(checked_count(dims_), Scalar(0)) {}

  static Tensor zeros(std::vector<Index> dims) { return Tensor(std::move(dims)); }

  static Tensor full(std::vector<Index> dims, Scalar v) {
    Tensor t(std::move(dims));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  static Tensor from(std::vector<Index> dims, const std::vector<Scalar>& data) {
    require_dims(checked_count(dims) == Index(data.size()),
                 "Tensor::from: dims/data size mismatch");
    Tensor t;
    t.dims_ = std::move(dims);
    t.data_.assign(data.begin(), data.end());
    return t;
  }

  static Tensor scalar(Scalar v) { return full({1}, v); }

  static Tensor randn(std::vector<Index> dims, Rng& rng, double stddev = 1.0,
                      double mean = 0.0) {
    Tensor t(std::move(dims));
    for (auto& v : t.data_) v = Scalar(rng.normal(mean, stddev));
    return t;
  }

  static Tensor rand_uniform(std::vector<Index> dims, Rng& rng, double lo = 0.0,
                             double hi = 1.0) {
    Tensor t(std::move(dims));
    for (auto& v : t.data_) v = Scalar(rng.uniform(lo, hi));
    return t;
  }

  Index size() const { return Index(data_.size()); }
  Index rank() const { return Index(dims_.size()); }
  Index dim(Index i) const { return dims_.at(size_t(i)); }
  const std::vector<Index>& dims() const { return dims_; }
  bool same_dims(const Tensor& o) const { return dims_ == o.dims_; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](Index i) { return data_[size_t(i)]; }
  Scalar operator[](Index i) const { return data_[size_t(i)]; }

  // Folded 2D view: all leading axes collapse into rows, last axis is
  // the feature/column axis. Row-wise ops (norms, projections) use this.
  Index cols() const {
    require_dims(rank() >= 1, "Tensor::cols on empty tensor");
    return dims_.back();
  }
  Index rows() const { return cols() == 0 ? 0 : size() / cols(); }

  Scalar& at(Index r, Index c) { return data_[size_t(r * cols() + c)]; }
  Scalar at(Index r, Index c) const { return data_[size_t(r * cols() + c)]; }

  auto mat() { return Eigen::Map<MatrixRM<Scalar>>(data(), rows(), cols()); }
  auto mat() const {
    return Eigen::Map<const MatrixRM<Scalar>>(data(), rows(), cols());
  }

  // Explicit fold for shapes the default view does not match.
  auto mat2(Index r, Index c) {
    require_dims(r * c == size(), "Tensor::mat2: element count mismatch");
    return Eigen::Map<MatrixRM<Scalar>>(data(), r, c);
  }
  auto mat2(Index r, Index c) const {
    require_dims(r * c == size(), "Tensor::mat2: element count mismatch");
    return Eigen::Map<const MatrixRM<Scalar>>(data(), r, c);
  }

  auto array() { return Eigen::Map<ArrayX<Scalar>>(data(), size()); }
  auto array() const { return Eigen::Map<const ArrayX<Scalar>>(data(), size()); }

  Scalar item() const {
    require_dims(size() == 1, "Tensor::item: not a scalar");
    return data_[0];
  }

  bool all_finite() const {
    for (const Scalar v : data_) {
      if (!std::isfinite(double(v))) return false;
    }
    return true;
  }

  std::string dims_str() const {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < dims_.size(); ++i) os << (i ? "x" : "") << dims_[i];
    os << ']';
    return os.str();
  }

 private:
  static Index checked_count(const std::vector<Index>& dims) {
    Index n = 1;
    for (Index d : dims) {
      require_dims(d >= 0, "Tensor: negative extent");
      n *= d;
    }
    require_dims(!dims.empty(), "Tensor: rank must be >= 1");
    return n;
  }

  std::vector<Index> dims_;
  AlignedVec<Scalar> data_;
};

template <typename Scalar>
void trap_check(const Tensor<Scalar>& t, const char* where) {
  if (debug::nan_trap() && !t.all_finite())
    throw Error(std::string("non-finite value produced by ") + where);
}

// Plain (tape-free) matrix product with optional transposes; the
// autodiff op and the optimizer both route through Eigen this way.
template <typename Scalar>
Tensor<Scalar> matmul_plain(const Tensor<Scalar>& a, const Tensor<Scalar>& b,
                            bool trans_a = false, bool trans_b = false) {
  const Index am = trans_a ? a.cols() : a.rows();
  const Index ak = trans_a ? a.rows() : a.cols();
  const Index bk = trans_b ? b.cols() : b.rows();
  const Index bp = trans_b ? b.rows() : b.cols();
  require_dims(ak == bk, "matmul: inner dimensions disagree (" + a.dims_str() +
                             " vs " + b.dims_str() + ")");
  Tensor<Scalar> out({am, bp});
  auto c = out.mat();
  if (!trans_a && !trans_b)
    c.noalias() = a.mat() * b.mat();
  else if (trans_a && !trans_b)
    c.noalias() = a.mat().transpose() * b.mat();
  else if (!trans_a && trans_b)
    c.noalias() = a.mat() * b.mat().transpose();
  else
    c.noalias() = a.mat().transpose() * b.mat().transpose();
  return out;
}

using TensorD = Tensor<double>;
using TensorF = Tensor<float>;

}  // namespace fnetlab
