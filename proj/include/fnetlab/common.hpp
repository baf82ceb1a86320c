#pragma once

#include <Eigen/Core>

#include <atomic>
#include <vector>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace fnetlab {

using Index = Eigen::Index;

// Row-major is the storage convention for every dense buffer in this
// library; Eigen maps below must agree with it.
template <typename Scalar>
using MatrixRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

// All owned numeric buffers use Eigen-aligned storage. Heap addresses
// otherwise vary between allocations, which changes Eigen's vector
// peeling and therefore the low bits of reductions; consistent
// alignment is what makes reruns bit-identical.
template <typename Scalar>
using AlignedVec = std::vector<Scalar, Eigen::aligned_allocator<Scalar>>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimError : Error {
  using Error::Error;
};

// Radix-2 paths refuse non-power-of-two extents; callers that can fall
// back to the cached-matrix path catch this type.
struct UnsupportedLengthError : Error {
  using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

inline void require_dims(bool cond, const std::string& msg) {
  if (!cond) throw DimError(msg);
}

inline bool is_pow2(Index n) { return n >= 1 && (n & (n - 1)) == 0; }

inline int log2_exact(Index n) {
  require(is_pow2(n), "log2_exact: not a power of two");
  int k = 0;
  while ((Index(1) << k) < n) ++k;
  return k;
}

namespace debug {

// When enabled, ops validate that produced values are finite and throw
// on the first NaN/Inf they see.
inline std::atomic<bool>& nan_trap_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

inline void set_nan_trap(bool on) { nan_trap_flag().store(on); }
inline bool nan_trap() { return nan_trap_flag().load(); }

}  // namespace debug

}  // namespace fnetlab
