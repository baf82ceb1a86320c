#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fnetlab/ops.hpp"

namespace fnetlab {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_tensor;
  Index worst_coord = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

namespace detail {

inline std::vector<Index> pick_coords(Index n, Index max_coords, std::uint64_t seed) {
  auto all = std::vector<Index>(size_t(n));
  for (Index i = 0; i < n; ++i) all[size_t(i)] = i;
  if (max_coords < 0 || max_coords >= n) return all;
  // Partial Fisher-Yates; deterministic subset without replacement.
  Rng rng(hash_combine(seed, std::uint64_t(n)));
  for (Index i = 0; i < max_coords; ++i) {
    const Index j = i + Index(rng.below(std::uint64_t(n - i)));
    std::swap(all[size_t(i)], all[size_t(j)]);
  }
  all.resize(size_t(max_coords));
  return all;
}

}  // namespace detail

// Central-difference check over several input tensors at once. `build`
// records the scalar loss on a fresh tape; it must bind each checked
// tensor with Tape::leaf (borrowed storage) so the checker can perturb
// the tensor in place, re-record, and locate its gradient by address.
// Relative error per coordinate is |analytic - numeric| / max(1, |analytic|);
// 64-bit mode only.
//
// max_coords_per_tensor < 0 sweeps every coordinate; a nonnegative
// budget checks a seeded random subset per tensor.
template <typename BuildFn>
GradCheckResult grad_check_multi(
    const std::vector<std::pair<std::string, Tensor<double>*>>& inputs,
    BuildFn build, double h = 1e-5, Index max_coords_per_tensor = -1,
    std::uint64_t coord_seed = 0) {
  require(h > 0, "grad_check: step must be positive");

  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    Var loss = build(tape);
    require(tape.value(loss).all_finite(), "grad_check: non-finite loss");
    tape.backward(loss);
    analytic.reserve(inputs.size());
    for (auto& [name, ptr] : inputs) {
      (void)name;
      Var leaf = tape.find_leaf(*ptr);
      require(leaf.valid(), "grad_check: tensor was not bound via Tape::leaf");
      analytic.push_back(tape.grad_or_zeros(leaf));
    }
  }

  auto eval = [&]() {
    Tape<double> tape;
    Var loss = build(tape);
    const double v = tape.value(loss).item();
    require(std::isfinite(v), "grad_check: non-finite perturbed loss");
    return v;
  };

  GradCheckResult res;
  for (size_t k = 0; k < inputs.size(); ++k) {
    Tensor<double>& x = *inputs[k].second;
    const auto coords = detail::pick_coords(x.size(), max_coords_per_tensor,
                                            hash_combine(coord_seed, k));
    for (Index i : coords) {
      const double saved = x[i];
      x[i] = saved + h;
      const double fp = eval();
      x[i] = saved - h;
      const double fm = eval();
      x[i] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[k][i];
      const double rel = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_tensor = inputs[k].first;
        res.worst_coord = i;
        res.analytic = a;
        res.numeric = numeric;
      }
    }
  }
  return res;
}

// Single-tensor convenience: build is (Tape&, Var) -> scalar loss Var.
template <typename BuildFn>
GradCheckResult grad_check(Tensor<double>& x, BuildFn build, double h = 1e-5,
                           Index max_coords = -1, std::uint64_t coord_seed = 0) {
  return grad_check_multi(
      {{std::string("x"), &x}},
      [&](Tape<double>& t) { return build(t, t.leaf(x)); }, h, max_coords,
      coord_seed);
}

}  // namespace fnetlab
