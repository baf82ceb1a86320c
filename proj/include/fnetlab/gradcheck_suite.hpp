#pragma once

#include "fnetlab/encoder.hpp"
#include "fnetlab/gradcheck.hpp"

namespace fnetlab {

struct GradSuiteRow {
  std::string name;
  double max_rel_err = 0;
};

// Finite-difference sweep of every primitive backward rule on small
// random inputs (full coordinate coverage).
inline std::vector<GradSuiteRow> gradcheck_primitives() {
  namespace o = ops;
  std::vector<GradSuiteRow> rows;
  auto rand_t = [](std::vector<Index> dims, std::uint64_t seed) {
    Rng rng(seed);
    return TensorD::randn(std::move(dims), rng);
  };
  auto add_row = [&](const char* name, TensorD x, auto build) {
    rows.push_back({name, grad_check(x, build).max_rel_err});
  };
  add_row("matmul", rand_t({4, 5}, 1), [&](Tape<double>& t, Var v) {
    Var w = t.leaf_owned(rand_t({5, 3}, 2));
    Var y = o::matmul(t, v, w);
    return o::sum(t, o::mul(t, y, y));
  });
  add_row("linear", rand_t({6, 4}, 3), [&](Tape<double>& t, Var v) {
    Var w = t.leaf_owned(rand_t({4, 5}, 4));
    Var y = o::linear(t, v, w);
    return o::sum(t, o::mul(t, y, y));
  });
  add_row("add_rowvec", rand_t({5, 6}, 20), [&](Tape<double>& t, Var v) {
    Var b = t.leaf_owned(rand_t({6}, 21));
    Var y = o::add_rowvec(t, v, b);
    return o::sum(t, o::mul(t, y, y));
  });
  add_row("layer_norm", rand_t({4, 8}, 5), [&](Tape<double>& t, Var v) {
    Var g = t.leaf_owned(rand_t({8}, 6));
    Var b = t.leaf_owned(rand_t({8}, 7));
    Var y = o::layer_norm(t, v, g, b, 1e-12);
    Var c = t.leaf_owned(rand_t({4, 8}, 8));
    return o::sum(t, o::mul(t, y, c));
  });
  add_row("gelu", rand_t({16}, 9), [&](Tape<double>& t, Var v) {
    return o::sum(t, o::gelu(t, v));
  });
  add_row("softmax", rand_t({4, 6}, 10), [&](Tape<double>& t, Var v) {
    Var y = o::softmax(t, v);
    Var c = t.leaf_owned(rand_t({4, 6}, 11));
    return o::sum(t, o::mul(t, y, c));
  });
  add_row("dropout", rand_t({24}, 12), [&](Tape<double>& t, Var v) {
    Rng rng(999);
    Var y = o::dropout(t, v, 0.3, o::Mode::Train, rng);
    return o::sum(t, o::mul(t, y, y));
  });
  add_row("tanh", rand_t({12}, 13), [&](Tape<double>& t, Var v) {
    return o::sum(t, o::tanh_act(t, v));
  });
  add_row("embedding", rand_t({8, 4}, 14), [&](Tape<double>& t, Var v) {
    Var y = o::embedding(t, v, {1, 7, 3, 3});
    return o::sum(t, o::mul(t, y, y));
  });
  add_row("cross_entropy", rand_t({3, 9}, 15), [&](Tape<double>& t, Var v) {
    return o::cross_entropy_sum(t, v, {2, 0, 8});
  });
  add_row("fourier_mix", rand_t({8, 4}, 16), [&](Tape<double>& t, Var v) {
    Var y = o::fourier_mix(t, v, 2, FourierMethod::Fft);
    return o::sum(t, o::mul(t, y, y));
  });
  add_row("fourier_mix_matrix", rand_t({8, 4}, 16), [&](Tape<double>& t, Var v) {
    Var y = o::fourier_mix(t, v, 2, FourierMethod::Matrix);
    return o::sum(t, o::mul(t, y, y));
  });
  add_row("fourier_seq_mix", rand_t({8, 4}, 22), [&](Tape<double>& t, Var v) {
    Var y = o::fourier_seq_mix(t, v, 2);
    return o::sum(t, o::mul(t, y, y));
  });
  add_row("hartley_mix", rand_t({8, 4}, 17), [&](Tape<double>& t, Var v) {
    Var y = o::hartley_mix(t, v, 2);
    return o::sum(t, o::mul(t, y, y));
  });
  add_row("hadamard_mix", rand_t({8, 4}, 18), [&](Tape<double>& t, Var v) {
    Var y = o::hadamard_mix(t, v, 2);
    return o::sum(t, o::mul(t, y, y));
  });
  add_row("dct_mix", rand_t({8, 4}, 19), [&](Tape<double>& t, Var v) {
    Var y = o::dct_mix(t, v, 2);
    return o::sum(t, o::mul(t, y, y));
  });
  return rows;
}

// Full-model gradient checks: a 2-layer encoder per mixing kind, MLM +
// NSP loss, seeded coordinate sample per parameter tensor.
inline std::vector<GradSuiteRow> gradcheck_models(Index coords_per_tensor = 10) {
  namespace o = ops;
  std::vector<GradSuiteRow> rows;
  for (const char* variant : {"fnet_fft", "fnet_mat", "fnet_1d", "bert", "linear",
                              "random", "ff_only", "hartley", "hadamard", "dct"}) {
    ModelConfig c;
    c.n = 8;
    c.d_h = 16;
    c.d_ff = 64;
    c.num_layers = 2;
    c.heads = 1;
    c.vocab_size = 32;
    c.dropout_rate = 0.0;
    c.mixing_plan = plan_for_variant(variant, 2, 8, 16);
    auto model = EncoderModel<double>::init(c);
    TokenBatch b;
    b.batch = 2;
    b.n = 8;
    b.ids.resize(16);
    b.type_ids.assign(16, 0);
    Rng rng(31);
    for (auto& id : b.ids) id = std::int32_t(4 + rng.below(28));
    std::vector<std::pair<std::string, TensorD*>> inputs;
    for (Index i = 0; i < model.params.size(); ++i) {
      if (!model.params.trainable[size_t(i)]) continue;
      inputs.emplace_back(model.params.names[size_t(i)],
                          &model.params.tensors[size_t(i)]);
    }
    auto res = grad_check_multi(
        inputs,
        [&](Tape<double>& tape) {
          ModelGraph<double> g(tape, model, o::Mode::Eval, Rng(0));
          auto enc = g.forward(b);
          Var logits = g.mlm_logits(enc.seq, {1, 5, 11});
          Var ce = o::cross_entropy_sum(tape, logits, {5, 9, 20});
          Var nsp = o::cross_entropy_sum(tape, g.nsp_logits(enc.pooled), {1, 0});
          return o::add(tape, ce, nsp);
        },
        1e-5, coords_per_tensor, /*coord_seed=*/7);
    rows.push_back({std::string("model_") + variant, res.max_rel_err});
  }
  return rows;
}

inline std::vector<GradSuiteRow> run_gradcheck_suite(Index coords_per_tensor = 10) {
  std::vector<GradSuiteRow> rows = gradcheck_primitives();
  auto models = gradcheck_models(coords_per_tensor);
  rows.insert(rows.end(), models.begin(), models.end());
  return rows;
}

}  // namespace fnetlab
