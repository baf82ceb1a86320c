#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "fnetlab/mixing.hpp"
#include "fnetlab/model_config.hpp"
#include "fnetlab/ops.hpp"

namespace fnetlab {

// Ordered, named parameter set. Order follows param_shapes(cfg) exactly;
// checkpoints and the optimizer rely on that ordering.
template <typename S>
struct ParamStore {
  std::vector<std::string> names;
  std::vector<Tensor<S>> tensors;
  std::vector<bool> trainable;
  std::unordered_map<std::string, Index> index;

  Index add(std::string name, Tensor<S> t, bool is_trainable) {
    require(index.find(name) == index.end(), "ParamStore: duplicate " + name);
    const Index id = Index(tensors.size());
    index.emplace(name, id);
    names.push_back(std::move(name));
    tensors.push_back(std::move(t));
    trainable.push_back(is_trainable);
    return id;
  }

  Index size() const { return Index(tensors.size()); }

  Index find(const std::string& name) const {
    auto it = index.find(name);
    return it == index.end() ? Index(-1) : it->second;
  }

  Tensor<S>& at(const std::string& name) {
    const Index id = find(name);
    require(id >= 0, "ParamStore: missing " + name);
    return tensors[size_t(id)];
  }
  const Tensor<S>& at(const std::string& name) const {
    return const_cast<ParamStore*>(this)->at(name);
  }

  Index total_trainable() const {
    Index c = 0;
    for (Index i = 0; i < size(); ++i)
      if (trainable[size_t(i)]) c += tensors[size_t(i)].size();
    return c;
  }
};

// Encoder with interchangeable mixing sublayers, BERT-style embeddings,
// pooler and MLM/NSP heads.
template <typename S>
struct EncoderModel {
  ModelConfig cfg;
  ParamStore<S> params;

  static EncoderModel init(const ModelConfig& cfg) {
    EncoderModel m;
    m.cfg = cfg;
    const Rng root(hash_combine(cfg.seed, 0x696e6974ull));  // "init"
    const auto shapes = param_shapes(cfg);
    for (size_t i = 0; i < shapes.size(); ++i) {
      const ParamSpec& spec = shapes[i];
      Rng rng = root.fork(std::uint64_t(i));
      Tensor<S> t(spec.dims);
      if (!spec.trainable) {
        // Frozen random mixing matrices, variance-preserving scale.
        const double stddev = 1.0 / std::sqrt(double(spec.dims.back()));
        t = Tensor<S>::randn(spec.dims, rng, stddev);
      } else if (spec.name.find("norm.gamma") != std::string::npos) {
        t = Tensor<S>::full(spec.dims, S(1));
      } else if (spec.dims.size() >= 2) {
        t = Tensor<S>::randn(spec.dims, rng, 0.02);
      }  // biases, norm betas, mlm bias stay zero
      m.params.add(spec.name, std::move(t), spec.trainable);
    }
    return m;
  }
};

struct TokenBatch {
  Index batch = 0;
  Index n = 0;
  std::vector<std::int32_t> ids;       // batch * n, row-major
  std::vector<std::int32_t> type_ids;  // batch * n
};

// One recorded forward pass of a model on a tape. Parameters are bound
// lazily as borrowed leaves; the model must outlive the tape.
template <typename S>
class ModelGraph {
 public:
  ModelGraph(Tape<S>& tape, const EncoderModel<S>& model, ops::Mode mode,
             Rng dropout_rng)
      : tape_(tape),
        model_(model),
        mode_(mode),
        rng_(dropout_rng),
        bound_(size_t(model.params.size())) {}

  Var p(const std::string& name) {
    const Index id = model_.params.find(name);
    require(id >= 0, "ModelGraph: unknown parameter " + name);
    Var& v = bound_[size_t(id)];
    if (!v.valid()) v = tape_.leaf(model_.params.tensors[size_t(id)]);
    return v;
  }

  // Leaf bindings parallel to the param store (invalid Var when a
  // parameter never participated in this graph).
  const std::vector<Var>& bound_vars() const { return bound_; }

  // Word + position + type embeddings, layer norm, dropout. Output is
  // (batch*n, d_h).
  Var embed(const TokenBatch& b) {
    const ModelConfig& cfg = model_.cfg;
    require(b.n <= cfg.n, "embed: sequence longer than configured n");
    require(b.ids.size() == size_t(b.batch * b.n) &&
                b.type_ids.size() == b.ids.size(),
            "embed: id buffer sizes disagree");
    Var x = ops::embedding(tape_, p("embeddings.word"), b.ids);
    if (cfg.use_position_embeddings) {
      std::vector<std::int32_t> pos(size_t(b.batch * b.n));
      for (Index e = 0; e < b.batch; ++e)
        for (Index i = 0; i < b.n; ++i) pos[size_t(e * b.n + i)] = std::int32_t(i);
      x = ops::add(tape_, x, ops::embedding(tape_, p("embeddings.position"), pos));
    }
    x = ops::add(tape_, x, ops::embedding(tape_, p("embeddings.type"), b.type_ids));
    x = ops::layer_norm(tape_, x, p("embeddings.norm.gamma"),
                        p("embeddings.norm.beta"), cfg.layer_norm_eps);
    return ops::dropout(tape_, x, cfg.dropout_rate, mode_, rng_);
  }

  struct EncOut {
    Var seq;     // (batch*n, d_h)
    Var pooled;  // (batch, d_h)
  };

  EncOut forward(const TokenBatch& b) {
    const ModelConfig& cfg = model_.cfg;
    Var x = embed(b);
    for (Index l = 0; l < cfg.num_layers; ++l) x = block(x, l, b);
    // Pooler: dense + tanh on the position-0 token of every example.
    std::vector<Index> first(size_t(b.batch));
    for (Index e = 0; e < b.batch; ++e) first[size_t(e)] = e * b.n;
    Var cls = ops::gather_rows(tape_, x, first);
    Var pooled = ops::tanh_act(
        tape_, ops::add_rowvec(tape_, ops::linear(tape_, cls, p("pooler.w")),
                               p("pooler.b")));
    return {x, pooled};
  }

  // MLM head over the given flat row positions (example * n + offset):
  // dense + GELU + layer norm, then decode against the (tied) word
  // embedding table plus an output bias.
  Var mlm_logits(Var seq, const std::vector<Index>& positions) {
    const ModelConfig& cfg = model_.cfg;
    Var h = ops::gather_rows(tape_, seq, positions);
    h = ops::add_rowvec(tape_, ops::linear(tape_, h, p("mlm.dense.w")),
                        p("mlm.dense.b"));
    h = ops::gelu(tape_, h);
    h = ops::layer_norm(tape_, h, p("mlm.norm.gamma"), p("mlm.norm.beta"),
                        cfg.layer_norm_eps);
    Var decoder = cfg.tie_mlm_decoder ? p("embeddings.word") : p("mlm.decoder");
    Var logits = ops::matmul(tape_, h, decoder, false, true);
    return ops::add_rowvec(tape_, logits, p("mlm.bias"));
  }

  Var nsp_logits(Var pooled) {
    return ops::add_rowvec(tape_, ops::linear(tape_, pooled, p("nsp.w")),
                           p("nsp.b"));
  }

  Var mixing_sublayer(Var x, Index layer, Index batch) {
    const ModelConfig& cfg = model_.cfg;
    const std::string pre = "layer" + std::to_string(layer) + ".";
    switch (cfg.mixing_plan[size_t(layer)]) {
      case MixingKind::FourierFft:
        return ops::fourier_mix(tape_, x, batch, FourierMethod::Fft);
      case MixingKind::FourierMatrix:
        return ops::fourier_mix(tape_, x, batch, FourierMethod::Matrix);
      case MixingKind::FourierSeqOnly:
        return ops::fourier_seq_mix(tape_, x, batch);
      case MixingKind::Hartley:
        return ops::hartley_mix(tape_, x, batch);
      case MixingKind::Hadamard:
        return ops::hadamard_mix(tape_, x, batch);
      case MixingKind::Dct:
        return ops::dct_mix(tape_, x, batch);
      case MixingKind::Attention:
        return attention(x, pre, batch);
      case MixingKind::Linear:
        return linear_mix(x, p(pre + "mix.w_seq"), p(pre + "mix.w_hid"), batch);
      case MixingKind::Random:
        return linear_mix(x, p(pre + "mix.r_seq"), p(pre + "mix.r_hid"), batch);
      case MixingKind::Identity:
        return x;
    }
    throw Error("unreachable mixing kind");
  }

 private:
  Var block(Var x, Index layer, const TokenBatch& b) {
    const ModelConfig& cfg = model_.cfg;
    const std::string pre = "layer" + std::to_string(layer) + ".";
    const MixingKind kind = cfg.mixing_plan[size_t(layer)];
    if (kind != MixingKind::Identity) {
      Var m = mixing_sublayer(x, layer, b.batch);
      x = ops::layer_norm(tape_, ops::add(tape_, x, m),
                          p(pre + "mixing_norm.gamma"), p(pre + "mixing_norm.beta"),
                          cfg.layer_norm_eps);
    }
    Var h = ops::add_rowvec(tape_, ops::linear(tape_, x, p(pre + "ff.w1")),
                            p(pre + "ff.b1"));
    h = ops::gelu(tape_, h);
    h = ops::add_rowvec(tape_, ops::linear(tape_, h, p(pre + "ff.w2")),
                        p(pre + "ff.b2"));
    h = ops::dropout(tape_, h, cfg.dropout_rate, mode_, rng_);
    return ops::layer_norm(tape_, ops::add(tape_, x, h), p(pre + "ff_norm.gamma"),
                           p(pre + "ff_norm.beta"), cfg.layer_norm_eps);
  }

  // y = W_seq x W_hid^T per example; no biases, no activation.
  Var linear_mix(Var x, Var w_seq, Var w_hid, Index batch) {
    const Index n = t_value(x).rows() / batch;
    const Index d = t_value(x).cols();
    std::vector<Var> rows;
    rows.reserve(size_t(batch));
    for (Index e = 0; e < batch; ++e) {
      Var xe = ops::block2d(tape_, x, e * n, 0, n, d);
      Var m = ops::matmul(tape_, w_seq, xe);
      rows.push_back(ops::matmul(tape_, m, w_hid, false, true));
    }
    return concat_rows(rows);
  }

  // Standard multi-head scaled dot-product self-attention with bias
  // projections; dropout on the attention probabilities in train mode.
  Var attention(Var x, const std::string& pre, Index batch) {
    const ModelConfig& cfg = model_.cfg;
    const Index d = cfg.d_h;
    const Index h = cfg.heads;
    const Index dk = d / h;
    const Index n = t_value(x).rows() / batch;
    const double inv_scale = 1.0 / std::sqrt(double(dk));

    Var q = ops::add_rowvec(tape_, ops::linear(tape_, x, p(pre + "att.wq")),
                            p(pre + "att.bq"));
    Var k = ops::add_rowvec(tape_, ops::linear(tape_, x, p(pre + "att.wk")),
                            p(pre + "att.bk"));
    Var v = ops::add_rowvec(tape_, ops::linear(tape_, x, p(pre + "att.wv")),
                            p(pre + "att.bv"));

    std::vector<Var> examples;
    examples.reserve(size_t(batch));
    for (Index e = 0; e < batch; ++e) {
      std::vector<Var> heads;
      heads.reserve(size_t(h));
      for (Index hd = 0; hd < h; ++hd) {
        Var qe = ops::block2d(tape_, q, e * n, hd * dk, n, dk);
        Var ke = ops::block2d(tape_, k, e * n, hd * dk, n, dk);
        Var ve = ops::block2d(tape_, v, e * n, hd * dk, n, dk);
        Var scores = ops::scale(tape_, ops::matmul(tape_, qe, ke, false, true),
                                inv_scale);
        Var probs = ops::softmax(tape_, scores);
        probs = ops::dropout(tape_, probs, cfg.dropout_rate, mode_, rng_);
        heads.push_back(ops::matmul(tape_, probs, ve));
      }
      examples.push_back(h == 1 ? heads[0] : ops::concat_cols(tape_, heads));
    }
    Var ctx = concat_rows(examples);
    return ops::add_rowvec(tape_, ops::linear(tape_, ctx, p(pre + "att.wo")),
                           p(pre + "att.bo"));
  }

  Var concat_rows(const std::vector<Var>& parts) {
    if (parts.size() == 1) return parts[0];
    return ops::concat_rows(tape_, parts);
  }

  const Tensor<S>& t_value(Var v) const { return tape_.value(v); }

  Tape<S>& tape_;
  const EncoderModel<S>& model_;
  ops::Mode mode_;
  Rng rng_;
  std::vector<Var> bound_;
};

}  // namespace fnetlab
