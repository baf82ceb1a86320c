#pragma once

#include <chrono>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "fnetlab/checkpoint.hpp"
#include "fnetlab/encoder.hpp"
#include "fnetlab/tasks.hpp"

namespace fnetlab {

struct TrainConfig {
  Index batch_size = 32;
  Index total_steps = 3000;
  double base_learning_rate = 1e-3;
  Index warmup_steps = 300;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-6;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  Index eval_every = 100;
  Index eval_examples = 512;
  // Early stop once eval task accuracy stays at or above this for
  // stop_patience consecutive evals; negative disables.
  double stop_accuracy = -1.0;
  Index stop_patience = 2;
  Index checkpoint_every = 0;
  std::uint64_t seed = 42;

  void validate() const {
    require(batch_size >= 1 && total_steps >= 0 && eval_every >= 1, "TrainConfig: bad sizes");
    require(warmup_steps >= 0 && warmup_steps <= total_steps,
            "TrainConfig: warmup_steps must be <= total_steps");
    require(base_learning_rate > 0 && adam_eps > 0 && clip_norm > 0,
            "TrainConfig: rates must be positive");
    require(adam_beta1 > 0 && adam_beta1 < 1 && adam_beta2 > 0 && adam_beta2 < 1,
            "TrainConfig: betas must lie in (0,1)");
    require(weight_decay >= 0, "TrainConfig: weight decay must be >= 0");
  }
};

struct MetricRow {
  Index step = 0;
  double total_loss = 0, mlm_loss = 0, nsp_loss = 0;
  double mlm_acc = 0, task_acc = 0;
  double ms_per_step = 0;
};

inline std::string metrics_csv_header() {
  return "step,total_loss,mlm_loss,nsp_loss,mlm_acc,task_acc,ms_per_step";
}

inline std::string metrics_to_csv(const std::vector<MetricRow>& rows) {
  std::string out = metrics_csv_header() + "\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%lld,%.12g,%.12g,%.12g,%.6f,%.6f,%.3f\n",
                  static_cast<long long>(r.step), r.total_loss, r.mlm_loss,
                  r.nsp_loss, r.mlm_acc, r.task_acc, r.ms_per_step);
    out += buf;
  }
  return out;
}

enum class TaskKind { Pretrain, Recall };

struct TaskSpec {
  TaskKind kind = TaskKind::Recall;
  RecallSpec recall;
  CorpusSpec corpus;
  double mask_rate = 0.15;
  ToyVocab vocab;
};

// ---------------------------------------------------------------------------
// Adam with bias correction, decoupled weight decay (biases and norm
// parameters excluded), linear warmup followed by linear decay to zero,
// and global-norm gradient clipping. Frozen tensors are never touched.
// ---------------------------------------------------------------------------

struct AdamState {
  std::vector<Tensor<double>> m, v;  // parallel to the param store

  static AdamState init(const ParamStore<double>& params) {
    AdamState s;
    s.m.reserve(size_t(params.size()));
    s.v.reserve(size_t(params.size()));
    for (Index i = 0; i < params.size(); ++i) {
      s.m.emplace_back(params.tensors[size_t(i)].dims());
      s.v.emplace_back(params.tensors[size_t(i)].dims());
    }
    return s;
  }
};

inline double lr_at(const TrainConfig& c, Index step) {
  if (c.total_steps == 0) return 0.0;
  if (c.warmup_steps > 0 && step <= c.warmup_steps)
    return c.base_learning_rate * double(step) / double(c.warmup_steps);
  const double denom = double(std::max<Index>(1, c.total_steps - c.warmup_steps));
  return c.base_learning_rate * double(c.total_steps - step) / denom;
}

inline bool weight_decay_excluded(const std::string& name) {
  const auto dot = name.rfind('.');
  const std::string leaf = dot == std::string::npos ? name : name.substr(dot + 1);
  return !leaf.empty() && (leaf[0] == 'b' || leaf == "gamma" || leaf == "beta");
}

// Scales all gradients so the global norm does not exceed max_norm;
// returns the pre-clip norm.
inline double clip_global_norm(std::vector<Tensor<double>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    if (g.size() > 0) sq += double((g.array() * g.array()).sum());
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const double s = max_norm / norm;
    for (auto& g : grads)
      if (g.size() > 0) g.array() *= s;
  }
  return norm;
}

inline void adam_step(ParamStore<double>& params, std::vector<Tensor<double>> grads,
                      AdamState& state, Index step, const TrainConfig& cfg) {
  require(Index(grads.size()) == params.size() &&
              Index(state.m.size()) == params.size(),
          "adam_step: dim trees disagree");
  clip_global_norm(grads, cfg.clip_norm);
  const double lr = lr_at(cfg, step);
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, double(step));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, double(step));
  for (Index i = 0; i < params.size(); ++i) {
    if (!params.trainable[size_t(i)]) continue;
    Tensor<double>& p = params.tensors[size_t(i)];
    const Tensor<double>& g = grads[size_t(i)];
    require_dims(g.size() == 0 || g.same_dims(p), "adam_step: grad dims mismatch");
    if (g.size() == 0) continue;  // parameter unused in this graph
    auto m = state.m[size_t(i)].array();
    auto v = state.v[size_t(i)].array();
    m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g.array();
    v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g.array().square();
    const bool decay = cfg.weight_decay > 0 &&
                       !weight_decay_excluded(params.names[size_t(i)]);
    auto update = (m / bc1) / ((v / bc2).sqrt() + cfg.adam_eps);
    if (decay)
      p.array() -= lr * (update + cfg.weight_decay * p.array());
    else
      p.array() -= lr * update;
  }
}

// ---------------------------------------------------------------------------
// Batch assembly. Per-example seeds are hash(task seed, example index),
// so parallel or re-ordered generation cannot change the data.
// ---------------------------------------------------------------------------

struct LossBatch {
  TokenBatch tokens;
  std::vector<Index> positions;        // flat rows feeding the MLM head
  std::vector<std::int32_t> labels;    // per position
  std::vector<std::int32_t> nsp_labels;
};

namespace detail {

inline LossBatch make_recall_batch(const TaskSpec& task, const ModelConfig& mcfg,
                                   std::uint64_t stream_seed, Index first_index,
                                   Index count) {
  LossBatch b;
  b.tokens.batch = count;
  b.tokens.n = mcfg.n;
  b.tokens.ids.resize(size_t(count * mcfg.n));
  b.tokens.type_ids.assign(size_t(count * mcfg.n), 0);
  const Index value_base = task.recall.value_base(task.vocab);
  for (Index e = 0; e < count; ++e) {
    const auto ex = make_associative_recall(
        hash_combine(stream_seed, std::uint64_t(first_index + e)), mcfg.n,
        task.recall, task.vocab);
    std::copy(ex.ids.begin(), ex.ids.end(),
              b.tokens.ids.begin() + long(e * mcfg.n));
    b.positions.push_back(e * mcfg.n + ex.query_pos);
    b.labels.push_back(std::int32_t(Index(ex.target) - value_base));
  }
  return b;
}

inline LossBatch make_pretrain_batch(const TaskSpec& task,
                                     const std::vector<Document>& corpus,
                                     const ModelConfig& mcfg,
                                     std::uint64_t stream_seed, Index first_index,
                                     Index count) {
  LossBatch b;
  b.tokens.batch = count;
  b.tokens.n = mcfg.n;
  b.tokens.ids.resize(size_t(count * mcfg.n));
  b.tokens.type_ids.resize(size_t(count * mcfg.n));
  for (Index e = 0; e < count; ++e) {
    Rng rng(hash_combine(stream_seed, std::uint64_t(first_index + e)));
    const auto ex = make_mlm_nsp(corpus, task.vocab, mcfg.n, task.mask_rate, rng);
    std::copy(ex.input_ids.begin(), ex.input_ids.end(),
              b.tokens.ids.begin() + long(e * mcfg.n));
    std::copy(ex.type_ids.begin(), ex.type_ids.end(),
              b.tokens.type_ids.begin() + long(e * mcfg.n));
    for (size_t k = 0; k < ex.mask_positions.size(); ++k) {
      b.positions.push_back(e * mcfg.n + ex.mask_positions[k]);
      b.labels.push_back(ex.mask_labels[k]);
    }
    b.nsp_labels.push_back(std::int32_t(ex.nsp_label));
  }
  return b;
}

struct LossNodes {
  Var total;  // scalar
  Var head_logits;
  Var nsp_logits;  // invalid for recall
  double mlm_loss = 0, nsp_loss = 0;
};

// Records forward + loss for one batch on the given tape.
inline LossNodes build_loss(Tape<double>& tape, const EncoderModel<double>& model,
                            const TaskSpec& task, const LossBatch& b,
                            ops::Mode mode, Rng dropout_rng) {
  ModelGraph<double> g(tape, model, mode, dropout_rng);
  auto enc = g.forward(b.tokens);
  LossNodes out;
  if (task.kind == TaskKind::Recall) {
    Var logits = g.mlm_logits(enc.seq, b.positions);
    // Classification is over the value alphabet: a contiguous slice of
    // the vocabulary columns.
    const Index base = task.recall.value_base(task.vocab);
    Var slice = ops::block2d(tape, logits, 0, base, Index(b.positions.size()),
                             task.recall.value_symbols);
    Var ce = ops::cross_entropy_sum(tape, slice, b.labels);
    out.total = ops::scale(tape, ce, 1.0 / double(b.tokens.batch));
    out.head_logits = slice;
    return out;
  }
  Var parts{-1};
  double mlm = 0;
  if (!b.positions.empty()) {
    Var logits = g.mlm_logits(enc.seq, b.positions);
    Var ce = ops::cross_entropy_sum(tape, logits, b.labels);
    parts = ops::scale(tape, ce, 1.0 / double(b.positions.size()));
    out.head_logits = logits;
    mlm = tape.value(parts).item();
  }
  Var nsp = g.nsp_logits(enc.pooled);
  Var nsp_ce = ops::scale(tape, ops::cross_entropy_sum(tape, nsp, b.nsp_labels),
                          1.0 / double(b.tokens.batch));
  out.nsp_logits = nsp;
  out.nsp_loss = tape.value(nsp_ce).item();
  out.mlm_loss = mlm;
  out.total = parts.valid() ? ops::add(tape, parts, nsp_ce) : nsp_ce;
  return out;
}

inline Index argmax_row(const Tensor<double>& t, Index row) {
  Index best = 0;
  for (Index c = 1; c < t.cols(); ++c)
    if (t.at(row, c) > t.at(row, best)) best = c;
  return best;
}

}  // namespace detail

struct EvalMetrics {
  double total_loss = 0, mlm_loss = 0, nsp_loss = 0;
  double mlm_acc = 0, task_acc = 0;
};

// Deterministic evaluation: dropout off, fixed example stream.
inline EvalMetrics evaluate(const EncoderModel<double>& model, const TaskSpec& task,
                            Index num_examples, std::uint64_t seed,
                            const std::vector<Document>* corpus = nullptr) {
  EvalMetrics m;
  const std::uint64_t stream = hash_combine(seed, 0x6576616cull);
  const Index batch = std::min<Index>(num_examples, 64);
  Index done = 0;
  Index head_hits = 0, head_total = 0, nsp_hits = 0, nsp_total = 0;
  double loss_sum = 0, mlm_sum = 0, nsp_sum = 0;
  Index batches = 0;
  while (done < num_examples) {
    const Index count = std::min(batch, num_examples - done);
    LossBatch b = task.kind == TaskKind::Recall
                      ? detail::make_recall_batch(task, model.cfg, stream, done, count)
                      : detail::make_pretrain_batch(task, *corpus, model.cfg,
                                                    stream, done, count);
    Tape<double> tape;
    auto nodes = detail::build_loss(tape, model, task, b, ops::Mode::Eval, Rng(0));
    loss_sum += tape.value(nodes.total).item();
    mlm_sum += nodes.mlm_loss;
    nsp_sum += nodes.nsp_loss;
    ++batches;
    if (nodes.head_logits.valid()) {
      const auto& logits = tape.value(nodes.head_logits);
      for (Index r = 0; r < logits.rows(); ++r) {
        head_hits += detail::argmax_row(logits, r) == Index(b.labels[size_t(r)]);
        ++head_total;
      }
    }
    if (nodes.nsp_logits.valid()) {
      const auto& logits = tape.value(nodes.nsp_logits);
      for (Index r = 0; r < logits.rows(); ++r) {
        nsp_hits += detail::argmax_row(logits, r) == Index(b.nsp_labels[size_t(r)]);
        ++nsp_total;
      }
    }
    done += count;
  }
  m.total_loss = loss_sum / double(std::max<Index>(1, batches));
  m.mlm_loss = mlm_sum / double(std::max<Index>(1, batches));
  m.nsp_loss = nsp_sum / double(std::max<Index>(1, batches));
  const double head_acc =
      head_total ? double(head_hits) / double(head_total) : 0.0;
  if (task.kind == TaskKind::Recall) {
    m.task_acc = head_acc;
  } else {
    m.mlm_acc = head_acc;
    m.task_acc = nsp_total ? double(nsp_hits) / double(nsp_total) : 0.0;
  }
  return m;
}

struct TrainResult {
  EncoderModel<double> model;
  std::vector<MetricRow> log;
  std::vector<double> step_losses;  // training loss at every step
  bool diverged = false;
  Index diverged_step = -1;
  std::string divergence_note;
  MetricRow final_row;
};

// Full optimization loop. Deterministic given (configs, seed); metric
// rows are written at step 0, every eval_every steps, and at the end.
inline TrainResult train(
    const ModelConfig& mcfg, const TrainConfig& tcfg, const TaskSpec& task,
    std::ostream* console = nullptr,
    const std::function<void(Index, const EncoderModel<double>&)>& checkpoint_hook = {},
    const EncoderModel<double>* initial = nullptr) {
  mcfg.validate();
  tcfg.validate();
  TrainResult res;
  res.model = initial ? *initial : EncoderModel<double>::init(mcfg);
  require(res.model.params.size() == Index(param_shapes(mcfg).size()),
          "train: initial model does not match the config");
  AdamState adam = AdamState::init(res.model.params);

  std::vector<Document> corpus;
  const std::vector<Document>* corpus_ptr = nullptr;
  if (task.kind == TaskKind::Pretrain) {
    corpus = generate_corpus(hash_combine(tcfg.seed, 0x636f7270ull), task.corpus,
                             task.vocab);
    corpus_ptr = &corpus;
  }
  const std::uint64_t data_stream = hash_combine(tcfg.seed, 0x64617461ull);

  auto emit_row = [&](Index step, double window_loss, double window_mlm,
                      double window_nsp, double ms) {
    const EvalMetrics em = evaluate(res.model, task, tcfg.eval_examples,
                                    tcfg.seed, corpus_ptr);
    MetricRow row;
    row.step = step;
    row.total_loss = step == 0 ? em.total_loss : window_loss;
    row.mlm_loss = step == 0 ? em.mlm_loss : window_mlm;
    row.nsp_loss = step == 0 ? em.nsp_loss : window_nsp;
    row.mlm_acc = em.mlm_acc;
    row.task_acc = em.task_acc;
    row.ms_per_step = ms;
    res.log.push_back(row);
    if (console) {
      char line[256];
      std::snprintf(line, sizeof(line),
                    "step %6lld  loss %.4f  mlm_acc %.3f  task_acc %.3f  (%.1f ms/step)",
                    static_cast<long long>(step), row.total_loss, row.mlm_acc,
                    row.task_acc, ms);
      (*console) << line << std::endl;
    }
    return em;
  };

  emit_row(0, 0, 0, 0, 0);

  double wl = 0, wm = 0, wn = 0;
  Index window = 0;
  Index streak = 0;
  auto window_start = std::chrono::steady_clock::now();
  for (Index step = 1; step <= tcfg.total_steps; ++step) {
    LossBatch b = task.kind == TaskKind::Recall
                      ? detail::make_recall_batch(task, mcfg, data_stream,
                                                  (step - 1) * tcfg.batch_size,
                                                  tcfg.batch_size)
                      : detail::make_pretrain_batch(task, corpus, mcfg, data_stream,
                                                    (step - 1) * tcfg.batch_size,
                                                    tcfg.batch_size);
    Tape<double> tape;
    auto nodes = detail::build_loss(tape, res.model, task, b, ops::Mode::Train,
                                    Rng(hash_combine(tcfg.seed, std::uint64_t(step))));
    const double loss = tape.value(nodes.total).item();
    res.step_losses.push_back(loss);
    if (!std::isfinite(loss)) {
      res.diverged = true;
      res.diverged_step = step;
      char note[256];
      std::snprintf(note, sizeof(note),
                    "training diverged at step %lld (non-finite loss); "
                    "last finite metrics: loss %.6g",
                    static_cast<long long>(step),
                    res.log.empty() ? 0.0 : res.log.back().total_loss);
      res.divergence_note = note;
      if (console) (*console) << note << std::endl;
      break;
    }
    wl += loss;
    wm += nodes.mlm_loss;
    wn += nodes.nsp_loss;
    ++window;

    tape.backward(nodes.total, {.release_memory = true});
    std::vector<Tensor<double>> grads;
    grads.reserve(size_t(res.model.params.size()));
    {
      // Leaves bound during build_loss; unused params yield empty grads.
      for (Index i = 0; i < res.model.params.size(); ++i) {
        Var leaf = tape.find_leaf(res.model.params.tensors[size_t(i)]);
        if (leaf.valid() && tape.has_grad(leaf))
          grads.push_back(tape.grad(leaf));
        else
          grads.emplace_back();
      }
    }
    adam_step(res.model.params, std::move(grads), adam, step, tcfg);

    if (checkpoint_hook && tcfg.checkpoint_every > 0 &&
        step % tcfg.checkpoint_every == 0)
      checkpoint_hook(step, res.model);

    const bool last = step == tcfg.total_steps;
    if (step % tcfg.eval_every == 0 || last) {
      const auto now = std::chrono::steady_clock::now();
      const double ms =
          std::chrono::duration<double, std::milli>(now - window_start).count() /
          double(std::max<Index>(1, window));
      const EvalMetrics em = emit_row(step, wl / double(window), wm / double(window),
                                      wn / double(window), ms);
      wl = wm = wn = 0;
      window = 0;
      window_start = std::chrono::steady_clock::now();
      if (tcfg.stop_accuracy > 0) {
        streak = em.task_acc >= tcfg.stop_accuracy ? streak + 1 : 0;
        if (streak >= tcfg.stop_patience) break;
      }
    }
  }
  res.final_row = res.log.back();
  return res;
}

}  // namespace fnetlab
