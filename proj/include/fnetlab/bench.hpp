#pragma once

#include <chrono>
#include <map>

#include "fnetlab/bench_record.hpp"
#include "fnetlab/trainer.hpp"

namespace fnetlab {

// ---------------------------------------------------------------------------
// Analytic FLOP model. Per-layer mixing costs are MAC counts (log base 2
// for the FFT form); a constant factor converts MACs to FLOPs.
// Attention's softmax and scaling live inside the 2 n^2 d_h term.
// ---------------------------------------------------------------------------

inline constexpr double kMacsToFlops = 2.0;

inline double mixing_layer_macs(MixingKind k, Index n, Index d) {
  const double nn = double(n), dd = double(d);
  switch (k) {
    case MixingKind::Attention: return 2 * nn * nn * dd + 4 * nn * dd * dd;
    case MixingKind::Linear:
    case MixingKind::Random:
    case MixingKind::FourierMatrix:
    case MixingKind::Dct: return nn * nn * dd + nn * dd * dd;
    case MixingKind::FourierFft:
    case MixingKind::Hartley:
    case MixingKind::Hadamard:
      return nn * dd * std::log2(nn) + nn * dd * std::log2(dd);
    case MixingKind::FourierSeqOnly: return nn * dd * std::log2(nn);
    case MixingKind::Identity: return 0;
  }
  return 0;
}

struct FlopBreakdown {
  double mixing = 0;        // all mixing sublayers
  double feed_forward = 0;  // both dense projections per layer
  double heads = 0;         // MLM dense + tied decode + pooler + NSP
  double pointwise = 0;     // GELU, layer norms, embedding adds, tanh
  double total() const { return mixing + feed_forward + heads + pointwise; }

  std::map<std::string, double> components() const {
    return {{"mixing", mixing},
            {"feed_forward", feed_forward},
            {"heads", heads},
            {"pointwise", pointwise}};
  }
};

// Forward-pass FLOPs for a single example. The MLM decode runs on the
// masked positions only (15% of n, the BERT budget).
inline FlopBreakdown flops_forward(const ModelConfig& cfg) {
  cfg.validate_shape();
  const double n = double(cfg.n), d = double(cfg.d_h), dff = double(cfg.d_ff);
  const double m = std::round(0.15 * n);  // decoded positions
  FlopBreakdown out;
  Index normed_layers = 0;
  for (MixingKind k : cfg.mixing_plan) {
    out.mixing += kMacsToFlops * mixing_layer_macs(k, cfg.n, cfg.d_h);
    normed_layers += k == MixingKind::Identity ? 1 : 2;
    out.pointwise += 15.0 * n * dff;  // GELU
  }
  out.feed_forward += kMacsToFlops * double(cfg.num_layers) * 2.0 * n * d * dff;
  out.heads = kMacsToFlops * (m * d * d                       // MLM dense
                              + m * d * double(cfg.vocab_size)  // tied decode
                              + d * d                           // pooler
                              + 2.0 * d);                       // NSP
  out.pointwise += 15.0 * m * d;                       // MLM GELU
  out.pointwise += 8.0 * (n * d * double(normed_layers)  // block norms
                          + n * d                          // embedding norm
                          + m * d);                        // MLM norm
  out.pointwise += 2.0 * n * d;  // embedding sums
  out.pointwise += 10.0 * d;     // pooler tanh
  return out;
}

// The analytic model evaluates the published cost forms at any dims;
// "fnet"/"fnet_hybrid" use the FFT cost regardless of whether the
// runtime radix-2 path could run them.
inline std::vector<MixingKind> analytic_plan(const std::string& variant,
                                             Index num_layers) {
  return plan_for_variant(variant, num_layers, /*n=*/1, /*d_h=*/1);
}

inline FlopBreakdown flops_forward(const ModelConfig& base_cfg,
                                   const std::string& variant) {
  ModelConfig cfg = base_cfg;
  cfg.mixing_plan = analytic_plan(variant, cfg.num_layers);
  return flops_forward(cfg);
}

// ---------------------------------------------------------------------------
// Analytic peak-memory model: parameter bytes plus the maximum
// simultaneous activation footprint along the forward/backward
// schedule. Training retains every layer's forward activations
// (attention keeps its scores/probs/dropout planes, heads x n^2 each);
// the Fourier complex intermediate is transient (2x the real plane per
// axis pass plus the transposed copies).
// ---------------------------------------------------------------------------

struct MemoryEstimate {
  double param_bytes = 0;
  double activation_bytes = 0;  // retained for backward (or one layer, inference)
  double transient_bytes = 0;   // short-lived peak on top of the retained set
  double total() const { return param_bytes + activation_bytes + transient_bytes; }
};

inline MemoryEstimate estimate_peak_memory(const ModelConfig& cfg, Index batch,
                                           Index dtype_bytes = 8,
                                           bool training = true) {
  cfg.validate_shape();
  const double n = double(cfg.n), d = double(cfg.d_h), dff = double(cfg.d_ff);
  const double m = std::round(0.15 * n);
  MemoryEstimate est;
  double params = 0;
  for (const ParamSpec& s : param_shapes(cfg)) params += double(s.count());
  est.param_bytes = params * double(dtype_bytes);

  double per_layer_max = 0, retained_sum = 0, transient_max = 0;
  for (MixingKind k : cfg.mixing_plan) {
    double layer = 2.0 * n * dff + 2.0 * n * d;  // FF intermediate+GELU, out, norm
    double transient = 0;
    if (k != MixingKind::Identity) layer += 2.0 * n * d;  // mixing out + norm
    switch (k) {
      case MixingKind::Attention: {
        const double h = double(cfg.heads);
        layer += 3.0 * n * d;          // q, k, v
        layer += 3.0 * h * n * n;      // scores, probs, dropout plane
        layer += n * d;                // per-head context
        transient = 2.0 * h * n * n;   // score/prob gradients in flight
        break;
      }
      case MixingKind::Linear:
      case MixingKind::Random:
      case MixingKind::Dct:
        transient = n * d;
        break;
      case MixingKind::FourierFft:
      case MixingKind::FourierMatrix:
      case MixingKind::FourierSeqOnly:
      case MixingKind::Hartley:
        transient = 4.0 * n * d;  // complex planes + transposed copies
        break;
      default:
        break;
    }
    retained_sum += layer;
    per_layer_max = std::max(per_layer_max, layer);
    transient_max = std::max(transient_max, transient);
  }
  const double embed = 2.0 * n * d;
  const double heads_act = m * d + m * double(cfg.vocab_size) + 2.0 * d;
  const double act = training ? retained_sum + embed + heads_act
                              : per_layer_max + embed + heads_act;
  est.activation_bytes = act * double(batch) * double(dtype_bytes);
  est.transient_bytes = transient_max * double(batch) * double(dtype_bytes);
  return est;
}

inline MemoryEstimate estimate_peak_memory(const ModelConfig& base_cfg,
                                           const std::string& variant, Index batch,
                                           Index dtype_bytes = 8,
                                           bool training = true) {
  ModelConfig cfg = base_cfg;
  cfg.mixing_plan = analytic_plan(variant, cfg.num_layers);
  return estimate_peak_memory(cfg, batch, dtype_bytes, training);
}

// ---------------------------------------------------------------------------
// Timing harness: medians over timed repeats after untimed warmups.
// ---------------------------------------------------------------------------

struct TimingOptions {
  int repeats = 5;
  int warmup = 2;
};

template <typename F>
double median_ms(F&& body, const TimingOptions& opts) {
  require(opts.repeats >= 1 && opts.warmup >= 0, "median_ms: bad repeat counts");
  for (int i = 0; i < opts.warmup; ++i) body();
  std::vector<double> times;
  times.reserve(size_t(opts.repeats));
  for (int i = 0; i < opts.repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  const size_t mid = times.size() / 2;
  return times.size() % 2 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
}

enum class BenchDirection { Forward, ForwardBackward };

// ---------------------------------------------------------------------------
// Mixing-sublayer-only timing: every other sublayer removed. The
// attention variant includes its Q/K/V/output projections; dropout is
// off everywhere (benchmarks are dropout-free).
// ---------------------------------------------------------------------------

template <typename S>
BenchRecord time_mixing_sublayer(MixingKind kind, Index n, Index d_h, Index batch,
                                 BenchDirection direction,
                                 const TimingOptions& opts = {}) {
  BenchRecord rec;
  rec.variant = to_string(kind);
  rec.n = n;
  rec.d_h = d_h;
  rec.layers = 1;
  rec.batch = batch;
  rec.phase = BenchPhase::MixingOnly;
  rec.repeats = opts.repeats;
  const double layer_flops = kMacsToFlops * mixing_layer_macs(kind, n, d_h);
  rec.flops = double(batch) * layer_flops *
              (direction == BenchDirection::Forward ? 1.0 : 3.0);
  try {
    ModelConfig cfg;
    cfg.n = n;
    cfg.d_h = d_h;
    cfg.d_ff = 4 * d_h;
    cfg.num_layers = 1;
    cfg.heads = d_h >= 64 ? d_h / 64 : 1;
    cfg.vocab_size = 64;
    cfg.dropout_rate = 0.0;
    cfg.mixing_plan = {kind};
    auto model = EncoderModel<S>::init(cfg);
    Rng rng(hash_combine(cfg.seed, 0x62656e63ull));
    Tensor<S> x = Tensor<S>::randn({batch * n, d_h}, rng);
    rec.peak_bytes =
        estimate_peak_memory(cfg, batch, Index(sizeof(S)),
                             direction == BenchDirection::ForwardBackward)
            .total();
    rec.median_ms = median_ms(
        [&] {
          Tape<S> tape;
          ModelGraph<S> g(tape, model, ops::Mode::Eval, Rng(0));
          Var out = g.mixing_sublayer(tape.leaf(x), 0, batch);
          if (direction == BenchDirection::ForwardBackward) {
            Var loss = ops::mean(tape, ops::mul(tape, out, out));
            tape.backward(loss, {.release_memory = true});
          }
        },
        opts);
    rec.steps_per_s = rec.median_ms > 0 ? 1000.0 / rec.median_ms : 0.0;
  } catch (const UnsupportedLengthError&) {
    rec.status = "unsupported_length";
  } catch (const std::bad_alloc&) {
    rec.status = "oom";
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Sequence-length scaling sweep over full models: forward passes and
// whole train steps (loss, backward, Adam update) per (variant, n).
// ---------------------------------------------------------------------------

struct SweepOptions {
  std::vector<std::string> variants = {"bert", "fnet_fft", "fnet_mat", "linear"};
  std::vector<Index> lengths = {128, 256, 512, 1024, 2048, 4096, 8192};
  Index d_h = 64;
  Index layers = 2;
  Index batch = 1;
  Index vocab = 256;
  std::vector<BenchPhase> phases = {BenchPhase::FullForward,
                                    BenchPhase::FullTrainStep};
  TimingOptions timing;
  std::uint64_t seed = 42;
};

namespace detail {

template <typename S>
BenchRecord sweep_cell(const SweepOptions& sw, const std::string& variant, Index n,
                       BenchPhase phase) {
  BenchRecord rec;
  rec.variant = variant;
  rec.n = n;
  rec.d_h = sw.d_h;
  rec.layers = sw.layers;
  rec.batch = sw.batch;
  rec.phase = phase;
  rec.repeats = sw.timing.repeats;
  try {
    ModelConfig cfg = ModelConfig::bert_compatible(sw.d_h, sw.layers, n, sw.vocab);
    cfg.dropout_rate = 0.0;
    cfg.seed = sw.seed;
    cfg.mixing_plan = plan_for_variant(variant, sw.layers, n, sw.d_h);
    cfg.validate();
    const FlopBreakdown fb = flops_forward(cfg);
    rec.flops = fb.total() * double(sw.batch) *
                (phase == BenchPhase::FullTrainStep ? 3.0 : 1.0);
    rec.peak_bytes = estimate_peak_memory(cfg, sw.batch, Index(sizeof(S)),
                                          phase == BenchPhase::FullTrainStep)
                         .total();

    auto model = EncoderModel<S>::init(cfg);
    // Synthetic batch: random content tokens, BERT-style 15% mask budget.
    Rng rng(hash_combine(sw.seed, std::uint64_t(n)));
    TokenBatch tb;
    tb.batch = sw.batch;
    tb.n = n;
    tb.ids.resize(size_t(sw.batch * n));
    tb.type_ids.assign(size_t(sw.batch * n), 0);
    for (auto& id : tb.ids)
      id = std::int32_t(4 + rng.below(std::uint64_t(cfg.vocab_size - 4)));
    const Index masked = std::max<Index>(1, Index(std::llround(0.15 * double(n))));
    std::vector<Index> positions;
    std::vector<std::int32_t> labels;
    std::vector<std::int32_t> nsp_labels;
    for (Index e = 0; e < sw.batch; ++e) {
      for (Index k = 0; k < masked; ++k) {
        const Index p = (k * n) / masked;
        positions.push_back(e * n + p);
        labels.push_back(tb.ids[size_t(e * n + p)]);
      }
      nsp_labels.push_back(std::int32_t(e & 1));
    }

    TrainConfig tc;
    tc.total_steps = 1u << 20;  // schedule effectively flat for timing
    tc.warmup_steps = 0;
    tc.seed = sw.seed;
    // The optimizer update is part of the timed train step in the
    // correctness dtype; the f32 speed mode times forward+backward.
    using StateT = std::conditional_t<std::is_same_v<S, double>, AdamState, int>;
    StateT adam{};
    if constexpr (std::is_same_v<S, double>) adam = AdamState::init(model.params);
    Index step = 0;

    rec.median_ms = median_ms(
        [&] {
          Tape<S> tape;
          ModelGraph<S> g(tape, model, ops::Mode::Eval, Rng(0));
          auto enc = g.forward(tb);
          if (phase == BenchPhase::FullForward || phase == BenchPhase::Inference) {
            Var logits = g.mlm_logits(enc.seq, positions);
            (void)logits;
            return;
          }
          Var logits = g.mlm_logits(enc.seq, positions);
          Var mlm = ops::scale(tape, ops::cross_entropy_sum(tape, logits, labels),
                               1.0 / double(positions.size()));
          Var nsp = ops::scale(
              tape, ops::cross_entropy_sum(tape, g.nsp_logits(enc.pooled), nsp_labels),
              1.0 / double(sw.batch));
          Var loss = ops::add(tape, mlm, nsp);
          tape.backward(loss, {.release_memory = true});
          if constexpr (std::is_same_v<S, double>) {
            std::vector<Tensor<double>> grads;
            for (Index i = 0; i < model.params.size(); ++i) {
              Var leaf = tape.find_leaf(model.params.tensors[size_t(i)]);
              if (leaf.valid() && tape.has_grad(leaf))
                grads.push_back(tape.grad(leaf));
              else
                grads.emplace_back();
            }
            adam_step(model.params, std::move(grads), adam, ++step, tc);
          }
        },
        sw.timing);
    rec.steps_per_s = rec.median_ms > 0 ? 1000.0 / rec.median_ms : 0.0;
  } catch (const UnsupportedLengthError&) {
    rec.status = "unsupported_length";
  } catch (const std::bad_alloc&) {
    rec.status = "oom";
  }
  return rec;
}

}  // namespace detail

template <typename S = double>
std::vector<BenchRecord> sweep_sequence_lengths(const SweepOptions& sw) {
  std::vector<BenchRecord> out;
  for (const std::string& variant : sw.variants)
    for (Index n : sw.lengths)
      for (BenchPhase phase : sw.phases)
        out.push_back(detail::sweep_cell<S>(sw, variant, n, phase));
  return out;
}

// Smallest length at which the FFT path beats the cached-matrix path;
// -1 when the sweep never crosses. Hardware-dependent, reported only.
inline Index fft_vs_matrix_crossover(const std::vector<BenchRecord>& records,
                                     BenchPhase phase) {
  std::map<Index, std::pair<double, double>> by_n;  // n -> (fft, mat)
  for (const auto& r : records) {
    if (r.phase != phase || !r.ok()) continue;
    if (r.variant == "fnet_fft") by_n[r.n].first = r.median_ms;
    if (r.variant == "fnet_mat") by_n[r.n].second = r.median_ms;
  }
  for (const auto& [n, pair] : by_n)
    if (pair.first > 0 && pair.second > 0 && pair.first < pair.second) return n;
  return -1;
}

// Speed-up multiplier of `variant` over the attention baseline at each
// length (present in both and ok).
inline std::map<Index, double> speedup_vs_attention(
    const std::vector<BenchRecord>& records, const std::string& variant,
    BenchPhase phase, const std::string& baseline = "bert") {
  std::map<Index, double> base, var;
  for (const auto& r : records) {
    if (r.phase != phase || !r.ok()) continue;
    if (r.variant == baseline) base[r.n] = r.median_ms;
    if (r.variant == variant) var[r.n] = r.median_ms;
  }
  std::map<Index, double> out;
  for (const auto& [n, ms] : var) {
    auto it = base.find(n);
    if (it != base.end() && ms > 0) out[n] = it->second / ms;
  }
  return out;
}

}  // namespace fnetlab
