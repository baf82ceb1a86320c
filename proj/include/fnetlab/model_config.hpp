#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fnetlab/common.hpp"

namespace fnetlab {

enum class MixingKind {
  FourierFft,
  FourierMatrix,
  FourierSeqOnly,
  Attention,
  Linear,
  Random,
  Identity,
  Hartley,
  Hadamard,
  Dct,
};

inline const char* to_string(MixingKind k) {
  switch (k) {
    case MixingKind::FourierFft: return "fourier_fft";
    case MixingKind::FourierMatrix: return "fourier_matrix";
    case MixingKind::FourierSeqOnly: return "fourier_seq_only";
    case MixingKind::Attention: return "attention";
    case MixingKind::Linear: return "linear";
    case MixingKind::Random: return "random";
    case MixingKind::Identity: return "identity";
    case MixingKind::Hartley: return "hartley";
    case MixingKind::Hadamard: return "hadamard";
    case MixingKind::Dct: return "dct";
  }
  return "?";
}

inline MixingKind mixing_kind_from_string(const std::string& s) {
  if (s == "fourier_fft") return MixingKind::FourierFft;
  if (s == "fourier_matrix") return MixingKind::FourierMatrix;
  if (s == "fourier_seq_only") return MixingKind::FourierSeqOnly;
  if (s == "attention") return MixingKind::Attention;
  if (s == "linear") return MixingKind::Linear;
  if (s == "random") return MixingKind::Random;
  if (s == "identity") return MixingKind::Identity;
  if (s == "hartley") return MixingKind::Hartley;
  if (s == "hadamard") return MixingKind::Hadamard;
  if (s == "dct") return MixingKind::Dct;
  throw Error("unknown mixing kind: " + s);
}

enum class HybridLayout { Bottom, Middle, Mixed, Top };

inline HybridLayout hybrid_layout_from_string(const std::string& s) {
  if (s == "bottom") return HybridLayout::Bottom;
  if (s == "middle") return HybridLayout::Middle;
  if (s == "mixed") return HybridLayout::Mixed;
  if (s == "top") return HybridLayout::Top;
  throw Error("unknown hybrid layout: " + s);
}

// Placement of attention sublayers in an otherwise-Fourier stack.
// BOTTOM fills the first layers, TOP the last, MIDDLE a centered
// contiguous run, MIXED spreads them evenly.
inline std::vector<MixingKind> build_layout(Index num_layers, Index num_attention,
                                            HybridLayout layout,
                                            MixingKind fourier_kind = MixingKind::FourierFft) {
  require(num_layers >= 0 && num_attention >= 0 && num_attention <= num_layers,
          "build_layout: attention count out of range");
  std::vector<MixingKind> plan(size_t(num_layers), fourier_kind);
  auto place = [&](Index i) { plan.at(size_t(i)) = MixingKind::Attention; };
  switch (layout) {
    case HybridLayout::Bottom:
      for (Index i = 0; i < num_attention; ++i) place(i);
      break;
    case HybridLayout::Top:
      for (Index i = 0; i < num_attention; ++i) place(num_layers - num_attention + i);
      break;
    case HybridLayout::Middle: {
      const Index start = (num_layers - num_attention) / 2;
      for (Index i = 0; i < num_attention; ++i) place(start + i);
      break;
    }
    case HybridLayout::Mixed:
      for (Index i = 0; i < num_attention; ++i)
        place(Index((2 * i + 1) * num_layers / (2 * num_attention)));
      break;
  }
  return plan;
}

struct ModelConfig {
  Index n = 64;           // max sequence length
  Index d_h = 64;         // hidden dimension
  Index d_ff = 256;       // feed-forward dimension
  Index num_layers = 4;
  Index heads = 1;
  Index vocab_size = 256;
  Index type_vocab_size = 2;
  double dropout_rate = 0.1;
  double layer_norm_eps = 1e-12;
  bool use_position_embeddings = true;
  bool tie_mlm_decoder = true;
  std::vector<MixingKind> mixing_plan;  // one kind per layer
  std::uint64_t seed = 42;

  bool has_kind(MixingKind k) const {
    for (MixingKind m : mixing_plan)
      if (m == k) return true;
    return false;
  }

  // Structural checks shared by the analytic models (parameter counts,
  // FLOPs, memory), which accept any extents.
  void validate_shape() const {
    require(n >= 1 && d_h >= 1 && d_ff >= 1 && vocab_size >= 5, "ModelConfig: bad sizes");
    require(Index(mixing_plan.size()) == num_layers,
            "ModelConfig: mixing_plan length must equal num_layers");
    if (has_kind(MixingKind::Attention))
      require(heads >= 1 && d_h % heads == 0,
              "ModelConfig: d_h must be divisible by heads");
  }

  // Full checks for a constructible model (radix-2 paths need
  // power-of-two extents).
  void validate() const {
    validate_shape();
    if (has_kind(MixingKind::FourierFft) && !(is_pow2(n) && is_pow2(d_h)))
      throw UnsupportedLengthError(
          "ModelConfig: fourier_fft needs power-of-two n and d_h");
    if (has_kind(MixingKind::Hadamard) && !(is_pow2(n) && is_pow2(d_h)))
      throw UnsupportedLengthError(
          "ModelConfig: hadamard needs power-of-two n and d_h");
    if (has_kind(MixingKind::FourierSeqOnly) && !is_pow2(n))
      throw UnsupportedLengthError(
          "ModelConfig: fourier_seq_only needs power-of-two n");
  }

  // Table-style preset: d_ff = 4 d_h and heads = d_h / 64.
  static ModelConfig bert_compatible(Index d_h, Index num_layers, Index n,
                                     Index vocab_size) {
    ModelConfig c;
    c.d_h = d_h;
    c.num_layers = num_layers;
    c.n = n;
    c.vocab_size = vocab_size;
    c.d_ff = 4 * d_h;
    c.heads = d_h >= 64 ? d_h / 64 : 1;
    return c;
  }

  std::string to_text() const;
  static ModelConfig from_text(const std::string& text);
};

// Mixing plan for a named model variant.
inline std::vector<MixingKind> plan_for_variant(const std::string& variant,
                                                Index num_layers, Index n,
                                                Index d_h) {
  const MixingKind auto_fourier = (is_pow2(n) && is_pow2(d_h))
                                      ? MixingKind::FourierFft
                                      : MixingKind::FourierMatrix;
  auto uniform = [&](MixingKind k) {
    return std::vector<MixingKind>(size_t(num_layers), k);
  };
  if (variant == "bert") return uniform(MixingKind::Attention);
  if (variant == "linear") return uniform(MixingKind::Linear);
  if (variant == "random") return uniform(MixingKind::Random);
  if (variant == "ff_only") return uniform(MixingKind::Identity);
  if (variant == "fnet") return uniform(auto_fourier);
  if (variant == "fnet_fft") return uniform(MixingKind::FourierFft);
  if (variant == "fnet_mat") return uniform(MixingKind::FourierMatrix);
  if (variant == "fnet_1d") return uniform(MixingKind::FourierSeqOnly);
  if (variant == "fnet_hybrid")
    return build_layout(num_layers, std::min<Index>(2, num_layers),
                        HybridLayout::Top, auto_fourier);
  if (variant == "hartley") return uniform(MixingKind::Hartley);
  if (variant == "hadamard") return uniform(MixingKind::Hadamard);
  if (variant == "dct") return uniform(MixingKind::Dct);
  throw Error("unknown model variant: " + variant);
}

// ---------------------------------------------------------------------------
// Canonical parameter manifest. Initialization, counting, checkpointing
// and the optimizer all iterate this same list, which is what makes the
// analytic count exact by construction.
// ---------------------------------------------------------------------------

struct ParamSpec {
  std::string name;
  std::vector<Index> dims;
  bool trainable = true;

  Index count() const {
    Index c = 1;
    for (Index d : dims) c *= d;
    return c;
  }
};

inline std::vector<ParamSpec> param_shapes(const ModelConfig& cfg) {
  cfg.validate_shape();
  const Index d = cfg.d_h, n = cfg.n, v = cfg.vocab_size;
  std::vector<ParamSpec> out;
  auto add = [&](std::string name, std::vector<Index> dims, bool trainable = true) {
    out.push_back({std::move(name), std::move(dims), trainable});
  };

  add("embeddings.word", {v, d});
  if (cfg.use_position_embeddings) add("embeddings.position", {n, d});
  add("embeddings.type", {cfg.type_vocab_size, d});
  add("embeddings.norm.gamma", {d});
  add("embeddings.norm.beta", {d});

  for (Index l = 0; l < cfg.num_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    const MixingKind k = cfg.mixing_plan[size_t(l)];
    switch (k) {
      case MixingKind::Attention:
        add(p + "att.wq", {d, d});
        add(p + "att.bq", {d});
        add(p + "att.wk", {d, d});
        add(p + "att.bk", {d});
        add(p + "att.wv", {d, d});
        add(p + "att.bv", {d});
        add(p + "att.wo", {d, d});
        add(p + "att.bo", {d});
        break;
      case MixingKind::Linear:
        add(p + "mix.w_seq", {n, n});
        add(p + "mix.w_hid", {d, d});
        break;
      case MixingKind::Random:
        // Constant mixing matrices: initialized from the seed, never
        // updated, excluded from the learnable-parameter count.
        add(p + "mix.r_seq", {n, n}, false);
        add(p + "mix.r_hid", {d, d}, false);
        break;
      default:
        break;  // parameter-free mixing
    }
    if (k != MixingKind::Identity) {
      // FF-only drops the whole mixing sublayer including its norm.
      add(p + "mixing_norm.gamma", {d});
      add(p + "mixing_norm.beta", {d});
    }
    add(p + "ff.w1", {d, cfg.d_ff});
    add(p + "ff.b1", {cfg.d_ff});
    add(p + "ff.w2", {cfg.d_ff, d});
    add(p + "ff.b2", {d});
    add(p + "ff_norm.gamma", {d});
    add(p + "ff_norm.beta", {d});
  }

  add("pooler.w", {d, d});
  add("pooler.b", {d});

  add("mlm.dense.w", {d, d});
  add("mlm.dense.b", {d});
  add("mlm.norm.gamma", {d});
  add("mlm.norm.beta", {d});
  if (!cfg.tie_mlm_decoder) add("mlm.decoder", {v, d});
  add("mlm.bias", {v});

  add("nsp.w", {d, 2});
  add("nsp.b", {2});
  return out;
}

struct ParamCounts {
  // Component label -> learnable element count. Frozen tensors are
  // excluded everywhere.
  std::map<std::string, Index> by_component;
  Index total = 0;
};

inline std::string param_component(const std::string& name) {
  if (name.rfind("embeddings.", 0) == 0) return "embeddings";
  if (name.rfind("pooler.", 0) == 0) return "pooler";
  if (name.rfind("mlm.", 0) == 0 || name.rfind("nsp.", 0) == 0) return "heads";
  if (name.find(".att.") != std::string::npos ||
      name.find(".mix.") != std::string::npos)
    return "mixing";
  if (name.find(".ff.") != std::string::npos) return "feed_forward";
  if (name.find("norm") != std::string::npos) return "norms";
  return "other";
}

inline ParamCounts count_params(const ModelConfig& cfg) {
  ParamCounts pc;
  for (const ParamSpec& s : param_shapes(cfg)) {
    if (!s.trainable) continue;
    pc.by_component[param_component(s.name)] += s.count();
    pc.total += s.count();
  }
  return pc;
}

// ---------------------------------------------------------------------------
// Config (de)serialization: plain key=value lines, embedded verbatim in
// checkpoints.
// ---------------------------------------------------------------------------

inline std::string ModelConfig::to_text() const {
  std::ostringstream os;
  os << "n = " << n << "\n";
  os << "d_h = " << d_h << "\n";
  os << "d_ff = " << d_ff << "\n";
  os << "num_layers = " << num_layers << "\n";
  os << "heads = " << heads << "\n";
  os << "vocab_size = " << vocab_size << "\n";
  os << "type_vocab_size = " << type_vocab_size << "\n";
  os << "dropout_rate = " << dropout_rate << "\n";
  os << "layer_norm_eps = " << layer_norm_eps << "\n";
  os << "use_position_embeddings = " << (use_position_embeddings ? 1 : 0) << "\n";
  os << "tie_mlm_decoder = " << (tie_mlm_decoder ? 1 : 0) << "\n";
  os << "seed = " << seed << "\n";
  os << "mixing_plan = ";
  for (size_t i = 0; i < mixing_plan.size(); ++i)
    os << (i ? "," : "") << to_string(mixing_plan[i]);
  os << "\n";
  return os.str();
}

inline ModelConfig ModelConfig::from_text(const std::string& text) {
  ModelConfig c;
  c.mixing_plan.clear();
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key == "n") c.n = std::stoll(val);
    else if (key == "d_h") c.d_h = std::stoll(val);
    else if (key == "d_ff") c.d_ff = std::stoll(val);
    else if (key == "num_layers") c.num_layers = std::stoll(val);
    else if (key == "heads") c.heads = std::stoll(val);
    else if (key == "vocab_size") c.vocab_size = std::stoll(val);
    else if (key == "type_vocab_size") c.type_vocab_size = std::stoll(val);
    else if (key == "dropout_rate") c.dropout_rate = std::stod(val);
    else if (key == "layer_norm_eps") c.layer_norm_eps = std::stod(val);
    else if (key == "use_position_embeddings") c.use_position_embeddings = val != "0";
    else if (key == "tie_mlm_decoder") c.tie_mlm_decoder = val != "0";
    else if (key == "seed") c.seed = std::stoull(val);
    else if (key == "mixing_plan") {
      std::istringstream ps(val);
      std::string item;
      while (std::getline(ps, item, ','))
        if (!item.empty()) c.mixing_plan.push_back(mixing_kind_from_string(item));
    } else {
      throw Error("ModelConfig: unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

}  // namespace fnetlab
