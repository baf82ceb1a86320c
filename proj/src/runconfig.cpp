#include "fnetlab/runconfig.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

namespace fnetlab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<ConfigKey>& RunConfig::registry() {
  static const std::vector<ConfigKey> keys = {
      // model
      {"preset", "recall", "model size preset: recall | tiny | base | large | custom"},
      {"variant", "fnet_fft",
       "mixing plan: fnet_fft | fnet_mat | fnet | fnet_1d | fnet_hybrid | bert | "
       "linear | random | ff_only | hartley | hadamard | dct"},
      {"n", "0", "max sequence length (0 = from preset)"},
      {"d_h", "0", "hidden dimension (0 = from preset)"},
      {"d_ff", "0", "feed-forward dimension (0 = 4*d_h)"},
      {"num_layers", "0", "encoder layers (0 = from preset)"},
      {"heads", "0", "attention heads (0 = d_h/64, min 1)"},
      {"vocab_size", "0", "vocabulary size (0 = alphabet+4 for toy tasks, 32000 for base/large/tiny)"},
      {"dropout_rate", "0.1", "dropout probability in train mode"},
      {"layer_norm_eps", "1e-12", "layer norm epsilon"},
      {"use_position_embeddings", "1", "add absolute position embeddings"},
      {"tie_mlm_decoder", "1", "tie the MLM decoder to the word embeddings"},
      {"hybrid_attention_layers", "2", "attention sublayers in fnet_hybrid"},
      {"hybrid_layout", "top", "attention placement: bottom | middle | mixed | top"},
      // task
      {"task", "recall", "training task: recall | pretrain"},
      {"alphabet", "256", "toy vocabulary content symbols"},
      {"recall_pairs", "4", "key/value pairs per recall example"},
      {"recall_keys", "16", "key alphabet size for recall"},
      {"recall_values", "16", "value alphabet size for recall"},
      {"corpus_docs", "64", "documents in the synthetic corpus"},
      {"corpus_sentences", "16", "sentences per document"},
      {"mask_rate", "0.15", "MLM masking rate"},
      // trainer
      {"batch_size", "32", "examples per step"},
      {"total_steps", "3000", "optimization steps"},
      {"base_learning_rate", "1e-3", "peak learning rate"},
      {"warmup_steps", "300", "linear warmup steps"},
      {"adam_beta1", "0.9", "Adam beta1"},
      {"adam_beta2", "0.999", "Adam beta2"},
      {"adam_eps", "1e-6", "Adam epsilon"},
      {"weight_decay", "0.01", "decoupled weight decay (biases/norms excluded)"},
      {"clip_norm", "1.0", "global gradient-norm clip"},
      {"eval_every", "100", "steps between metric rows"},
      {"eval_examples", "512", "examples per evaluation"},
      {"stop_accuracy", "-1", "early-stop eval accuracy threshold (<0 = off)"},
      {"stop_patience", "2", "consecutive evals at threshold before stopping"},
      {"checkpoint_every", "0", "steps between periodic checkpoints (0 = final only)"},
      // bench
      {"bench_variants", "bert,fnet_fft,fnet_mat,linear",
       "comma list of variants to benchmark"},
      {"bench_lengths", "128,256,512,1024,2048,4096",
       "comma list of sequence lengths"},
      {"bench_d_h", "64", "hidden dimension for sweeps"},
      {"bench_layers", "2", "encoder layers for sweeps"},
      {"bench_batch", "1", "batch size for sweeps"},
      {"bench_repeats", "5", "timed repeats per cell (median reported)"},
      {"bench_warmup", "2", "untimed warmup repeats per cell"},
      {"bench_phases", "full_forward,full_train_step",
       "comma list: mixing_only | full_forward | full_train_step | inference"},
      {"bench_direction", "fwd_bwd", "mixing-only direction: fwd | fwd_bwd"},
      {"bench_dtype", "f64", "benchmark storage mode: f64 | f32"},
      {"parallel_rows", "0", "use the FNETLAB_THREADS row-transform workers"},
      // common
      {"seed", "42", "root RNG seed"},
      {"out_dir", "out", "output directory"},
      {"quick", "0", "smoke-test mode: reduces bench repeats to 3"},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const ConfigKey& k : registry()) values_[k.name] = k.def;
}

bool RunConfig::was_set(const std::string& key) const {
  auto it = explicit_.find(key);
  return it != explicit_.end() && it->second;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error("unknown config key '" + key + "'");
  it->second = value;
  explicit_[key] = true;
}

void RunConfig::load_text(const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(origin + ":" + std::to_string(lineno) +
                  ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      set(key, value);
    } catch (const Error& e) {
      throw Error(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open config file: " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  load_text(buf.str(), path);
}

const std::string& RunConfig::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error("unknown config key '" + key + "'");
  return it->second;
}

long long RunConfig::integer(const std::string& key) const {
  try {
    size_t pos = 0;
    const long long v = std::stoll(str(key), &pos);
    if (pos != str(key).size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error("config key '" + key + "' expects an integer, got '" + str(key) + "'");
  }
}

double RunConfig::real(const std::string& key) const {
  try {
    size_t pos = 0;
    const double v = std::stod(str(key), &pos);
    if (pos != str(key).size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error("config key '" + key + "' expects a number, got '" + str(key) + "'");
  }
}

bool RunConfig::flag(const std::string& key) const {
  const std::string& v = str(key);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw Error("config key '" + key + "' expects a boolean, got '" + v + "'");
}

std::vector<std::string> RunConfig::str_list(const std::string& key) const {
  std::vector<std::string> out;
  std::istringstream is(str(key));
  std::string item;
  while (std::getline(is, item, ','))
    if (!trim(item).empty()) out.push_back(trim(item));
  return out;
}

std::vector<Index> RunConfig::index_list(const std::string& key) const {
  std::vector<Index> out;
  for (const std::string& s : str_list(key)) {
    try {
      out.push_back(std::stoll(s));
    } catch (const std::exception&) {
      throw Error("config key '" + key + "' expects integers, got '" + s + "'");
    }
  }
  return out;
}

std::string RunConfig::echo() const {
  std::ostringstream os;
  os << "# effective fnetlab configuration\n";
  for (const ConfigKey& k : registry()) os << k.name << " = " << str(k.name) << "\n";
  return os.str();
}

void RunConfig::print_help(std::ostream& os) {
  os << "configuration keys (file `key = value` lines or --key value overrides):\n";
  for (const ConfigKey& k : registry()) {
    char line[160];
    std::snprintf(line, sizeof(line), "  %-26s default: %-28s %s", k.name, k.def,
                  k.help);
    os << line << "\n";
  }
}

ModelConfig RunConfig::model_config(bool for_runtime) const {
  ModelConfig c;
  const std::string preset = str("preset");
  if (preset == "base") {
    c = ModelConfig::bert_compatible(768, 12, 512, 32000);
  } else if (preset == "large") {
    c = ModelConfig::bert_compatible(1024, 24, 512, 32000);
  } else if (preset == "tiny") {
    c = ModelConfig::bert_compatible(128, 2, 512, 32000);
  } else if (preset == "recall" || preset == "custom") {
    c = ModelConfig::bert_compatible(64, 4, 64, 4 + integer("alphabet"));
  } else {
    throw Error("unknown preset '" + preset + "'");
  }
  if (integer("n") > 0) c.n = integer("n");
  if (integer("d_h") > 0) c.d_h = integer("d_h");
  c.d_ff = integer("d_ff") > 0 ? integer("d_ff") : 4 * c.d_h;
  if (integer("num_layers") > 0) c.num_layers = integer("num_layers");
  c.heads = integer("heads") > 0 ? integer("heads")
                                 : (c.d_h >= 64 ? c.d_h / 64 : 1);
  if (integer("vocab_size") > 0) c.vocab_size = integer("vocab_size");
  c.dropout_rate = real("dropout_rate");
  c.layer_norm_eps = real("layer_norm_eps");
  c.use_position_embeddings = flag("use_position_embeddings");
  c.tie_mlm_decoder = flag("tie_mlm_decoder");
  c.seed = std::uint64_t(integer("seed"));

  const std::string variant = str("variant");
  if (variant == "fnet_hybrid") {
    const MixingKind fourier = (!for_runtime || (is_pow2(c.n) && is_pow2(c.d_h)))
                                   ? MixingKind::FourierFft
                                   : MixingKind::FourierMatrix;
    c.mixing_plan =
        build_layout(c.num_layers, integer("hybrid_attention_layers"),
                     hybrid_layout_from_string(str("hybrid_layout")), fourier);
  } else if (for_runtime) {
    c.mixing_plan = plan_for_variant(variant, c.num_layers, c.n, c.d_h);
  } else {
    c.mixing_plan = plan_for_variant(variant, c.num_layers, 1, 1);
  }
  if (for_runtime)
    c.validate();
  else
    c.validate_shape();
  return c;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.batch_size = integer("batch_size");
  t.total_steps = integer("total_steps");
  t.base_learning_rate = real("base_learning_rate");
  t.warmup_steps = integer("warmup_steps");
  t.adam_beta1 = real("adam_beta1");
  t.adam_beta2 = real("adam_beta2");
  t.adam_eps = real("adam_eps");
  t.weight_decay = real("weight_decay");
  t.clip_norm = real("clip_norm");
  t.eval_every = integer("eval_every");
  t.eval_examples = integer("eval_examples");
  t.stop_accuracy = real("stop_accuracy");
  t.stop_patience = integer("stop_patience");
  t.checkpoint_every = integer("checkpoint_every");
  t.seed = std::uint64_t(integer("seed"));
  t.validate();
  return t;
}

TaskSpec RunConfig::task_spec() const {
  TaskSpec spec;
  const std::string task = str("task");
  if (task == "recall")
    spec.kind = TaskKind::Recall;
  else if (task == "pretrain")
    spec.kind = TaskKind::Pretrain;
  else
    throw Error("unknown task '" + task + "'");
  spec.vocab.alphabet = integer("alphabet");
  spec.recall.num_pairs = integer("recall_pairs");
  spec.recall.key_symbols = integer("recall_keys");
  spec.recall.value_symbols = integer("recall_values");
  spec.corpus.num_docs = integer("corpus_docs");
  spec.corpus.sentences_per_doc = integer("corpus_sentences");
  spec.mask_rate = real("mask_rate");
  return spec;
}

SweepOptions RunConfig::sweep_options() const {
  SweepOptions sw;
  sw.variants = str_list("bench_variants");
  sw.lengths = index_list("bench_lengths");
  sw.d_h = integer("bench_d_h");
  sw.layers = integer("bench_layers");
  sw.batch = integer("bench_batch");
  sw.vocab = 4 + integer("alphabet");
  sw.timing.repeats = flag("quick") ? 3 : int(integer("bench_repeats"));
  sw.timing.warmup = int(integer("bench_warmup"));
  sw.phases.clear();
  for (const std::string& p : str_list("bench_phases"))
    sw.phases.push_back(bench_phase_from_string(p));
  sw.seed = std::uint64_t(integer("seed"));
  return sw;
}

}  // namespace fnetlab
