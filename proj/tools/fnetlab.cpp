// fnetlab command-line driver: training runs, benchmarks, FLOP and
// parameter accounting, and the gradient-check suite, all wired through
// the key=value run configuration.
//
// Exit codes: 0 success, 1 usage/config error, 2 runtime failure,
// 3 check failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "fnetlab/bench.hpp"
#include "fnetlab/checkpoint.hpp"
#include "fnetlab/gradcheck_suite.hpp"
#include "fnetlab/report.hpp"
#include "fnetlab/runconfig.hpp"

namespace fs = std::filesystem;
using namespace fnetlab;

namespace {

constexpr int kExitOk = 0, kExitUsage = 1, kExitRuntime = 2, kExitCheck = 3;

void print_usage(std::ostream& os) {
  os << "usage: fnetlab <subcommand> [--config FILE] [--KEY VALUE]... [--quick]\n"
        "\n"
        "subcommands:\n"
        "  train      optimize a model on the selected task; writes metrics.csv,\n"
        "             config.txt and model.fnt1 into out_dir\n"
        "  bench      time mixing sublayers in isolation across lengths\n"
        "  sweep      full-model sequence-length scaling study (timing + charts)\n"
        "  flops      analytic forward-pass FLOP table per variant\n"
        "  params     learnable-parameter table per variant\n"
        "  gradcheck  finite-difference check of every backward rule\n"
        "\n"
        "environment: FNETLAB_THREADS caps row-transform workers (default 1)\n"
        "\n";
  RunConfig::print_help(os);
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(bool(os), "cannot write " + path.string());
  os << content;
  require(bool(os), "write failed: " + path.string());
}

fs::path prepare_out_dir(const RunConfig& rc) {
  const fs::path dir(rc.str("out_dir"));
  std::error_code ec;
  fs::create_directories(dir, ec);
  write_file(dir / "config.txt", rc.echo());
  return dir;
}

MixingKind kind_for_variant(const std::string& variant) {
  if (variant == "bert") return MixingKind::Attention;
  if (variant == "linear") return MixingKind::Linear;
  if (variant == "random") return MixingKind::Random;
  if (variant == "ff_only") return MixingKind::Identity;
  if (variant == "fnet_fft" || variant == "fnet") return MixingKind::FourierFft;
  if (variant == "fnet_mat") return MixingKind::FourierMatrix;
  if (variant == "fnet_1d") return MixingKind::FourierSeqOnly;
  return mixing_kind_from_string(variant);
}

int cmd_train(const RunConfig& rc) {
  const ModelConfig mcfg = rc.model_config();
  const TrainConfig tcfg = rc.train_config();
  const TaskSpec task = rc.task_spec();
  const fs::path dir = prepare_out_dir(rc);

  std::function<void(Index, const EncoderModel<double>&)> hook;
  if (tcfg.checkpoint_every > 0) {
    hook = [&dir](Index step, const EncoderModel<double>& m) {
      save_checkpoint(m,
                      (dir / ("model_step" + std::to_string(step) + ".fnt1")).string());
    };
  }
  TrainResult res = train(mcfg, tcfg, task, &std::cout, hook);
  write_file(dir / "metrics.csv", metrics_to_csv(res.log));
  save_checkpoint(res.model, (dir / "model.fnt1").string());
  if (res.diverged) {
    std::cerr << res.divergence_note << "\n";
    return kExitRuntime;
  }
  std::cout << "done: final task_acc " << res.final_row.task_acc << ", outputs in "
            << dir.string() << "\n";
  return kExitOk;
}

template <typename S>
std::vector<BenchRecord> run_mixing_bench(const RunConfig& rc) {
  const SweepOptions sw = rc.sweep_options();
  const BenchDirection dir = rc.str("bench_direction") == "fwd"
                                 ? BenchDirection::Forward
                                 : BenchDirection::ForwardBackward;
  std::vector<BenchRecord> records;
  for (const std::string& variant : sw.variants) {
    const MixingKind kind = kind_for_variant(variant);
    for (Index n : sw.lengths) {
      BenchRecord r =
          time_mixing_sublayer<S>(kind, n, sw.d_h, sw.batch, dir, sw.timing);
      records.push_back(r);
      std::cout << r.variant << " n=" << r.n << " " << to_string(r.phase) << ": "
                << (r.ok() ? std::to_string(r.median_ms) + " ms" : r.status)
                << "\n";
    }
  }
  return records;
}

int cmd_bench(const RunConfig& rc) {
  const fs::path dir = prepare_out_dir(rc);
  std::vector<BenchRecord> records = rc.str("bench_dtype") == "f32"
                                         ? run_mixing_bench<float>(rc)
                                         : run_mixing_bench<double>(rc);
  emit_report(records, dir.string());
  std::cout << "wrote " << (dir / "records.csv").string() << "\n";
  return kExitOk;
}

int cmd_sweep(const RunConfig& rc) {
  const fs::path dir = prepare_out_dir(rc);
  const SweepOptions sw = rc.sweep_options();
  std::vector<BenchRecord> records = rc.str("bench_dtype") == "f32"
                                         ? sweep_sequence_lengths<float>(sw)
                                         : sweep_sequence_lengths<double>(sw);
  for (const auto& r : records)
    std::cout << r.variant << " n=" << r.n << " " << to_string(r.phase) << ": "
              << (r.ok() ? std::to_string(r.median_ms) + " ms" : r.status) << "\n";
  emit_report(records, dir.string());

  std::ostringstream summary;
  for (BenchPhase phase : sw.phases) {
    const Index crossover = fft_vs_matrix_crossover(records, phase);
    summary << "fft_vs_matrix_crossover_" << to_string(phase) << " = "
            << (crossover < 0 ? std::string("none") : std::to_string(crossover))
            << "\n";
    for (const std::string& v : sw.variants) {
      if (v == "bert") continue;
      for (const auto& [n, s] : speedup_vs_attention(records, v, phase))
        summary << "speedup_" << to_string(phase) << "_" << v << "_n" << n << " = "
                << s << "\n";
    }
  }
  write_file(dir / "summary.txt", summary.str());
  std::cout << summary.str();
  return kExitOk;
}

int cmd_flops(const RunConfig& rc) {
  const fs::path dir = prepare_out_dir(rc);
  std::vector<std::string> variants = {rc.str("variant")};
  if (rc.str("variant") == RunConfig().str("variant"))
    variants = rc.str_list("bench_variants");
  const ModelConfig base = rc.model_config(/*for_runtime=*/false);
  std::ostringstream csv;
  csv << "variant,mixing,feed_forward,heads,pointwise,total_gflops\n";
  for (const std::string& v : variants) {
    const FlopBreakdown fb = flops_forward(base, v);
    char line[256];
    std::snprintf(line, sizeof(line),
                  "%-12s mixing %8.3f  ff %8.3f  heads %7.3f  pointwise %6.3f  "
                  "total %8.2f GFLOPs",
                  v.c_str(), fb.mixing / 1e9, fb.feed_forward / 1e9, fb.heads / 1e9,
                  fb.pointwise / 1e9, fb.total() / 1e9);
    std::cout << line << "\n";
    char row[256];
    std::snprintf(row, sizeof(row), "%s,%.0f,%.0f,%.0f,%.0f,%.4f\n", v.c_str(),
                  fb.mixing, fb.feed_forward, fb.heads, fb.pointwise,
                  fb.total() / 1e9);
    csv << row;
  }
  write_file(dir / "flops.csv", csv.str());
  return kExitOk;
}

int cmd_params(const RunConfig& rc) {
  const fs::path dir = prepare_out_dir(rc);
  std::vector<std::string> variants = {rc.str("variant")};
  if (rc.str("variant") == RunConfig().str("variant"))
    variants = rc.str_list("bench_variants");
  ModelConfig base = rc.model_config(/*for_runtime=*/false);
  std::ostringstream csv;
  csv << "variant,embeddings,mixing,feed_forward,norms,pooler,heads,total\n";
  for (const std::string& v : variants) {
    ModelConfig c = base;
    c.mixing_plan = analytic_plan(v, c.num_layers);
    const ParamCounts pc = count_params(c);
    auto comp = [&](const char* k) {
      auto it = pc.by_component.find(k);
      return it == pc.by_component.end() ? Index(0) : it->second;
    };
    char line[256];
    std::snprintf(line, sizeof(line),
                  "%-12s emb %7.2fM  mixing %7.2fM  ff %7.2fM  heads %6.2fM  "
                  "total %8.2fM",
                  v.c_str(), double(comp("embeddings")) / 1e6,
                  double(comp("mixing")) / 1e6, double(comp("feed_forward")) / 1e6,
                  double(comp("heads")) / 1e6, double(pc.total) / 1e6);
    std::cout << line << "\n";
    char row[256];
    std::snprintf(row, sizeof(row), "%s,%lld,%lld,%lld,%lld,%lld,%lld,%lld\n",
                  v.c_str(), (long long)comp("embeddings"),
                  (long long)comp("mixing"), (long long)comp("feed_forward"),
                  (long long)comp("norms"), (long long)comp("pooler"),
                  (long long)comp("heads"), (long long)pc.total);
    csv << row;
  }
  write_file(dir / "params.csv", csv.str());
  return kExitOk;
}

int cmd_gradcheck(bool corrupt_fixture) {
  std::vector<GradSuiteRow> rows = run_gradcheck_suite(/*coords_per_tensor=*/10);
  if (corrupt_fixture) {
    // deliberately broken rule; the harness must flag it
    Rng prng(99);
    TensorD x = TensorD::randn({6}, prng);
    auto res = grad_check(x, [](Tape<double>& t, Var v) {
      Tensor<double> out = t.value(v);
      out.array() *= 2.0;
      Var y = t.emit(std::move(out), {v},
                     [](Tape<double>::BwdCtx& c) {
                       c.gin(0).array() += 3.0 * c.g().array();
                     },
                     "corrupt_fixture");
      return ops::sum(t, y);
    });
    rows.push_back(GradSuiteRow{"corrupt_fixture", res.max_rel_err});
  }
  bool failed = false;
  for (const auto& r : rows) {
    const bool bad = !(r.max_rel_err < 1e-4);
    failed |= bad;
    char line[160];
    std::snprintf(line, sizeof(line), "%-22s max rel err %.3e  %s", r.name.c_str(),
                  r.max_rel_err, bad ? "FAIL" : "ok");
    std::cout << line << "\n";
  }
  if (failed) {
    for (const auto& r : rows)
      if (!(r.max_rel_err < 1e-4))
        std::cerr << "gradient check failed for " << r.name << "\n";
    return kExitCheck;
  }
  std::cout << "all gradient checks passed (tolerance 1e-4)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2 || std::string(argv[1]) == "--help" || std::string(argv[1]) == "-h") {
    print_usage(std::cout);
    return argc < 2 ? kExitUsage : kExitOk;
  }
  const std::string cmd = argv[1];

  if (const char* threads = std::getenv("FNETLAB_THREADS"))
    set_row_transform_threads(std::atoi(threads));

  RunConfig rc;
  bool corrupt_fixture = false;
  try {
    for (int i = 2; i < argc; ++i) {
      std::string arg = argv[i];
      if (arg == "--help" || arg == "-h") {
        print_usage(std::cout);
        return kExitOk;
      }
      if (arg == "--quick") {
        rc.set("quick", "1");
        continue;
      }
      if (arg == "--corrupt-fixture") {
        corrupt_fixture = true;
        continue;
      }
      if (arg.rfind("--", 0) != 0)
        throw Error("expected --key value, got '" + arg + "'");
      if (i + 1 >= argc) throw Error("missing value for " + arg);
      const std::string key = arg.substr(2);
      const std::string value = argv[++i];
      if (key == "config")
        rc.load_file(value);
      else
        rc.set(key, value);
    }
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (cmd == "train") return cmd_train(rc);
    if (cmd == "bench") return cmd_bench(rc);
    if (cmd == "sweep") return cmd_sweep(rc);
    if (cmd == "flops") return cmd_flops(rc);
    if (cmd == "params") return cmd_params(rc);
    if (cmd == "gradcheck") return cmd_gradcheck(corrupt_fixture);
    std::cerr << "unknown subcommand '" << cmd << "'\n\n";
    print_usage(std::cerr);
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
