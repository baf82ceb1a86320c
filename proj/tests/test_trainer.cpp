#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <sstream>

#include "fnetlab/trainer.hpp"

using namespace fnetlab;

namespace {

ModelConfig recall_model(const std::string& variant, Index n = 32, Index d_h = 32,
                         Index layers = 2) {
  ModelConfig c;
  c.n = n;
  c.d_h = d_h;
  c.d_ff = 4 * d_h;
  c.num_layers = layers;
  c.heads = d_h >= 64 ? d_h / 64 : 1;
  c.vocab_size = 64;
  c.dropout_rate = 0.0;
  c.mixing_plan = plan_for_variant(variant, layers, n, d_h);
  return c;
}

TaskSpec recall_task() {
  TaskSpec t;
  t.kind = TaskKind::Recall;
  t.recall.num_pairs = 2;
  t.recall.key_symbols = 8;
  t.recall.value_symbols = 8;
  t.vocab.alphabet = 60;
  return t;
}

// Strip the trailing ms_per_step column from a metrics CSV.
std::string drop_timing_column(const std::string& csv) {
  std::istringstream is(csv);
  std::string line, out;
  while (std::getline(is, line)) {
    const auto last = line.rfind(',');
    out += line.substr(0, last);
    out += "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("learning-rate schedule: linear warmup then linear decay to zero") {
  TrainConfig c;
  c.base_learning_rate = 0.1;
  c.total_steps = 1000;
  c.warmup_steps = 100;
  CHECK(lr_at(c, 1) == doctest::Approx(0.001));
  CHECK(lr_at(c, 100) == doctest::Approx(0.1));
  CHECK(lr_at(c, 550) == doctest::Approx(0.05));
  CHECK(lr_at(c, 1000) == doctest::Approx(0.0));
  c.warmup_steps = 0;
  CHECK(lr_at(c, 1) == doctest::Approx(0.1 * 999.0 / 1000.0));
}

TEST_CASE("weight decay exclusion rule") {
  CHECK(weight_decay_excluded("layer0.ff.b1"));
  CHECK(weight_decay_excluded("layer0.att.bq"));
  CHECK(weight_decay_excluded("layer0.ff_norm.gamma"));
  CHECK(weight_decay_excluded("embeddings.norm.beta"));
  CHECK(weight_decay_excluded("mlm.bias"));
  CHECK_FALSE(weight_decay_excluded("layer0.ff.w1"));
  CHECK_FALSE(weight_decay_excluded("embeddings.word"));
  CHECK_FALSE(weight_decay_excluded("pooler.w"));
}

TEST_CASE("gradient clipping bounds the global norm") {
  Rng rng(3);
  std::vector<TensorD> grads;
  grads.push_back(TensorD::randn({8, 8}, rng, 5.0));
  grads.push_back(TensorD::randn({16}, rng, 5.0));
  const double pre = clip_global_norm(grads, 1.0);
  CHECK(pre > 1.0);
  double sq = 0.0;
  for (const auto& g : grads) sq += (g.array() * g.array()).sum();
  CHECK(std::sqrt(sq) <= 1.0 + 1e-6);
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
  ModelConfig mc = recall_model("fnet_fft");
  auto model = EncoderModel<double>::init(mc);
  auto before = model.params.tensors;
  AdamState state = AdamState::init(model.params);
  TrainConfig tc;
  tc.weight_decay = 0.0;
  std::vector<TensorD> grads;
  for (Index i = 0; i < model.params.size(); ++i)
    grads.emplace_back(model.params.tensors[size_t(i)].dims());
  adam_step(model.params, grads, state, 1, tc);
  for (Index i = 0; i < model.params.size(); ++i)
    CHECK(std::memcmp(before[size_t(i)].data(), model.params.tensors[size_t(i)].data(),
                      sizeof(double) * size_t(before[size_t(i)].size())) == 0);
}

TEST_CASE("adam: quadratic converges within 500 steps at lr 0.01") {
  ParamStore<double> params;
  params.add("w", TensorD::scalar(1.0), true);
  AdamState state = AdamState::init(params);
  TrainConfig tc;
  tc.base_learning_rate = 0.01;
  tc.total_steps = 500;
  tc.warmup_steps = 0;
  tc.weight_decay = 0.0;
  tc.clip_norm = 1e9;
  for (Index step = 1; step <= 500; ++step) {
    std::vector<TensorD> grads;
    grads.push_back(TensorD::scalar(2.0 * params.tensors[0][0]));
    adam_step(params, grads, state, step, tc);
  }
  const double w = params.tensors[0][0];
  CHECK(w * w < 1e-3);
}

TEST_CASE("adam: opposite gradients produce opposite first moments") {
  TrainConfig tc;
  tc.weight_decay = 0.0;
  tc.clip_norm = 1e9;
  ParamStore<double> pa, pb;
  pa.add("w", TensorD::from({2}, {0.3, -0.4}), true);
  pb.add("w", TensorD::from({2}, {0.3, -0.4}), true);
  AdamState sa = AdamState::init(pa), sb = AdamState::init(pb);
  std::vector<TensorD> g1, g2;
  g1.push_back(TensorD::from({2}, {0.7, -1.1}));
  g2.push_back(TensorD::from({2}, {-0.7, 1.1}));
  adam_step(pa, g1, sa, 1, tc);
  adam_step(pb, g2, sb, 1, tc);
  for (Index i = 0; i < 2; ++i) {
    CHECK(sa.m[0][i] == doctest::Approx(-sb.m[0][i]).epsilon(1e-15));
    CHECK(sa.v[0][i] == doctest::Approx(sb.v[0][i]).epsilon(1e-15));
    // with equal second moments the updates are antisymmetric
    CHECK(pa.tensors[0][i] - 0.3 * (i == 0) + 0.4 * (i == 1) ==
          doctest::Approx(-(pb.tensors[0][i] - 0.3 * (i == 0) + 0.4 * (i == 1)))
              .epsilon(1e-12));
  }
}

TEST_CASE("zero steps returns the initialization bit-exactly") {
  ModelConfig mc = recall_model("fnet_fft");
  TrainConfig tc;
  tc.total_steps = 0;
  tc.warmup_steps = 0;
  tc.eval_examples = 32;
  auto res = train(mc, tc, recall_task());
  auto fresh = EncoderModel<double>::init(mc);
  for (Index i = 0; i < fresh.params.size(); ++i) {
    const auto& a = res.model.params.tensors[size_t(i)];
    const auto& b = fresh.params.tensors[size_t(i)];
    CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * size_t(a.size())) == 0);
  }
  CHECK(res.log.size() == 1);  // the step-0 row
}

TEST_CASE("untrained recall accuracy sits at chance") {
  ModelConfig mc = recall_model("fnet_fft", 32, 32, 2);
  TaskSpec task = recall_task();
  task.recall.value_symbols = 16;
  task.recall.key_symbols = 16;
  task.vocab.alphabet = 60;
  auto model = EncoderModel<double>::init(mc);
  auto m = evaluate(model, task, 1000, 5);
  CHECK(std::abs(m.task_acc - 1.0 / 16.0) < 0.03);
}

TEST_CASE("evaluation is deterministic") {
  ModelConfig mc = recall_model("fnet_fft");
  auto model = EncoderModel<double>::init(mc);
  auto a = evaluate(model, recall_task(), 128, 9);
  auto b = evaluate(model, recall_task(), 128, 9);
  CHECK(a.total_loss == b.total_loss);
  CHECK(a.task_acc == b.task_acc);
}

TEST_CASE("untrained NSP accuracy is at chance over 1000 examples") {
  ModelConfig mc = recall_model("fnet_fft", 32, 32, 1);
  mc.vocab_size = 260;
  TaskSpec task;
  task.kind = TaskKind::Pretrain;
  task.corpus.num_docs = 32;
  auto model = EncoderModel<double>::init(mc);
  auto corpus = generate_corpus(77, task.corpus, task.vocab);
  auto m = evaluate(model, task, 1000, 6, &corpus);
  CHECK(std::abs(m.task_acc - 0.5) < 0.05);
}

TEST_CASE("short fnet run learns the recall task above chance") {
  ModelConfig mc = recall_model("fnet_fft", 32, 32, 2);
  TrainConfig tc;
  tc.total_steps = 250;
  tc.warmup_steps = 25;
  tc.batch_size = 16;
  tc.eval_every = 125;
  tc.eval_examples = 128;
  tc.seed = 11;
  auto res = train(mc, tc, recall_task());
  CHECK_FALSE(res.diverged);
  // chance is 1/8 for this tiny task
  CHECK(res.final_row.task_acc > 0.3);
  // training loss goes down
  const auto& sl = res.step_losses;
  std::vector<double> head(sl.begin(), sl.begin() + 50);
  std::vector<double> tail(sl.end() - 50, sl.end());
  std::nth_element(head.begin(), head.begin() + 25, head.end());
  std::nth_element(tail.begin(), tail.begin() + 25, tail.end());
  CHECK(tail[25] < head[25]);
}

TEST_CASE("training is bit-reproducible given the seed") {
  ModelConfig mc = recall_model("fnet_fft");
  TrainConfig tc;
  tc.total_steps = 40;
  tc.warmup_steps = 4;
  tc.batch_size = 8;
  tc.eval_every = 20;
  tc.eval_examples = 64;
  tc.seed = 21;
  auto a = train(mc, tc, recall_task());
  auto b = train(mc, tc, recall_task());
  const std::string csv_a = metrics_to_csv(a.log);
  const std::string csv_b = metrics_to_csv(b.log);
  CHECK(drop_timing_column(csv_a) == drop_timing_column(csv_b));
  for (Index i = 0; i < a.model.params.size(); ++i) {
    const auto& ta = a.model.params.tensors[size_t(i)];
    const auto& tb = b.model.params.tensors[size_t(i)];
    CHECK(std::memcmp(ta.data(), tb.data(), sizeof(double) * size_t(ta.size())) == 0);
  }
}

TEST_CASE("frozen random matrices are untouched by training") {
  ModelConfig mc = recall_model("random");
  TrainConfig tc;
  tc.total_steps = 25;
  tc.warmup_steps = 0;
  tc.batch_size = 8;
  tc.eval_every = 25;
  tc.eval_examples = 32;
  auto fresh = EncoderModel<double>::init(mc);
  auto res = train(mc, tc, recall_task());
  for (Index i = 0; i < fresh.params.size(); ++i) {
    if (fresh.params.trainable[size_t(i)]) continue;
    const auto& a = res.model.params.tensors[size_t(i)];
    const auto& b = fresh.params.tensors[size_t(i)];
    CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * size_t(a.size())) == 0);
  }
}

TEST_CASE("divergence aborts with a diagnostic naming the step") {
  ModelConfig mc = recall_model("fnet_fft");
  auto poisoned = EncoderModel<double>::init(mc);
  poisoned.params.at("embeddings.word")[0] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig tc;
  tc.total_steps = 10;
  tc.warmup_steps = 0;
  tc.batch_size = 4;
  tc.eval_examples = 8;
  auto res = train(mc, tc, recall_task(), nullptr, {}, &poisoned);
  CHECK(res.diverged);
  CHECK(res.diverged_step == 1);
  CHECK(res.divergence_note.find("step 1") != std::string::npos);
}

TEST_CASE("metrics csv schema") {
  MetricRow r;
  r.step = 10;
  r.total_loss = 1.5;
  const std::string csv = metrics_to_csv({r});
  CHECK(csv.find("step,total_loss,mlm_loss,nsp_loss,mlm_acc,task_acc,ms_per_step") == 0);
  CHECK(csv.find("\n10,1.5,") != std::string::npos);
}
