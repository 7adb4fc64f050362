#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "fsp/synthetic.hpp"
#include "fsp/training.hpp"

using namespace fsp;

namespace {

std::vector<EncodedExample> fake_dataset(int n_fullgen, int n_frame) {
  std::vector<EncodedExample> out;
  for (int i = 0; i < n_fullgen; ++i) {
    EncodedExample e;
    e.kind = TaskKind::FullGen;
    e.input_ids = {4, 5};
    e.target_ids = {6};
    out.push_back(e);
  }
  for (int i = 0; i < n_frame; ++i) {
    EncodedExample e;
    e.kind = TaskKind::Frame;
    e.input_ids = {4, 5};
    e.trigger_positions = {0};
    e.gold_class = 0;
    out.push_back(e);
  }
  return out;
}

Corpus tiny_corpus(int n, std::uint64_t seed = 3) {
  GeneratorSpec spec = default_generator_spec();
  spec.example_count = n;
  return generate_synthetic(spec, seed);
}

}  // namespace

TEST_CASE("make_batches: equal tasks, exact chunking, single-task batches") {
  auto data = fake_dataset(128, 128);
  auto batches = make_batches(data, 64, 5);
  CHECK(batches.size() == 4);
  int fullgen = 0, frame = 0;
  std::set<std::size_t> seen;
  for (const TaskBatch& b : batches) {
    CHECK(b.indices.size() == 64);
    for (std::size_t i : b.indices) {
      CHECK(data[i].kind == b.kind);  // single-task batch
      CHECK(seen.insert(i).second);   // exactly-once coverage
    }
    (b.kind == TaskKind::FullGen ? fullgen : frame)++;
  }
  CHECK(fullgen == 2);
  CHECK(frame == 2);
  CHECK(seen.size() == 256);
}

TEST_CASE("make_batches: single task degenerates to shuffled chunking") {
  auto data = fake_dataset(100, 0);
  auto batches = make_batches(data, 64, 9);
  CHECK(batches.size() == 2);
  CHECK(batches[0].indices.size() == 64);
  CHECK(batches[1].indices.size() == 36);
  CHECK(make_batches(data, 64, 9)[0].indices == batches[0].indices);  // seeded
  CHECK(make_batches(data, 64, 10)[0].indices != batches[0].indices);
}

TEST_CASE("make_batches: A(192) + B(64) gives multiset {A,A,A,B} for every seed") {
  auto data = fake_dataset(192, 64);
  bool order_varies = false;
  std::vector<TaskKind> first_order;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto batches = make_batches(data, 64, seed);
    REQUIRE(batches.size() == 4);
    int a = 0, b = 0;
    std::vector<TaskKind> order;
    for (const TaskBatch& batch : batches) {
      (batch.kind == TaskKind::FullGen ? a : b)++;
      order.push_back(batch.kind);
    }
    CHECK(a == 3);
    CHECK(b == 1);
    if (seed == 0)
      first_order = order;
    else if (order != first_order)
      order_varies = true;
  }
  CHECK(order_varies);
}

TEST_CASE("balancer: symmetric losses keep both weights at 1") {
  LossBalancer bal(0.9, 0);
  for (int i = 0; i < 100; ++i) {
    CHECK(bal.update(TaskKind::Frame, 3.0) == doctest::Approx(1.0));
    CHECK(bal.update(TaskKind::Args, 3.0) == doctest::Approx(1.0));
  }
}

TEST_CASE("balancer: constant 2.0/4.0 losses converge to weights 1.5/0.75") {
  LossBalancer bal(0.9, 50);
  double wa = 0.0, wb = 0.0;
  for (int i = 0; i < 1000; ++i) {
    wa = bal.update(TaskKind::Frame, 2.0);
    wb = bal.update(TaskKind::Args, 4.0);
  }
  CHECK(std::abs(wa - 1.5) < 1e-6);
  CHECK(std::abs(wb - 0.75) < 1e-6);
  // weighted losses end up on the same scale
  CHECK(std::abs(wa * bal.ema(TaskKind::Frame) - wb * bal.ema(TaskKind::Args)) < 1e-6);
}

TEST_CASE("balancer: warmup forces weight 1, clamp bounds extremes") {
  LossBalancer bal(0.9, 4);
  CHECK(bal.update(TaskKind::Frame, 100.0) == 1.0);
  CHECK(bal.update(TaskKind::Args, 0.001) == 1.0);
  CHECK(bal.update(TaskKind::Frame, 100.0) == 1.0);
  CHECK(bal.update(TaskKind::Args, 0.001) == 1.0);
  double w = bal.update(TaskKind::Args, 0.001);  // past warmup now
  CHECK(w == 10.0);                              // clamped
  CHECK(bal.weight(TaskKind::Frame) == doctest::Approx(0.5).epsilon(1e-3));
  LossBalancer extreme(0.9, 0);
  extreme.update(TaskKind::Frame, 1000.0);
  extreme.update(TaskKind::Args, 1.0);
  // with two tasks mean/ema never drops below 0.5, so only the high
  // clamp can bind
  CHECK(extreme.weight(TaskKind::Frame) == doctest::Approx(500.5 / 1000.0));
  CHECK(extreme.weight(TaskKind::Args) == 10.0);  // clamped high
  CHECK_THROWS_AS(bal.update(TaskKind::Frame, std::nan("")), Error);
}

TEST_CASE("balancer: single task always weight 1") {
  LossBalancer bal(0.9, 0);
  for (int i = 0; i < 200; ++i) {
    double w = bal.update(TaskKind::FullGen, 0.5 + 3.0 * (i % 7));
    CHECK(w == doctest::Approx(1.0));
  }
}

TEST_CASE("adam reduces a quadratic loss") {
  // single 1x1 parameter, loss (x-3)^2/2, gradient x-3
  ModelConfig c = tiny_model_config();
  c.vocab_size = 8;
  ModelParams p = init_params(c);
  AdamState st = init_adam(p);
  TrainConfig tc;
  tc.learning_rate = 0.1;
  double& x = p.token_embedding(0, 0);
  x = 0.0;
  TensorList g = zeros_like(p);
  for (int i = 0; i < 300; ++i) {
    g[0](0, 0) = x - 3.0;
    adam_step(p, g, st, tc);
  }
  CHECK(std::abs(x - 3.0) < 1e-2);
}

TEST_CASE("encode_for_training: record counts and task kinds per mode") {
  Corpus corpus = tiny_corpus(20);
  Vocabulary vocab = Vocabulary::build(corpus);
  auto fg = encode_for_training(corpus, vocab, TrainMode::FullGen);
  CHECK(fg.size() == 20);
  for (const auto& e : fg) {
    CHECK(e.kind == TaskKind::FullGen);
    CHECK(!e.target_ids.empty());
  }
  auto mt = encode_for_training(corpus, vocab, TrainMode::MultiTask);
  CHECK(mt.size() == 40);
  for (std::size_t i = 0; i < mt.size(); i += 2) {
    CHECK(mt[i].kind == TaskKind::Frame);
    CHECK(!mt[i].trigger_positions.empty());
    CHECK(mt[i].gold_class >= 0);
    CHECK(mt[i].gold_class < static_cast<int>(corpus.ontology.frames.size()));
    CHECK(mt[i + 1].kind == TaskKind::Args);
  }
}

TEST_CASE("train: epochs=0 returns initial params and empty history") {
  Corpus corpus = tiny_corpus(10);
  Vocabulary vocab = Vocabulary::build(corpus);
  ModelConfig mc = tiny_model_config();
  TrainConfig tc;
  tc.epochs = 0;
  TrainResult r = train(corpus, nullptr, TrainMode::MultiTask, mc, tc, vocab);
  CHECK(r.history.empty());
  CHECK(!r.diverged);
  mc.vocab_size = vocab.size();
  mc.num_frame_classes = static_cast<int>(corpus.ontology.frames.size());
  ModelParams fresh = init_params(mc);
  CHECK(r.params.token_embedding == fresh.token_embedding);
  CHECK(r.params.output_w == fresh.output_w);
}

TEST_CASE("train: a few epochs reduce the loss deterministically") {
  Corpus corpus = tiny_corpus(24);
  Vocabulary vocab = Vocabulary::build(corpus);
  ModelConfig mc = tiny_model_config();
  mc.max_input_len = 96;
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 8;
  tc.warmup_steps = 2;
  TrainResult a = train(corpus, &corpus, TrainMode::MultiTask, mc, tc, vocab);
  REQUIRE(a.history.size() == 3);
  CHECK(!a.diverged);
  double first = a.history.front().task_loss.at("args");
  double last = a.history.back().task_loss.at("args");
  CHECK(last < first);
  CHECK(a.history.back().dev_frame_accuracy >= 0.0);
  CHECK(a.history.back().task_weight.count("frame") == 1);

  TrainResult b = train(corpus, &corpus, TrainMode::MultiTask, mc, tc, vocab);
  CHECK(a.params.token_embedding == b.params.token_embedding);  // seeded determinism
  CHECK(a.history.back().task_loss.at("args") == b.history.back().task_loss.at("args"));
}

TEST_CASE("train: fullgen mode runs and logs a single task") {
  Corpus corpus = tiny_corpus(16);
  Vocabulary vocab = Vocabulary::build(corpus);
  ModelConfig mc = tiny_model_config();
  mc.max_input_len = 96;
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 8;
  TrainResult r = train(corpus, &corpus, TrainMode::FullGen, mc, tc, vocab);
  REQUIRE(r.history.size() == 2);
  CHECK(r.history[0].task_loss.size() == 1);
  CHECK(r.history[0].task_loss.count("fullgen") == 1);
  CHECK(r.history[0].dev_frame_accuracy >= 0.0);
  CHECK(r.history[0].dev_frame_accuracy <= 1.0);
}

TEST_CASE("checkpoint round-trip restores params, vocab, and mode exactly") {
  Corpus corpus = tiny_corpus(12);
  Vocabulary vocab = Vocabulary::build(corpus);
  ModelConfig mc = tiny_model_config();
  mc.vocab_size = vocab.size();
  mc.num_frame_classes = static_cast<int>(corpus.ontology.frames.size());
  ModelParams p = init_params(mc);
  const std::string path = "test_ckpt_roundtrip.bin";

  save_checkpoint(path, p, TrainMode::MultiTask, vocab, corpus.ontology.frames);
  Checkpoint ck = load_checkpoint(path);
  CHECK(ck.mode == TrainMode::MultiTask);
  CHECK(ck.vocab.hash() == vocab.hash());
  CHECK(ck.vocab.tokens() == vocab.tokens());
  CHECK(ck.frame_labels == corpus.ontology.frames);
  CHECK(ck.params.config == p.config);
  bool equal = true;
  std::vector<const nn::Mat*> a, b;
  p.visit_const([&](const std::string&, const nn::Mat& m) { a.push_back(&m); });
  ck.params.visit_const([&](const std::string&, const nn::Mat& m) { b.push_back(&m); });
  for (std::size_t i = 0; i < a.size(); ++i)
    if (*a[i] != *b[i]) equal = false;
  CHECK(equal);

  CHECK_NOTHROW(check_checkpoint_mode(ck, TrainMode::MultiTask));
  CHECK_THROWS_AS(check_checkpoint_mode(ck, TrainMode::FullGen), Error);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint: truncation and corruption are explicit errors") {
  Corpus corpus = tiny_corpus(12);
  Vocabulary vocab = Vocabulary::build(corpus);
  ModelConfig mc = tiny_model_config();
  mc.vocab_size = vocab.size();
  ModelParams p = init_params(mc);
  const std::string path = "test_ckpt_trunc.bin";
  save_checkpoint(path, p, TrainMode::FullGen, vocab, corpus.ontology.frames);

  const auto full = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, full - 16);
  CHECK_THROWS_AS(load_checkpoint(path), Error);
  std::filesystem::resize_file(path, 4);
  CHECK_THROWS_AS(load_checkpoint(path), Error);
  {
    std::ofstream out(path, std::ios::binary);
    out << "not a checkpoint at all";
  }
  CHECK_THROWS_AS(load_checkpoint(path), Error);
  CHECK_THROWS_AS(load_checkpoint("test_ckpt_missing.bin"), Error);
  std::filesystem::remove(path);
}

TEST_CASE("history serializes one record per epoch") {
  std::vector<EpochStats> hist(2);
  hist[0].epoch = 0;
  hist[0].task_loss["frame"] = 1.5;
  hist[0].task_weight["frame"] = 1.0;
  hist[0].dev_frame_accuracy = 0.5;
  hist[1].epoch = 1;
  hist[1].task_loss["frame"] = 0.7;
  hist[1].task_weight["frame"] = 1.1;
  std::string json = history_to_json(hist);
  CHECK(json.find("\"epoch\": 0") != std::string::npos);
  CHECK(json.find("\"epoch\": 1") != std::string::npos);
  CHECK(json.find("dev_frame_accuracy") != std::string::npos);
  CHECK(json.find("0.7") != std::string::npos);
}

TEST_CASE("mode names round-trip and reject garbage") {
  CHECK(train_mode_from_name("fullgen") == TrainMode::FullGen);
  CHECK(train_mode_from_name("multitask") == TrainMode::MultiTask);
  CHECK(train_mode_name(TrainMode::FullGen) == "fullgen");
  CHECK_THROWS_AS(train_mode_from_name("both"), Error);
}
