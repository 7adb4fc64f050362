// Acceptance gate: one pass/fail line per criterion A1-A9.
// Exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <vector>

#include "fsp/metrics.hpp"
#include "fsp/pipeline.hpp"
#include "fsp/rng.hpp"
#include "fsp/synthetic.hpp"
#include "fsp/training.hpp"

using namespace fsp;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(const char* id, bool ok, const std::string& detail) {
  std::printf("%s %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::vector<RoleAssignment> sorted_roles(std::vector<RoleAssignment> roles) {
  std::sort(roles.begin(), roles.end());
  return roles;
}

// ---- A1: codec round-trips over 1000 examples, 100%, < 5 s ----------------

void a1() {
  const auto t0 = Clock::now();
  GeneratorSpec spec = default_generator_spec();
  spec.example_count = 1000;
  Corpus corpus = generate_synthetic(spec, 42);
  std::size_t ok_count = 0;
  for (const AnnotatedExample& ex : corpus.examples) {
    bool ok = true;

    TaskExample fg = fullgen_encode(ex);
    FrameParse parse = fullgen_parse(fg.target_text, ex.tokens, ex.trigger);
    ok &= parse.frame == ex.frame && parse.diagnostics.empty() &&
          sorted_roles(parse.roles) == sorted_roles(ex.roles);

    auto [frame_task, args_task] = multitask_encode(ex);
    std::vector<std::string> tokens;
    TokenSpan trigger;
    multitask_index_parse(multitask_index_text(ex.tokens, ex.trigger), &tokens, &trigger);
    ok &= tokens == ex.tokens && trigger == ex.trigger;
    std::vector<std::string> diags;
    auto roles = multitask_parse_args(args_task.target_text,
                                      static_cast<int>(ex.tokens.size()), &diags);
    ok &= diags.empty() && sorted_roles(roles) == sorted_roles(ex.roles);

    if (ok) ++ok_count;
  }
  const double secs = seconds_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "codec round-trip %zu/1000 examples in %.2fs (limit 5s)",
                ok_count, secs);
  report("A1", ok_count == 1000 && secs < 5.0, buf);
}

// ---- A2: metric fixtures, exact agreement with worked values --------------

void a2() {
  std::vector<ParseInstance> gold = {{"F", {{"Fluid", {0, 1}}, {"Path", {3, 5}}}}};
  std::vector<ParseInstance> pred = {{"F", {{"Fluid", {0, 1}}, {"Path", {4, 5}}}}};
  PRF e = exact_match(pred, gold);
  PRF s = soft_match(pred, gold);
  PRF g = global_match(pred, gold);
  const bool ok = e.precision == 0.5 && e.recall == 0.5 && e.f1 == 0.5 &&
                  std::abs(s.f1 - 10.0 / 11.0) < 1e-12 && s.precision == 1.0 &&
                  std::abs(s.recall - 5.0 / 6.0) < 1e-12 &&
                  std::abs(g.f1 - 8.0 / 9.0) < 1e-12 && g.precision == 1.0 &&
                  std::abs(g.recall - 0.8) < 1e-12;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "worked values exact=%.3f soft=%.6f (10/11) global=%.6f (8/9)", e.f1, s.f1,
                g.f1);
  report("A2", ok, buf);
}

// ---- A3: metric property suites, 500 randomized instances each ------------

std::vector<ParseInstance> rand_instances(std::mt19937_64& rng, std::size_t n) {
  static const std::vector<std::string> frames = {"F1", "F2", "F3"};
  static const std::vector<std::string> labels = {"A", "B", "C"};
  std::vector<ParseInstance> out;
  for (std::size_t i = 0; i < n; ++i) {
    ParseInstance inst;
    inst.frame = frames[uniform_below(rng, frames.size())];
    const std::size_t k = uniform_below(rng, 4);
    for (std::size_t j = 0; j < k; ++j) {
      int s = static_cast<int>(uniform_below(rng, 8));
      inst.roles.push_back(
          {labels[uniform_below(rng, labels.size())], {s, s + (int)uniform_below(rng, 3)}});
    }
    out.push_back(std::move(inst));
  }
  return out;
}

void a3() {
  std::mt19937_64 rng(777);
  int violations = 0;
  using MetricFn = PRF (*)(const std::vector<ParseInstance>&, const std::vector<ParseInstance>&,
                           bool);
  const MetricFn metrics[] = {&exact_match, &soft_match, &global_match};
  for (const MetricFn metric : metrics) {
    for (int trial = 0; trial < 500; ++trial) {
      const std::size_t n = 1 + uniform_below(rng, 4);
      auto gold = rand_instances(rng, n);
      auto pred = rand_instances(rng, n);
      for (std::size_t i = 0; i < n; ++i)
        if (trial % 2 == 0) pred[i].frame = gold[i].frame;

      PRF x = metric(pred, gold, true);
      if (!(x.precision >= 0 && x.precision <= 1 && x.recall >= 0 && x.recall <= 1 &&
            x.f1 >= 0 && x.f1 <= 1))
        ++violations;
      if (x.precision > 0 && x.recall > 0 &&
          !(x.f1 <= std::max(x.precision, x.recall) + 1e-12 &&
            x.f1 >= std::min(x.precision, x.recall) - 1e-12))
        ++violations;
      if (metric(gold, gold, true).f1 != 1.0) ++violations;

      if (metric != static_cast<MetricFn>(&soft_match)) {
        PRF sw = metric(gold, pred, true);
        if (std::abs(x.precision - sw.recall) > 1e-12 ||
            std::abs(x.recall - sw.precision) > 1e-12)
          ++violations;
      }

      std::vector<std::size_t> perm(n);
      for (std::size_t i = 0; i < n; ++i) perm[i] = i;
      shuffle_vec(perm, rng);
      std::vector<ParseInstance> gp, pp;
      for (std::size_t i : perm) {
        gp.push_back(gold[i]);
        pp.push_back(pred[i]);
      }
      if (std::abs(metric(pp, gp, true).f1 - x.f1) > 1e-12) ++violations;

      if (!gold[0].roles.empty()) {
        auto pred2 = pred;
        pred2[0].frame = gold[0].frame;
        const double base = metric(pred2, gold, true).recall;
        pred2[0].roles.push_back(gold[0].roles[0]);
        if (metric(pred2, gold, true).recall < base - 1e-12) ++violations;
      }
    }
  }
  char buf[120];
  std::snprintf(buf, sizeof(buf), "3 metrics x 500 randomized instances, %d violations",
                violations);
  report("A3", violations == 0, buf);
}

// ---- A4: gradient check, both loss paths, max rel error < 1e-4 ------------

void a4() {
  ModelConfig config = tiny_model_config();
  config.vocab_size = 31;
  config.num_frame_classes = 7;
  config.dropout_rate = 0.0;
  GradCheckReport r = grad_check(config, {4, 9, 14, 22, 7, 11, 5}, {8, 19, 6, 27, 10},
                                 {2, 3}, 5, /*epsilon=*/1e-4, /*sample_size=*/3, /*seed=*/13);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "max rel error seq=%.3e class=%.3e (tolerance 1e-4)",
                r.max_rel_error_seq, r.max_rel_error_class);
  report("A4", r.max_rel_error() < 1e-4, buf);
}

// ---- shared experiment helpers --------------------------------------------

struct RunResult {
  MatchReport pred_report;   // end-to-end (predicted frames)
  MatchReport gold_report;   // gold-frame conditioning (multitask only)
  double seconds = 0.0;
};

RunResult run_experiment(const Corpus& train_split, const Corpus& eval_split, TrainMode mode,
                         const ModelConfig& mc, const TrainConfig& tc, bool also_gold) {
  const auto t0 = Clock::now();
  Vocabulary vocab = Vocabulary::build(train_split);
  TrainResult r = train(train_split, nullptr, mode, mc, tc, vocab);
  const auto& frames = train_split.ontology.frames;
  RunResult out;
  auto preds = batch_predict(r.params, vocab, frames, eval_split, mode, false);
  out.pred_report =
      score_instances(prediction_instances(make_prediction_records(eval_split, preds)),
                      corpus_instances(eval_split), /*gate_frames=*/true);
  if (also_gold) {
    auto gp = batch_predict(r.params, vocab, frames, eval_split, mode, true);
    out.gold_report =
        score_instances(prediction_instances(make_prediction_records(eval_split, gp)),
                        corpus_instances(eval_split), /*gate_frames=*/false);
  }
  out.seconds = seconds_since(t0);
  return out;
}

// ---- A5: overfit oracle ---------------------------------------------------

void a5() {
  GeneratorSpec spec = default_generator_spec();
  spec.example_count = 50;
  Corpus corpus = generate_synthetic(spec, 5);
  ModelConfig mc = tiny_model_config();
  mc.max_input_len = 96;
  TrainConfig tc;
  tc.epochs = 200;
  tc.batch_size = 16;
  tc.learning_rate = 3e-3;
  tc.seed = 0;

  bool ok = true;
  std::string detail;
  for (TrainMode mode : {TrainMode::FullGen, TrainMode::MultiTask}) {
    RunResult r = run_experiment(corpus, corpus, mode, mc, tc, false);
    const bool mode_ok = r.pred_report.frame_accuracy == 1.0 && r.pred_report.exact.f1 == 1.0 &&
                         r.seconds < 300.0;
    ok &= mode_ok;
    char buf[120];
    std::snprintf(buf, sizeof(buf), "%s acc=%.3f exactF1=%.3f %.0fs  ",
                  train_mode_name(mode).c_str(), r.pred_report.frame_accuracy,
                  r.pred_report.exact.f1, r.seconds);
    detail += buf;
  }
  report("A5", ok, "overfit 50 examples, 200 epochs: " + detail + "(limit 300s/mode)");
}

// ---- A6 + A7: desk-scale generalization and mode comparison ---------------

void a6_a7() {
  GeneratorSpec spec = default_generator_spec();
  Corpus corpus = generate_synthetic(spec, 0);
  ModelConfig mc = toy_model_config();
  const std::uint64_t seeds[] = {0, 1, 2};

  bool a6_ok = true;
  std::string a6_detail;
  double mt_acc_sum = 0.0, fg_acc_sum = 0.0;
  double degradation_sum = 0.0;

  for (std::uint64_t seed : seeds) {
    auto splits = split_corpus(corpus, {0.8, 0.1, 0.1}, seed);
    const Corpus& train_split = splits[0];
    const Corpus& test_split = splits[2];
    TrainConfig tc;
    tc.seed = seed;
    mc.seed = seed;

    RunResult mt = run_experiment(train_split, test_split, TrainMode::MultiTask, mc, tc, true);
    mt_acc_sum += mt.pred_report.frame_accuracy;
    degradation_sum += mt.gold_report.exact.f1 - mt.pred_report.exact.f1;
    const bool run_ok = mt.pred_report.frame_accuracy >= 0.95 &&
                        mt.pred_report.exact.f1 >= 0.85 && mt.seconds <= 600.0;
    a6_ok &= run_ok;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "seed %llu: acc=%.4f exactF1=%.4f %.0fs  ",
                  (unsigned long long)seed, mt.pred_report.frame_accuracy,
                  mt.pred_report.exact.f1, mt.seconds);
    a6_detail += buf;

    RunResult fg = run_experiment(train_split, test_split, TrainMode::FullGen, mc, tc, false);
    fg_acc_sum += fg.pred_report.frame_accuracy;
  }
  report("A6", a6_ok, "multitask held-out over 3 seeds: " + a6_detail +
                          "(gates acc>=0.95 exactF1>=0.85, 600s/run)");

  const double mt_mean = mt_acc_sum / 3.0, fg_mean = fg_acc_sum / 3.0;
  const double mean_degradation = degradation_sum / 3.0;
  char buf[220];
  std::snprintf(buf, sizeof(buf),
                "mean frame acc: multitask=%.4f fullgen=%.4f (gate mt >= fg - 0.01); "
                "GOLD-PRED exact-F1 degradation=%.4f (reported)",
                mt_mean, fg_mean, mean_degradation);
  report("A7", mt_mean >= fg_mean - 0.01, buf);
}

// ---- A8: loss balancer convergence ----------------------------------------

void a8() {
  const auto t0 = Clock::now();
  LossBalancer bal(0.9, 50);
  double wa = 0.0, wb = 0.0;
  for (int i = 0; i < 1000; ++i) {
    wa = bal.update(TaskKind::Frame, 2.0);
    wb = bal.update(TaskKind::Args, 4.0);
  }
  const double weighted_a = wa * bal.ema(TaskKind::Frame);
  const double weighted_b = wb * bal.ema(TaskKind::Args);
  const double secs = seconds_since(t0);
  const bool ok = std::abs(wa - 1.5) < 1e-6 && std::abs(wb - 0.75) < 1e-6 &&
                  std::abs(weighted_a - weighted_b) < 1e-6 && secs < 1.0;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "weights (%.8f, %.8f) -> (1.5, 0.75); weighted EMAs %.8f vs %.8f; %.3fs", wa,
                wb, weighted_a, weighted_b, secs);
  report("A8", ok, buf);
}

// ---- A9: batch discipline over a full training run ------------------------

void a9() {
  GeneratorSpec spec = default_generator_spec();
  spec.example_count = 600;
  Corpus corpus = generate_synthetic(spec, 9);
  Vocabulary vocab = Vocabulary::build(corpus);
  auto dataset = encode_for_training(corpus, vocab, TrainMode::MultiTask);

  std::size_t mixed_batches = 0, coverage_errors = 0, total_batches = 0;
  for (int epoch = 0; epoch < 5; ++epoch) {
    auto batches = make_batches(dataset, 64, 1000 + static_cast<std::uint64_t>(epoch));
    std::map<std::size_t, int> seen;
    for (const TaskBatch& b : batches) {
      ++total_batches;
      for (std::size_t idx : b.indices) {
        if (dataset[idx].kind != b.kind) ++mixed_batches;
        seen[idx]++;
      }
    }
    if (seen.size() != dataset.size()) ++coverage_errors;
    for (const auto& [idx, count] : seen)
      if (count != 1) ++coverage_errors;
  }
  char buf[180];
  std::snprintf(buf, sizeof(buf),
                "%zu batches over 5 epochs: %zu mixed-task, %zu coverage violations "
                "(%zu examples/epoch)",
                total_batches, mixed_batches, coverage_errors, dataset.size());
  report("A9", mixed_batches == 0 && coverage_errors == 0, buf);
}

}  // namespace

int main() {
  a1();
  a2();
  a3();
  a4();
  a5();
  a8();
  a9();
  a6_a7();  // the slow experiments last
  std::printf("%d criterion failure(s)\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
