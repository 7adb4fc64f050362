#include <filesystem>

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "fsp/pipeline.hpp"
#include "fsp/synthetic.hpp"

using namespace fsp;

namespace {

struct Fixture {
  Corpus corpus;
  Vocabulary vocab;
  ModelParams params;

  explicit Fixture(TrainMode mode, int n = 12) {
    GeneratorSpec spec = default_generator_spec();
    spec.example_count = n;
    corpus = generate_synthetic(spec, 17);
    vocab = Vocabulary::build(corpus);
    ModelConfig mc = tiny_model_config();
    mc.max_input_len = 96;
    mc.vocab_size = vocab.size();
    mc.num_frame_classes = static_cast<int>(corpus.ontology.frames.size());
    params = init_params(mc);
    (void)mode;
  }
};

}  // namespace

TEST_CASE("predict_multitask returns a labeled interpretation with confidence") {
  Fixture fx(TrainMode::MultiTask);
  const AnnotatedExample& ex = fx.corpus.examples[0];
  FrameInterpretation interp =
      predict_multitask(fx.params, fx.vocab, fx.corpus.ontology.frames, ex.tokens, ex.trigger);
  CHECK(fx.corpus.ontology.has_frame(interp.frame));
  REQUIRE(interp.confidence.has_value());
  CHECK(*interp.confidence > 0.0);
  CHECK(*interp.confidence <= 1.0);
  for (const RoleAssignment& r : interp.roles)
    CHECK(r.span.valid_within(static_cast<int>(ex.tokens.size())));

  // untrained argmax probability equals the classifier's own output
  const std::string input = frame_task_input(ex);
  Eigen::VectorXd probs = classify_frame(fx.params, encode(fx.params, fx.vocab.encode(input)),
                                         trigger_positions_in_input(input));
  CHECK(*interp.confidence == probs.maxCoeff());
}

TEST_CASE("gold-frame mode conditions on the supplied frame by construction") {
  Fixture fx(TrainMode::MultiTask);
  for (int i = 0; i < 5; ++i) {
    const AnnotatedExample& ex = fx.corpus.examples[static_cast<std::size_t>(i)];
    FrameInterpretation interp =
        predict_multitask(fx.params, fx.vocab, fx.corpus.ontology.frames, ex.tokens, ex.trigger,
                          &ex.frame);
    CHECK(interp.frame == ex.frame);
    REQUIRE(interp.confidence.has_value());
    CHECK(*interp.confidence >= 0.0);
    CHECK(*interp.confidence <= 1.0);
  }
}

TEST_CASE("predict_fullgen carries no confidence and never throws on garbage") {
  Fixture fx(TrainMode::FullGen);
  const AnnotatedExample& ex = fx.corpus.examples[0];
  // untrained model emits arbitrary tokens; parse must degrade gracefully
  FrameInterpretation interp = predict_fullgen(fx.params, fx.vocab, ex.tokens, ex.trigger);
  CHECK(!interp.confidence.has_value());
  for (const RoleAssignment& r : interp.roles)
    CHECK(r.span.valid_within(static_cast<int>(ex.tokens.size())));
}

TEST_CASE("batch_predict is aligned, deterministic, and order-preserving") {
  Fixture fx(TrainMode::MultiTask);
  auto preds = batch_predict(fx.params, fx.vocab, fx.corpus.ontology.frames, fx.corpus,
                             TrainMode::MultiTask, /*gold_frames=*/false);
  CHECK(preds.size() == fx.corpus.examples.size());
  auto again = batch_predict(fx.params, fx.vocab, fx.corpus.ontology.frames, fx.corpus,
                             TrainMode::MultiTask, false);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    CHECK(preds[i].frame == again[i].frame);
    CHECK(preds[i].roles == again[i].roles);
  }

  Corpus empty;
  empty.ontology = fx.corpus.ontology;
  CHECK(batch_predict(fx.params, fx.vocab, fx.corpus.ontology.frames, empty,
                      TrainMode::MultiTask, false)
            .empty());

  auto gold = batch_predict(fx.params, fx.vocab, fx.corpus.ontology.frames, fx.corpus,
                            TrainMode::MultiTask, /*gold_frames=*/true);
  for (std::size_t i = 0; i < gold.size(); ++i)
    CHECK(gold[i].frame == fx.corpus.examples[i].frame);

  CHECK_THROWS_AS(batch_predict(fx.params, fx.vocab, fx.corpus.ontology.frames, fx.corpus,
                                TrainMode::FullGen, /*gold_frames=*/true),
                  Error);
}

TEST_CASE("role filter drops ontology-forbidden labels with a diagnostic") {
  Fixture fx(TrainMode::MultiTask);
  // force every frame to permit nothing: all predicted roles must vanish
  Ontology strict = fx.corpus.ontology;
  for (const std::string& f : strict.frames) strict.frame_roles[f] = {};
  auto preds = batch_predict(fx.params, fx.vocab, fx.corpus.ontology.frames, fx.corpus,
                             TrainMode::MultiTask, true, &strict);
  for (const FrameInterpretation& p : preds) CHECK(p.roles.empty());
}

TEST_CASE("prediction records round-trip through the JSONL file format") {
  Fixture fx(TrainMode::MultiTask);
  auto preds = batch_predict(fx.params, fx.vocab, fx.corpus.ontology.frames, fx.corpus,
                             TrainMode::MultiTask, false);
  auto records = make_prediction_records(fx.corpus, preds);
  REQUIRE(records.size() == preds.size());
  CHECK(records[0].tokens == fx.corpus.examples[0].tokens);
  CHECK(records[0].trigger == fx.corpus.examples[0].trigger);

  const std::filesystem::path path = "test_predictions.jsonl";
  save_predictions(records, path);
  auto loaded = load_predictions(path);
  CHECK(loaded == records);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(load_predictions("test_predictions_missing.jsonl"), Error);
  std::vector<FrameInterpretation> wrong(preds.begin(), preds.end() - 1);
  CHECK_THROWS_AS(make_prediction_records(fx.corpus, wrong), Error);
}

TEST_CASE("format demonstration: the 'Mary got to the train station' sentence") {
  // out-of-domain sentence: exercises the full path with unknown words
  std::vector<std::string> tokens = {"Mary", "got", "to", "the", "train",
                                     "station", "at", "2pm", "."};
  TokenSpan trigger{1, 1};
  AnnotatedExample ex;
  ex.tokens = tokens;
  ex.trigger = trigger;
  CHECK(fullgen_encode(ex).input_text == "Mary * got * to the train station at 2pm .");

  Fixture fx(TrainMode::FullGen, 4);
  FrameInterpretation fg = predict_fullgen(fx.params, fx.vocab, tokens, trigger);
  for (const RoleAssignment& r : fg.roles) CHECK(r.span.valid_within(9));
  FrameInterpretation mt =
      predict_multitask(fx.params, fx.vocab, fx.corpus.ontology.frames, tokens, trigger);
  CHECK(fx.corpus.ontology.has_frame(mt.frame));
}

TEST_CASE("fullgen records omit the confidence field entirely") {
  Fixture fx(TrainMode::FullGen, 4);
  auto preds = batch_predict(fx.params, fx.vocab, fx.corpus.ontology.frames, fx.corpus,
                             TrainMode::FullGen, false);
  auto records = make_prediction_records(fx.corpus, preds);
  const std::filesystem::path path = "test_predictions_fg.jsonl";
  save_predictions(records, path);
  auto loaded = load_predictions(path);
  for (const PredictionRecord& rec : loaded) CHECK(!rec.confidence.has_value());
  std::filesystem::remove(path);
}
