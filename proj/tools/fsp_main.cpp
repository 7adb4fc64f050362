#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fsp/metrics.hpp"
#include "fsp/pipeline.hpp"
#include "fsp/synthetic.hpp"
#include "fsp/training.hpp"

namespace {

using namespace fsp;

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw data_error("cannot open " + tmp.string() + " for writing");
    out << text;
    if (!out) throw data_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct ModelFlags {
  ModelConfig config = toy_model_config();
  bool tiny = false;

  void attach(CLI::App* cmd) {
    cmd->add_flag("--tiny", tiny, "Use the tiny model preset (gradchecks, overfit runs)");
    cmd->add_option("--embed-dim", config.embed_dim, "Embedding width");
    cmd->add_option("--layers", config.num_layers, "Encoder and decoder depth");
    cmd->add_option("--heads", config.num_heads, "Attention heads");
    cmd->add_option("--ffn-dim", config.ffn_dim, "Feed-forward width");
    cmd->add_option("--max-input-len", config.max_input_len, "Maximum input tokens");
    cmd->add_option("--max-output-len", config.max_output_len, "Maximum generated tokens");
    cmd->add_option("--dropout", config.dropout_rate, "Dropout rate in [0,1)");
  }

  ModelConfig resolve(CLI::App* cmd) const {
    ModelConfig out = tiny ? tiny_model_config() : config;
    if (tiny) {
      // explicit flags still win over the preset
      if (cmd->count("--embed-dim")) out.embed_dim = config.embed_dim;
      if (cmd->count("--layers")) out.num_layers = config.num_layers;
      if (cmd->count("--heads")) out.num_heads = config.num_heads;
      if (cmd->count("--ffn-dim")) out.ffn_dim = config.ffn_dim;
      if (cmd->count("--max-input-len")) out.max_input_len = config.max_input_len;
      if (cmd->count("--max-output-len")) out.max_output_len = config.max_output_len;
      if (cmd->count("--dropout")) out.dropout_rate = config.dropout_rate;
    }
    return out;
  }
};

int cmd_gen_corpus(const std::string& spec_path, std::uint64_t seed, int count,
                   const std::string& out_path, std::string spec_out) {
  GeneratorSpec spec =
      spec_path.empty() ? default_generator_spec() : generator_spec_from_json(read_text(spec_path));
  if (count > 0) spec.example_count = count;
  validate_generator_spec(spec);
  Corpus corpus = generate_synthetic(spec, seed);
  save_corpus(corpus, out_path);
  if (spec_out.empty()) spec_out = out_path + ".spec.json";
  write_text_atomic(spec_out, generator_spec_to_json(spec));
  std::cout << "wrote " << corpus.examples.size() << " examples to " << out_path << "\n";
  return 0;
}

int cmd_train(const std::string& corpus_path, const std::string& train_path,
              const std::string& dev_path, const std::string& mode_name,
              const ModelConfig& model_config, const TrainConfig& train_config,
              std::uint64_t split_seed, const std::string& out_path, std::string history_path,
              const std::string& splits_out) {
  const TrainMode mode = train_mode_from_name(mode_name);
  Corpus train_split, dev_split;
  if (!corpus_path.empty()) {
    Corpus corpus = load_corpus(corpus_path);
    auto splits = split_corpus(corpus, {0.8, 0.1, 0.1}, split_seed);
    if (!splits_out.empty()) {
      save_corpus(splits[0], splits_out + ".train.jsonl");
      save_corpus(splits[1], splits_out + ".dev.jsonl");
      save_corpus(splits[2], splits_out + ".test.jsonl");
    }
    train_split = std::move(splits[0]);
    dev_split = std::move(splits[1]);
  } else {
    train_split = load_corpus(train_path);
    if (!dev_path.empty()) dev_split = load_corpus(dev_path);
  }

  Vocabulary vocab = Vocabulary::build(train_split);
  const Corpus* dev = dev_split.examples.empty() ? nullptr : &dev_split;
  TrainResult result = train(train_split, dev, mode, model_config, train_config, vocab);
  for (const EpochStats& e : result.history) {
    std::cout << "epoch " << e.epoch;
    for (const auto& [task, loss] : e.task_loss)
      std::cout << "  " << task << " loss " << loss << " (w " << e.task_weight.at(task) << ")";
    if (e.dev_frame_accuracy >= 0.0) std::cout << "  dev frame-acc " << e.dev_frame_accuracy;
    std::cout << "\n";
  }

  save_checkpoint(out_path, result.params, mode, vocab, train_split.ontology.frames);
  if (history_path.empty()) history_path = out_path + ".history.json";
  write_text_atomic(history_path, history_to_json(result.history));
  if (result.diverged) {
    std::cerr << "error: training diverged (non-finite loss); last good parameters saved\n";
    return 3;
  }
  std::cout << "wrote checkpoint " << out_path << "\n";
  return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& corpus_path,
                const std::string& mode_name, bool gold_frames, bool filter_roles,
                const std::string& out_path) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (!mode_name.empty()) check_checkpoint_mode(ckpt, train_mode_from_name(mode_name));
  Corpus corpus = load_corpus(corpus_path);
  auto preds = batch_predict(ckpt.params, ckpt.vocab, ckpt.frame_labels, corpus, ckpt.mode,
                             gold_frames, filter_roles ? &corpus.ontology : nullptr);
  save_predictions(make_prediction_records(corpus, preds), out_path);
  std::cout << "wrote " << preds.size() << " predictions to " << out_path << "\n";
  return 0;
}

int cmd_evaluate(const std::string& pred_path, const std::string& gold_path, bool gold_frames,
                 const std::string& report_path) {
  MatchReport report = score_files(gold_path, pred_path, /*gate_frames=*/!gold_frames);
  std::cout << report_table(report);
  if (!report_path.empty()) write_text_atomic(report_path, report_to_json(report));
  return 0;
}

int cmd_gradcheck(const ModelConfig& model_config, double epsilon, int samples,
                  std::uint64_t seed, double tol) {
  ModelConfig config = model_config;
  config.vocab_size = 29;
  config.num_frame_classes = 6;
  config.dropout_rate = 0.0;
  config.seed = seed;

  const std::vector<int> input = {4, 11, 7, 19, 5, 23, 8};
  const std::vector<int> target = {9, 15, 6, 12};
  const std::vector<int> trigger = {2, 3};
  GradCheckReport report = grad_check(config, input, target, trigger, 4, epsilon, samples, seed);
  std::cout << "sequence loss   max rel. error " << report.max_rel_error_seq << "\n";
  std::cout << "classifier loss max rel. error " << report.max_rel_error_class << "\n";
  if (report.max_rel_error() >= tol) {
    std::cerr << "error: gradient check failed (tolerance " << tol << ")\n";
    return 3;
  }
  std::cout << "gradient check passed (tolerance " << tol << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frame-semantic parsing toolkit: synthetic corpora, toy transformer "
               "training, two-stage inference, and match-metric evaluation"};
  app.require_subcommand(1);

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic annotated corpus");
  std::string gen_spec, gen_out, gen_spec_out;
  std::uint64_t gen_seed = 0;
  int gen_count = 0;
  gen->add_option("--spec", gen_spec, "Generator spec JSON (defaults to the built-in spec)");
  gen->add_option("--seed", gen_seed, "Generation seed");
  gen->add_option("--count", gen_count, "Override example count");
  gen->add_option("--out", gen_out, "Output corpus JSONL path")->required();
  gen->add_option("--spec-out", gen_spec_out, "Spec echo path (default <out>.spec.json)");

  // train
  auto* tr = app.add_subcommand("train", "Train a model and write a checkpoint");
  tr->set_config("--config", "", "Plain key=value config file; flags win");
  std::string tr_corpus, tr_train, tr_dev, tr_mode = "multitask", tr_out, tr_history;
  std::uint64_t tr_split_seed = 0;
  ModelFlags tr_model;
  TrainConfig tr_cfg;
  tr->add_option("--corpus", tr_corpus, "Corpus to split 80/10/10 before training");
  tr->add_option("--train-file", tr_train, "Pre-split training corpus");
  tr->add_option("--dev-file", tr_dev, "Pre-split dev corpus");
  tr->add_option("--mode", tr_mode, "fullgen or multitask")
      ->check(CLI::IsMember({"fullgen", "multitask"}));
  tr->add_option("--out", tr_out, "Checkpoint output path")->required();
  tr->add_option("--history", tr_history, "History JSON path (default <out>.history.json)");
  tr->add_option("--split-seed", tr_split_seed, "Seed for the 80/10/10 split");
  std::string tr_splits_out;
  tr->add_option("--splits-out", tr_splits_out,
                 "Also write the three splits as <prefix>.{train,dev,test}.jsonl");
  tr->add_option("--epochs", tr_cfg.epochs, "Training epochs");
  tr->add_option("--lr", tr_cfg.learning_rate, "Learning rate");
  tr->add_option("--batch-size", tr_cfg.batch_size, "Examples per batch");
  tr->add_option("--seed", tr_cfg.seed, "Training seed (init, batching, dropout)");
  tr->add_option("--balancer-decay", tr_cfg.balancer_decay, "Loss-balancer EMA decay");
  tr->add_option("--warmup-steps", tr_cfg.warmup_steps, "Steps with all task weights at 1");
  tr_model.attach(tr);

  // predict
  auto* pr = app.add_subcommand("predict", "Run inference over a corpus");
  std::string pr_ckpt, pr_corpus, pr_mode, pr_out;
  bool pr_gold = false, pr_filter = false;
  pr->add_option("--checkpoint", pr_ckpt, "Trained checkpoint")->required();
  pr->add_option("--corpus", pr_corpus, "Corpus JSONL to predict over")->required();
  pr->add_option("--out", pr_out, "Predictions JSONL output path")->required();
  pr->add_option("--mode", pr_mode, "Assert the checkpoint's mode (fullgen|multitask)")
      ->check(CLI::IsMember({"fullgen", "multitask"}));
  pr->add_flag("--gold-frames", pr_gold,
               "Condition argument decoding on gold frames (multitask only)");
  pr->add_flag("--filter-roles", pr_filter, "Drop roles the ontology forbids for the frame");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score predictions against gold annotations");
  std::string ev_pred, ev_gold, ev_report;
  bool ev_gold_frames = false;
  ev->add_option("--pred", ev_pred, "Predictions JSONL")->required();
  ev->add_option("--gold", ev_gold, "Gold corpus JSONL")->required();
  ev->add_option("--report", ev_report, "Write the report JSON here as well");
  ev->add_flag("--gold-frames", ev_gold_frames,
               "Gold-frame scoring: skip frame gating of role errors");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  ModelFlags gc_model;
  gc_model.tiny = true;
  double gc_eps = 1e-4, gc_tol = 1e-4;
  int gc_samples = 3;
  std::uint64_t gc_seed = 0;
  gc->add_option("--epsilon", gc_eps, "Central-difference step");
  gc->add_option("--samples", gc_samples, "Sampled coordinates per tensor");
  gc->add_option("--seed", gc_seed, "Init + coordinate sampling seed");
  gc->add_option("--tol", gc_tol, "Maximum acceptable relative error");
  gc_model.attach(gc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed())
      return cmd_gen_corpus(gen_spec, gen_seed, gen_count, gen_out, gen_spec_out);
    if (tr->parsed()) {
      if (tr_corpus.empty() == tr_train.empty())
        throw usage_error("pass exactly one of --corpus or --train-file");
      return cmd_train(tr_corpus, tr_train, tr_dev, tr_mode, tr_model.resolve(tr), tr_cfg,
                       tr_split_seed, tr_out, tr_history, tr_splits_out);
    }
    if (pr->parsed()) return cmd_predict(pr_ckpt, pr_corpus, pr_mode, pr_gold, pr_filter, pr_out);
    if (ev->parsed()) return cmd_evaluate(ev_pred, ev_gold, ev_gold_frames, ev_report);
    if (gc->parsed())
      return cmd_gradcheck(gc_model.resolve(gc), gc_eps, gc_samples, gc_seed, gc_tol);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
