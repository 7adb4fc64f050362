#ifndef FSP_TRAINING_HPP
#define FSP_TRAINING_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fsp/codec.hpp"
#include "fsp/corpus.hpp"
#include "fsp/model.hpp"

namespace fsp {

enum class TrainMode { FullGen, MultiTask };

std::string train_mode_name(TrainMode mode);
TrainMode train_mode_from_name(const std::string& name);

/// One task record lowered to token ids. Seq tasks fill target_ids;
/// the FRAME task fills trigger_positions and gold_class instead.
struct EncodedExample {
  TaskKind kind = TaskKind::FullGen;
  std::vector<int> input_ids;
  std::vector<int> target_ids;
  std::vector<int> trigger_positions;
  int gold_class = -1;
};

/// Lowers every corpus example through the mode's codec. MULTITASK yields
/// two records per sentence (FRAME + ARGS), FULLGEN one.
std::vector<EncodedExample> encode_for_training(const Corpus& corpus, const Vocabulary& vocab,
                                                TrainMode mode);

/// A single-task slice of the dataset; indices refer to the encoded list.
struct TaskBatch {
  TaskKind kind = TaskKind::FullGen;
  std::vector<std::size_t> indices;
};

/// Seeded per-task shuffle + chunking, then seeded round-robin interleave:
/// each turn picks uniformly among tasks that still have batches. Every
/// example lands in exactly one batch.
std::vector<TaskBatch> make_batches(const std::vector<EncodedExample>& examples, int batch_size,
                                    std::uint64_t seed);

/// EMA-based task weighting. All weights are 1 during warmup; afterwards
/// weight_k = mean(ema)/ema_k clamped to [0.1, 10].
class LossBalancer {
 public:
  explicit LossBalancer(double decay = 0.9, int warmup_steps = 50);

  /// Folds one raw batch loss into the task EMA, returns the new weight.
  /// Throws Error(Numeric) on non-finite loss.
  double update(TaskKind kind, double raw_loss);
  double weight(TaskKind kind) const;
  double ema(TaskKind kind) const;
  int steps() const { return steps_; }

 private:
  double decay_;
  int warmup_steps_;
  int steps_ = 0;
  std::map<TaskKind, double> ema_;
};

struct TrainConfig {
  int epochs = 5;
  double learning_rate = 1e-3;
  int batch_size = 64;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double balancer_decay = 0.9;
  int warmup_steps = 50;

  void validate() const;
};

struct AdamState {
  TensorList m, v;
  long t = 0;
};

AdamState init_adam(const ModelParams& params);
/// One update with bias-corrected moments; grads are pre-scaled by the
/// caller (task weight folded in via `scale`).
void adam_step(ModelParams& params, const TensorList& grads, AdamState& state,
               const TrainConfig& config, double scale = 1.0);

struct EpochStats {
  int epoch = 0;
  std::map<std::string, double> task_loss;    // mean raw batch loss per task
  std::map<std::string, double> task_weight;  // last balancer weight per task
  double dev_frame_accuracy = -1.0;           // -1 when no dev split given
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> history;
  bool diverged = false;
};

/// Cheap per-epoch dev probe: classifier argmax accuracy in MULTITASK
/// mode, frame segment of a greedy decode in FULLGEN mode.
double dev_frame_accuracy(const ModelParams& params, const Vocabulary& vocab,
                          const Corpus& dev, TrainMode mode);

/// Full training loop. `model_config.vocab_size` and `num_frame_classes`
/// are overwritten from `vocab` and the corpus ontology. On divergence the
/// params from the end of the last finite epoch are returned.
TrainResult train(const Corpus& train_split, const Corpus* dev_split, TrainMode mode,
                  ModelConfig model_config, const TrainConfig& train_config,
                  const Vocabulary& vocab,
                  std::vector<EpochStats>* progress_sink = nullptr);

// ---- Checkpoints: "FSPCKPT1" magic, JSON header, raw little-endian
// doubles in parameter visit order.

struct Checkpoint {
  ModelParams params;
  TrainMode mode = TrainMode::MultiTask;
  Vocabulary vocab;
  std::vector<std::string> frame_labels;  // classifier class order
};

void save_checkpoint(const std::string& path, const ModelParams& params, TrainMode mode,
                     const Vocabulary& vocab, const std::vector<std::string>& frame_labels);
Checkpoint load_checkpoint(const std::string& path);
/// Throws Error(Data) when the checkpoint was trained for another mode.
void check_checkpoint_mode(const Checkpoint& ckpt, TrainMode wanted);

/// History serialization (one record per epoch) for the train CLI.
std::string history_to_json(const std::vector<EpochStats>& history);

}  // namespace fsp

#endif
