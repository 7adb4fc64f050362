#ifndef FSP_PIPELINE_HPP
#define FSP_PIPELINE_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fsp/training.hpp"

namespace fsp {

/// Final parse for one (sentence, trigger). Confidence is the classifier
/// probability in multi-task mode and absent in Full-Gen mode.
struct FrameInterpretation {
  std::string frame;
  std::optional<double> confidence;
  std::vector<RoleAssignment> roles;
  std::vector<std::string> diagnostics;
};

FrameInterpretation predict_fullgen(const ModelParams& params, const Vocabulary& vocab,
                                    const std::vector<std::string>& tokens, TokenSpan trigger);

/// Two-stage inference: classify the frame (argmax), then decode arguments
/// conditioned on it. When `gold_frame` is given the classification step is
/// skipped and confidence reports the classifier's probability of that
/// frame.
FrameInterpretation predict_multitask(const ModelParams& params, const Vocabulary& vocab,
                                      const std::vector<std::string>& frame_labels,
                                      const std::vector<std::string>& tokens, TokenSpan trigger,
                                      const std::string* gold_frame = nullptr);

/// Order-preserving, deterministic. `role_filter`, when non-null, drops
/// predicted roles the ontology does not permit for the predicted frame.
std::vector<FrameInterpretation> batch_predict(const ModelParams& params, const Vocabulary& vocab,
                                               const std::vector<std::string>& frame_labels,
                                               const Corpus& corpus, TrainMode mode,
                                               bool gold_frames,
                                               const Ontology* role_filter = nullptr);

/// Prediction record: corpus example layout plus confidence/diagnostics.
struct PredictionRecord {
  std::vector<std::string> tokens;
  TokenSpan trigger;
  std::string frame;
  std::vector<RoleAssignment> roles;
  std::optional<double> confidence;
  std::vector<std::string> diagnostics;

  bool operator==(const PredictionRecord&) const = default;
};

std::vector<PredictionRecord> make_prediction_records(const Corpus& corpus,
                                                      const std::vector<FrameInterpretation>& preds);

/// Line-delimited JSON, one record per line; save is write-temp-rename.
void save_predictions(const std::vector<PredictionRecord>& records,
                      const std::filesystem::path& path);
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);

}  // namespace fsp

#endif
