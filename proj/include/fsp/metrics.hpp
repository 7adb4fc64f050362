#ifndef FSP_METRICS_HPP
#define FSP_METRICS_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "fsp/corpus.hpp"
#include "fsp/pipeline.hpp"

namespace fsp {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  bool operator==(const PRF&) const = default;
};

/// 2PR/(P+R), 0 when both are 0.
double f1_score(double precision, double recall);

/// One scored parse: the frame plus its role assignments.
struct ParseInstance {
  std::string frame;
  std::vector<RoleAssignment> roles;

  bool operator==(const ParseInstance&) const = default;
};

struct MatchReport {
  double frame_accuracy = 0.0;
  PRF exact;
  PRF soft;
  PRF global;
  std::size_t instances = 0;
  std::size_t gold_roles = 0;
  std::size_t predicted_roles = 0;
  std::size_t diagnostics = 0;
};

/// Fraction of exact frame-label matches over aligned lists (length >= 1).
double frame_accuracy(const std::vector<ParseInstance>& preds,
                      const std::vector<ParseInstance>& golds);

/// When `gate_frames` is set, a frame mismatch turns every predicted role
/// of that example into a false positive and every gold role into a false
/// negative (end-to-end scoring); gold-frame scoring passes false.
PRF exact_match(const std::vector<ParseInstance>& preds, const std::vector<ParseInstance>& golds,
                bool gate_frames = true);
PRF soft_match(const std::vector<ParseInstance>& preds, const std::vector<ParseInstance>& golds,
               bool gate_frames = true);
PRF global_match(const std::vector<ParseInstance>& preds, const std::vector<ParseInstance>& golds,
                 bool gate_frames = true);

MatchReport score_instances(const std::vector<ParseInstance>& preds,
                            const std::vector<ParseInstance>& golds, bool gate_frames = true);

std::vector<ParseInstance> corpus_instances(const Corpus& corpus);
std::vector<ParseInstance> prediction_instances(const std::vector<PredictionRecord>& records);

/// File-level scorer over a gold corpus and a prediction JSONL file,
/// aligned by record index. Throws Error(Data) on misalignment.
MatchReport score_files(const std::filesystem::path& gold_path,
                        const std::filesystem::path& pred_path, bool gate_frames = true);

std::string report_to_json(const MatchReport& report);
/// Fixed-width table for stdout.
std::string report_table(const MatchReport& report);

}  // namespace fsp

#endif
